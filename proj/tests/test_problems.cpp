#include "doctest.h"

#include "lobpcg/problems.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <set>

using namespace lobpcg;
using namespace lobpcg::testing;

TEST_CASE("exact_eigenvalues closed forms") {
  const auto single = exact_eigenvalues(Grid3D{1, 1, 1}, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == doctest::Approx(6.0).epsilon(1e-15));

  CHECK(exact_eigenvalues(Grid3D{2, 2, 2}, 1)[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("cube spectrum keeps the triple second eigenvalue") {
  const Grid3D g{16, 16, 16};
  const auto s = analytic_spectrum(g, 4);
  CHECK(s.values[1].value == s.values[2].value);
  CHECK(s.values[2].value == s.values[3].value);
  CHECK(s.values[0].value < s.values[1].value);
  // ties ordered lexicographically by mode triple
  CHECK(s.values[1] == AnalyticEigenvalue{s.values[1].value, 1, 1, 2});
  CHECK(s.values[2] == AnalyticEigenvalue{s.values[1].value, 1, 2, 1});
  CHECK(s.values[3] == AnalyticEigenvalue{s.values[1].value, 2, 1, 1});
}

TEST_CASE("full analytic spectrum invariants") {
  const Grid3D g{5, 3, 4};
  const auto s = analytic_spectrum(g);
  REQUIRE(Index(s.values.size()) == g.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    CHECK(s.values[i].value > 0.0);
    CHECK(s.values[i].value < 12.0);
    if (i > 0)
      CHECK(s.values[i - 1].value <= s.values[i].value);
  }
}

TEST_CASE("exact_eigenvalues is invariant under permuting the axes") {
  const auto a = exact_eigenvalues(Grid3D{4, 6, 7}, 40);
  const auto b = exact_eigenvalues(Grid3D{7, 4, 6}, 40);
  const auto c = exact_eigenvalues(Grid3D{6, 7, 4}, 40);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("8 x 9 x 10 spectrum has no exact ties") {
  const auto v = exact_eigenvalues(Grid3D{8, 9, 10}, 720);
  CHECK(std::set<double>(v.begin(), v.end()).size() == v.size());
}

TEST_CASE("exact_eigenvalues range checks") {
  CHECK_THROWS_AS(exact_eigenvalues(Grid3D{2, 2, 2}, 9), std::invalid_argument);
  CHECK_THROWS_AS(exact_eigenvalues(Grid3D{2, 2, 2}, 0), std::invalid_argument);
}

TEST_CASE("dense_oracle_spectrum") {
  SUBCASE("diagonal operator") {
    Vec d(3);
    d << 3, 1, 2;
    const auto v = dense_oracle_spectrum(diagonal_operator(d));
    CHECK(v == Vec::LinSpaced(3, 1, 3));
  }
  SUBCASE("4^3 laplacian agrees with the closed form") {
    const Grid3D g{4, 4, 4};
    const auto dense = dense_oracle_spectrum(laplacian3d(g));
    const auto exact = exact_eigenvalues(g, 64);
    for (Index i = 0; i < 64; ++i)
      CHECK(std::abs(dense(i) - exact[std::size_t(i)]) <= 1e-11);
  }
  SUBCASE("3 x 1 x 1 line") {
    // 1D three-point spectrum 4 sin^2(i pi / 8) shifted by 4 from the two
    // singleton axes
    const auto v = dense_oracle_spectrum(laplacian3d(Grid3D{3, 1, 1}));
    const double s1 = std::sin(std::numbers::pi / 8), s3 = std::sin(3 * std::numbers::pi / 8);
    CHECK(v(0) == doctest::Approx(4 + 4 * s1 * s1).epsilon(1e-14));
    CHECK(v(1) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(v(2) == doctest::Approx(4 + 4 * s3 * s3).epsilon(1e-14));
  }
  SUBCASE("limit") {
    CHECK_THROWS_AS(dense_oracle_spectrum(laplacian3d(Grid3D{9, 9, 9})), std::invalid_argument);
  }
}

TEST_CASE("closed form and dense oracle agree on assorted small grids") {
  const Grid3D grids[] = {{2, 3, 4}, {5, 5, 5}, {1, 7, 3}, {6, 6, 6}, {3, 8, 2}};
  for (const auto &g : grids) {
    const auto dense = dense_oracle_spectrum(laplacian3d(g));
    const auto exact = exact_eigenvalues(g, g.size());
    for (Index i = 0; i < g.size(); ++i)
      CHECK(std::abs(dense(i) - exact[std::size_t(i)]) <= 1e-10 * exact[std::size_t(i)]);
  }
}
