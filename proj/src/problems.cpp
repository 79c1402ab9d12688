#include "lobpcg/problems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <tuple>

namespace lobpcg {

namespace {

double mode_term(Index mode, Index extent) {
  const double s = std::sin(static_cast<double>(mode) * std::numbers::pi /
                            (2.0 * static_cast<double>(extent + 1)));
  return s * s;
}

} // namespace

double laplacian_eigenvalue(const Grid3D &grid, Index i, Index j, Index k) {
  std::array<double, 3> t{mode_term(i, grid.nx), mode_term(j, grid.ny), mode_term(k, grid.nz)};
  std::sort(t.begin(), t.end());
  return 4.0 * ((t[0] + t[1]) + t[2]);
}

AnalyticSpectrum analytic_spectrum(const Grid3D &grid, Index count) {
  if (!grid.valid())
    throw std::invalid_argument("analytic_spectrum: invalid grid");
  if (count < 0 || count > grid.size())
    throw std::invalid_argument("analytic_spectrum: count out of range");

  // sin^2 increases with the mode number, so each of the `count` smallest
  // eigenvalues has every mode number <= count
  const Index mi = std::min(grid.nx, count), mj = std::min(grid.ny, count),
              mk = std::min(grid.nz, count);
  AnalyticSpectrum out{grid, {}};
  out.values.reserve(static_cast<std::size_t>(mi * mj * mk));
  for (Index i = 1; i <= mi; ++i)
    for (Index j = 1; j <= mj; ++j)
      for (Index k = 1; k <= mk; ++k)
        out.values.push_back({laplacian_eigenvalue(grid, i, j, k), i, j, k});

  const auto key = [](const AnalyticEigenvalue &e) { return std::tie(e.value, e.i, e.j, e.k); };
  const auto less = [&](const AnalyticEigenvalue &a, const AnalyticEigenvalue &b) {
    return key(a) < key(b);
  };
  const auto keep = out.values.begin() + static_cast<std::ptrdiff_t>(count);
  std::partial_sort(out.values.begin(), keep, out.values.end(), less);
  out.values.erase(keep, out.values.end());
  return out;
}

std::vector<double> exact_eigenvalues(const Grid3D &grid, Index m) {
  if (m < 1 || m > grid.size())
    throw std::invalid_argument("exact_eigenvalues: m must lie in [1, nx*ny*nz]");
  const AnalyticSpectrum spectrum = analytic_spectrum(grid, m);
  std::vector<double> values;
  values.reserve(spectrum.values.size());
  for (const auto &e : spectrum.values)
    values.push_back(e.value);
  return values;
}

} // namespace lobpcg
