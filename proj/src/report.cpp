#include "lobpcg/report.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lobpcg::cli {

using nlohmann::json;

std::vector<HistoryRow> flatten_history(const std::vector<IterationRecord> &history) {
  std::vector<HistoryRow> rows;
  for (const auto &rec : history) {
    for (std::size_t j = 0; j < rec.ritz.size(); ++j) {
      rows.push_back({rec.iteration, static_cast<Index>(j), rec.ritz[j], rec.residual[j],
                      j < rec.active.size() && rec.active[j]});
    }
  }
  return rows;
}

json to_json(const RunRecord &r, bool include_history) {
  json config = {
      {"n", {r.grid.nx, r.grid.ny, r.grid.nz}},
      {"block_size", r.block_size},
      {"seed", r.seed},
      {"tol", r.tol},
      {"max_iter", r.max_iter},
      {"pcgitr", r.pcg_iterations},
      {"precond", r.precond},
      {"preconditioner", r.preconditioner},
      {"constraints", r.constraint_count},
  };
  json history = json::array();
  if (include_history) {
    for (const auto &row : r.history)
      history.push_back(
          {{"iter", row.iter}, {"j", row.j}, {"ritz", row.ritz}, {"resid", row.resid},
           {"active", row.active}});
  }
  json out = {
      {"config", std::move(config)},
      {"eigenvalues", r.eigenvalues},
      {"analytic", r.analytic ? json(*r.analytic) : json(nullptr)},
      {"rel_errors", r.rel_errors ? json(*r.rel_errors) : json(nullptr)},
      {"iterations", r.iterations},
      {"history", std::move(history)},
      {"setup_sec", r.setup_sec},
      {"solve_sec", r.solve_sec},
      {"status", r.status},
      {"basis_fallbacks", r.basis_fallbacks},
  };
  return out;
}

RunRecord record_from_json(const json &j) {
  RunRecord r;
  const json &c = j.at("config");
  const json &n = c.at("n");
  r.grid = {n.at(0).get<Index>(), n.at(1).get<Index>(), n.at(2).get<Index>()};
  r.block_size = c.at("block_size").get<Index>();
  r.seed = c.at("seed").get<std::uint64_t>();
  r.tol = c.at("tol").get<double>();
  r.max_iter = c.at("max_iter").get<int>();
  r.pcg_iterations = c.at("pcgitr").get<int>();
  r.precond = c.at("precond").get<std::string>();
  r.preconditioner = c.at("preconditioner").get<std::string>();
  r.constraint_count = c.value("constraints", Index(0));

  r.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  if (!j.at("analytic").is_null())
    r.analytic = j.at("analytic").get<std::vector<double>>();
  if (!j.at("rel_errors").is_null())
    r.rel_errors = j.at("rel_errors").get<std::vector<double>>();
  r.iterations = j.at("iterations").get<int>();
  for (const auto &row : j.at("history"))
    r.history.push_back({row.at("iter").get<int>(), row.at("j").get<Index>(),
                         row.at("ritz").get<double>(), row.at("resid").get<double>(),
                         row.at("active").get<bool>()});
  r.setup_sec = j.at("setup_sec").get<double>();
  r.solve_sec = j.at("solve_sec").get<double>();
  r.status = j.at("status").get<std::string>();
  r.basis_fallbacks = j.value("basis_fallbacks", 0);
  return r;
}

void write_history_csv(std::ostream &out, const std::vector<HistoryRow> &rows) {
  out << kHistoryCsvHeader << '\n';
  std::ostringstream line;
  line.precision(17);
  for (const auto &row : rows) {
    line.str({});
    line << row.iter << ',' << row.j << ',' << row.ritz << ',' << row.resid << ','
         << (row.active ? 1 : 0) << '\n';
    out << line.str();
  }
}

namespace {

constexpr std::array<char, 4> kMagic{'L', 'O', 'B', 'X'};

template <typename T>
void put_le(std::ostream &out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> bytes;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream &in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char *>(bytes.data()), bytes.size());
  if (!in)
    throw std::runtime_error("eigenvector file: unexpected end of data");
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    bits |= static_cast<U>(bytes[b]) << (8 * b);
  return std::bit_cast<T>(bits);
}

} // namespace

void write_vectors(std::ostream &out, const MultiVector<double> &X) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVectorFileVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(X.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(X.cols()));
  for (Index c = 0; c < X.cols(); ++c)
    for (Index r = 0; r < X.rows(); ++r)
      put_le<double>(out, X(r, c));
  if (!out)
    throw std::runtime_error("eigenvector file: write failed");
}

MultiVector<double> read_vectors(std::istream &in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic)
    throw std::runtime_error("eigenvector file: bad magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVectorFileVersion)
    throw std::runtime_error("eigenvector file: unsupported version " + std::to_string(version));
  const auto n = get_le<std::uint64_t>(in);
  const auto k = get_le<std::uint64_t>(in);
  if (n == 0 || n > (std::uint64_t(1) << 40) || k > (std::uint64_t(1) << 20))
    throw std::runtime_error("eigenvector file: implausible dimensions");
  MultiVector<double> X(static_cast<Index>(n), static_cast<Index>(k));
  for (Index c = 0; c < X.cols(); ++c)
    for (Index r = 0; r < X.rows(); ++r)
      X(r, c) = get_le<double>(in);
  return X;
}

void write_vectors_file(const std::string &path, const MultiVector<double> &X) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  write_vectors(out, X);
}

MultiVector<double> read_vectors_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  return read_vectors(in);
}

} // namespace lobpcg::cli
