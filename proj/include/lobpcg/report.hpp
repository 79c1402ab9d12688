#pragma once

// Run records and the on-disk formats the driver produces: the JSON report,
// the CSV convergence history, and the binary eigenvector container.

#include "lobpcg/lobpcg.hpp"
#include "lobpcg/operators.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lobpcg::cli {

struct HistoryRow {
  int iter = 0;
  Index j = 0;
  double ritz = 0.0;
  double resid = 0.0;
  bool active = false;

  friend bool operator==(const HistoryRow &, const HistoryRow &) = default;
};

struct RunRecord {
  // config echo
  Grid3D grid;
  Index block_size = 1;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int max_iter = 0;
  int pcg_iterations = 0;
  std::string precond;        // base preconditioner: none | jacobi
  std::string preconditioner; // effective: none | jacobi | pcg:<steps>
  Index constraint_count = 0;

  std::vector<double> eigenvalues;
  std::optional<std::vector<double>> analytic;
  std::optional<std::vector<double>> rel_errors;
  int iterations = 0;
  std::vector<HistoryRow> history;
  double setup_sec = 0.0;
  double solve_sec = 0.0;
  std::string status;
  int basis_fallbacks = 0;

  friend bool operator==(const RunRecord &, const RunRecord &) = default;
};

/// One row per (iteration, column) of a solver history.
std::vector<HistoryRow> flatten_history(const std::vector<IterationRecord> &history);

/// `include_history` = false still emits the "history" key, as an empty array.
nlohmann::json to_json(const RunRecord &record, bool include_history = true);
RunRecord record_from_json(const nlohmann::json &j);

inline constexpr const char *kHistoryCsvHeader = "iter,j,ritz,resid,active";
void write_history_csv(std::ostream &out, const std::vector<HistoryRow> &rows);

// Eigenvector container, little-endian:
//   "LOBX" | u32 version | u64 n | u64 k | n*k doubles, column-major
inline constexpr std::uint32_t kVectorFileVersion = 1;
void write_vectors(std::ostream &out, const MultiVector<double> &X);
MultiVector<double> read_vectors(std::istream &in);
void write_vectors_file(const std::string &path, const MultiVector<double> &X);
MultiVector<double> read_vectors_file(const std::string &path);

} // namespace lobpcg::cli
