#pragma once

// Batch driver for the 7-point Laplacian test problem. Flags are single-dash
// (-n, -vrand/-n_eigs, -seed, -tol, -itr, -pcgitr, -verb, -full_out) to stay
// compatible with existing LOBPCG benchmark scripts.

#include "lobpcg/lobpcg.hpp"
#include "lobpcg/report.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lobpcg::cli {

class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class SweepKind { InnerIterations, BlockSize };

struct DriverOptions {
  Grid3D grid{10, 10, 10};
  Index block_size = 1;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  int max_iter = 100;
  int pcg_iterations = 0; ///< 0 applies the base preconditioner directly
  std::string precond = "jacobi";
  int verbosity = 1;
  bool full_out = false;
  std::optional<std::string> json_path;
  std::optional<std::string> csv_path;
  std::optional<std::string> constraints_path;
  std::optional<std::string> vectors_out;
  std::optional<SweepKind> sweep;
  std::vector<int> sweep_values;
};

std::string usage();

/// Parses argv[1..]. Throws UsageError on anything malformed.
DriverOptions parse_args(std::span<const std::string> args);

/// "none", "jacobi" or "pcg:<steps>".
std::string preconditioner_descriptor(const DriverOptions &opts);

Preconditioner<double> build_preconditioner(const DriverOptions &opts,
                                            const LinearOperator<double> &A);

struct RunOutcome {
  RunRecord record;
  SolverReport<double> report;
};

/// Builds the problem, solves, and compares with the analytic spectrum.
/// Optional constraints are B-orthogonal deflation vectors; the analytic
/// reference then starts after the first `constraints->cols()` eigenvalues.
RunOutcome run(const DriverOptions &opts,
               const std::optional<MultiVector<double>> &constraints = std::nullopt);

struct SweepRow {
  std::string kind;
  int value = 0;
  int iterations = 0;
  double setup_sec = 0.0;
  double solve_sec = 0.0;
  std::string status;
};

std::vector<SweepRow> run_sweep(const DriverOptions &base, SweepKind kind,
                                std::span<const int> values);

inline constexpr const char *kSweepCsvHeader = "kind,value,iterations,setup_sec,solve_sec,status";
void write_sweep_csv(std::ostream &out, const std::vector<SweepRow> &rows);

int exit_code(SolverStatus status);

/// Full CLI: parse, run (or sweep), report. Returns the process exit code.
int main_entry(std::span<const std::string> args, std::ostream &out, std::ostream &err);

} // namespace lobpcg::cli
