#include "lobpcg/driver.hpp"

#include "lobpcg/problems.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lobpcg::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

long long parse_integer(const std::string &flag, const std::string &text) {
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &used);
  } catch (const std::exception &) {
    throw UsageError(flag + ": expected an integer, got '" + text + "'");
  }
  if (used != text.size())
    throw UsageError(flag + ": expected an integer, got '" + text + "'");
  return value;
}

double parse_real(const std::string &flag, const std::string &text) {
  std::size_t used = 0;
  double value = 0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception &) {
    throw UsageError(flag + ": expected a number, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(value))
    throw UsageError(flag + ": expected a number, got '" + text + "'");
  return value;
}

std::vector<int> parse_list(const std::string &flag, const std::string &text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      values.push_back(static_cast<int>(parse_integer(flag, item)));
  return values;
}

} // namespace

std::string usage() {
  return R"(usage: lobpcg_driver [-lobpcg] [options]

Smallest eigenpairs of the 7-point 3D Laplacian on an nx x ny x nz grid.

  -n nx ny nz          grid size (default 10 10 10)
  -vrand m             block size, number of eigenpairs (default 1)
  -n_eigs m            same as -vrand
  -seed s              seed for the random starting block (default 1)
  -tol t               residual 2-norm tolerance per vector (default 1e-6)
  -itr k               maximum outer iterations (default 100)
  -pcgitr p            0: apply the preconditioner directly;
                       p > 0: p steps of PCG on A x = b (default 0)
  -precond none|jacobi base preconditioner (default jacobi)
  -verb v              0 silent, 1 summary, 2 per-iteration (default 1)
  -full_out 0|1        include the per-iteration history in the report
  -json path           write the JSON report
  -csv path            write the history CSV (the sweep table with -sweep)
  -constraints path    deflate the eigenvectors stored in path (LOBX file)
  -vectors_out path    write the computed eigenvectors (LOBX file)
  -sweep inner_iter|block_size
  -sweep_values v1,v2,...
                       run one solve per value, varying -pcgitr or -vrand

exit status: 0 converged, 2 iteration limit reached, 1 error
)";
}

DriverOptions parse_args(std::span<const std::string> args) {
  DriverOptions opts;
  std::size_t i = 0;
  auto next = [&](const std::string &flag) -> const std::string & {
    if (i + 1 >= args.size())
      throw UsageError(flag + ": missing value");
    return args[++i];
  };
  auto positive = [](const std::string &flag, long long v) {
    if (v < 1)
      throw UsageError(flag + ": must be at least 1");
    return v;
  };

  for (; i < args.size(); ++i) {
    const std::string &flag = args[i];
    if (flag == "-lobpcg") {
      continue;
    } else if (flag == "-n") {
      const Index nx = positive(flag, parse_integer(flag, next(flag)));
      const Index ny = positive(flag, parse_integer(flag, next(flag)));
      const Index nz = positive(flag, parse_integer(flag, next(flag)));
      opts.grid = {nx, ny, nz};
    } else if (flag == "-vrand" || flag == "-n_eigs") {
      opts.block_size = positive(flag, parse_integer(flag, next(flag)));
    } else if (flag == "-seed") {
      const long long s = parse_integer(flag, next(flag));
      if (s < 0)
        throw UsageError("-seed: must be nonnegative");
      opts.seed = static_cast<std::uint64_t>(s);
    } else if (flag == "-tol") {
      opts.tol = parse_real(flag, next(flag));
      if (!(opts.tol > 0))
        throw UsageError("-tol: must be positive");
    } else if (flag == "-itr") {
      opts.max_iter = static_cast<int>(positive(flag, parse_integer(flag, next(flag))));
    } else if (flag == "-pcgitr") {
      const long long p = parse_integer(flag, next(flag));
      if (p < 0)
        throw UsageError("-pcgitr: must be nonnegative");
      opts.pcg_iterations = static_cast<int>(p);
    } else if (flag == "-precond") {
      opts.precond = next(flag);
      if (opts.precond != "none" && opts.precond != "jacobi")
        throw UsageError("-precond: expected none or jacobi");
    } else if (flag == "-verb") {
      opts.verbosity = static_cast<int>(parse_integer(flag, next(flag)));
    } else if (flag == "-full_out") {
      opts.full_out = parse_integer(flag, next(flag)) != 0;
    } else if (flag == "-json") {
      opts.json_path = next(flag);
    } else if (flag == "-csv") {
      opts.csv_path = next(flag);
    } else if (flag == "-constraints") {
      opts.constraints_path = next(flag);
    } else if (flag == "-vectors_out") {
      opts.vectors_out = next(flag);
    } else if (flag == "-sweep") {
      const std::string &kind = next(flag);
      if (kind == "inner_iter")
        opts.sweep = SweepKind::InnerIterations;
      else if (kind == "block_size")
        opts.sweep = SweepKind::BlockSize;
      else
        throw UsageError("-sweep: expected inner_iter or block_size");
    } else if (flag == "-sweep_values") {
      opts.sweep_values = parse_list(flag, next(flag));
    } else {
      throw UsageError("unknown flag '" + flag + "'");
    }
  }

  if (opts.sweep) {
    if (opts.sweep_values.empty())
      throw UsageError("-sweep needs a nonempty -sweep_values list");
    for (int v : opts.sweep_values) {
      if (*opts.sweep == SweepKind::InnerIterations && v < 0)
        throw UsageError("-sweep_values: inner iteration counts must be nonnegative");
      if (*opts.sweep == SweepKind::BlockSize && v < 1)
        throw UsageError("-sweep_values: block sizes must be positive");
    }
  } else if (!opts.sweep_values.empty()) {
    throw UsageError("-sweep_values given without -sweep");
  }
  if (opts.block_size > opts.grid.size())
    throw UsageError("-vrand: block size exceeds the problem size");
  return opts;
}

std::string preconditioner_descriptor(const DriverOptions &opts) {
  if (opts.pcg_iterations > 0)
    return "pcg:" + std::to_string(opts.pcg_iterations);
  return opts.precond;
}

Preconditioner<double> build_preconditioner(const DriverOptions &opts,
                                            const LinearOperator<double> &A) {
  Preconditioner<double> base = opts.precond == "jacobi" ? jacobi_preconditioner(A)
                                                         : identity_preconditioner(A.dim);
  if (opts.pcg_iterations == 0)
    return base;
  return inner_pcg_preconditioner(A, std::move(base), opts.pcg_iterations);
}

RunOutcome run(const DriverOptions &opts, const std::optional<MultiVector<double>> &constraints) {
  const auto setup_start = Clock::now();
  const LinearOperator<double> A = laplacian3d(opts.grid);
  std::optional<Preconditioner<double>> T;
  if (opts.precond != "none" || opts.pcg_iterations > 0)
    T = build_preconditioner(opts, A);
  std::optional<Constraints<double>> cons;
  if (constraints) {
    if (constraints->rows() != A.dim)
      throw std::runtime_error("constraint vectors have " + std::to_string(constraints->rows()) +
                               " rows, the problem has " + std::to_string(A.dim));
    cons = make_constraints<double>(*constraints, std::nullopt);
  }
  const double setup_sec = seconds_since(setup_start);

  SolverConfig cfg;
  cfg.block_size = opts.block_size;
  cfg.tol = opts.tol;
  cfg.max_iter = opts.max_iter;
  cfg.seed = opts.seed;
  cfg.verbosity = opts.verbosity;

  const auto solve_start = Clock::now();
  SolverReport<double> report = solve<double>(A, std::nullopt, T, cons, std::nullopt, cfg);
  const double solve_sec = seconds_since(solve_start);

  RunRecord rec;
  rec.grid = opts.grid;
  rec.block_size = opts.block_size;
  rec.seed = opts.seed;
  rec.tol = opts.tol;
  rec.max_iter = opts.max_iter;
  rec.pcg_iterations = opts.pcg_iterations;
  rec.precond = opts.precond;
  rec.preconditioner = preconditioner_descriptor(opts);
  rec.constraint_count = cons ? cons->count() : 0;
  rec.eigenvalues.assign(report.eigenvalues.data(),
                         report.eigenvalues.data() + report.eigenvalues.size());
  rec.iterations = report.iterations_used;
  rec.history = flatten_history(report.history);
  rec.setup_sec = setup_sec;
  rec.solve_sec = solve_sec;
  rec.status = to_string(report.status);
  if (report.status == SolverStatus::Failed)
    rec.status += ": " + report.failure_reason;
  rec.basis_fallbacks = report.basis_fallbacks;

  // the laplacian always has a closed-form spectrum; with deflation the
  // reference skips the deflated eigenvalues
  const Index offset = rec.constraint_count;
  const Index count = static_cast<Index>(rec.eigenvalues.size());
  if (count > 0 && offset + count <= opts.grid.size()) {
    const std::vector<double> exact = exact_eigenvalues(opts.grid, offset + count);
    std::vector<double> ref(exact.begin() + offset, exact.end());
    std::vector<double> rel(ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j)
      rel[j] = std::abs(rec.eigenvalues[j] - ref[j]) / std::abs(ref[j]);
    rec.analytic = std::move(ref);
    rec.rel_errors = std::move(rel);
  }
  return {std::move(rec), std::move(report)};
}

std::vector<SweepRow> run_sweep(const DriverOptions &base, SweepKind kind,
                                std::span<const int> values) {
  if (values.empty())
    throw UsageError("sweep: empty value range");
  std::vector<SweepRow> rows;
  for (int v : values) {
    DriverOptions opts = base;
    opts.verbosity = 0;
    opts.sweep.reset();
    if (kind == SweepKind::InnerIterations)
      opts.pcg_iterations = v;
    else
      opts.block_size = v;
    const RunOutcome outcome = run(opts);
    rows.push_back({kind == SweepKind::InnerIterations ? "inner_iter" : "block_size", v,
                    outcome.record.iterations, outcome.record.setup_sec,
                    outcome.record.solve_sec, outcome.record.status});
  }
  return rows;
}

void write_sweep_csv(std::ostream &out, const std::vector<SweepRow> &rows) {
  out << kSweepCsvHeader << '\n';
  for (const auto &r : rows)
    out << r.kind << ',' << r.value << ',' << r.iterations << ',' << r.setup_sec << ','
        << r.solve_sec << ',' << r.status << '\n';
}

int exit_code(SolverStatus status) {
  switch (status) {
  case SolverStatus::Converged: return 0;
  case SolverStatus::MaxIterReached: return 2;
  case SolverStatus::Failed: return 1;
  }
  return 1;
}

namespace {

void print_summary(std::ostream &out, const DriverOptions &opts, const RunOutcome &outcome) {
  const RunRecord &r = outcome.record;
  out << "LOBPCG  grid " << r.grid.nx << 'x' << r.grid.ny << 'x' << r.grid.nz << "  n "
      << r.grid.size() << "  block " << r.block_size << "  preconditioner " << r.preconditioner
      << "  tol " << r.tol << "  seed " << r.seed << '\n';
  out << std::setw(4) << "j" << std::setw(22) << "eigenvalue" << std::setw(22) << "exact"
      << std::setw(12) << "rel.err" << std::setw(12) << "residual" << '\n';
  for (std::size_t j = 0; j < r.eigenvalues.size(); ++j) {
    out << std::setw(4) << j << std::setw(22) << std::setprecision(15) << r.eigenvalues[j];
    if (r.analytic)
      out << std::setw(22) << (*r.analytic)[j] << std::setw(12) << std::setprecision(3)
          << std::scientific << (*r.rel_errors)[j];
    out << std::setw(12) << std::setprecision(3) << std::scientific
        << outcome.report.residual_norms(static_cast<Index>(j)) << std::defaultfloat << '\n';
  }
  out << "iterations " << r.iterations << "  setup " << r.setup_sec << " s  solve "
      << r.solve_sec << " s  status " << r.status;
  if (r.basis_fallbacks > 0)
    out << "  basis fallbacks " << r.basis_fallbacks;
  out << '\n';
  if (opts.full_out) {
    out << kHistoryCsvHeader << '\n';
    write_history_csv(out, r.history);
  }
}

std::ofstream open_output(const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

} // namespace

int main_entry(std::span<const std::string> args, std::ostream &out, std::ostream &err) {
  for (const auto &a : args) {
    if (a == "-help" || a == "--help" || a == "-h") {
      out << usage();
      return 0;
    }
  }

  DriverOptions opts;
  try {
    opts = parse_args(args);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return 1;
  }

  try {
    if (opts.sweep) {
      const auto rows = run_sweep(opts, *opts.sweep, opts.sweep_values);
      if (opts.csv_path) {
        auto f = open_output(*opts.csv_path);
        write_sweep_csv(f, rows);
      }
      if (opts.verbosity >= 1)
        write_sweep_csv(out, rows);
      return 0;
    }

    std::optional<MultiVector<double>> constraints;
    if (opts.constraints_path)
      constraints = read_vectors_file(*opts.constraints_path);

    const RunOutcome outcome = run(opts, constraints);
    if (opts.json_path) {
      auto f = open_output(*opts.json_path);
      f << to_json(outcome.record, opts.full_out).dump(2) << '\n';
    }
    if (opts.csv_path) {
      auto f = open_output(*opts.csv_path);
      write_history_csv(f, outcome.record.history);
    }
    if (opts.vectors_out)
      write_vectors_file(*opts.vectors_out, outcome.report.eigenvectors);
    if (opts.verbosity >= 1)
      print_summary(out, opts, outcome);
    if (outcome.report.status == SolverStatus::Failed)
      err << "error: " << outcome.record.status << '\n';
    return exit_code(outcome.report.status);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return 1;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace lobpcg::cli
