#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qeicp/dca.hpp"

namespace qeicp {

/// Everything a solve/bench invocation needs, assembled by the argument
/// parser (or directly by tests).
struct RunConfig {
  std::optional<std::string> instance_path;  // file source, else generator
  RandomFamily family = RandomFamily::unit;
  std::size_t n = 5;
  std::uint64_t seed = 1;
  SolveConfig solve;
  std::string format = "markdown";  // csv | markdown
  std::optional<std::string> out_path;
};

QeicpInstance load_run_instance(const RunConfig& cfg);

int cmd_gen(RandomFamily family, std::size_t n, std::uint64_t seed,
            const std::string& out_path, std::ostream& log);

struct BoundsRequest {
  std::vector<std::string> instance_paths;
  std::vector<BoundMethod> methods = {BoundMethod::thm31, BoundMethod::thm32};
  bool literal_gamma = false;
  std::optional<std::string> external_sidecar;  // JSON: label -> {"l":..,"u":..}
  std::string format = "markdown";
  std::optional<std::string> out_path;
};

int cmd_bounds(const BoundsRequest& req, std::ostream& out, std::ostream& err);

/// Prints one row per formulation/branch with lambda, IT, CPU and status.
/// Exit code 0 iff at least one run produced a verified solution.
int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct BenchmarkRow {
  std::string family;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double eps = 0.0;
  std::string formulation;
  std::string branch;
  bool local_dc = false;
  double lambda = 0.0;
  int iterations = 0;
  double cpu_seconds = 0.0;
  std::string status;
  double f_star = 0.0;
  double residual = 0.0;

  bool operator==(const BenchmarkRow&) const = default;
};

struct BenchRequest {
  std::vector<RandomFamily> families = {RandomFamily::unit, RandomFamily::ten,
                                        RandomFamily::hundred};
  std::vector<std::size_t> sizes = {5, 10, 20, 30, 40, 50};
  std::vector<double> eps_values = {1e-3, 1e-4};
  std::vector<FormulationKind> formulations = {
      FormulationKind::pdc, FormulationKind::phat, FormulationKind::pprime,
      FormulationKind::phatprime};
  bool with_local = true;  // additionally run hat kinds through the local window
  std::uint64_t base_seed = 1;
  int max_iter = 10000;
  BoundMethod bound_method = BoundMethod::thm32;
  std::vector<Branch> branches = {Branch::plus};
  std::size_t threads = 0;  // 0: QEICP_THREADS env or hardware count
};

/// Per-cell seed: base_seed + 1000 * family_index + n. One instance per
/// (family, n) cell is shared by every formulation and eps setting.
std::uint64_t bench_cell_seed(const BenchRequest& req, RandomFamily family, std::size_t n);

std::vector<BenchmarkRow> run_bench(const BenchRequest& req);

/// Fixed column order:
/// family,n,seed,eps,formulation,branch,local_dc,lambda,iterations,
/// cpu_seconds,status,f_star,residual
std::string bench_to_csv(const std::vector<BenchmarkRow>& rows);
std::vector<BenchmarkRow> bench_from_csv(const std::string& text);

int cmd_bench(const BenchRequest& req, const std::optional<std::string>& out_path,
              std::ostream& out, std::ostream& err);

int cmd_verify(const std::string& instance_path, double lambda,
               const std::string& x_path, double tol, std::ostream& out,
               std::ostream& err);

/// Candidate vector file: a JSON array, or an object {"x": [...]}.
DenseVector read_vector_file(const std::string& path);

std::string format_full(double v);  // %.17g, round-trip exact

}  // namespace qeicp
