#pragma once

#include <optional>
#include <vector>

#include "qeicp/dc_core.hpp"

namespace qeicp {

struct Tolerances {
  double eps1 = 1e-3;  // objective change
  double eps2 = 1e-3;  // step norm
  double eps3 = 1e-3;  // sufficient global optimality

  void validate() const;
};

enum class Branch { plus, minus };

std::string branch_name(Branch b);

struct InitialPoint {
  IteratePoint pt;
  bool is_solution = false;      // w0 >= -1e-9 componentwise
  bool fallback_used = false;    // negative discriminant, real-part root taken
  Branch branch = Branch::plus;
  double discriminant = 0.0;
};

/// Starting point from the simplex minimizer of x^T A x: lambda solves the
/// scalar quadratic at x0 (root picked by branch), then y0 = lambda x0,
/// z0 = lambda y0, w0 from the defining equation. Requires A PD. A negative
/// discriminant falls back to the real part -x0^T B x0 / (2 x0^T A x0),
/// flagged in the result.
InitialPoint initial_point(const QeicpInstance& inst, Branch branch);

struct TraceRecord {
  int k = 0;
  double f_value = 0.0;
  double delta_f = 0.0;
  double delta_x = 0.0;
  double lambda = 0.0;
  std::optional<RhoPair> rho_used;
  SolveStatus subproblem_status = SolveStatus::optimal;
  double wall_time = 0.0;  // seconds spent in this iteration
};

struct DcaTrace {
  std::vector<TraceRecord> records;

  std::size_t iterations() const { return records.size(); }
};

enum class DcaStatus { global_eps, kkt_point, infeasible_region, iteration_limit };

std::string dca_status_name(DcaStatus s);

struct DcaOutcome {
  IteratePoint point;
  double f_star = 0.0;
  DcaStatus status = DcaStatus::iteration_limit;
  DcaTrace trace;
  std::optional<QeicpSolution> solution;  // present and verified on global_eps
  FormulationKind formulation = FormulationKind::pdc;
  Branch branch = Branch::plus;
  bool local_dc = false;
  double wall_time = 0.0;  // seconds in the iteration loop
  std::string diagnostic;
};

/// One run of the fixed-point scheme: linearize h at the iterate, minimize
/// the convex majorant over the region, stop as soon as the objective change,
/// the step norm, or the objective value drops below its tolerance.
/// Hat kinds run on the boxed branch region (positive when lambda0 >= 0);
/// plain kinds run on the unbounded coupling region.
DcaOutcome run_dca(const Formulation& form, const QeicpInstance& inst,
                   const LambdaBounds& bounds, const Tolerances& tol,
                   const IteratePoint& pt0, int max_iter = 10000);

/// Variant for the hat kinds that re-derives the curvature constants each
/// iteration on a shrinking lambda window [lambda_k - a, lambda_k + a] with
/// a = min(1, (lambda_k - l)/2, (u - lambda_k)/2). Requires lambda0 strictly
/// inside (l, u); the window collapsing to a point stops with kkt_point.
DcaOutcome run_dca_local(FormulationKind kind, const QeicpInstance& inst,
                         const LambdaBounds& bounds, const Tolerances& tol,
                         const IteratePoint& pt0, int max_iter = 10000);

struct SolveConfig {
  std::vector<FormulationKind> formulations = {FormulationKind::pdc};
  BoundMethod bound_method = BoundMethod::thm32;
  bool bounds_literal = false;
  std::vector<Branch> branches = {Branch::plus, Branch::minus};
  Tolerances tol;
  int max_iter = 10000;
  bool local_dc = false;
  std::optional<LambdaBounds> external_bounds;
};

/// Computes bounds, builds the per-branch initial points and runs the chosen
/// formulations; outcomes with verified solutions come first.
std::vector<DcaOutcome> solve_qeicp(const QeicpInstance& inst, const SolveConfig& config);

/// Bounds per the configured method (thm31 / thm32 / lp_up / external).
LambdaBounds compute_bounds(const QeicpInstance& inst, const SolveConfig& config);

}  // namespace qeicp
