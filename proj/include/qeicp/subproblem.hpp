#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "qeicp/bounds.hpp"
#include "qeicp/model.hpp"

namespace qeicp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// v -> 0.5 v^T Q v + c^T v + d over a flat variable vector. Q is stored
/// dense symmetric; constraints use the same shape with the convention
/// expr(v) <= 0.
struct QuadExpr {
  DenseMatrix Q;  // empty (0x0) means no quadratic part
  DenseVector c;
  double d = 0.0;

  explicit QuadExpr(std::size_t num_vars = 0)
      : Q(num_vars, num_vars), c(num_vars), d(0.0) {}

  std::size_t size() const { return c.size(); }
  double value(const DenseVector& v) const;
  DenseVector gradient(const DenseVector& v) const;

  void add_quadratic(std::size_t i, std::size_t j, double coeff);  // adds coeff * v_i v_j
  void add_linear(std::size_t i, double coeff) { c[i] += coeff; }
};

enum class RegionKind { C_plain, C_hat_pos, C_hat_neg, C_hat_local };

struct LocalWindow {
  double lambda_k = 0.0;
  double a = 0.0;
};

/// Polyhedron  Aeq v = beq,  Ain v <= bin,  lo <= v <= hi  over the flat
/// (x,y,z,w,lambda) layout. Degenerate boxes (lo == hi) are converted to
/// equality rows by the solver.
struct FeasibleRegion {
  std::size_t n = 0;
  std::size_t num_vars = 0;
  RegionKind kind = RegionKind::C_plain;
  DenseMatrix Aeq;
  DenseVector beq;
  DenseMatrix Ain;  // 0 rows when absent
  DenseVector bin;
  DenseVector lo, hi;

  bool contains(const DenseVector& v, double tol) const;
};

/// Shared equalities (w = A z + B y + C x, e^T x = 1, e^T y = lambda) plus the
/// boxes of the requested variant. Hat variants derive the boxes from the
/// lambda interval; the local variant needs the current window.
FeasibleRegion build_region(RegionKind kind, const QeicpInstance& inst,
                            const LambdaBounds& bounds,
                            const std::optional<LocalWindow>& local = std::nullopt);

struct ConvexSubproblem {
  QuadExpr objective;
  FeasibleRegion region;
  std::vector<QuadExpr> quad_constraints;  // each expr(v) <= 0, convex
};

enum class SolveStatus { optimal, max_iter, infeasible, numeric };

std::string solve_status_name(SolveStatus s);

struct SolveResult {
  DenseVector point;
  double objective = 0.0;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::numeric;
  int iterations = 0;
  // Multipliers for the independent optimality check: ineq_duals covers, in
  // order, Ain rows, finite lower bounds, finite upper bounds, then quadratic
  // constraints (layout described by ineq_labels for diagnostics).
  DenseVector ineq_duals;
  DenseVector eq_duals;
};

struct SolveOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-9;
  int max_iter = 200;
};

/// Primal-dual path-following method for the convex QCQP
///   min objective(v)  s.t.  region,  quad_constraints <= 0.
/// Inequalities (rows, boxes, quadratic constraints) are kept strictly
/// feasible along the central path; equalities are retained in the KKT
/// system. A phase-1 slack minimization runs when no strictly interior
/// starting point is available; it declares infeasibility when the slack
/// cannot be driven below 1e-7.
SolveResult solve_convex(const ConvexSubproblem& sp,
                         const std::optional<DenseVector>& warm_start = std::nullopt,
                         const SolveOptions& opts = {});

struct KktReport {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementary_slackness = 0.0;

  double worst() const;
};

/// Recomputes first-order optimality residuals from the returned primal-dual
/// pair, independent of solver internals.
KktReport kkt_report(const ConvexSubproblem& sp, const SolveResult& res);

/// argmin of x^T M x over {x >= 0, e^T x = 1}; writes the optimal value to
/// `value` when given. Throws NumericError if the solve does not certify.
DenseVector minimize_quadratic_over_simplex(const DenseMatrix& m, double* value = nullptr);

}  // namespace qeicp
