#include "qeicp/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "qeicp/subproblem.hpp"

namespace qeicp {

std::string bound_method_name(BoundMethod m) {
  switch (m) {
    case BoundMethod::thm31: return "thm31";
    case BoundMethod::thm32: return "thm32";
    case BoundMethod::lp_up: return "lp_up";
    case BoundMethod::external: return "external";
  }
  return "external";
}

namespace {

void require_pd(const QeicpInstance& inst, const char* who) {
  if (!cholesky_pd_check(inst.A).is_pd) {
    throw AssumptionError(std::string(who) + ": matrix A is not positive definite");
  }
}

FeasibleRegion generic_region(std::size_t num_vars) {
  FeasibleRegion r;
  r.n = 0;
  r.num_vars = num_vars;
  r.lo = DenseVector(num_vars, -kInf);
  r.hi = DenseVector(num_vars, kInf);
  return r;
}

}  // namespace

BoundsResult lambda_bounds_thm31(const QeicpInstance& inst) {
  inst.validate();
  require_pd(inst, "lambda_bounds_thm31");

  double s = 0.0;
  minimize_quadratic_over_simplex(inst.A, &s);
  // Shrinking s can only widen the interval, which keeps it valid against
  // solver error.
  s = std::max(s - 1e-9, 0.5 * s);
  if (!(s > 0.0)) throw NumericError("lambda_bounds_thm31: simplex minimum not positive");

  const double max_a = inst.A.max_entry();
  const double min_neg_b = -inst.B.max_entry();
  const double max_neg_b = -inst.B.min_entry();
  const double max_neg_c = -inst.C.min_entry();

  BoundsResult out;
  out.inter.s = s;
  out.inter.beta = (min_neg_b > 0.0) ? min_neg_b / (2.0 * max_a) : min_neg_b / (2.0 * s);
  out.inter.gamma = (max_neg_b > 0.0) ? max_neg_b / (2.0 * s) : max_neg_b / (2.0 * max_a);
  out.inter.alpha =
      std::max(out.inter.gamma * out.inter.gamma, out.inter.beta * out.inter.beta) +
      max_neg_c / s;
  if (out.inter.alpha < 0.0) {
    throw AssumptionError("lambda_bounds_thm31: alpha is negative (max{-C_ij} = " +
                          std::to_string(max_neg_c) + ", s = " + std::to_string(s) +
                          "); the feasibility assumptions do not hold");
  }
  const double root = std::sqrt(out.inter.alpha);
  out.bounds = {out.inter.beta - root, out.inter.gamma + root, BoundMethod::thm31};
  return out;
}

BoundsResult lambda_bounds_thm32(const QeicpInstance& inst, bool literal_gamma) {
  inst.validate();
  require_pd(inst, "lambda_bounds_thm32");

  const ExtremeEigenvalues ea = symmetric_extreme_eigenvalues(inst.A);
  const double s = ea.lambda_min;
  if (!(s > 0.0)) throw AssumptionError("lambda_bounds_thm32: lambda_min(A) <= 0");
  const double lam_max_a = ea.lambda_max;

  const std::size_t n = inst.n;
  DenseMatrix neg_b(n, n), neg_c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      neg_b(i, j) = -inst.B(i, j) - inst.B(j, i);
      neg_c(i, j) = -inst.C(i, j) - inst.C(j, i);
    }
  const ExtremeEigenvalues eb = symmetric_extreme_eigenvalues(neg_b);
  const ExtremeEigenvalues ec = symmetric_extreme_eigenvalues(neg_c);

  BoundsResult out;
  out.inter.s = s;
  out.inter.beta = (eb.lambda_min > 0.0) ? eb.lambda_min / (4.0 * lam_max_a)
                                         : eb.lambda_min / (4.0 * s);
  if (literal_gamma) {
    out.inter.gamma = (eb.lambda_max > 0.0) ? eb.lambda_min / (4.0 * s)
                                            : eb.lambda_min / (4.0 * lam_max_a);
  } else {
    out.inter.gamma = (eb.lambda_max > 0.0) ? eb.lambda_max / (4.0 * s)
                                            : eb.lambda_max / (4.0 * lam_max_a);
  }
  out.inter.alpha =
      std::max(out.inter.gamma * out.inter.gamma, out.inter.beta * out.inter.beta) +
      ec.lambda_max / (2.0 * s);
  if (out.inter.alpha < 0.0) {
    throw AssumptionError(
        "lambda_bounds_thm32: alpha is negative (lambda_max(-C-C^T) = " +
        std::to_string(ec.lambda_max) + "); the feasibility assumptions do not hold");
  }
  const double root = std::sqrt(out.inter.alpha);
  out.bounds = {out.inter.beta - root, out.inter.gamma + root, BoundMethod::thm32};
  return out;
}

bool check_c_not_in_s0(const QeicpInstance& inst) {
  inst.validate();
  const std::size_t n = inst.n;

  // min e^T u  s.t.  C x + u >= 0, e^T x = 1, x >= 0, u >= 0.
  // Zero optimum means some simplex x has C x >= 0, i.e. C is in S0.
  ConvexSubproblem sp;
  sp.region = generic_region(2 * n);
  sp.region.Aeq = DenseMatrix(1, 2 * n);
  for (std::size_t j = 0; j < n; ++j) sp.region.Aeq(0, j) = 1.0;
  sp.region.beq = DenseVector(1);
  sp.region.beq[0] = 1.0;
  for (std::size_t j = 0; j < 2 * n; ++j) sp.region.lo[j] = 0.0;
  sp.region.Ain = DenseMatrix(n, 2 * n);
  sp.region.bin = DenseVector(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sp.region.Ain(i, j) = -inst.C(i, j);
    sp.region.Ain(i, n + i) = -1.0;
  }
  sp.objective = QuadExpr(2 * n);
  for (std::size_t j = 0; j < n; ++j) sp.objective.add_linear(n + j, 1.0);

  const SolveResult res = solve_convex(sp);
  if (res.status != SolveStatus::optimal) {
    throw NumericError("check_c_not_in_s0: feasibility program failed: " +
                       solve_status_name(res.status));
  }
  return res.objective > 1e-9;
}

LambdaBounds lambda_bounds_lp_up(const QeicpInstance& inst, LpUpDiagnostics* diag) {
  inst.validate();
  require_pd(inst, "lambda_bounds_lp_up");
  if (!check_c_not_in_s0(inst)) {
    throw AssumptionError("lambda_bounds_lp_up: C is in S0, assumptions do not hold");
  }
  const std::size_t n = inst.n;

  DenseVector p(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += std::max(0.0, -inst.B(i, j)) + std::max(0.0, -inst.C(i, j));
    }
    p[i] = acc;
  }
  if (diag) diag->p = p;

  // Lower bound: min e^T v + e^T y  subject to  A v + B y + C x >= 0,
  // e^T y + e^T x = 1, (x, y, v) >= 0. Variables ordered (x, y, v).
  double lower = 0.0;
  {
    ConvexSubproblem sp;
    sp.region = generic_region(3 * n);
    sp.region.Aeq = DenseMatrix(1, 3 * n);
    for (std::size_t j = 0; j < 2 * n; ++j) sp.region.Aeq(0, j) = 1.0;
    sp.region.beq = DenseVector(1);
    sp.region.beq[0] = 1.0;
    for (std::size_t j = 0; j < 3 * n; ++j) sp.region.lo[j] = 0.0;
    sp.region.Ain = DenseMatrix(n, 3 * n);
    sp.region.bin = DenseVector(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        sp.region.Ain(i, j) = -inst.C(i, j);
        sp.region.Ain(i, n + j) = -inst.B(i, j);
        sp.region.Ain(i, 2 * n + j) = -inst.A(i, j);
      }
    }
    sp.objective = QuadExpr(3 * n);
    for (std::size_t j = 0; j < n; ++j) {
      sp.objective.add_linear(n + j, 1.0);
      sp.objective.add_linear(2 * n + j, 1.0);
    }
    const SolveResult res = solve_convex(sp);
    if (res.status != SolveStatus::optimal) {
      throw NumericError("lambda_bounds_lp_up: lower-bound program failed: " +
                         solve_status_name(res.status));
    }
    lower = res.objective;
    if (!(lower > 0.0)) {
      throw AssumptionError(
          "lambda_bounds_lp_up: lower-bound program has non-positive value " +
          std::to_string(lower));
    }
  }

  // Upper bound: max p^T y / (y^T A y + x^T x) over e^T x + e^T y = 1,
  // (x, y) >= 0, by Dinkelbach iteration on the parametric concave program.
  const DenseMatrix a_sym = inst.A.symmetrized();
  auto denom = [&](const DenseVector& v) {
    double acc = 0.0;
    DenseVector y(n);
    for (std::size_t j = 0; j < n; ++j) {
      acc += v[j] * v[j];
      y[j] = v[n + j];
    }
    return acc + a_sym.quad_form(y);
  };
  auto numer = [&](const DenseVector& v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += p[j] * v[n + j];
    return acc;
  };

  double mu;
  {
    DenseVector v0(2 * n);
    for (std::size_t j = 0; j < n; ++j) v0[n + j] = 1.0 / static_cast<double>(n);
    mu = numer(v0) / denom(v0);
  }

  constexpr int kMaxRounds = 60;
  for (int round = 0; round < kMaxRounds; ++round) {
    ConvexSubproblem sp;
    sp.region = generic_region(2 * n);
    sp.region.Aeq = DenseMatrix(1, 2 * n);
    for (std::size_t j = 0; j < 2 * n; ++j) sp.region.Aeq(0, j) = 1.0;
    sp.region.beq = DenseVector(1);
    sp.region.beq[0] = 1.0;
    for (std::size_t j = 0; j < 2 * n; ++j) sp.region.lo[j] = 0.0;

    sp.objective = QuadExpr(2 * n);
    for (std::size_t j = 0; j < n; ++j) sp.objective.add_quadratic(j, j, mu);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        sp.objective.Q(n + i, n + j) += 2.0 * mu * a_sym(i, j);
    for (std::size_t j = 0; j < n; ++j) sp.objective.add_linear(n + j, -p[j]);

    const SolveResult res = solve_convex(sp);
    if (res.status != SolveStatus::optimal || !res.point.all_finite()) {
      throw NumericError("lambda_bounds_lp_up: Dinkelbach subproblem failed: " +
                         solve_status_name(res.status));
    }
    const double value = -res.objective;  // max p^T y - mu * denom
    if (diag) {
      diag->dinkelbach_mu.push_back(mu);
      diag->dinkelbach_val.push_back(value);
    }
    const double mu_next = numer(res.point) / denom(res.point);
    if (value <= 1e-9 || std::fabs(mu_next - mu) <= 1e-13 * (1.0 + std::fabs(mu))) {
      mu = std::max(mu, mu_next);
      break;
    }
    mu = mu_next;
  }

  return {lower, mu, BoundMethod::lp_up};
}

VariableBox variable_box(const LambdaBounds& bounds, const QeicpInstance& inst) {
  inst.validate();
  if (!(bounds.l <= bounds.u)) {
    throw std::invalid_argument("variable_box: requires l <= u");
  }
  VariableBox box;
  box.p = std::max(std::fabs(bounds.l), std::fabs(bounds.u));
  box.x_hi = 1.0;
  box.y_lo = std::min(0.0, bounds.l);
  box.y_hi = std::max(0.0, bounds.u);
  box.z_hi = box.p * box.p;
  box.z_sum_hi = box.p * box.p;
  box.w_hi = DenseVector(inst.n);
  for (std::size_t i = 0; i < inst.n; ++i) {
    box.w_hi[i] = box.p * box.p * inst.A.row_norm2(i) + box.p * inst.B.row_norm2(i) +
                  inst.C.row_norm2(i);
  }
  return box;
}

RhoPair rho_constants(double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("rho_constants: p must be >= 0");
  RhoPair rho;
  rho.rho1 = 2.0 * (p + 1.0) * (p + 1.0);
  rho.rho2 = 6.0 * p * p + 4.0 * p + 2.0;
  return rho;
}

}  // namespace qeicp
