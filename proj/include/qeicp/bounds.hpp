#pragma once

#include "qeicp/model.hpp"

namespace qeicp {

struct AssumptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BoundMethod { thm31, thm32, lp_up, external };

std::string bound_method_name(BoundMethod m);

struct LambdaBounds {
  double l = 0.0;
  double u = 0.0;
  BoundMethod method = BoundMethod::external;

  double length() const { return u - l; }
  bool contains(double lambda, double slack = 0.0) const {
    return lambda >= l - slack && lambda <= u + slack;
  }
};

struct BoundIntermediates {
  double s = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct BoundsResult {
  LambdaBounds bounds;
  BoundIntermediates inter;
};

/// Interval from entrywise min/max of A, B, C together with
/// s = min{x^T A x : e^T x = 1, x >= 0} (solved to 1e-9 gap, then shrunk by
/// 1e-9 so solver error can only widen the interval). Requires A PD.
BoundsResult lambda_bounds_thm31(const QeicpInstance& inst);

/// Eigenvalue-based interval: s = lambda_min(A), curvature of -B-B^T and
/// -C-C^T. A stricter variant reuses lambda_min(-B-B^T) in both branches of
/// gamma; it can yield intervals that exclude observed eigenvalues, so by
/// default gamma uses lambda_max(-B-B^T). Pass literal_gamma = true for the
/// strict variant.
BoundsResult lambda_bounds_thm32(const QeicpInstance& inst, bool literal_gamma = false);

/// Feasibility test: returns true (C not in S0) iff no x >= 0 with
/// e^T x = 1 and C x >= 0 exists, to tolerance 1e-9.
bool check_c_not_in_s0(const QeicpInstance& inst);

struct LpUpDiagnostics {
  DenseVector p;                       // weight vector of the fractional program
  std::vector<double> dinkelbach_mu;   // ratio iterates
  std::vector<double> dinkelbach_val;  // parametric optimal values F(mu_k)
};

/// Positive-eigenvalue interval [LP value, UP value] under A PD and C not in
/// S0. The upper bound solves the fractional program by Dinkelbach iteration.
LambdaBounds lambda_bounds_lp_up(const QeicpInstance& inst,
                                 LpUpDiagnostics* diag = nullptr);

/// Per-variable boxes implied by lambda in [l,u] for any optimal point:
/// x in [0,1]^n, y in [min(0,l), max(0,u)]^n, z in [0,p^2]^n, e^T z <= p^2,
/// w in [0, w_hi] with w_hi_i = p^2 |A_i.| + p |B_i.| + |C_i.| (row 2-norms).
struct VariableBox {
  double p = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
  double z_hi = 0.0;
  double z_sum_hi = 0.0;
  DenseVector w_hi;
};

VariableBox variable_box(const LambdaBounds& bounds, const QeicpInstance& inst);

/// Curvature constants of the universal decomposition on the boxed region.
struct RhoPair {
  double rho1 = 0.0;  // 2 (p+1)^2
  double rho2 = 0.0;  // 6 p^2 + 4 p + 2
};

RhoPair rho_constants(double p);

}  // namespace qeicp
