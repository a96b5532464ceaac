#pragma once

#include <optional>
#include <random>
#include <vector>

#include "qeicp/bounds.hpp"
#include "qeicp/model.hpp"
#include "qeicp/subproblem.hpp"

namespace qeicp {

/// The four decompositions of the objective into a difference g - h of convex
/// parts: two sum-of-squares splittings (pdc / pprime, over the plain region)
/// and two curvature-shifted splittings (phat / phatprime, over the boxed
/// region, parametrized by RhoPair).
enum class FormulationKind { pdc, phat, pprime, phatprime };

std::string formulation_name(FormulationKind k);
std::optional<FormulationKind> formulation_from_name(const std::string& name);

struct Formulation {
  FormulationKind kind = FormulationKind::pdc;
  std::optional<RhoPair> rho;

  static Formulation plain(FormulationKind k);
  static Formulation hat(FormulationKind k, RhoPair rho);

  bool is_hat() const {
    return kind == FormulationKind::phat || kind == FormulationKind::phatprime;
  }
  bool is_prime() const {
    return kind == FormulationKind::pprime || kind == FormulationKind::phatprime;
  }
  /// Objective the formulation minimizes: f for pdc/phat, f' for prime kinds.
  double objective(const QeicpInstance& inst, const IteratePoint& pt) const;
};

/// Selector pair for the subgradient of -sum min(x_i, w_i): u_i = 1 where
/// x_i < w_i, 0 where x_i > w_i; ties take u_i = 1 (and v = e - u).
struct SubgradientChoice {
  DenseVector u, v;

  static SubgradientChoice at(const IteratePoint& pt);
};

double eval_g(const Formulation& form, const QeicpInstance& inst, const IteratePoint& pt);
double eval_h(const Formulation& form, const QeicpInstance& inst, const IteratePoint& pt);

/// Gradient (or a subgradient, for the prime kinds) of the concave-side
/// component h at pt, flattened as (x, y, z, w, lambda).
DenseVector grad_h(const Formulation& form, const QeicpInstance& inst,
                   const IteratePoint& pt,
                   const std::optional<SubgradientChoice>& choice = std::nullopt);

/// Value of the convex majorant of the objective built at `anchor`,
/// evaluated at `query`:  g(query) - h(anchor) - <grad_h(anchor), query - anchor>.
double convex_majorant(const Formulation& form, const QeicpInstance& inst,
                       const IteratePoint& anchor, const IteratePoint& query);

/// Hessian of the bilinear coupling term -2 lambda y^T (x+z) over (x,y,z,lambda).
DenseMatrix hessian_coupling(const IteratePoint& pt);
/// Hessian of lambda^2 (||x||^2 + ||y||^2) over (x,y,lambda).
DenseMatrix hessian_squares(const IteratePoint& pt);

/// Structured sampler for points satisfying the coupling rows of the boxed
/// region (x on the simplex, y = lambda * simplex, z scaled simplex with the
/// sum cap, w inside its box); lambda is drawn from [lambda_lo, lambda_hi].
struct HatSectionSampler {
  std::size_t n = 0;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double z_cap = 0.0;  // per-entry and sum cap (p^2 for the boxed region)
  DenseVector w_hi;

  IteratePoint sample(std::mt19937_64& rng) const;
};

struct ConvexityReport {
  int trials = 0;
  int violations_g = 0;
  int violations_h = 0;
  double worst_slack_g = 0.0;  // most negative midpoint-convexity slack seen
  double worst_slack_h = 0.0;
};

/// Midpoint-convexity spot check of both components over sampled segments;
/// slacks below -1e-8 (relative) count as violations.
ConvexityReport convexity_witness(const Formulation& form, const QeicpInstance& inst,
                                  const HatSectionSampler& sampler, int trials,
                                  std::uint64_t seed);

/// Quartic objective of the pdc/pprime step rewritten as a quadratic in
/// (x,y,z,w,lambda,t) with eight convex quadratic epigraph constraints.
struct LiftedObjective {
  std::size_t num_vars = 0;  // 4n + 9
  QuadExpr objective;
  std::vector<QuadExpr> constraints;  // each expr(v) <= 0
};

LiftedObjective lift_linearized_objective(const Formulation& form,
                                          const QeicpInstance& inst,
                                          const DenseVector& grad_at_k);

/// The per-iteration convex program  min g(.) - <., grad_at_k>  over `region`
/// (hat kinds stay quadratic; plain kinds are lifted, extending the region by
/// the eight epigraph variables).
ConvexSubproblem build_dca_subproblem(const Formulation& form, const QeicpInstance& inst,
                                      const FeasibleRegion& region,
                                      const DenseVector& grad_at_k);

/// Strictly feasible start for the step problem built from the current
/// iterate (epigraph variables get a unit margin for lifted kinds).
DenseVector dca_step_warm_start(const Formulation& form, const QeicpInstance& inst,
                                const IteratePoint& pt);

SolveResult solve_dca_step(const Formulation& form, const QeicpInstance& inst,
                           const FeasibleRegion& region, const DenseVector& grad_at_k,
                           const std::optional<IteratePoint>& warm_start = std::nullopt,
                           const SolveOptions& opts = {});

}  // namespace qeicp
