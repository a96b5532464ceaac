#include "qeicp/dca.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace qeicp {

void Tolerances::validate() const {
  if (!(eps1 > 0.0) || !(eps2 > 0.0) || !(eps3 > 0.0)) {
    throw std::invalid_argument("tolerances must be positive");
  }
}

std::string branch_name(Branch b) { return b == Branch::plus ? "plus" : "minus"; }

std::string dca_status_name(DcaStatus s) {
  switch (s) {
    case DcaStatus::global_eps: return "global_eps";
    case DcaStatus::kkt_point: return "kkt_point";
    case DcaStatus::infeasible_region: return "infeasible_region";
    case DcaStatus::iteration_limit: return "iteration_limit";
  }
  return "iteration_limit";
}

InitialPoint initial_point(const QeicpInstance& inst, Branch branch) {
  inst.validate();
  if (!cholesky_pd_check(inst.A).is_pd) {
    throw AssumptionError("initial_point: matrix A is not positive definite");
  }
  DenseVector x0 = minimize_quadratic_over_simplex(inst.A);

  InitialPoint out;
  out.branch = branch;
  const double a0 = inst.A.quad_form(x0);
  const double b0 = inst.B.quad_form(x0);
  const double c0 = inst.C.quad_form(x0);
  out.discriminant = b0 * b0 - 4.0 * a0 * c0;

  double lambda0;
  if (out.discriminant >= 0.0) {
    const double root = std::sqrt(out.discriminant);
    lambda0 = (-b0 + (branch == Branch::plus ? root : -root)) / (2.0 * a0);
  } else {
    lambda0 = -b0 / (2.0 * a0);
    out.fallback_used = true;
  }

  IteratePoint pt;
  pt.x = x0;
  pt.lambda = lambda0;
  pt.y = lambda0 * x0;
  pt.z = lambda0 * pt.y;
  pt.w = inst.A.matvec(pt.z) + inst.B.matvec(pt.y) + inst.C.matvec(pt.x);
  out.pt = std::move(pt);
  // the shortcut needs the exact root: complementarity fails at the fallback
  out.is_solution = !out.fallback_used && out.pt.w.min() >= -1e-9;
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct LoopState {
  double delta_f = kInf;
  double delta_x = kInf;
  double f_star = kInf;

  bool keep_going(const Tolerances& tol) const {
    return delta_f > tol.eps1 && delta_x > tol.eps2 && f_star > tol.eps3;
  }
};

// Newton iteration for (x_S, lambda) on a guessed active support S:
//   ((lambda^2 A + lambda B + C) x)_S = 0,  e^T x_S = 1.
// Reports whether the root was found; sign conditions are judged by the
// caller, which can then repair the support.
struct SupportRoot {
  bool converged = false;
  double lambda = 0.0;
  DenseVector x;  // full-length, zero off the support
  DenseVector w;
};

SupportRoot newton_on_support(const QeicpInstance& inst,
                              const std::vector<std::size_t>& support, double lambda0,
                              const DenseVector& x0) {
  SupportRoot out;
  const std::size_t n = inst.n;
  const std::size_t k = support.size();
  if (k == 0) return out;

  DenseVector xs(k);
  double lam = lambda0;
  for (std::size_t i = 0; i < k; ++i) xs[i] = std::max(x0[support[i]], 0.0);
  const double mass = xs.sum();
  if (mass > 0.0) {
    xs *= 1.0 / mass;
  } else {
    for (std::size_t i = 0; i < k; ++i) xs[i] = 1.0 / static_cast<double>(k);
  }

  const double scale = 1.0 + inst.A.max_abs_entry() + inst.B.max_abs_entry() +
                       inst.C.max_abs_entry();
  for (int step = 0; step < 40; ++step) {
    DenseVector full(n);
    for (std::size_t i = 0; i < k; ++i) full[support[i]] = xs[i];
    const DenseVector w = inst.C.matvec(full) + lam * inst.B.matvec(full) +
                          (lam * lam) * inst.A.matvec(full);
    DenseVector fval(k + 1);
    for (std::size_t i = 0; i < k; ++i) fval[i] = w[support[i]];
    fval[k] = xs.sum() - 1.0;
    if (fval.norm_inf() <= 1e-14 * scale) break;

    DenseMatrix jac(k + 1, k + 1);
    const DenseVector dlam = inst.B.matvec(full) + (2.0 * lam) * inst.A.matvec(full);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        jac(i, j) = inst.C(support[i], support[j]) +
                    lam * inst.B(support[i], support[j]) +
                    lam * lam * inst.A(support[i], support[j]);
      }
      jac(i, k) = dlam[support[i]];
      jac(k, i) = 1.0;
    }
    DenseVector delta;
    try {
      delta = lu_solve(jac, fval);
    } catch (const NumericError&) {
      return out;
    }
    for (std::size_t i = 0; i < k; ++i) xs[i] -= delta[i];
    lam -= delta[k];
    if (!xs.all_finite() || !std::isfinite(lam)) return out;
  }

  DenseVector full(n);
  for (std::size_t i = 0; i < k; ++i) full[support[i]] = xs[i];
  out.w = inst.C.matvec(full) + lam * inst.B.matvec(full) +
          (lam * lam) * inst.A.matvec(full);
  DenseVector fval(k + 1);
  for (std::size_t i = 0; i < k; ++i) fval[i] = out.w[support[i]];
  fval[k] = xs.sum() - 1.0;
  out.converged = fval.norm_inf() <= 1e-10 * scale;
  out.lambda = lam;
  out.x = std::move(full);
  return out;
}

// Active-set refinement around an inexact eigenpair: solve on a guessed
// support, drop entries the root pushes negative, add coordinates whose
// complement went negative, repeat. Accepts only a pair that satisfies the
// full system to round-off.
bool support_newton_polish(const QeicpInstance& inst, double& lambda, DenseVector& x) {
  const std::size_t n = inst.n;
  const double xmax = std::max(x.max(), 0.0);
  if (!(xmax > 0.0)) return false;
  const double scale = 1.0 + inst.A.max_abs_entry() + inst.B.max_abs_entry() +
                       inst.C.max_abs_entry();

  std::vector<std::vector<std::size_t>> guesses;
  {
    const DenseVector w = inst.C.matvec(x) + lambda * inst.B.matvec(x) +
                          (lambda * lambda) * inst.A.matvec(x);
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > std::max(w[i], 0.0)) s.push_back(i);
    }
    guesses.push_back(std::move(s));
  }
  for (double theta : {1e-6, 1e-2, 1e-1}) {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > theta * xmax) s.push_back(i);
    }
    if (!guesses.empty() && s == guesses.back()) continue;
    guesses.push_back(std::move(s));
  }

  auto accept = [&](const SupportRoot& root) {
    return root.converged && root.x.min() >= -1e-12 && root.w.min() >= -1e-10 * scale;
  };

  for (const auto& guess : guesses) {
    std::vector<std::size_t> support = guess;
    for (int round = 0; round < 12 && !support.empty(); ++round) {
      const SupportRoot root = newton_on_support(inst, support, lambda, x);
      if (!root.converged) break;
      std::vector<std::size_t> next;
      std::vector<bool> in_support(n, false);
      for (std::size_t i : support) in_support[i] = true;
      bool clean = true;
      for (std::size_t i : support) {
        if (root.x[i] < -1e-12) {
          clean = false;  // drop it
        } else {
          next.push_back(i);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!in_support[i] && root.w[i] < -1e-10 * scale) {
          clean = false;
          next.push_back(i);
        }
      }
      if (clean) {
        lambda = root.lambda;
        x = root.x;
        return true;
      }
      std::sort(next.begin(), next.end());
      if (next == support) break;  // no progress
      support = std::move(next);
    }
  }

  // The repair loop can cycle when the iterate mixes two nearby eigenpairs.
  // With few active candidates, enumerate their subsets outright and keep the
  // certified root closest to the current lambda.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 1e-3 * xmax) candidates.push_back(i);
  }
  if (candidates.size() >= 1 && candidates.size() <= 12) {
    const std::size_t m = candidates.size();
    bool found = false;
    double best_dist = kInf;
    SupportRoot best;
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
      std::vector<std::size_t> support;
      for (std::size_t b = 0; b < m; ++b) {
        if (mask & (1u << b)) support.push_back(candidates[b]);
      }
      const SupportRoot root = newton_on_support(inst, support, lambda, x);
      if (!accept(root)) continue;
      const double dist = std::fabs(root.lambda - lambda);
      if (dist < best_dist) {
        best_dist = dist;
        best = root;
        found = true;
      }
    }
    if (found) {
      lambda = best.lambda;
      x = best.x;
      return true;
    }
  }
  return false;
}

// Starting from a region-infeasible point (the estimator can produce w < 0)
// makes the first steps chase feasibility instead of descending, so gross
// violations are projected out first. Euclidean projection keeps the start
// as close as possible to the estimate.
IteratePoint project_into_region(const FeasibleRegion& region, const QeicpInstance& inst,
                                 const IteratePoint& pt0) {
  const DenseVector flat0 = flatten(pt0);
  if (region.contains(flat0, 1e-7)) return pt0;
  ConvexSubproblem sp;
  sp.region = region;
  sp.objective = QuadExpr(region.num_vars);
  for (std::size_t i = 0; i < region.num_vars; ++i) {
    sp.objective.add_quadratic(i, i, 0.5);
    sp.objective.add_linear(i, -flat0[i]);
  }
  const SolveResult res = solve_convex(sp, flat0);
  if (res.status != SolveStatus::optimal || !res.point.all_finite()) return pt0;
  return unflatten(res.point, inst.n);
}

// The step is only a descent step if it does not worsen the linearized
// majorant; an inexact subproblem can otherwise hand back a point above the
// warm start and break the monotone-objective guarantee.
bool majorant_improved(const Formulation& form, const QeicpInstance& inst,
                       const DenseVector& grad, const IteratePoint& from,
                       const IteratePoint& to) {
  const double at_from = eval_g(form, inst, from) - grad.dot(flatten(from));
  const double at_to = eval_g(form, inst, to) - grad.dot(flatten(to));
  return at_to <= at_from + 1e-9 * (1.0 + std::fabs(at_from));
}

void classify_outcome(DcaOutcome& out, const QeicpInstance& inst, const Tolerances& tol,
                      const LoopState& st, int max_iter) {
  out.f_star = st.f_star;
  if (st.f_star <= tol.eps3) {
    const double verify_tol = std::max(1e-6, 10.0 * std::sqrt(tol.eps3));
    DenseVector x = out.point.x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < 0.0 && x[i] >= -1e-9) x[i] = 0.0;
    }
    double lambda = out.point.lambda;
    support_newton_polish(inst, lambda, x);  // keeps the input on failure
    try {
      const VerifyResult ver = verify_solution(inst, lambda, x, verify_tol);
      if (ver.ok) {
        out.status = DcaStatus::global_eps;
        out.solution = ver.solution;
        return;
      }
      out.status = DcaStatus::kkt_point;
      out.diagnostic = "objective below eps3 but verification residual " +
                       std::to_string(ver.report.worst()) + " exceeds " +
                       std::to_string(verify_tol);
      return;
    } catch (const std::invalid_argument& e) {
      out.status = DcaStatus::kkt_point;
      out.diagnostic = std::string("objective below eps3 but extraction failed: ") + e.what();
      return;
    }
  }
  if (st.delta_f <= tol.eps1 || st.delta_x <= tol.eps2) {
    out.status = DcaStatus::kkt_point;
    return;
  }
  out.status = DcaStatus::iteration_limit;
  out.diagnostic = "stopping criteria unmet after " + std::to_string(max_iter) + " iterations";
}

}  // namespace

DcaOutcome run_dca(const Formulation& form_in, const QeicpInstance& inst,
                   const LambdaBounds& bounds, const Tolerances& tol,
                   const IteratePoint& pt0, int max_iter) {
  inst.validate();
  tol.validate();
  if (max_iter < 1) throw std::invalid_argument("run_dca: max_iter must be >= 1");

  Formulation form = form_in;
  if (form.is_hat() && !form.rho) {
    form.rho = rho_constants(std::max(std::fabs(bounds.l), std::fabs(bounds.u)));
  }

  FeasibleRegion region;
  if (form.is_hat()) {
    region = build_region(pt0.lambda >= 0.0 ? RegionKind::C_hat_pos : RegionKind::C_hat_neg,
                          inst, bounds);
  } else {
    region = build_region(RegionKind::C_plain, inst, bounds);
  }

  DcaOutcome out;
  out.point = pt0;
  out.formulation = form.kind;

  const Clock::time_point t0 = Clock::now();
  LoopState st;
  IteratePoint ptk = project_into_region(region, inst, pt0);
  double fk = form.objective(inst, ptk);

  for (int k = 0; k < max_iter && st.keep_going(tol); ++k) {
    const Clock::time_point it0 = Clock::now();
    const DenseVector grad = grad_h(form, inst, ptk);
    const SolveResult res = solve_dca_step(form, inst, region, grad, ptk);
    if (res.status == SolveStatus::infeasible) {
      out.status = DcaStatus::infeasible_region;
      out.diagnostic = "step subproblem infeasible at iteration " + std::to_string(k);
      out.point = ptk;
      out.f_star = fk;
      out.wall_time = seconds_since(t0);
      return out;
    }
    if (res.status == SolveStatus::numeric || !res.point.all_finite()) {
      out.status = DcaStatus::iteration_limit;
      out.diagnostic = "step subproblem numeric failure at iteration " + std::to_string(k);
      out.point = ptk;
      out.f_star = fk;
      out.wall_time = seconds_since(t0);
      return out;
    }
    IteratePoint pt_next = unflatten(res.point, inst.n);
    if (region.contains(flatten(ptk), 1e-7) &&
        !majorant_improved(form, inst, grad, ptk, pt_next)) {
      out.diagnostic = "step stalled at subproblem accuracy at iteration " +
                       std::to_string(k);
      pt_next = ptk;  // keep the incumbent; the loop then stops on delta_f
    }
    const double f_next = form.objective(inst, pt_next);
    st.delta_f = std::fabs(f_next - fk);
    st.delta_x = (flatten(pt_next) - flatten(ptk)).norm2();
    st.f_star = f_next;

    TraceRecord rec;
    rec.k = k;
    rec.f_value = f_next;
    rec.delta_f = st.delta_f;
    rec.delta_x = st.delta_x;
    rec.lambda = pt_next.lambda;
    rec.rho_used = form.rho;
    rec.subproblem_status = res.status;
    rec.wall_time = seconds_since(it0);
    out.trace.records.push_back(rec);

    ptk = pt_next;
    fk = f_next;
  }

  out.point = ptk;
  out.wall_time = seconds_since(t0);
  classify_outcome(out, inst, tol, st, max_iter);
  return out;
}

DcaOutcome run_dca_local(FormulationKind kind, const QeicpInstance& inst,
                         const LambdaBounds& bounds, const Tolerances& tol,
                         const IteratePoint& pt0, int max_iter) {
  inst.validate();
  tol.validate();
  if (kind != FormulationKind::phat && kind != FormulationKind::phatprime) {
    throw std::invalid_argument("run_dca_local: only the hat kinds use the local window");
  }
  if (!(pt0.lambda > bounds.l && pt0.lambda < bounds.u)) {
    throw std::invalid_argument("run_dca_local: lambda0 must lie strictly inside (l, u)");
  }
  if (!cholesky_pd_check(inst.A).is_pd) {
    throw AssumptionError("run_dca_local: matrix A is not positive definite");
  }

  DcaOutcome out;
  out.point = pt0;
  out.formulation = kind;
  out.local_dc = true;

  const Clock::time_point t0 = Clock::now();
  LoopState st;
  IteratePoint ptk = pt0;
  Formulation probe = Formulation::hat(kind, rho_constants(1.0));
  double fk = probe.objective(inst, ptk);
  const double width_scale = 1.0 + std::fabs(bounds.u - bounds.l);

  for (int k = 0; k < max_iter && st.keep_going(tol); ++k) {
    const Clock::time_point it0 = Clock::now();
    const double lk = ptk.lambda;
    const double a = std::min({1.0, 0.5 * (lk - bounds.l), 0.5 * (bounds.u - lk)});
    if (!(a > 1e-14 * width_scale)) {
      out.status = DcaStatus::kkt_point;
      out.diagnostic = "lambda window collapsed at the interval boundary (lambda = " +
                       std::to_string(lk) + ")";
      out.point = ptk;
      out.f_star = fk;
      out.wall_time = seconds_since(t0);
      return out;
    }
    const double pk = std::max(std::fabs(lk - a), std::fabs(lk + a));
    const RhoPair rho_k = rho_constants(pk);
    const Formulation form = Formulation::hat(kind, rho_k);
    const FeasibleRegion region =
        build_region(RegionKind::C_hat_local, inst, bounds, LocalWindow{lk, a});
    if (k == 0) {
      ptk = project_into_region(region, inst, ptk);
      fk = form.objective(inst, ptk);
    }

    const DenseVector grad = grad_h(form, inst, ptk);
    const SolveResult res = solve_dca_step(form, inst, region, grad, ptk);
    if (res.status == SolveStatus::infeasible) {
      out.status = DcaStatus::infeasible_region;
      out.diagnostic = "local step subproblem infeasible at iteration " + std::to_string(k);
      out.point = ptk;
      out.f_star = fk;
      out.wall_time = seconds_since(t0);
      return out;
    }
    if (res.status == SolveStatus::numeric || !res.point.all_finite()) {
      out.status = DcaStatus::iteration_limit;
      out.diagnostic = "local step subproblem numeric failure at iteration " + std::to_string(k);
      out.point = ptk;
      out.f_star = fk;
      out.wall_time = seconds_since(t0);
      return out;
    }
    IteratePoint pt_next = unflatten(res.point, inst.n);
    if (region.contains(flatten(ptk), 1e-7) &&
        !majorant_improved(form, inst, grad, ptk, pt_next)) {
      out.diagnostic = "local step stalled at subproblem accuracy at iteration " +
                       std::to_string(k);
      pt_next = ptk;
    }
    const double f_next = form.objective(inst, pt_next);
    st.delta_f = std::fabs(f_next - fk);
    st.delta_x = (flatten(pt_next) - flatten(ptk)).norm2();
    st.f_star = f_next;

    TraceRecord rec;
    rec.k = k;
    rec.f_value = f_next;
    rec.delta_f = st.delta_f;
    rec.delta_x = st.delta_x;
    rec.lambda = pt_next.lambda;
    rec.rho_used = rho_k;
    rec.subproblem_status = res.status;
    rec.wall_time = seconds_since(it0);
    out.trace.records.push_back(rec);

    ptk = pt_next;
    fk = f_next;
  }

  out.point = ptk;
  out.wall_time = seconds_since(t0);
  classify_outcome(out, inst, tol, st, max_iter);
  return out;
}

LambdaBounds compute_bounds(const QeicpInstance& inst, const SolveConfig& config) {
  switch (config.bound_method) {
    case BoundMethod::thm31:
      return lambda_bounds_thm31(inst).bounds;
    case BoundMethod::thm32:
      return lambda_bounds_thm32(inst, config.bounds_literal).bounds;
    case BoundMethod::lp_up:
      return lambda_bounds_lp_up(inst);
    case BoundMethod::external:
      if (!config.external_bounds) {
        throw std::invalid_argument("compute_bounds: external method needs explicit bounds");
      }
      return *config.external_bounds;
  }
  throw std::invalid_argument("compute_bounds: unknown method");
}

namespace {

IteratePoint rebase_lambda(const QeicpInstance& inst, const IteratePoint& pt,
                           double lambda) {
  IteratePoint out = pt;
  out.lambda = lambda;
  out.y = lambda * pt.x;
  out.z = lambda * out.y;
  out.w = inst.A.matvec(out.z) + inst.B.matvec(out.y) + inst.C.matvec(out.x);
  return out;
}

}  // namespace

std::vector<DcaOutcome> solve_qeicp(const QeicpInstance& inst, const SolveConfig& config) {
  inst.validate();
  config.tol.validate();
  if (config.formulations.empty()) {
    throw std::invalid_argument("solve_qeicp: at least one formulation required");
  }
  if (config.branches.empty()) {
    throw std::invalid_argument("solve_qeicp: at least one branch required");
  }
  const LambdaBounds bounds = compute_bounds(inst, config);
  const double p_global = std::max(std::fabs(bounds.l), std::fabs(bounds.u));

  std::vector<DcaOutcome> outcomes;
  for (Branch branch : config.branches) {
    const InitialPoint init = initial_point(inst, branch);
    for (FormulationKind kind : config.formulations) {
      const bool hat = kind == FormulationKind::phat || kind == FormulationKind::phatprime;
      DcaOutcome out;
      if (config.local_dc && hat) {
        LambdaBounds branch_bounds = bounds;
        if (branch == Branch::plus) {
          branch_bounds.l = std::max(bounds.l, 0.0);
        } else {
          branch_bounds.u = std::min(bounds.u, 0.0);
        }
        if (!(branch_bounds.l < branch_bounds.u)) {
          out.formulation = kind;
          out.branch = branch;
          out.local_dc = true;
          out.status = DcaStatus::infeasible_region;
          out.f_star = kInf;
          out.diagnostic = "empty lambda interval for branch " + branch_name(branch);
          outcomes.push_back(std::move(out));
          continue;
        }
        IteratePoint pt0 = init.pt;
        const double width = branch_bounds.u - branch_bounds.l;
        const double lo = branch_bounds.l + 1e-3 * width;
        const double hi = branch_bounds.u - 1e-3 * width;
        if (pt0.lambda < lo || pt0.lambda > hi) {
          pt0 = rebase_lambda(inst, pt0, std::clamp(pt0.lambda, lo, hi));
        }
        out = run_dca_local(kind, inst, branch_bounds, config.tol, pt0, config.max_iter);
      } else {
        Formulation form = hat ? Formulation::hat(kind, rho_constants(p_global))
                               : Formulation::plain(kind);
        out = run_dca(form, inst, bounds, config.tol, init.pt, config.max_iter);
      }
      out.formulation = kind;
      out.branch = branch;
      outcomes.push_back(std::move(out));
    }
  }

  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const DcaOutcome& a, const DcaOutcome& b) {
                     const bool va = a.status == DcaStatus::global_eps && a.solution;
                     const bool vb = b.status == DcaStatus::global_eps && b.solution;
                     return va && !vb;
                   });
  return outcomes;
}

}  // namespace qeicp
