#include "qeicp/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace qeicp {

double QuadExpr::value(const DenseVector& v) const {
  if (v.size() != c.size()) throw DimensionError("QuadExpr::value: size mismatch");
  double acc = d + c.dot(v);
  if (Q.rows() > 0) acc += 0.5 * Q.quad_form(v);
  return acc;
}

DenseVector QuadExpr::gradient(const DenseVector& v) const {
  if (v.size() != c.size()) throw DimensionError("QuadExpr::gradient: size mismatch");
  DenseVector g = c;
  if (Q.rows() > 0) g += Q.matvec(v);
  return g;
}

void QuadExpr::add_quadratic(std::size_t i, std::size_t j, double coeff) {
  // Adds coeff * v_i * v_j to the expression value.
  if (i == j) {
    Q(i, i) += 2.0 * coeff;
  } else {
    Q(i, j) += coeff;
    Q(j, i) += coeff;
  }
}

bool FeasibleRegion::contains(const DenseVector& v, double tol) const {
  if (v.size() != num_vars) return false;
  for (std::size_t r = 0; r < Aeq.rows(); ++r) {
    double acc = -beq[r];
    for (std::size_t j = 0; j < num_vars; ++j) acc += Aeq(r, j) * v[j];
    if (std::fabs(acc) > tol * (1.0 + std::fabs(beq[r]))) return false;
  }
  for (std::size_t r = 0; r < Ain.rows(); ++r) {
    double acc = -bin[r];
    for (std::size_t j = 0; j < num_vars; ++j) acc += Ain(r, j) * v[j];
    if (acc > tol * (1.0 + std::fabs(bin[r]))) return false;
  }
  for (std::size_t i = 0; i < num_vars; ++i) {
    if (v[i] < lo[i] - tol * (1.0 + std::fabs(lo[i]))) return false;
    if (v[i] > hi[i] + tol * (1.0 + std::fabs(hi[i]))) return false;
  }
  return true;
}

FeasibleRegion build_region(RegionKind kind, const QeicpInstance& inst,
                            const LambdaBounds& bounds,
                            const std::optional<LocalWindow>& local) {
  inst.validate();
  const std::size_t n = inst.n;
  const std::size_t N = flat_size(n);

  FeasibleRegion reg;
  reg.n = n;
  reg.num_vars = N;
  reg.kind = kind;
  reg.Aeq = DenseMatrix(n + 2, N);
  reg.beq = DenseVector(n + 2);
  reg.lo = DenseVector(N, -kInf);
  reg.hi = DenseVector(N, kInf);

  // w - A z - B y - C x = 0
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      reg.Aeq(i, j) = -inst.C(i, j);
      reg.Aeq(i, n + j) = -inst.B(i, j);
      reg.Aeq(i, 2 * n + j) = -inst.A(i, j);
    }
    reg.Aeq(i, 3 * n + i) = 1.0;
  }
  // e^T x = 1
  for (std::size_t j = 0; j < n; ++j) reg.Aeq(n, j) = 1.0;
  reg.beq[n] = 1.0;
  // e^T y - lambda = 0
  for (std::size_t j = 0; j < n; ++j) reg.Aeq(n + 1, n + j) = 1.0;
  reg.Aeq(n + 1, 4 * n) = -1.0;

  if (kind == RegionKind::C_plain) {
    for (std::size_t i = 0; i < n; ++i) {
      reg.lo[i] = 0.0;          // x
      reg.lo[2 * n + i] = 0.0;  // z
      reg.lo[3 * n + i] = 0.0;  // w
    }
    return reg;
  }

  const VariableBox box = variable_box(bounds, inst);
  double lambda_lo = 0.0, lambda_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
  double z_hi = box.z_hi, z_sum_hi = box.z_sum_hi;

  switch (kind) {
    case RegionKind::C_hat_pos:
      lambda_lo = 0.0;
      lambda_hi = bounds.u;
      y_lo = 0.0;
      y_hi = bounds.u;
      break;
    case RegionKind::C_hat_neg:
      lambda_lo = bounds.l;
      lambda_hi = 0.0;
      y_lo = bounds.l;
      y_hi = 0.0;
      break;
    case RegionKind::C_hat_local: {
      if (!local) throw std::invalid_argument("build_region: local window required");
      const double lk = local->lambda_k, a = local->a;
      if (a < 0.0) throw std::invalid_argument("build_region: window radius must be >= 0");
      const double slack = 1e-12 * (1.0 + std::fabs(bounds.l) + std::fabs(bounds.u));
      if (lk - a < bounds.l - slack || lk + a > bounds.u + slack) {
        throw std::invalid_argument("build_region: local window exceeds lambda bounds");
      }
      lambda_lo = lk - a;
      lambda_hi = lk + a;
      y_lo = std::min(0.0, lambda_lo);
      y_hi = std::max(0.0, lambda_hi);
      const double pk = std::max(std::fabs(lambda_lo), std::fabs(lambda_hi));
      z_hi = std::min(box.z_hi, pk);
      z_sum_hi = pk * pk;
      break;
    }
    default:
      break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    reg.lo[i] = 0.0;
    reg.hi[i] = box.x_hi;
    reg.lo[n + i] = y_lo;
    reg.hi[n + i] = y_hi;
    reg.lo[2 * n + i] = 0.0;
    reg.hi[2 * n + i] = z_hi;
    reg.lo[3 * n + i] = 0.0;
    reg.hi[3 * n + i] = box.w_hi[i];
  }
  reg.lo[4 * n] = lambda_lo;
  reg.hi[4 * n] = lambda_hi;

  reg.Ain = DenseMatrix(1, N);
  for (std::size_t i = 0; i < n; ++i) reg.Ain(0, 2 * n + i) = 1.0;
  reg.bin = DenseVector(1);
  reg.bin[0] = z_sum_hi;
  return reg;
}

std::string solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numeric: return "numeric";
  }
  return "numeric";
}

namespace {

enum class IneqType { row, lower, upper, quad };

struct Ineq {
  IneqType type = IneqType::lower;
  std::size_t var = 0;     // lower/upper
  double bound = 0.0;      // lower/upper
  DenseVector row;         // row
  double rhs = 0.0;        // row
  const QuadExpr* quad = nullptr;
};

struct Internal {
  std::size_t N = 0;
  const QuadExpr* obj = nullptr;
  DenseMatrix Aeq;
  DenseVector beq;
  std::vector<Ineq> ineqs;
  bool empty_box = false;
};

double ineq_value(const Ineq& q, const DenseVector& v) {
  switch (q.type) {
    case IneqType::lower: return q.bound - v[q.var];
    case IneqType::upper: return v[q.var] - q.bound;
    case IneqType::row: return q.row.dot(v) - q.rhs;
    case IneqType::quad: return q.quad->value(v);
  }
  return 0.0;
}

// grad()  used only for non-box constraints; boxes are handled in-place.
DenseVector ineq_gradient(const Ineq& q, const DenseVector& v) {
  switch (q.type) {
    case IneqType::lower: {
      DenseVector g(v.size());
      g[q.var] = -1.0;
      return g;
    }
    case IneqType::upper: {
      DenseVector g(v.size());
      g[q.var] = 1.0;
      return g;
    }
    case IneqType::row:
      return q.row;
    case IneqType::quad:
      return q.quad->gradient(v);
  }
  return DenseVector(v.size());
}

Internal build_internal(const ConvexSubproblem& sp) {
  const FeasibleRegion& r = sp.region;
  if (sp.objective.size() != r.num_vars) {
    throw DimensionError("solve_convex: objective/region size mismatch");
  }
  for (const QuadExpr& q : sp.quad_constraints) {
    if (q.size() != r.num_vars) {
      throw DimensionError("solve_convex: quadratic constraint size mismatch");
    }
  }

  Internal P;
  P.N = r.num_vars;
  P.obj = &sp.objective;

  // Degenerate boxes become equality rows; contradictory ones flag the
  // problem as trivially infeasible.
  std::vector<std::size_t> pinned;
  for (std::size_t i = 0; i < P.N; ++i) {
    const double lo = r.lo[i], hi = r.hi[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double width = hi - lo;
      const double scale = 1.0 + std::fabs(lo) + std::fabs(hi);
      if (width < -1e-12 * scale) {
        P.empty_box = true;
        return P;
      }
      if (width <= 1e-14 * scale) {
        pinned.push_back(i);
        continue;
      }
    }
    if (std::isfinite(lo)) P.ineqs.push_back({IneqType::lower, i, lo, {}, 0.0, nullptr});
  }
  // keep dual layout: rows first, then lower, then upper, then quads
  std::vector<Ineq> lowers = std::move(P.ineqs);
  P.ineqs.clear();
  for (std::size_t rr = 0; rr < r.Ain.rows(); ++rr) {
    Ineq q;
    q.type = IneqType::row;
    q.row = DenseVector(P.N);
    for (std::size_t j = 0; j < P.N; ++j) q.row[j] = r.Ain(rr, j);
    q.rhs = r.bin[rr];
    P.ineqs.push_back(std::move(q));
  }
  for (Ineq& q : lowers) P.ineqs.push_back(std::move(q));
  for (std::size_t i = 0; i < P.N; ++i) {
    const double lo = r.lo[i], hi = r.hi[i];
    if (!std::isfinite(hi)) continue;
    if (std::isfinite(lo)) {
      const double scale = 1.0 + std::fabs(lo) + std::fabs(hi);
      if (hi - lo <= 1e-14 * scale) continue;  // pinned
    }
    P.ineqs.push_back({IneqType::upper, i, hi, {}, 0.0, nullptr});
  }
  for (const QuadExpr& q : sp.quad_constraints) {
    Ineq iq;
    iq.type = IneqType::quad;
    iq.quad = &q;
    P.ineqs.push_back(std::move(iq));
  }

  const std::size_t base_rows = r.Aeq.rows();
  P.Aeq = DenseMatrix(base_rows + pinned.size(), P.N);
  P.beq = DenseVector(base_rows + pinned.size());
  for (std::size_t rr = 0; rr < base_rows; ++rr) {
    for (std::size_t j = 0; j < P.N; ++j) P.Aeq(rr, j) = r.Aeq(rr, j);
    P.beq[rr] = r.beq[rr];
  }
  for (std::size_t k = 0; k < pinned.size(); ++k) {
    const std::size_t i = pinned[k];
    P.Aeq(base_rows + k, i) = 1.0;
    P.beq[base_rows + k] = 0.5 * (r.lo[i] + r.hi[i]);
  }
  return P;
}

struct CoreState {
  DenseVector v, mu, nu;
  double eta = kInf;
  double rpri_inf = kInf;
  double rdual_inf = kInf;
  int iterations = 0;
  bool numeric_fail = false;
  bool converged = false;
  bool early_exit = false;
};

// Residual stack (r_dual, r_cent, r_pri) used by the line search.
double residual_norm(const Internal& P, const DenseVector& v, const DenseVector& mu,
                     const DenseVector& nu, double inv_tau, DenseVector& rd_out,
                     DenseVector& rp_out) {
  const std::size_t m = P.ineqs.size();
  DenseVector rd = P.obj->gradient(v);
  for (std::size_t i = 0; i < m; ++i) {
    const Ineq& q = P.ineqs[i];
    switch (q.type) {
      case IneqType::lower: rd[q.var] -= mu[i]; break;
      case IneqType::upper: rd[q.var] += mu[i]; break;
      case IneqType::row: {
        for (std::size_t j = 0; j < P.N; ++j) rd[j] += mu[i] * q.row[j];
        break;
      }
      case IneqType::quad: {
        DenseVector g = q.quad->gradient(v);
        for (std::size_t j = 0; j < P.N; ++j) rd[j] += mu[i] * g[j];
        break;
      }
    }
  }
  for (std::size_t rr = 0; rr < P.Aeq.rows(); ++rr) {
    const double nur = nu[rr];
    if (nur == 0.0) continue;
    for (std::size_t j = 0; j < P.N; ++j) rd[j] += nur * P.Aeq(rr, j);
  }

  DenseVector rp(P.Aeq.rows());
  for (std::size_t rr = 0; rr < P.Aeq.rows(); ++rr) {
    double acc = -P.beq[rr];
    for (std::size_t j = 0; j < P.N; ++j) acc += P.Aeq(rr, j) * v[j];
    rp[rr] = acc;
  }

  double norm2 = rd.dot(rd) + rp.dot(rp);
  for (std::size_t i = 0; i < m; ++i) {
    const double rc = -mu[i] * ineq_value(P.ineqs[i], v) - inv_tau;
    norm2 += rc * rc;
  }
  rd_out = std::move(rd);
  rp_out = std::move(rp);
  return std::sqrt(norm2);
}

CoreState pdipm(const Internal& P, DenseVector v0, const SolveOptions& opts,
                const std::function<bool(const DenseVector&)>& early_exit) {
  const std::size_t N = P.N;
  const std::size_t m = P.ineqs.size();
  const std::size_t p = P.Aeq.rows();
  const double beq_scale = 1.0 + P.beq.norm_inf();

  CoreState st;
  st.v = std::move(v0);
  st.nu = DenseVector(p);
  st.mu = DenseVector(m);

  if (m == 0) {
    // Purely equality-constrained: one regularized KKT solve.
    DenseMatrix K(N + p, N + p);
    const QuadExpr& f0 = *P.obj;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) K(i, j) = f0.Q(i, j);
    for (std::size_t i = 0; i < N; ++i) K(i, i) += 1e-12;
    for (std::size_t rr = 0; rr < p; ++rr)
      for (std::size_t j = 0; j < N; ++j) {
        K(N + rr, j) = P.Aeq(rr, j);
        K(j, N + rr) = P.Aeq(rr, j);
      }
    for (std::size_t rr = 0; rr < p; ++rr) K(N + rr, N + rr) = -1e-12;
    DenseVector rhs(N + p);
    for (std::size_t j = 0; j < N; ++j) rhs[j] = -f0.c[j];
    for (std::size_t rr = 0; rr < p; ++rr) rhs[N + rr] = P.beq[rr];
    try {
      DenseVector sol = lu_solve(K, rhs);
      for (std::size_t j = 0; j < N; ++j) st.v[j] = sol[j];
      for (std::size_t rr = 0; rr < p; ++rr) st.nu[rr] = sol[N + rr];
    } catch (const NumericError&) {
      st.numeric_fail = true;
      return st;
    }
    DenseVector rd, rp;
    residual_norm(P, st.v, st.mu, st.nu, 0.0, rd, rp);
    st.rdual_inf = rd.norm_inf();
    st.rpri_inf = rp.norm_inf();
    st.eta = 0.0;
    st.converged = st.rpri_inf <= opts.feas_tol * beq_scale;
    st.iterations = 1;
    return st;
  }

  for (std::size_t i = 0; i < m; ++i) {
    const double fi = ineq_value(P.ineqs[i], st.v);
    if (!(fi < 0.0)) {
      st.numeric_fail = true;  // caller guarantees strict feasibility
      return st;
    }
    // moderate multipliers keep the first Newton systems well conditioned
    st.mu[i] = std::clamp(-1.0 / fi, 1e-2, 1e2);
  }

  constexpr double kKappa = 10.0;
  constexpr double kAlpha = 0.01;
  constexpr double kBeta = 0.5;

  double stall_best = kInf;
  int stall_count = 0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    st.iterations = iter + 1;

    double eta = 0.0;
    std::vector<double> fvals(m);
    for (std::size_t i = 0; i < m; ++i) {
      fvals[i] = ineq_value(P.ineqs[i], st.v);
      eta -= st.mu[i] * fvals[i];
    }
    st.eta = eta;
    const double tau = kKappa * static_cast<double>(m) / std::max(eta, 1e-300);
    const double inv_tau = 1.0 / tau;

    DenseVector rd, rp;
    const double rnorm = residual_norm(P, st.v, st.mu, st.nu, inv_tau, rd, rp);
    st.rdual_inf = rd.norm_inf();
    st.rpri_inf = rp.norm_inf();
    if (!std::isfinite(rnorm)) {
      st.numeric_fail = true;
      return st;
    }

    const double obj_val = P.obj->value(st.v);
    const double grad_scale = 1.0 + P.obj->gradient(st.v).norm_inf();
    const double gap_status = opts.gap_tol * (1.0 + std::fabs(obj_val));
    const double gap_target =
        std::min(gap_status, std::max(1e-9, 2e-13 * (1.0 + std::fabs(obj_val))));
    const double dual_target = std::max(1e-9 * grad_scale, 1e-12);
#ifdef QEICP_IPM_TRACE
    std::fprintf(stderr, "ipm it=%d eta=%.3e rpri=%.3e rdual=%.3e obj=%.8e\n", iter,
                 eta, st.rpri_inf, st.rdual_inf, obj_val);
#endif
    if (eta <= gap_target && st.rpri_inf <= opts.feas_tol * beq_scale &&
        st.rdual_inf <= dual_target) {
      st.converged = true;
      return st;
    }
    if (early_exit && early_exit(st.v)) {
      st.early_exit = true;
      st.converged = true;
      return st;
    }
    // Stall watch: fall back to the status tolerance when progress dies.
    // Each residual is measured against its own target so one component
    // bottoming out at round-off cannot mask progress in the others.
    const double quality =
        std::max({eta / gap_target, st.rpri_inf / (opts.feas_tol * beq_scale),
                  st.rdual_inf / dual_target});
    if (quality < stall_best * 0.99) {
      stall_best = quality;
      stall_count = 0;
    } else if (++stall_count > 12) {
      st.converged = eta <= gap_status && st.rpri_inf <= opts.feas_tol * beq_scale &&
                     st.rdual_inf <= 1e-6 * grad_scale;
      return st;
    }

    // Newton system on (dv, dnu) after eliminating dmu.
    DenseMatrix H(N, N);
    const QuadExpr& f0 = *P.obj;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) H(i, j) = f0.Q(i, j);
    DenseVector rhs1(N);
    for (std::size_t j = 0; j < N; ++j) rhs1[j] = -rd[j];

    std::vector<DenseVector> quad_grads;
    for (std::size_t i = 0; i < m; ++i) {
      const Ineq& q = P.ineqs[i];
      const double fi = fvals[i];
      const double coef = -st.mu[i] / fi;           // > 0
      const double rc_over_f = -st.mu[i] - inv_tau / fi;  // r_cent_i / f_i
      switch (q.type) {
        case IneqType::lower:
          H(q.var, q.var) += coef;
          rhs1[q.var] += rc_over_f;  // -(rc/f) * grad, grad = -e
          break;
        case IneqType::upper:
          H(q.var, q.var) += coef;
          rhs1[q.var] -= rc_over_f;
          break;
        case IneqType::row: {
          for (std::size_t a = 0; a < N; ++a) {
            if (q.row[a] == 0.0) continue;
            const double ca = coef * q.row[a];
            for (std::size_t b = 0; b < N; ++b) H(a, b) += ca * q.row[b];
            rhs1[a] -= rc_over_f * q.row[a];
          }
          break;
        }
        case IneqType::quad: {
          DenseVector g = q.quad->gradient(st.v);
          for (std::size_t a = 0; a < N; ++a) {
            const double mq = st.mu[i];
            for (std::size_t b = 0; b < N; ++b) H(a, b) += mq * q.quad->Q(a, b);
            const double ca = coef * g[a];
            if (ca != 0.0) {
              for (std::size_t b = 0; b < N; ++b) H(a, b) += ca * g[b];
            }
            rhs1[a] -= rc_over_f * g[a];
          }
          quad_grads.push_back(std::move(g));
          break;
        }
      }
    }

    // Two-scale regularization: tied to the objective curvature (so the
    // barrier-inflated diagonal cannot wreck late-stage Newton accuracy) plus
    // a sliver of the full diagonal so degenerate directions stay invertible.
    double hscale_obj = 0.0, hscale_full = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      hscale_obj = std::max(hscale_obj, std::fabs(f0.Q(i, i)));
      hscale_full = std::max(hscale_full, std::fabs(H(i, i)));
    }
    double delta = 1e-12 * (1.0 + hscale_obj) + 1e-16 * hscale_full;
    double aeq_scale = 0.0;
    for (std::size_t rr = 0; rr < p; ++rr)
      for (std::size_t j = 0; j < N; ++j)
        aeq_scale = std::max(aeq_scale, std::fabs(P.Aeq(rr, j)));

    DenseVector sol;
    DenseVector rhs(N + p);
    for (std::size_t j = 0; j < N; ++j) rhs[j] = rhs1[j];
    for (std::size_t rr = 0; rr < p; ++rr) rhs[N + rr] = -rp[rr];
    bool solved = false;
    for (int attempt = 0; attempt < 4 && !solved; ++attempt) {
      DenseMatrix K(N + p, N + p);
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) K(i, j) = H(i, j);
      for (std::size_t i = 0; i < N; ++i) K(i, i) += delta;
      for (std::size_t rr = 0; rr < p; ++rr) {
        for (std::size_t j = 0; j < N; ++j) {
          K(N + rr, j) = P.Aeq(rr, j);
          K(j, N + rr) = P.Aeq(rr, j);
        }
        K(N + rr, N + rr) = -1e-12 * (1.0 + aeq_scale);
      }
      try {
        const LuFactorization lu(K);
        sol = lu.solve(rhs);
        // one refinement pass keeps the equality residual near round-off even
        // when the Hessian dwarfs the constraint rows
        DenseVector resid = K.matvec(sol);
        resid -= rhs;
        if (resid.norm_inf() > 1e-13 * (1.0 + rhs.norm_inf())) {
          resid *= -1.0;
          sol += lu.solve(resid);
        }
        solved = sol.all_finite();
      } catch (const NumericError&) {
      }
      if (!solved) delta = std::max(delta * 1e4, 1e-10 * (1.0 + hscale_full));
    }
    if (!solved) {
      st.numeric_fail = true;
      return st;
    }
    DenseVector dv(N), dnu(p);
    for (std::size_t j = 0; j < N; ++j) dv[j] = sol[j];
    for (std::size_t rr = 0; rr < p; ++rr) dnu[rr] = sol[N + rr];

    DenseVector dmu(m);
    std::size_t qg = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const Ineq& q = P.ineqs[i];
      double gdv = 0.0;
      switch (q.type) {
        case IneqType::lower: gdv = -dv[q.var]; break;
        case IneqType::upper: gdv = dv[q.var]; break;
        case IneqType::row: gdv = q.row.dot(dv); break;
        case IneqType::quad: gdv = quad_grads[qg++].dot(dv); break;
      }
      const double rc = -st.mu[i] * fvals[i] - inv_tau;
      dmu[i] = (rc - st.mu[i] * gdv) / fvals[i];
    }

    double s = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (dmu[i] < 0.0) s = std::min(s, -st.mu[i] / dmu[i]);
    }
    s = std::min(1.0, 0.99 * s);

    auto trial_ok = [&](double step) {
      for (std::size_t i = 0; i < m; ++i) {
        DenseVector vt = st.v;
        for (std::size_t j = 0; j < N; ++j) vt[j] += step * dv[j];
        if (!(ineq_value(P.ineqs[i], vt) < 0.0)) return false;
      }
      return true;
    };
    // cheap per-constraint pass first, full vector only when needed
    {
      int guard = 0;
      DenseVector vt(N);
      while (guard++ < 60) {
        bool ok = true;
        for (std::size_t j = 0; j < N; ++j) vt[j] = st.v[j] + s * dv[j];
        for (std::size_t i = 0; i < m; ++i) {
          if (!(ineq_value(P.ineqs[i], vt) < 0.0)) {
            ok = false;
            break;
          }
        }
        if (ok) break;
        s *= kBeta;
      }
      if (guard >= 60) {
        st.numeric_fail = true;
        return st;
      }
    }
    (void)trial_ok;

    DenseVector vt(N), mut(m), nut(p), rd_t, rp_t;
    int guard = 0;
    double rnorm_t = kInf;
    while (guard++ < 60) {
      for (std::size_t j = 0; j < N; ++j) vt[j] = st.v[j] + s * dv[j];
      for (std::size_t i = 0; i < m; ++i) mut[i] = st.mu[i] + s * dmu[i];
      for (std::size_t rr = 0; rr < p; ++rr) nut[rr] = st.nu[rr] + s * dnu[rr];
      rnorm_t = residual_norm(P, vt, mut, nut, inv_tau, rd_t, rp_t);
      if (std::isfinite(rnorm_t) && rnorm_t <= (1.0 - kAlpha * s) * rnorm) break;
      s *= kBeta;
      if (s < 1e-13) break;
    }
    if (s < 1e-13) {
      st.converged = st.eta <= gap_status && st.rpri_inf <= opts.feas_tol * beq_scale &&
                     st.rdual_inf <= 1e-6 * grad_scale;
      return st;
    }
    st.v = vt;
    st.mu = mut;
    st.nu = nut;
  }
  return st;
}

// Midpoints of finite boxes, warm values pulled strictly inside.
DenseVector starting_point(const FeasibleRegion& r, const std::optional<DenseVector>& warm) {
  const std::size_t N = r.num_vars;
  DenseVector v(N);
  if (warm) {
    if (warm->size() != N) throw DimensionError("solve_convex: warm start size mismatch");
    v = *warm;
  }
  for (std::size_t i = 0; i < N; ++i) {
    const double lo = r.lo[i], hi = r.hi[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double width = hi - lo;
      const double scale = 1.0 + std::fabs(lo) + std::fabs(hi);
      if (width <= 1e-14 * scale) {
        v[i] = 0.5 * (lo + hi);
        continue;
      }
      if (!warm) v[i] = 0.5 * (lo + hi);
      const double mid = 0.5 * (lo + hi);
      v[i] += 1e-6 * (mid - v[i]);
      const double margin = std::min(0.45 * width, 1e-4 * width);
      v[i] = std::clamp(v[i], lo + margin, hi - margin);
    } else if (std::isfinite(lo)) {
      const double margin = 1e-4 * (1.0 + std::fabs(lo));
      if (!warm) v[i] = lo + 1.0;
      v[i] = std::max(v[i], lo + margin);
    } else if (std::isfinite(hi)) {
      const double margin = 1e-4 * (1.0 + std::fabs(hi));
      if (!warm) v[i] = hi - 1.0;
      v[i] = std::min(v[i], hi - margin);
    }
  }
  return v;
}

bool strictly_feasible(const Internal& P, const DenseVector& v) {
  for (const Ineq& q : P.ineqs) {
    const double fi = ineq_value(q, v);
    if (!(fi < -1e-11 * (1.0 + std::fabs(fi)))) return false;
  }
  return true;
}

// min s  s.t.  f_i(v) <= s, equalities kept, s >= -1.
struct Phase1Result {
  bool found = false;
  bool infeasible = false;
  DenseVector v;        // best head vector, also when not strictly interior
  double s_star = kInf;
};

Phase1Result phase1(const Internal& P, const ConvexSubproblem& sp, DenseVector v0,
                    const SolveOptions& opts) {
  const std::size_t N = P.N;
  Internal aug;
  aug.N = N + 1;
  aug.Aeq = DenseMatrix(P.Aeq.rows(), N + 1);
  for (std::size_t rr = 0; rr < P.Aeq.rows(); ++rr)
    for (std::size_t j = 0; j < N; ++j) aug.Aeq(rr, j) = P.Aeq(rr, j);
  aug.beq = P.beq;

  QuadExpr obj(N + 1);
  obj.add_linear(N, 1.0);
  aug.obj = &obj;

  // Rebuild every inequality with the slack column. Quadratic constraints get
  // an extended copy (owned here).
  std::vector<QuadExpr> quad_copies;
  quad_copies.reserve(sp.quad_constraints.size());
  for (const QuadExpr& q : sp.quad_constraints) {
    QuadExpr ext(N + 1);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) ext.Q(i, j) = q.Q(i, j);
    for (std::size_t i = 0; i < N; ++i) ext.c[i] = q.c[i];
    ext.d = q.d;
    ext.add_linear(N, -1.0);
    quad_copies.push_back(std::move(ext));
  }
  std::size_t qi = 0;
  for (const Ineq& q : P.ineqs) {
    Ineq e;
    switch (q.type) {
      case IneqType::lower:
      case IneqType::upper: {
        e.type = IneqType::row;
        e.row = DenseVector(N + 1);
        if (q.type == IneqType::lower) {
          e.row[q.var] = -1.0;
          e.rhs = -q.bound;
        } else {
          e.row[q.var] = 1.0;
          e.rhs = q.bound;
        }
        e.row[N] = -1.0;
        break;
      }
      case IneqType::row: {
        e.type = IneqType::row;
        e.row = DenseVector(N + 1);
        for (std::size_t j = 0; j < N; ++j) e.row[j] = q.row[j];
        e.row[N] = -1.0;
        e.rhs = q.rhs;
        break;
      }
      case IneqType::quad: {
        e.type = IneqType::quad;
        e.quad = &quad_copies[qi++];
        break;
      }
    }
    aug.ineqs.push_back(std::move(e));
  }
  // keep the slack bounded below so the LP cannot run off
  aug.ineqs.push_back({IneqType::lower, N, -1.0, {}, 0.0, nullptr});

  DenseVector w0(N + 1);
  for (std::size_t j = 0; j < N; ++j) w0[j] = v0[j];
  double worst = -kInf;
  for (const Ineq& q : P.ineqs) worst = std::max(worst, ineq_value(q, v0));
  w0[N] = std::max(worst + 1.0, 0.0);

  SolveOptions o1 = opts;
  o1.max_iter = std::max(opts.max_iter, 100);
  auto strict = [&](const DenseVector& v) {
    DenseVector head(N);
    for (std::size_t j = 0; j < N; ++j) head[j] = v[j];
    return strictly_feasible(P, head);
  };
  CoreState st = pdipm(aug, std::move(w0), o1, strict);

  Phase1Result res;
  if (st.numeric_fail) {
    res.infeasible = false;
    return res;
  }
  DenseVector head(N);
  for (std::size_t j = 0; j < N; ++j) head[j] = st.v[j];
  res.s_star = st.v[N];
  res.v = std::move(head);
  if (strictly_feasible(P, res.v)) {
    res.found = true;
    return res;
  }
  if (st.v[N] > 1e-7) res.infeasible = true;
  return res;
}

// Regions can have an empty strict interior (implied equalities: a sum row or
// sign bound that every feasible point keeps tight). Pin the constraints that
// phase-1 left tight and retry on the resulting face.
ConvexSubproblem pin_tight_face(const ConvexSubproblem& sp, const Internal& P,
                                const DenseVector& v, bool& pinned_any) {
  ConvexSubproblem out = sp;
  std::vector<DenseVector> extra_rows;
  std::vector<double> extra_rhs;
  pinned_any = false;
  for (const Ineq& q : P.ineqs) {
    if (q.type == IneqType::quad) continue;  // epigraph rows always have slack
    const double fi = ineq_value(q, v);
    const double scale = 1.0 + std::fabs(q.type == IneqType::row ? q.rhs : q.bound);
    if (fi < -1e-8 * scale) continue;
    pinned_any = true;
    switch (q.type) {
      case IneqType::lower:
        out.region.hi[q.var] = q.bound;
        out.region.lo[q.var] = q.bound;
        break;
      case IneqType::upper:
        out.region.lo[q.var] = q.bound;
        out.region.hi[q.var] = q.bound;
        break;
      case IneqType::row: {
        extra_rows.push_back(q.row);
        extra_rhs.push_back(q.rhs);
        break;
      }
      default:
        break;
    }
  }
  if (!extra_rows.empty()) {
    const std::size_t base = out.region.Aeq.rows();
    DenseMatrix aeq(base + extra_rows.size(), out.region.num_vars);
    DenseVector beq(base + extra_rows.size());
    for (std::size_t r = 0; r < base; ++r) {
      for (std::size_t j = 0; j < out.region.num_vars; ++j)
        aeq(r, j) = out.region.Aeq(r, j);
      beq[r] = out.region.beq[r];
    }
    for (std::size_t k = 0; k < extra_rows.size(); ++k) {
      for (std::size_t j = 0; j < out.region.num_vars; ++j)
        aeq(base + k, j) = extra_rows[k][j];
      beq[base + k] = extra_rhs[k];
    }
    // the pinned rows are no longer inequalities
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < out.region.Ain.rows(); ++r) {
      bool tight = false;
      for (const DenseVector& row : extra_rows) {
        double diff = 0.0;
        for (std::size_t j = 0; j < out.region.num_vars; ++j)
          diff = std::max(diff, std::fabs(row[j] - out.region.Ain(r, j)));
        if (diff == 0.0) tight = true;
      }
      if (!tight) keep.push_back(r);
    }
    DenseMatrix ain(keep.size(), out.region.num_vars);
    DenseVector bin(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      for (std::size_t j = 0; j < out.region.num_vars; ++j)
        ain(k, j) = out.region.Ain(keep[k], j);
      bin[k] = out.region.bin[keep[k]];
    }
    out.region.Aeq = std::move(aeq);
    out.region.beq = std::move(beq);
    out.region.Ain = std::move(ain);
    out.region.bin = std::move(bin);
  }
  return out;
}

SolveResult solve_convex_impl(const ConvexSubproblem& sp,
                              const std::optional<DenseVector>& warm_start,
                              const SolveOptions& opts, int depth);

}  // namespace

SolveResult solve_convex(const ConvexSubproblem& sp,
                         const std::optional<DenseVector>& warm_start,
                         const SolveOptions& opts) {
  return solve_convex_impl(sp, warm_start, opts, 0);
}

namespace {

SolveResult solve_convex_impl(const ConvexSubproblem& sp,
                              const std::optional<DenseVector>& warm_start,
                              const SolveOptions& opts, int depth) {
  Internal P = build_internal(sp);
  SolveResult out;
  if (P.empty_box) {
    out.status = SolveStatus::infeasible;
    return out;
  }

  DenseVector v0 = starting_point(sp.region, warm_start);
  if (!strictly_feasible(P, v0)) {
    Phase1Result ph = phase1(P, sp, std::move(v0), opts);
    if (ph.infeasible) {
      out.status = SolveStatus::infeasible;
      return out;
    }
    if (!ph.found) {
      if (ph.v.size() == P.N && ph.s_star <= 1e-7 && depth < 2) {
        bool pinned = false;
        const ConvexSubproblem face = pin_tight_face(sp, P, ph.v, pinned);
        if (pinned) return solve_convex_impl(face, ph.v, opts, depth + 1);
      }
      out.status = SolveStatus::numeric;
      return out;
    }
    v0 = std::move(ph.v);
  }

  CoreState st = pdipm(P, std::move(v0), opts, nullptr);
  out.point = st.v;
  out.objective = sp.objective.value(st.v);
  out.duality_gap = st.eta;
  out.iterations = st.iterations;
  out.ineq_duals = st.mu;
  out.eq_duals = st.nu;
  if (st.numeric_fail || !st.v.all_finite()) {
    out.status = SolveStatus::numeric;
    return out;
  }
  const double beq_scale = 1.0 + P.beq.norm_inf();
  const double gap_status = opts.gap_tol * (1.0 + std::fabs(out.objective));
  const double grad_scale = 1.0 + sp.objective.gradient(st.v).norm_inf();
  const bool ok = st.eta <= gap_status && st.rpri_inf <= opts.feas_tol * beq_scale &&
                  st.rdual_inf <= 1e-6 * grad_scale;
  out.status = ok ? SolveStatus::optimal : SolveStatus::max_iter;
  out.kkt_residual = kkt_report(sp, out).worst();
  return out;
}

}  // namespace

double KktReport::worst() const {
  return std::max(std::max(stationarity, primal_feasibility),
                  std::max(dual_feasibility, complementary_slackness));
}

DenseVector minimize_quadratic_over_simplex(const DenseMatrix& m, double* value) {
  if (m.rows() != m.cols()) throw DimensionError("simplex minimization: square matrix required");
  const std::size_t n = m.rows();
  ConvexSubproblem sp;
  sp.region.n = 0;
  sp.region.num_vars = n;
  sp.region.Aeq = DenseMatrix(1, n);
  for (std::size_t j = 0; j < n; ++j) sp.region.Aeq(0, j) = 1.0;
  sp.region.beq = DenseVector(1);
  sp.region.beq[0] = 1.0;
  sp.region.lo = DenseVector(n, 0.0);
  sp.region.hi = DenseVector(n, kInf);

  sp.objective = QuadExpr(n);
  const DenseMatrix s = m.symmetrized();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sp.objective.Q(i, j) = 2.0 * s(i, j);

  SolveOptions opts;
  opts.gap_tol = 1e-9;
  const SolveResult res = solve_convex(sp, std::nullopt, opts);
  if (res.status != SolveStatus::optimal) {
    throw NumericError("simplex quadratic minimization failed: " +
                       solve_status_name(res.status));
  }
  if (value) *value = res.objective;
  return res.point;
}

KktReport kkt_report(const ConvexSubproblem& sp, const SolveResult& res) {
  Internal P = build_internal(sp);
  KktReport rep;
  const DenseVector& v = res.point;
  if (v.size() != P.N) {
    rep.stationarity = kInf;
    return rep;
  }

  DenseVector rd = sp.objective.gradient(v);
  for (std::size_t i = 0; i < P.ineqs.size() && i < res.ineq_duals.size(); ++i) {
    const Ineq& q = P.ineqs[i];
    const double mu = res.ineq_duals[i];
    const double fi = ineq_value(q, v);
    rep.dual_feasibility = std::max(rep.dual_feasibility, -mu);
    rep.complementary_slackness =
        std::max(rep.complementary_slackness, std::fabs(mu * fi));
    rep.primal_feasibility = std::max(rep.primal_feasibility, fi);
    DenseVector g = ineq_gradient(q, v);
    for (std::size_t j = 0; j < P.N; ++j) rd[j] += mu * g[j];
  }
  for (std::size_t rr = 0; rr < P.Aeq.rows() && rr < res.eq_duals.size(); ++rr) {
    const double nur = res.eq_duals[rr];
    for (std::size_t j = 0; j < P.N; ++j) rd[j] += nur * P.Aeq(rr, j);
  }
  for (std::size_t rr = 0; rr < P.Aeq.rows(); ++rr) {
    double acc = -P.beq[rr];
    for (std::size_t j = 0; j < P.N; ++j) acc += P.Aeq(rr, j) * v[j];
    rep.primal_feasibility = std::max(rep.primal_feasibility, std::fabs(acc));
  }
  rep.stationarity = rd.norm_inf();
  return rep;
}

}  // namespace qeicp
