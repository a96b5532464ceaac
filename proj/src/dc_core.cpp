#include "qeicp/dc_core.hpp"

#include <algorithm>
#include <cmath>

namespace qeicp {

std::string formulation_name(FormulationKind k) {
  switch (k) {
    case FormulationKind::pdc: return "pdc";
    case FormulationKind::phat: return "phat";
    case FormulationKind::pprime: return "pprime";
    case FormulationKind::phatprime: return "phatprime";
  }
  return "pdc";
}

std::optional<FormulationKind> formulation_from_name(const std::string& name) {
  if (name == "pdc") return FormulationKind::pdc;
  if (name == "phat") return FormulationKind::phat;
  if (name == "pprime") return FormulationKind::pprime;
  if (name == "phatprime") return FormulationKind::phatprime;
  return std::nullopt;
}

Formulation Formulation::plain(FormulationKind k) {
  if (k == FormulationKind::phat || k == FormulationKind::phatprime) {
    throw std::invalid_argument("Formulation::plain: hat kinds need a RhoPair");
  }
  Formulation f;
  f.kind = k;
  return f;
}

Formulation Formulation::hat(FormulationKind k, RhoPair rho) {
  if (k != FormulationKind::phat && k != FormulationKind::phatprime) {
    throw std::invalid_argument("Formulation::hat: plain kinds carry no RhoPair");
  }
  if (!(rho.rho1 > 0.0) || !(rho.rho2 > 0.0)) {
    throw std::invalid_argument("Formulation::hat: rho constants must be positive");
  }
  Formulation f;
  f.kind = k;
  f.rho = rho;
  return f;
}

double Formulation::objective(const QeicpInstance& inst, const IteratePoint& pt) const {
  return is_prime() ? eval_f_prime(inst, pt) : eval_f(inst, pt);
}

SubgradientChoice SubgradientChoice::at(const IteratePoint& pt) {
  const std::size_t n = pt.x.size();
  SubgradientChoice ch;
  ch.u = DenseVector(n);
  ch.v = DenseVector(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ui = (pt.x[i] <= pt.w[i]) ? 1.0 : 0.0;  // tie resolves to the x side
    ch.u[i] = ui;
    ch.v[i] = 1.0 - ui;
  }
  return ch;
}

namespace {

struct Parts {
  double nx2, ny2, nz2;
  double t_pp, t_mm, t_pm, t_mp;  // the four shifted sum-of-squares factors
  double nxw_plus, nxw_minus;
  double min_sum;
};

Parts compute_parts(const IteratePoint& pt) {
  const std::size_t n = pt.x.size();
  Parts p{};
  double npx = 0, npz = 0, nmx = 0, nmz = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pt.x[i], y = pt.y[i], z = pt.z[i], w = pt.w[i];
    p.nx2 += x * x;
    p.ny2 += y * y;
    p.nz2 += z * z;
    npx += (y + x) * (y + x);
    npz += (y + z) * (y + z);
    nmx += (y - x) * (y - x);
    nmz += (y - z) * (y - z);
    p.nxw_plus += (x + w) * (x + w);
    p.nxw_minus += (x - w) * (x - w);
    p.min_sum += std::min(x, w);
  }
  const double l = pt.lambda;
  p.t_pp = 4.0 * l * l + 4.0 + npx + npz;
  p.t_mm = 4.0 * (l + 1.0) * (l + 1.0) + nmx + nmz;
  p.t_pm = 4.0 * l * l + 4.0 + nmx + nmz;
  p.t_mp = 4.0 * (l + 1.0) * (l + 1.0) + npx + npz;
  return p;
}

double quartic_g_core(const Parts& p, double l) {
  const double a = l * l + p.nx2;
  const double b = l * l + p.ny2;
  return p.ny2 + p.nz2 + 0.5 * (a * a + b * b) +
         (p.t_pp * p.t_pp + p.t_mm * p.t_mm) / 32.0;
}

double quartic_h_core(const Parts& p, double l) {
  return 0.5 * (2.0 * l * l * l * l + p.nx2 * p.nx2 + p.ny2 * p.ny2) +
         (p.t_pm * p.t_pm + p.t_mp * p.t_mp) / 32.0;
}

double hat_g_core(const Parts& p, double l, const RhoPair& rho) {
  return p.ny2 + p.nz2 + 0.5 * rho.rho1 * (p.nx2 + p.ny2 + p.nz2 + l * l) +
         0.5 * rho.rho2 * (p.nx2 + p.ny2 + l * l);
}

const RhoPair& require_rho(const Formulation& form) {
  if (!form.rho) throw std::invalid_argument("hat formulation is missing its RhoPair");
  return *form.rho;
}

}  // namespace

double eval_g(const Formulation& form, const QeicpInstance& inst, const IteratePoint& pt) {
  (void)inst;
  const Parts p = compute_parts(pt);
  switch (form.kind) {
    case FormulationKind::pdc:
      return quartic_g_core(p, pt.lambda) + p.nxw_plus / 4.0;
    case FormulationKind::pprime:
      return quartic_g_core(p, pt.lambda);
    case FormulationKind::phat:
      return hat_g_core(p, pt.lambda, require_rho(form)) + p.nxw_plus / 4.0;
    case FormulationKind::phatprime:
      return hat_g_core(p, pt.lambda, require_rho(form));
  }
  return 0.0;
}

double eval_h(const Formulation& form, const QeicpInstance& inst, const IteratePoint& pt) {
  const Parts p = compute_parts(pt);
  switch (form.kind) {
    case FormulationKind::pdc:
      return quartic_h_core(p, pt.lambda) + p.nxw_minus / 4.0;
    case FormulationKind::pprime:
      return quartic_h_core(p, pt.lambda) - p.min_sum;
    case FormulationKind::phat:
      return hat_g_core(p, pt.lambda, require_rho(form)) + p.nxw_plus / 4.0 -
             eval_f(inst, pt);
    case FormulationKind::phatprime:
      return hat_g_core(p, pt.lambda, require_rho(form)) - eval_f_prime(inst, pt);
  }
  return 0.0;
}

DenseVector grad_h(const Formulation& form, const QeicpInstance& inst,
                   const IteratePoint& pt,
                   const std::optional<SubgradientChoice>& choice) {
  (void)inst;
  const std::size_t n = pt.x.size();
  const double l = pt.lambda;
  DenseVector g(flat_size(n));

  if (form.is_hat()) {
    const RhoPair& rho = require_rho(form);
    const double rr = rho.rho1 + rho.rho2;
    const SubgradientChoice ch =
        form.is_prime() ? (choice ? *choice : SubgradientChoice::at(pt))
                        : SubgradientChoice{};
    double ytxz = 0.0;
    for (std::size_t i = 0; i < n; ++i) ytxz += pt.y[i] * (pt.x[i] + pt.z[i]);
    const double nx2 = pt.x.dot(pt.x), ny2 = pt.y.dot(pt.y);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = pt.x[i], y = pt.y[i], z = pt.z[i], w = pt.w[i];
      double gx = rr * x + 2.0 * l * y - 2.0 * l * l * x;
      double gw;
      if (form.kind == FormulationKind::phat) {
        gx += 0.5 * (x + w) - w;
        gw = 0.5 * (w - x);
      } else {
        gx -= ch.u[i];
        gw = -ch.v[i];
      }
      g[i] = gx;
      g[n + i] = (rr - 2.0 * l * l) * y + 2.0 * l * (x + z);
      g[2 * n + i] = rho.rho1 * z + 2.0 * l * y;
      g[3 * n + i] = gw;
    }
    g[4 * n] = (rr - 2.0 * (nx2 + ny2)) * l + 2.0 * ytxz;
    return g;
  }

  const Parts p = compute_parts(pt);
  const double s1 = p.t_pm;  // multiplies the (y-x, y-z) directions
  const double s2 = p.t_mp;
  const SubgradientChoice ch =
      form.is_prime() ? (choice ? *choice : SubgradientChoice::at(pt))
                      : SubgradientChoice{};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pt.x[i], y = pt.y[i], z = pt.z[i], w = pt.w[i];
    double gx = 2.0 * p.nx2 * x + s1 * (x - y) / 8.0 + s2 * (x + y) / 8.0;
    double gw;
    if (form.kind == FormulationKind::pdc) {
      gx += 0.5 * (x - w);
      gw = 0.5 * (w - x);
    } else {
      gx -= ch.u[i];
      gw = -ch.v[i];
    }
    g[i] = gx;
    g[n + i] = 2.0 * p.ny2 * y + s1 * (2.0 * y - x - z) / 8.0 +
               s2 * (2.0 * y + x + z) / 8.0;
    g[2 * n + i] = s1 * (z - y) / 8.0 + s2 * (z + y) / 8.0;
    g[3 * n + i] = gw;
  }
  g[4 * n] = 4.0 * l * l * l + 0.5 * s1 * l + 0.5 * s2 * (l + 1.0);
  return g;
}

double convex_majorant(const Formulation& form, const QeicpInstance& inst,
                       const IteratePoint& anchor, const IteratePoint& query) {
  const DenseVector grad = grad_h(form, inst, anchor);
  const DenseVector diff = flatten(query) - flatten(anchor);
  return eval_g(form, inst, query) - eval_h(form, inst, anchor) - grad.dot(diff);
}

DenseMatrix hessian_coupling(const IteratePoint& pt) {
  const std::size_t n = pt.x.size();
  DenseMatrix h(3 * n + 1, 3 * n + 1);
  const double l = pt.lambda;
  for (std::size_t i = 0; i < n; ++i) {
    h(i, n + i) = h(n + i, i) = -2.0 * l;
    h(n + i, 2 * n + i) = h(2 * n + i, n + i) = -2.0 * l;
    h(i, 3 * n) = h(3 * n, i) = -2.0 * pt.y[i];
    h(n + i, 3 * n) = h(3 * n, n + i) = -2.0 * (pt.x[i] + pt.z[i]);
    h(2 * n + i, 3 * n) = h(3 * n, 2 * n + i) = -2.0 * pt.y[i];
  }
  return h;
}

DenseMatrix hessian_squares(const IteratePoint& pt) {
  const std::size_t n = pt.x.size();
  DenseMatrix h(2 * n + 1, 2 * n + 1);
  const double l = pt.lambda;
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = 2.0 * l * l;
    h(n + i, n + i) = 2.0 * l * l;
    h(i, 2 * n) = h(2 * n, i) = 4.0 * l * pt.x[i];
    h(n + i, 2 * n) = h(2 * n, n + i) = 4.0 * l * pt.y[i];
  }
  h(2 * n, 2 * n) = 2.0 * (pt.x.dot(pt.x) + pt.y.dot(pt.y));
  return h;
}

namespace {

DenseVector sample_simplex(std::size_t n, std::mt19937_64& rng) {
  DenseVector v(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = -std::log(1.0 - uniform01(rng));
    total += v[i];
  }
  v *= 1.0 / total;
  return v;
}

}  // namespace

IteratePoint HatSectionSampler::sample(std::mt19937_64& rng) const {
  IteratePoint pt = IteratePoint::zeros(n);
  pt.x = sample_simplex(n, rng);
  pt.lambda = lambda_lo + (lambda_hi - lambda_lo) * uniform01(rng);
  pt.y = pt.lambda * sample_simplex(n, rng);
  pt.z = (z_cap * uniform01(rng)) * sample_simplex(n, rng);
  pt.w = DenseVector(n);
  for (std::size_t i = 0; i < n; ++i) {
    pt.w[i] = (w_hi.size() == n ? w_hi[i] : 1.0) * uniform01(rng);
  }
  return pt;
}

ConvexityReport convexity_witness(const Formulation& form, const QeicpInstance& inst,
                                  const HatSectionSampler& sampler, int trials,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ConvexityReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const IteratePoint a = sampler.sample(rng);
    const IteratePoint b = sampler.sample(rng);
    IteratePoint mid = IteratePoint::zeros(inst.n);
    mid.lambda = 0.5 * (a.lambda + b.lambda);
    for (std::size_t i = 0; i < inst.n; ++i) {
      mid.x[i] = 0.5 * (a.x[i] + b.x[i]);
      mid.y[i] = 0.5 * (a.y[i] + b.y[i]);
      mid.z[i] = 0.5 * (a.z[i] + b.z[i]);
      mid.w[i] = 0.5 * (a.w[i] + b.w[i]);
    }
    const double ga = eval_g(form, inst, a), gb = eval_g(form, inst, b);
    const double gm = eval_g(form, inst, mid);
    const double slack_g = 0.5 * (ga + gb) - gm;
    const double scale_g = 1.0 + std::fabs(ga) + std::fabs(gb);
    if (slack_g < -1e-8 * scale_g) ++rep.violations_g;
    rep.worst_slack_g = std::min(rep.worst_slack_g, slack_g / scale_g);

    const double ha = eval_h(form, inst, a), hb = eval_h(form, inst, b);
    const double hm = eval_h(form, inst, mid);
    const double slack_h = 0.5 * (ha + hb) - hm;
    const double scale_h = 1.0 + std::fabs(ha) + std::fabs(hb);
    if (slack_h < -1e-8 * scale_h) ++rep.violations_h;
    rep.worst_slack_h = std::min(rep.worst_slack_h, slack_h / scale_h);
  }
  return rep;
}

LiftedObjective lift_linearized_objective(const Formulation& form,
                                          const QeicpInstance& inst,
                                          const DenseVector& grad_at_k) {
  if (form.is_hat()) {
    throw std::invalid_argument("lift_linearized_objective: hat steps are already quadratic");
  }
  const std::size_t n = inst.n;
  if (grad_at_k.size() != flat_size(n)) {
    throw DimensionError("lift_linearized_objective: gradient length mismatch");
  }
  const std::size_t N = flat_size(n) + 8;
  const std::size_t T = flat_size(n);  // first epigraph variable

  LiftedObjective out;
  out.num_vars = N;
  out.objective = QuadExpr(N);
  QuadExpr& obj = out.objective;

  obj.add_linear(T + 1, 1.0);  // t2 stands in for ||y||^2
  for (std::size_t i = 0; i < n; ++i) obj.add_quadratic(2 * n + i, 2 * n + i, 1.0);
  if (form.kind == FormulationKind::pdc) {
    for (std::size_t i = 0; i < n; ++i) {
      obj.add_quadratic(i, i, 0.25);
      obj.add_quadratic(3 * n + i, 3 * n + i, 0.25);
      obj.add_quadratic(i, 3 * n + i, 0.5);
    }
  }
  // (t7 + t1)^2 / 2 and (t7 + t2)^2 / 2
  for (std::size_t k : {std::size_t{0}, std::size_t{1}}) {
    obj.add_quadratic(T + k, T + k, 0.5);
    obj.add_quadratic(T + 6, T + 6, 0.5);
    obj.add_quadratic(T + k, T + 6, 1.0);
  }
  // (4 t7 + 4 + t3 + t4)^2 / 32
  obj.add_quadratic(T + 2, T + 2, 1.0 / 32.0);
  obj.add_quadratic(T + 3, T + 3, 1.0 / 32.0);
  obj.add_quadratic(T + 6, T + 6, 0.5);
  obj.add_quadratic(T + 2, T + 3, 1.0 / 16.0);
  obj.add_quadratic(T + 2, T + 6, 0.25);
  obj.add_quadratic(T + 3, T + 6, 0.25);
  obj.add_linear(T + 2, 0.25);
  obj.add_linear(T + 3, 0.25);
  obj.add_linear(T + 6, 1.0);
  obj.d += 0.5;
  // (4 t8 + t5 + t6)^2 / 32
  obj.add_quadratic(T + 4, T + 4, 1.0 / 32.0);
  obj.add_quadratic(T + 5, T + 5, 1.0 / 32.0);
  obj.add_quadratic(T + 7, T + 7, 0.5);
  obj.add_quadratic(T + 4, T + 5, 1.0 / 16.0);
  obj.add_quadratic(T + 4, T + 7, 0.25);
  obj.add_quadratic(T + 5, T + 7, 0.25);

  for (std::size_t j = 0; j < flat_size(n); ++j) obj.add_linear(j, -grad_at_k[j]);

  // Epigraph constraints, in the fixed order
  // ||x||^2, ||y||^2, ||x+y||^2, ||y+z||^2, ||y-x||^2, ||y-z||^2, l^2, (l+1)^2.
  auto norm_constraint = [&](std::size_t block_a, std::size_t block_b, double sign_b,
                             std::size_t t_index) {
    QuadExpr q(N);
    for (std::size_t i = 0; i < n; ++i) {
      q.add_quadratic(block_a + i, block_a + i, 1.0);
      if (block_b != block_a) {
        q.add_quadratic(block_b + i, block_b + i, 1.0);
        q.add_quadratic(block_a + i, block_b + i, 2.0 * sign_b);
      }
    }
    q.add_linear(T + t_index, -1.0);
    return q;
  };
  out.constraints.push_back(norm_constraint(0, 0, 1.0, 0));          // ||x||^2 <= t1
  out.constraints.push_back(norm_constraint(n, n, 1.0, 1));          // ||y||^2 <= t2
  out.constraints.push_back(norm_constraint(0, n, 1.0, 2));          // ||x+y||^2 <= t3
  out.constraints.push_back(norm_constraint(n, 2 * n, 1.0, 3));      // ||y+z||^2 <= t4
  out.constraints.push_back(norm_constraint(n, 0, -1.0, 4));         // ||y-x||^2 <= t5
  out.constraints.push_back(norm_constraint(n, 2 * n, -1.0, 5));     // ||y-z||^2 <= t6
  {
    QuadExpr q(N);
    q.add_quadratic(4 * n, 4 * n, 1.0);
    q.add_linear(T + 6, -1.0);
    out.constraints.push_back(std::move(q));  // lambda^2 <= t7
  }
  {
    QuadExpr q(N);
    q.add_quadratic(4 * n, 4 * n, 1.0);
    q.add_linear(4 * n, 2.0);
    q.d = 1.0;
    q.add_linear(T + 7, -1.0);
    out.constraints.push_back(std::move(q));  // (lambda+1)^2 <= t8
  }
  return out;
}

namespace {

FeasibleRegion extend_region(const FeasibleRegion& r, std::size_t extra) {
  FeasibleRegion e;
  e.n = r.n;
  e.num_vars = r.num_vars + extra;
  e.kind = r.kind;
  e.Aeq = DenseMatrix(r.Aeq.rows(), e.num_vars);
  for (std::size_t i = 0; i < r.Aeq.rows(); ++i)
    for (std::size_t j = 0; j < r.num_vars; ++j) e.Aeq(i, j) = r.Aeq(i, j);
  e.beq = r.beq;
  if (r.Ain.rows() > 0) {
    e.Ain = DenseMatrix(r.Ain.rows(), e.num_vars);
    for (std::size_t i = 0; i < r.Ain.rows(); ++i)
      for (std::size_t j = 0; j < r.num_vars; ++j) e.Ain(i, j) = r.Ain(i, j);
    e.bin = r.bin;
  }
  e.lo = DenseVector(e.num_vars, -kInf);
  e.hi = DenseVector(e.num_vars, kInf);
  for (std::size_t j = 0; j < r.num_vars; ++j) {
    e.lo[j] = r.lo[j];
    e.hi[j] = r.hi[j];
  }
  return e;
}

QuadExpr hat_step_objective(const Formulation& form, std::size_t n,
                            const DenseVector& grad_at_k) {
  const RhoPair& rho = *form.rho;
  QuadExpr obj(flat_size(n));
  const double rr2 = 0.5 * (rho.rho1 + rho.rho2);
  for (std::size_t i = 0; i < n; ++i) {
    obj.add_quadratic(i, i, rr2);
    obj.add_quadratic(n + i, n + i, 1.0 + rr2);
    obj.add_quadratic(2 * n + i, 2 * n + i, 1.0 + 0.5 * rho.rho1);
    if (form.kind == FormulationKind::phat) {
      obj.add_quadratic(i, i, 0.25);
      obj.add_quadratic(3 * n + i, 3 * n + i, 0.25);
      obj.add_quadratic(i, 3 * n + i, 0.5);
    }
  }
  obj.add_quadratic(4 * n, 4 * n, rr2);
  for (std::size_t j = 0; j < flat_size(n); ++j) obj.add_linear(j, -grad_at_k[j]);
  return obj;
}

}  // namespace

ConvexSubproblem build_dca_subproblem(const Formulation& form, const QeicpInstance& inst,
                                      const FeasibleRegion& region,
                                      const DenseVector& grad_at_k) {
  if (grad_at_k.size() != flat_size(inst.n)) {
    throw DimensionError("build_dca_subproblem: gradient length mismatch");
  }
  if (region.num_vars != flat_size(inst.n)) {
    throw DimensionError("build_dca_subproblem: region size mismatch");
  }
  ConvexSubproblem sp;
  if (form.is_hat()) {
    require_rho(form);
    sp.objective = hat_step_objective(form, inst.n, grad_at_k);
    sp.region = region;
    return sp;
  }
  LiftedObjective lifted = lift_linearized_objective(form, inst, grad_at_k);
  sp.objective = std::move(lifted.objective);
  sp.quad_constraints = std::move(lifted.constraints);
  sp.region = extend_region(region, 8);
  return sp;
}

DenseVector dca_step_warm_start(const Formulation& form, const QeicpInstance& inst,
                                const IteratePoint& pt) {
  const std::size_t n = inst.n;
  DenseVector flat = flatten(pt);
  if (form.is_hat()) return flat;

  DenseVector v(flat_size(n) + 8);
  for (std::size_t j = 0; j < flat_size(n); ++j) v[j] = flat[j];
  double t1 = 0, t2 = 0, t3 = 0, t4 = 0, t5 = 0, t6 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pt.x[i], y = pt.y[i], z = pt.z[i];
    t1 += x * x;
    t2 += y * y;
    t3 += (x + y) * (x + y);
    t4 += (y + z) * (y + z);
    t5 += (y - x) * (y - x);
    t6 += (y - z) * (y - z);
  }
  const double l = pt.lambda;
  const double margin = 1.0;  // keeps the epigraph rows strictly slack
  const std::size_t T = flat_size(n);
  v[T + 0] = t1 + margin;
  v[T + 1] = t2 + margin;
  v[T + 2] = t3 + margin;
  v[T + 3] = t4 + margin;
  v[T + 4] = t5 + margin;
  v[T + 5] = t6 + margin;
  v[T + 6] = l * l + margin;
  v[T + 7] = (l + 1.0) * (l + 1.0) + margin;
  return v;
}

SolveResult solve_dca_step(const Formulation& form, const QeicpInstance& inst,
                           const FeasibleRegion& region, const DenseVector& grad_at_k,
                           const std::optional<IteratePoint>& warm_start,
                           const SolveOptions& opts) {
  const ConvexSubproblem sp = build_dca_subproblem(form, inst, region, grad_at_k);
  std::optional<DenseVector> warm;
  if (warm_start) warm = dca_step_warm_start(form, inst, *warm_start);
  return solve_convex(sp, warm, opts);
}

}  // namespace qeicp
