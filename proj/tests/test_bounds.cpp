#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "qeicp/bounds.hpp"
#include "qeicp/dca.hpp"

using namespace qeicp;

namespace {

QeicpInstance analytic_instance(std::size_t n) {
  QeicpInstance inst;
  inst.n = n;
  inst.A = DenseMatrix::identity(n);
  inst.B = DenseMatrix(n, n);
  inst.C = DenseMatrix::identity(n).scaled(-1.0);
  inst.label = "analytic";
  return inst;
}

}  // namespace

TEST_CASE("entrywise interval on the analytic instance") {
  for (std::size_t n : {std::size_t{2}, std::size_t{5}, std::size_t{9}}) {
    const BoundsResult r = lambda_bounds_thm31(analytic_instance(n));
    // s = 1/n over the simplex, beta = gamma = 0, alpha = n
    const double root = std::sqrt(static_cast<double>(n));
    CHECK(r.inter.beta == 0.0);
    CHECK(r.inter.gamma == 0.0);
    CHECK(r.bounds.l == doctest::Approx(-root).epsilon(1e-6));
    CHECK(r.bounds.u == doctest::Approx(root).epsilon(1e-6));
    CHECK(r.bounds.u >= r.bounds.l);
  }
}

TEST_CASE("eigenvalue interval on the analytic instance is exactly [-1,1]") {
  const BoundsResult r = lambda_bounds_thm32(analytic_instance(6));
  CHECK(r.inter.s == 1.0);
  CHECK(r.inter.beta == 0.0);
  CHECK(r.inter.gamma == 0.0);
  CHECK(r.inter.alpha == 1.0);
  CHECK(r.bounds.l == -1.0);
  CHECK(r.bounds.u == 1.0);
}

TEST_CASE("both intervals require a positive definite A") {
  QeicpInstance inst = analytic_instance(3);
  inst.A(0, 0) = -1.0;
  CHECK_THROWS_AS(lambda_bounds_thm31(inst), AssumptionError);
  CHECK_THROWS_AS(lambda_bounds_thm32(inst), AssumptionError);
}

TEST_CASE("negative alpha reports an assumption violation") {
  // C strongly positive definite: no eigenvalue exists and alpha < 0.
  QeicpInstance inst = analytic_instance(3);
  inst.C = DenseMatrix::identity(3).scaled(2.0);
  CHECK_THROWS_AS(lambda_bounds_thm32(inst), AssumptionError);
}

TEST_CASE("interval ordering holds on random instances") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const QeicpInstance inst = generate_random(RandomFamily::unit, 6, seed);
    const BoundsResult a = lambda_bounds_thm31(inst);
    const BoundsResult b = lambda_bounds_thm32(inst);
    CHECK(a.bounds.u >= a.bounds.l);
    CHECK(b.bounds.u >= b.bounds.l);
    CHECK(a.inter.alpha >=
          std::max(a.inter.beta * a.inter.beta, a.inter.gamma * a.inter.gamma) - 1e-12);
  }
}

TEST_CASE("literal gamma branch never exceeds the repaired one") {
  const QeicpInstance inst = generate_random(RandomFamily::unit, 8, 5);
  const BoundsResult fixed = lambda_bounds_thm32(inst, false);
  const BoundsResult literal = lambda_bounds_thm32(inst, true);
  CHECK(literal.inter.gamma <= fixed.inter.gamma + 1e-12);
}

TEST_CASE("s0 membership checks") {
  QeicpInstance inst = analytic_instance(4);
  CHECK(check_c_not_in_s0(inst));  // C = -I: Cx <= 0 for x >= 0, nonzero
  inst.C = DenseMatrix::identity(4);
  CHECK_FALSE(check_c_not_in_s0(inst));  // C = I: x = e/n works
  inst.C = DenseMatrix(4, 4);
  CHECK_FALSE(check_c_not_in_s0(inst));  // C = 0
}

TEST_CASE("lp/up interval on the analytic instance") {
  const QeicpInstance inst = analytic_instance(4);
  LpUpDiagnostics diag;
  const LambdaBounds b = lambda_bounds_lp_up(inst, &diag);
  CHECK(b.l > 0.0);
  CHECK(b.l <= 1.0 + 1e-6);  // true positive eigenvalue is 1
  CHECK(b.u >= 1.0 - 1e-6);
  // p = 2e when B = 0 and C = -I
  for (std::size_t i = 0; i < 4; ++i) CHECK(diag.p[i] == doctest::Approx(2.0));
  // parametric values are nonincreasing across rounds
  for (std::size_t k = 1; k < diag.dinkelbach_val.size(); ++k) {
    CHECK(diag.dinkelbach_val[k] <= diag.dinkelbach_val[k - 1] + 1e-9);
  }
}

TEST_CASE("dinkelbach agrees with a grid search at n=2") {
  const QeicpInstance inst = generate_random(RandomFamily::unit, 2, 9);
  LpUpDiagnostics diag;
  const LambdaBounds b = lambda_bounds_lp_up(inst, &diag);

  // brute-force the fractional maximum over the joint simplex
  const DenseMatrix a_sym = inst.A.symmetrized();
  double best = 0.0;
  const int grid = 120;
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; i + j <= grid; ++j) {
      for (int k = 0; i + j + k <= grid; ++k) {
        const double x0 = static_cast<double>(i) / grid;
        const double x1 = static_cast<double>(j) / grid;
        const double y0 = static_cast<double>(k) / grid;
        const double y1 = 1.0 - x0 - x1 - y0;
        if (y1 < 0.0) continue;
        DenseVector y{y0, y1};
        const double denom = x0 * x0 + x1 * x1 + a_sym.quad_form(y);
        if (denom <= 1e-12) continue;
        const double val = (diag.p[0] * y0 + diag.p[1] * y1) / denom;
        best = std::max(best, val);
      }
    }
  }
  CHECK(b.u >= best - 1e-6);
  CHECK(b.u <= best + 0.05 * (1.0 + best));  // grid resolution slack
}

TEST_CASE("lp/up rejects instances with C in S0") {
  QeicpInstance inst = analytic_instance(3);
  inst.C = DenseMatrix::identity(3);
  CHECK_THROWS_AS(lambda_bounds_lp_up(inst), AssumptionError);
}

TEST_CASE("variable boxes from the interval") {
  const QeicpInstance inst = analytic_instance(3);

  SUBCASE("worked case l=-1, u=1") {
    const VariableBox box = variable_box({-1.0, 1.0, BoundMethod::external}, inst);
    CHECK(box.p == 1.0);
    CHECK(box.y_lo == -1.0);
    CHECK(box.y_hi == 1.0);
    CHECK(box.z_hi == 1.0);
    CHECK(box.z_sum_hi == 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(box.w_hi[i] == doctest::Approx(2.0));
  }

  SUBCASE("interval collapsed at zero") {
    const VariableBox box = variable_box({0.0, 0.0, BoundMethod::external}, inst);
    CHECK(box.p == 0.0);
    CHECK(box.y_lo == 0.0);
    CHECK(box.y_hi == 0.0);
    CHECK(box.z_hi == 0.0);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(box.w_hi[i] == doctest::Approx(inst.C.row_norm2(i)));
  }

  SUBCASE("widening the interval never shrinks a box") {
    const QeicpInstance rnd = generate_random(RandomFamily::unit, 5, 4);
    const VariableBox small = variable_box({-0.5, 0.5, BoundMethod::external}, rnd);
    const VariableBox wide = variable_box({-1.5, 2.0, BoundMethod::external}, rnd);
    CHECK(wide.y_lo <= small.y_lo);
    CHECK(wide.y_hi >= small.y_hi);
    CHECK(wide.z_hi >= small.z_hi);
    for (std::size_t i = 0; i < 5; ++i) CHECK(wide.w_hi[i] >= small.w_hi[i]);
  }
}

TEST_CASE("curvature constants") {
  const RhoPair zero = rho_constants(0.0);
  CHECK(zero.rho1 == 2.0);
  CHECK(zero.rho2 == 2.0);
  const RhoPair one = rho_constants(1.0);
  CHECK(one.rho1 == 8.0);
  CHECK(one.rho2 == 12.0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = 5.0 * uniform01(rng);
    const double b = a + 5.0 * uniform01(rng);
    const RhoPair ra = rho_constants(a), rb = rho_constants(b);
    CHECK(ra.rho1 <= rb.rho1);
    CHECK(ra.rho2 <= rb.rho2);
  }
  CHECK_THROWS_AS(rho_constants(-0.1), std::invalid_argument);
}

TEST_CASE("verified eigenvalues land inside both intervals") {
  int verified = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const QeicpInstance inst = generate_random(RandomFamily::unit, 5, seed);
    const LambdaBounds b31 = lambda_bounds_thm31(inst).bounds;
    const LambdaBounds b32 = lambda_bounds_thm32(inst).bounds;
    SolveConfig cfg;
    cfg.formulations = {FormulationKind::phat};
    cfg.tol = {1e-12, 1e-12, 1e-3};  // run until the globality test can trigger
    cfg.max_iter = 4000;
    for (const DcaOutcome& out : solve_qeicp(inst, cfg)) {
      if (out.status != DcaStatus::global_eps || !out.solution) continue;
      if (out.solution->residual.worst() > 1e-6) continue;
      ++verified;
      CHECK(b31.contains(out.solution->lambda, 1e-9));
      CHECK(b32.contains(out.solution->lambda, 1e-9));
    }
  }
  CHECK(verified > 0);
}
