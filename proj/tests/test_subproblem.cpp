#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "qeicp/dc_core.hpp"
#include "qeicp/subproblem.hpp"

using namespace qeicp;

namespace {

FeasibleRegion simplex_region(std::size_t n) {
  FeasibleRegion r;
  r.n = 0;
  r.num_vars = n;
  r.Aeq = DenseMatrix(1, n);
  for (std::size_t j = 0; j < n; ++j) r.Aeq(0, j) = 1.0;
  r.beq = DenseVector(1);
  r.beq[0] = 1.0;
  r.lo = DenseVector(n, 0.0);
  r.hi = DenseVector(n, kInf);
  return r;
}

QeicpInstance unit_instance(std::size_t n, std::uint64_t seed) {
  return generate_random(RandomFamily::unit, n, seed);
}

}  // namespace

TEST_CASE("hand LP over the simplex") {
  ConvexSubproblem sp;
  sp.region = simplex_region(3);
  sp.objective = QuadExpr(3);
  sp.objective.add_linear(0, 1.0);
  sp.objective.add_linear(1, 2.0);
  sp.objective.add_linear(2, 5.0);
  const SolveResult res = solve_convex(sp);
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(res.point[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("projection onto the simplex matches the sort oracle") {
  SUBCASE("corner case c = (2,0,0)") {
    ConvexSubproblem sp;
    sp.region = simplex_region(3);
    sp.objective = QuadExpr(3);
    for (std::size_t i = 0; i < 3; ++i) sp.objective.add_quadratic(i, i, 1.0);
    sp.objective.add_linear(0, -4.0);  // ||x - (2,0,0)||^2 up to a constant
    const SolveResult res = solve_convex(sp);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.point[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(res.point[1] == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("random targets") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = 2 + static_cast<std::size_t>(uniform01(rng) * 9);
      const DenseVector c = oracle::random_vector(n, rng, -2.0, 2.0);
      ConvexSubproblem sp;
      sp.region = simplex_region(n);
      sp.objective = QuadExpr(n);
      for (std::size_t i = 0; i < n; ++i) {
        sp.objective.add_quadratic(i, i, 1.0);
        sp.objective.add_linear(i, -2.0 * c[i]);
      }
      const SolveResult res = solve_convex(sp);
      REQUIRE(res.status == SolveStatus::optimal);
      const DenseVector ref = oracle::project_simplex(c);
      CHECK((res.point - ref).norm_inf() <= 1e-6);
    }
  }
}

TEST_CASE("simplex quadratic minimum of the identity") {
  double value = 0.0;
  const DenseVector x = minimize_quadratic_over_simplex(DenseMatrix::identity(4), &value);
  CHECK(value == doctest::Approx(0.25).epsilon(1e-8));
  for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("small qcqp with an epigraph constraint") {
  // min t - x  s.t.  x^2 <= t: optimum at x = 1/2, t = 1/4, value -1/4.
  ConvexSubproblem sp;
  sp.region.n = 0;
  sp.region.num_vars = 2;
  sp.region.lo = DenseVector(2, -kInf);
  sp.region.hi = DenseVector(2, kInf);
  sp.objective = QuadExpr(2);
  sp.objective.add_linear(0, -1.0);
  sp.objective.add_linear(1, 1.0);
  QuadExpr con(2);
  con.add_quadratic(0, 0, 1.0);
  con.add_linear(1, -1.0);
  sp.quad_constraints.push_back(con);
  const SolveResult res = solve_convex(sp);
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(-0.25).epsilon(1e-7));
  CHECK(res.point[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.point[1] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("general inequality rows route through phase 1") {
  // min x0 + x1  s.t.  x0 + x1 >= 3 (as -x0 - x1 <= -3), x in [0, 10]^2
  ConvexSubproblem sp;
  sp.region.n = 0;
  sp.region.num_vars = 2;
  sp.region.lo = DenseVector(2, 0.0);
  sp.region.hi = DenseVector(2, 10.0);
  sp.region.Ain = DenseMatrix(1, 2);
  sp.region.Ain(0, 0) = -1.0;
  sp.region.Ain(0, 1) = -1.0;
  sp.region.bin = DenseVector(1);
  sp.region.bin[0] = -3.0;
  sp.objective = QuadExpr(2);
  sp.objective.add_linear(0, 1.0);
  sp.objective.add_linear(1, 1.0);
  // default start (box midpoint (5,5)) is feasible; force phase-1 with a bad warm start
  DenseVector warm(2, 0.25);
  const SolveResult res = solve_convex(sp, warm);
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("contradictory boxes are infeasible") {
  ConvexSubproblem sp;
  sp.region.n = 0;
  sp.region.num_vars = 2;
  sp.region.lo = DenseVector(2, 0.0);
  sp.region.hi = DenseVector(2, 1.0);
  sp.region.lo[1] = 2.0;  // lo > hi
  sp.objective = QuadExpr(2);
  const SolveResult res = solve_convex(sp);
  CHECK(res.status == SolveStatus::infeasible);
}

TEST_CASE("inconsistent rows are infeasible") {
  // x0 + x1 <= -1 with x >= 0
  ConvexSubproblem sp;
  sp.region.n = 0;
  sp.region.num_vars = 2;
  sp.region.lo = DenseVector(2, 0.0);
  sp.region.hi = DenseVector(2, kInf);
  sp.region.Ain = DenseMatrix(1, 2);
  sp.region.Ain(0, 0) = 1.0;
  sp.region.Ain(0, 1) = 1.0;
  sp.region.bin = DenseVector(1);
  sp.region.bin[0] = -1.0;
  sp.objective = QuadExpr(2);
  sp.objective.add_linear(0, 1.0);
  const SolveResult res = solve_convex(sp);
  CHECK(res.status == SolveStatus::infeasible);
}

TEST_CASE("degenerate boxes pin variables") {
  ConvexSubproblem sp;
  sp.region.n = 0;
  sp.region.num_vars = 2;
  sp.region.lo = DenseVector(2, 0.0);
  sp.region.hi = DenseVector(2, 1.0);
  sp.region.lo[0] = sp.region.hi[0] = 0.5;
  sp.objective = QuadExpr(2);
  sp.objective.add_quadratic(0, 0, 1.0);
  sp.objective.add_quadratic(1, 1, 1.0);
  sp.objective.add_linear(1, -0.4);
  const SolveResult res = solve_convex(sp);
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.point[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(res.point[1] == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("kkt certificate on solved subproblems") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(uniform01(rng) * 6);
    ConvexSubproblem sp;
    sp.region = simplex_region(n);
    sp.objective = QuadExpr(n);
    const DenseMatrix m = oracle::random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = (i == j) ? 0.5 : 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += m(k, i) * m(k, j);
        sp.objective.Q(i, j) = 2.0 * acc;
      }
    const DenseVector c = oracle::random_vector(n, rng);
    for (std::size_t i = 0; i < n; ++i) sp.objective.add_linear(i, c[i]);
    const SolveResult res = solve_convex(sp);
    REQUIRE(res.status == SolveStatus::optimal);
    const KktReport rep = kkt_report(sp, res);
    CHECK(rep.stationarity <= 1e-6);
    CHECK(rep.primal_feasibility <= 1e-6);
    CHECK(rep.dual_feasibility <= 1e-9);
    CHECK(rep.complementary_slackness <= 1e-6);
    CHECK(res.duality_gap <= 1e-8 * (1.0 + std::fabs(res.objective)) + 1e-12);
  }
}

TEST_CASE("region construction matches the variant definitions") {
  const QeicpInstance inst = unit_instance(4, 31);
  const LambdaBounds bounds{-1.0, 1.0, BoundMethod::external};

  SUBCASE("plain region has no boxes above and no sum row") {
    const FeasibleRegion r = build_region(RegionKind::C_plain, inst, bounds);
    CHECK(r.Ain.rows() == 0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.lo[i] == 0.0);
      CHECK(r.hi[i] == kInf);
      CHECK(r.lo[4 + i] == -kInf);
    }
    CHECK(r.lo[16] == -kInf);
    CHECK(r.Aeq.rows() == 6);
  }

  SUBCASE("positive branch boxes") {
    const FeasibleRegion r = build_region(RegionKind::C_hat_pos, inst, bounds);
    CHECK(r.lo[16] == 0.0);
    CHECK(r.hi[16] == 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.hi[i] == 1.0);
      CHECK(r.lo[4 + i] == 0.0);
      CHECK(r.hi[4 + i] == 1.0);
      CHECK(r.hi[8 + i] == 1.0);  // p^2 with p = 1
    }
    CHECK(r.Ain.rows() == 1);
    CHECK(r.bin[0] == 1.0);
  }

  SUBCASE("local window shrinks lambda and z") {
    const FeasibleRegion r = build_region(RegionKind::C_hat_local, inst, bounds,
                                          LocalWindow{0.5, 0.25});
    CHECK(r.lo[16] == doctest::Approx(0.25));
    CHECK(r.hi[16] == doctest::Approx(0.75));
    // p_k = 0.75
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.lo[4 + i] == doctest::Approx(0.0));
      CHECK(r.hi[4 + i] == doctest::Approx(0.75));
      CHECK(r.hi[8 + i] == doctest::Approx(0.75));
    }
    CHECK(r.bin[0] == doctest::Approx(0.5625));
  }

  SUBCASE("local window outside the interval is rejected") {
    CHECK_THROWS_AS(
        build_region(RegionKind::C_hat_local, inst, bounds, LocalWindow{0.9, 0.5}),
        std::invalid_argument);
  }
}

TEST_CASE("region nesting: local within branch within plain") {
  std::mt19937_64 rng(55);
  const QeicpInstance inst = unit_instance(5, 77);
  const LambdaBounds bounds{-2.0, 1.5, BoundMethod::external};
  const FeasibleRegion plain = build_region(RegionKind::C_plain, inst, bounds);
  const FeasibleRegion pos = build_region(RegionKind::C_hat_pos, inst, bounds);
  const FeasibleRegion local =
      build_region(RegionKind::C_hat_local, inst, bounds, LocalWindow{0.6, 0.3});

  // Feasible points of the local region: draw lambda in window, x on the
  // simplex, y = lambda x, z = lambda y, w from the coupling rows.
  for (int trial = 0; trial < 50; ++trial) {
    IteratePoint pt = IteratePoint::zeros(5);
    pt.x = oracle::sample_simplex(5, rng);
    pt.lambda = 0.3 + 0.6 * uniform01(rng);
    pt.y = pt.lambda * pt.x;
    pt.z = pt.lambda * pt.y;
    pt.w = inst.A.matvec(pt.z) + inst.B.matvec(pt.y) + inst.C.matvec(pt.x);
    const DenseVector v = flatten(pt);
    if (local.contains(v, 1e-9)) {
      CHECK(pos.contains(v, 1e-9));
      CHECK(plain.contains(v, 1e-9));
    }
  }
}

TEST_CASE("epigraph rows are tight at a lifted optimum") {
  std::mt19937_64 rng(202);
  const QeicpInstance inst = unit_instance(3, 9);
  const LambdaBounds bounds{-2.0, 2.0, BoundMethod::external};
  const FeasibleRegion region = build_region(RegionKind::C_plain, inst, bounds);
  const Formulation form = Formulation::plain(FormulationKind::pdc);

  IteratePoint pt = IteratePoint::zeros(3);
  pt.x = oracle::sample_simplex(3, rng);
  pt.lambda = 0.6;
  pt.y = pt.lambda * pt.x;
  pt.z = pt.lambda * pt.y;
  pt.w = inst.A.matvec(pt.z) + inst.B.matvec(pt.y) + inst.C.matvec(pt.x);

  const DenseVector grad = grad_h(form, inst, pt);
  const ConvexSubproblem sp = build_dca_subproblem(form, inst, region, grad);
  const SolveResult res = solve_dca_step(form, inst, region, grad, pt);
  REQUIRE(res.status == SolveStatus::optimal);
  REQUIRE(sp.quad_constraints.size() == 8);
  for (const QuadExpr& con : sp.quad_constraints) {
    CHECK(std::fabs(con.value(res.point)) <= 1e-7);
  }
}

TEST_CASE("dca step descends the linearized objective") {
  std::mt19937_64 rng(101);
  const QeicpInstance inst = unit_instance(4, 3);
  const LambdaBounds bounds{-3.0, 2.0, BoundMethod::external};
  const FeasibleRegion region = build_region(RegionKind::C_hat_pos, inst, bounds);
  const Formulation form = Formulation::hat(FormulationKind::phat, rho_constants(3.0));

  IteratePoint guess = IteratePoint::zeros(4);
  guess.x = oracle::sample_simplex(4, rng);
  guess.lambda = 0.5;
  guess.y = guess.lambda * guess.x;
  guess.z = guess.lambda * guess.y;
  guess.w = inst.A.matvec(guess.z) + inst.B.matvec(guess.y) + inst.C.matvec(guess.x);

  // First solve lands on a region-feasible point; use it as the warm start
  // of a second step with a different linearization and check descent there.
  const SolveResult first =
      solve_dca_step(form, inst, region, grad_h(form, inst, guess), guess);
  REQUIRE(first.status == SolveStatus::optimal);
  const IteratePoint feas = unflatten(first.point, 4);
  CHECK(region.contains(flatten(feas), 1e-7));

  const DenseVector grad = grad_h(form, inst, feas);
  const ConvexSubproblem sp = build_dca_subproblem(form, inst, region, grad);
  const SolveResult res = solve_dca_step(form, inst, region, grad, feas);
  REQUIRE(res.status == SolveStatus::optimal);
  const double at_warm = sp.objective.value(dca_step_warm_start(form, inst, feas));
  CHECK(res.objective <= at_warm + 1e-7 * (1.0 + std::fabs(at_warm)));
}
