#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "qeicp/model.hpp"

using namespace qeicp;

namespace {

QeicpInstance analytic_instance(std::size_t n) {
  // A = I, B = 0, C = -I: eigenvalues are exactly +1 and -1.
  QeicpInstance inst;
  inst.n = n;
  inst.A = DenseMatrix::identity(n);
  inst.B = DenseMatrix(n, n);
  inst.C = DenseMatrix::identity(n).scaled(-1.0);
  inst.label = "analytic";
  return inst;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("verify_solution accepts the analytic eigenpair") {
  const std::size_t n = 4;
  const QeicpInstance inst = analytic_instance(n);
  DenseVector x(n, 1.0 / n);
  const VerifyResult res = verify_solution(inst, 1.0, x, 1e-10);
  CHECK(res.ok);
  CHECK(res.report.worst() == 0.0);
}

TEST_CASE("verify_solution rejects a perturbed eigenvalue") {
  const std::size_t n = 4;
  const QeicpInstance inst = analytic_instance(n);
  DenseVector x(n, 1.0 / n);
  // w = (0.25 - 1) x, so |x^T w| = 0.75 ||x||^2 = 0.75/n
  const VerifyResult res = verify_solution(inst, 0.5, x, 1e-6);
  CHECK_FALSE(res.ok);
  CHECK(res.report.compl_residual == doctest::Approx(0.75 / n).epsilon(1e-12));
  CHECK(res.report.neg_w == doctest::Approx(0.75 / n).epsilon(1e-12));
  CHECK(res.report.eq_residual == 0.0);
}

TEST_CASE("verify_solution is scale invariant in x") {
  std::mt19937_64 rng(3);
  const QeicpInstance inst = generate_random(RandomFamily::unit, 6, 77);
  DenseVector x = oracle::sample_simplex(6, rng);
  const VerifyResult base = verify_solution(inst, 0.8, x, 1e-6);
  for (double c : {2.0, 4.0, 1024.0}) {
    DenseVector xs = x;
    xs *= c;
    const VerifyResult scaled = verify_solution(inst, 0.8, xs, 1e-6);
    CHECK(scaled.ok == base.ok);
    CHECK(scaled.report.compl_residual ==
          doctest::Approx(base.report.compl_residual).epsilon(1e-12));
  }
}

TEST_CASE("verify_solution rejects degenerate vectors") {
  const QeicpInstance inst = analytic_instance(3);
  DenseVector zero(3, 0.0);
  CHECK_THROWS_AS(verify_solution(inst, 1.0, zero, 1e-6), std::invalid_argument);
}

TEST_CASE("objective evaluators on the worked scalar point") {
  const QeicpInstance inst = analytic_instance(1);
  IteratePoint pt = IteratePoint::zeros(1);
  pt.x[0] = 1.0;
  pt.y[0] = 2.0;
  pt.z[0] = 3.0;
  pt.w[0] = 4.0;
  pt.lambda = 1.0;
  CHECK(eval_f(inst, pt) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(eval_f_prime(inst, pt) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("objectives vanish exactly at solution points") {
  std::mt19937_64 rng(8);
  const std::size_t n = 5;
  const QeicpInstance inst = generate_random(RandomFamily::unit, n, 5);
  IteratePoint pt = IteratePoint::zeros(n);
  pt.x = oracle::sample_simplex(n, rng);
  pt.lambda = 0.7;
  pt.y = pt.lambda * pt.x;
  pt.z = pt.lambda * pt.y;
  pt.w = DenseVector(n);  // complementary by construction: w = 0
  CHECK(eval_f(inst, pt) == 0.0);
  CHECK(eval_f_prime(inst, pt) == 0.0);
}

TEST_CASE("expanded objective form agrees with the defining one") {
  std::mt19937_64 rng(21);
  const std::size_t n = 7;
  const QeicpInstance inst = generate_random(RandomFamily::unit, n, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const IteratePoint pt = oracle::random_point(n, rng);
    const double direct = eval_f(inst, pt);
    const double l = pt.lambda;
    double ytxz = 0.0;
    for (std::size_t i = 0; i < n; ++i) ytxz += pt.y[i] * (pt.x[i] + pt.z[i]);
    const double expanded = pt.y.dot(pt.y) + pt.z.dot(pt.z) - 2.0 * l * ytxz +
                            l * l * (pt.x.dot(pt.x) + pt.y.dot(pt.y)) +
                            pt.x.dot(pt.w);
    CHECK(direct == doctest::Approx(expanded).epsilon(1e-10));
  }
}

TEST_CASE("f and f' differ exactly by the complementarity gap") {
  std::mt19937_64 rng(4);
  const std::size_t n = 6;
  const QeicpInstance inst = generate_random(RandomFamily::ten, n, 13);
  for (int trial = 0; trial < 500; ++trial) {
    const IteratePoint pt = oracle::random_point(n, rng);
    double min_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) min_sum += std::min(pt.x[i], pt.w[i]);
    const double lhs = eval_f(inst, pt) - eval_f_prime(inst, pt);
    const double rhs = pt.x.dot(pt.w) - min_sum;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("zero objective is equivalent to the solution conditions") {
  std::mt19937_64 rng(15);
  const std::size_t n = 4;
  const QeicpInstance inst = generate_random(RandomFamily::unit, n, 2);
  for (int trial = 0; trial < 200; ++trial) {
    IteratePoint pt = oracle::random_point(n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      pt.x[i] = std::fabs(pt.x[i]);
      pt.w[i] = std::fabs(pt.w[i]);
    }
    if (trial % 3 == 0) {
      // exact solution structure
      pt.y = pt.lambda * pt.x;
      pt.z = pt.lambda * pt.y;
      pt.w = DenseVector(n);
    }
    const bool zf = eval_f(inst, pt) == 0.0;
    const bool zfp = eval_f_prime(inst, pt) == 0.0;
    CHECK(zf == zfp);
    if (zf) {
      CHECK((pt.y - pt.lambda * pt.x).norm_inf() <= 1e-12);
      CHECK((pt.z - pt.lambda * pt.y).norm_inf() <= 1e-12);
      CHECK(std::fabs(pt.x.dot(pt.w)) <= 1e-12);
    }
  }
}

TEST_CASE("generator is deterministic and in range") {
  const QeicpInstance a = generate_random(RandomFamily::unit, 5, 99);
  const QeicpInstance b = generate_random(RandomFamily::unit, 5, 99);
  CHECK(a.B == b.B);
  CHECK(a.C == b.C);
  CHECK(a.A == DenseMatrix::identity(5));

  const QeicpInstance big = generate_random(RandomFamily::hundred, 10, 4);
  CHECK(big.A == DenseMatrix::identity(10));
  CHECK(big.B.min_entry() >= 0.0);
  CHECK(big.B.max_entry() <= 100.0);
  CHECK(big.C.max_entry() <= 0.0);
  CHECK(big.C.min_entry() >= -100.0);

  CHECK(cholesky_pd_check(generate_random(RandomFamily::unit, 20, 1).A).is_pd);
}

TEST_CASE("instance files round trip") {
  const QeicpInstance inst = generate_random(RandomFamily::ten, 6, 123);
  const std::string path = temp_path("qeicp_roundtrip.json");
  write_instance(inst, path);
  const QeicpInstance back = read_instance(path);
  CHECK(back.n == inst.n);
  CHECK(back.A == inst.A);
  CHECK(back.B == inst.B);
  CHECK(back.C == inst.C);
  CHECK(back.label == inst.label);
  std::remove(path.c_str());
}

TEST_CASE("mismatched matrix shapes are a structural error") {
  const std::string text =
      R"({"n": 3, "A": [[1,0,0],[0,1,0],[0,0,1]], "B": [[0,0],[0,0]], "C": [[1,0,0],[0,1,0],[0,0,1]]})";
  CHECK_THROWS_AS(parse_instance_text(text, "inline"), ParseError);
}

TEST_CASE("malformed json names the line") {
  const std::string text = "{\n  \"n\": 3,\n  oops\n}";
  try {
    parse_instance_text(text, "inline");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("inline:3") != std::string::npos);
  }
}

TEST_CASE("hand-written scalar instance loads") {
  const std::string text = R"({"n": 1, "A": [[1]], "B": [[0]], "C": [[-1]]})";
  const QeicpInstance inst = parse_instance_text(text, "inline");
  CHECK(inst.n == 1);
  // both eigenvalues by hand: lambda^2 - 1 = 0
  DenseVector x{1.0};
  CHECK(verify_solution(inst, 1.0, x, 1e-12).ok);
  CHECK(verify_solution(inst, -1.0, x, 1e-12).ok);
}

TEST_CASE("flatten and unflatten are inverse") {
  std::mt19937_64 rng(6);
  const IteratePoint pt = oracle::random_point(5, rng);
  const IteratePoint back = unflatten(flatten(pt), 5);
  CHECK(back.x == pt.x);
  CHECK(back.y == pt.y);
  CHECK(back.z == pt.z);
  CHECK(back.w == pt.w);
  CHECK(back.lambda == pt.lambda);
}
