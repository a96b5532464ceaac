#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qeicp/cli.hpp"

using namespace qeicp;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

const char* kAnalytic3 =
    R"({"n": 3, "A": [[1,0,0],[0,1,0],[0,0,1]], "B": [[0,0,0],[0,0,0],[0,0,0]],
       "C": [[-1,0,0],[0,-1,0],[0,0,-1]], "label": "analytic3"})";

}  // namespace

TEST_CASE("cmd_gen is deterministic byte for byte") {
  const std::string p1 = temp_path("qeicp_gen1.json");
  const std::string p2 = temp_path("qeicp_gen2.json");
  std::ostringstream log;
  CHECK(cmd_gen(RandomFamily::unit, 5, 42, p1, log) == 0);
  CHECK(cmd_gen(RandomFamily::unit, 5, 42, p2, log) == 0);
  CHECK(slurp(p1) == slurp(p2));
  const QeicpInstance inst = read_instance(p1);
  CHECK(inst.n == 5);
  CHECK(inst.A == DenseMatrix::identity(5));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("cmd_bounds emits the analytic interval") {
  const std::string inst_path = temp_path("qeicp_bounds_inst.json");
  write_text(inst_path, kAnalytic3);

  BoundsRequest req;
  req.instance_paths = {inst_path};
  req.methods = {BoundMethod::thm31, BoundMethod::thm32};
  req.format = "csv";
  std::ostringstream out, err;
  CHECK(cmd_bounds(req, out, err) == 0);
  const std::string text = out.str();
  CHECK(text.find("thm31_l") != std::string::npos);
  CHECK(text.find("analytic3") != std::string::npos);
  // thm32 on this instance is exactly [-1, 1]
  CHECK(text.find(",-1,1") != std::string::npos);
  std::remove(inst_path.c_str());
}

TEST_CASE("cmd_bounds marks assumption violations per method") {
  const std::string inst_path = temp_path("qeicp_bounds_npd.json");
  write_text(inst_path,
             R"({"n": 2, "A": [[-1,0],[0,1]], "B": [[0,0],[0,0]],
                "C": [[-1,0],[0,-1]], "label": "npd"})");
  BoundsRequest req;
  req.instance_paths = {inst_path};
  req.methods = {BoundMethod::thm32};
  std::ostringstream out, err;
  CHECK(cmd_bounds(req, out, err) == 0);
  CHECK(out.str().find("n/a") != std::string::npos);
  CHECK(err.str().find("assumption violated") != std::string::npos);
  std::remove(inst_path.c_str());
}

TEST_CASE("cmd_bounds reads an external sidecar column") {
  const std::string inst_path = temp_path("qeicp_sidecar_inst.json");
  const std::string sidecar = temp_path("qeicp_sidecar.json");
  write_text(inst_path, kAnalytic3);
  write_text(sidecar, R"({"analytic3": {"l": -9.5, "u": 3.25}})");

  BoundsRequest req;
  req.instance_paths = {inst_path};
  req.methods = {BoundMethod::thm32};
  req.external_sidecar = sidecar;
  req.format = "csv";
  std::ostringstream out, err;
  CHECK(cmd_bounds(req, out, err) == 0);
  CHECK(out.str().find("-9.5,3.25") != std::string::npos);
  std::remove(inst_path.c_str());
  std::remove(sidecar.c_str());
}

TEST_CASE("cmd_solve exit code reflects verification") {
  SUBCASE("solvable instance exits zero") {
    const std::string inst_path = temp_path("qeicp_solve_ok.json");
    write_text(inst_path, kAnalytic3);
    RunConfig cfg;
    cfg.instance_path = inst_path;
    cfg.solve.formulations = {FormulationKind::pdc};
    cfg.solve.tol = {1e-8, 1e-8, 1e-8};
    std::ostringstream out, err;
    CHECK(cmd_solve(cfg, out, err) == 0);
    CHECK(out.str().find("global_eps") != std::string::npos);
    std::remove(inst_path.c_str());
  }

  SUBCASE("infeasible instance exits nonzero") {
    const std::string inst_path = temp_path("qeicp_solve_bad.json");
    write_text(inst_path,
               R"({"n": 2, "A": [[1,0],[0,1]], "B": [[0,0],[0,0]],
                  "C": [[1,0],[0,1]], "label": "pd-C"})");
    RunConfig cfg;
    cfg.instance_path = inst_path;
    cfg.solve.formulations = {FormulationKind::pdc};
    cfg.solve.bound_method = BoundMethod::thm31;
    cfg.solve.max_iter = 200;
    std::ostringstream out, err;
    CHECK(cmd_solve(cfg, out, err) == 1);
    std::remove(inst_path.c_str());
  }

  SUBCASE("missing file exits with a usage error") {
    RunConfig cfg;
    cfg.instance_path = temp_path("qeicp_does_not_exist.json");
    std::ostringstream out, err;
    CHECK(cmd_solve(cfg, out, err) == 2);
    CHECK_FALSE(err.str().empty());
  }
}

TEST_CASE("cmd_verify reports residuals and exit codes") {
  const std::string inst_path = temp_path("qeicp_verify_inst.json");
  const std::string x_path = temp_path("qeicp_verify_x.json");
  write_text(inst_path, kAnalytic3);
  write_text(x_path, "[0.4, 0.3, 0.3]");

  std::ostringstream out, err;
  CHECK(cmd_verify(inst_path, 1.0, x_path, 1e-8, out, err) == 0);
  CHECK(out.str().find("PASS") != std::string::npos);

  std::ostringstream out2, err2;
  CHECK(cmd_verify(inst_path, 0.9, x_path, 1e-8, out2, err2) == 1);
  CHECK(out2.str().find("FAIL") != std::string::npos);
  CHECK(out2.str().find("compl_residual") != std::string::npos);

  write_text(x_path, "[0, 0, 0]");
  std::ostringstream out3, err3;
  CHECK(cmd_verify(inst_path, 1.0, x_path, 1e-8, out3, err3) == 2);
  std::remove(inst_path.c_str());
  std::remove(x_path.c_str());
}

TEST_CASE("bench rows round trip through csv exactly") {
  BenchRequest req;
  req.families = {RandomFamily::unit};
  req.sizes = {5};
  req.eps_values = {1e-2};
  req.formulations = {FormulationKind::phat, FormulationKind::pdc};
  req.with_local = true;
  req.base_seed = 3;
  req.max_iter = 300;
  req.threads = 1;

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<BenchmarkRow> rows = run_bench(req);
  const double elapsed = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - t0).count();

  // pdc, phat, phat+local
  REQUIRE(rows.size() == 3);
  for (const BenchmarkRow& r : rows) {
    CHECK(r.family == "unit");
    CHECK(r.n == 5);
    CHECK(r.seed == bench_cell_seed(req, RandomFamily::unit, 5));
    CHECK(r.iterations >= 1);
    CHECK(r.cpu_seconds < 120.0);  // per-cell budget
  }
  CHECK(elapsed < 120.0);

  const std::string csv = bench_to_csv(rows);
  const std::vector<BenchmarkRow> back = bench_from_csv(csv);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i] == rows[i]);
}

TEST_CASE("bench cell seeds are deterministic per family and size") {
  BenchRequest req;
  req.base_seed = 10;
  CHECK(bench_cell_seed(req, RandomFamily::unit, 5) == 15);
  CHECK(bench_cell_seed(req, RandomFamily::ten, 5) == 1015);
  CHECK(bench_cell_seed(req, RandomFamily::hundred, 30) == 2040);
}

TEST_CASE("read_vector_file accepts both layouts") {
  const std::string path = temp_path("qeicp_vec.json");
  write_text(path, "[1.5, 2.5]");
  DenseVector v = read_vector_file(path);
  REQUIRE(v.size() == 2);
  CHECK(v[1] == 2.5);
  write_text(path, R"({"x": [3.0]})");
  v = read_vector_file(path);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == 3.0);
  write_text(path, R"({"y": [3.0]})");
  CHECK_THROWS_AS(read_vector_file(path), ParseError);
  std::remove(path.c_str());
}
