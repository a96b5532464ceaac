#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qeicp/cli.hpp"

namespace {

using namespace qeicp;

std::vector<FormulationKind> parse_formulations(const std::string& spec) {
  if (spec == "all") {
    return {FormulationKind::pdc, FormulationKind::phat, FormulationKind::pprime,
            FormulationKind::phatprime};
  }
  std::vector<FormulationKind> out;
  std::string cur;
  std::istringstream in(spec);
  while (std::getline(in, cur, ',')) {
    const auto k = formulation_from_name(cur);
    if (!k) throw CLI::ValidationError("--formulation", "unknown formulation: " + cur);
    out.push_back(*k);
  }
  if (out.empty()) throw CLI::ValidationError("--formulation", "empty formulation list");
  return out;
}

std::vector<Branch> parse_branches(const std::string& spec) {
  if (spec == "both") return {Branch::plus, Branch::minus};
  if (spec == "plus") return {Branch::plus};
  if (spec == "minus") return {Branch::minus};
  throw CLI::ValidationError("--branch", "expected plus, minus or both");
}

BoundMethod parse_bound_method(const std::string& spec) {
  if (spec == "thm31") return BoundMethod::thm31;
  if (spec == "thm32") return BoundMethod::thm32;
  if (spec == "lpup") return BoundMethod::lp_up;
  throw CLI::ValidationError("--bounds", "expected thm31, thm32 or lpup");
}

RandomFamily parse_family(const std::string& spec) {
  const auto f = family_from_name(spec);
  if (!f) throw CLI::ValidationError("family", "expected unit, ten or hundred");
  return *f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QEiCP solver toolkit: difference-of-convex formulations, bound "
               "estimators and benchmark drivers"};
  app.require_subcommand(1);

  // gen
  std::string gen_family = "unit", gen_out;
  std::size_t gen_n = 5;
  std::uint64_t gen_seed = 1;
  CLI::App* gen = app.add_subcommand("gen", "generate a random benchmark instance");
  gen->add_option("family", gen_family, "unit | ten | hundred")->required();
  gen->add_option("n", gen_n, "dimension")->required();
  gen->add_option("out", gen_out, "output instance file")->required();
  gen->add_option("--seed", gen_seed, "generator seed");

  // bounds
  BoundsRequest bounds_req;
  std::string bounds_methods = "thm31,thm32";
  std::string bounds_format = "markdown";
  std::string bounds_out, bounds_external;
  CLI::App* bounds = app.add_subcommand("bounds", "lambda interval comparison table");
  bounds->add_option("instances", bounds_req.instance_paths, "instance files")
      ->required();
  bounds->add_option("--methods", bounds_methods, "comma list of thm31,thm32,lpup");
  bounds->add_flag("--bounds-literal", bounds_req.literal_gamma,
                   "use the strict gamma variant (see README)");
  bounds->add_option("--external", bounds_external, "sidecar JSON with external bounds");
  bounds->add_option("--format", bounds_format, "csv | markdown");
  bounds->add_option("-o,--out", bounds_out, "write the table to a file");

  // solve
  RunConfig run;
  std::string solve_instance, solve_formulation = "all", solve_branch = "both";
  std::string solve_bounds = "thm32", solve_family = "unit", solve_format = "markdown";
  std::string solve_out;
  bool solve_literal = false, solve_local = false;
  CLI::App* solve = app.add_subcommand("solve", "run the solvers on one instance");
  solve->add_option("instance", solve_instance, "instance file (omit to generate)");
  solve->add_option("--gen-family", solve_family, "generator family when no file given");
  solve->add_option("--n", run.n, "generator dimension");
  solve->add_option("--seed", run.seed, "generator seed");
  solve->add_option("--formulation", solve_formulation,
                    "pdc,phat,pprime,phatprime or all");
  solve->add_option("--bounds", solve_bounds, "thm31 | thm32 | lpup");
  solve->add_flag("--bounds-literal", solve_literal,
                  "use the strict gamma variant (see README)");
  solve->add_option("--branch", solve_branch, "plus | minus | both");
  solve->add_flag("--local-dc", solve_local, "refresh the decomposition each iteration");
  solve->add_option("--eps1", run.solve.tol.eps1, "objective-change tolerance");
  solve->add_option("--eps2", run.solve.tol.eps2, "step-norm tolerance");
  solve->add_option("--eps3", run.solve.tol.eps3, "globality tolerance");
  solve->add_option("--max-iter", run.solve.max_iter, "iteration cap");
  solve->add_option("--format", solve_format, "csv | markdown");
  solve->add_option("-o,--out", solve_out, "write the report to a file");

  // bench
  BenchRequest bench_req;
  std::string bench_families = "unit,ten,hundred", bench_sizes = "5,10,20,30,40,50";
  std::string bench_eps = "1e-3,1e-4", bench_formulation = "all", bench_branch = "plus";
  std::string bench_bounds = "thm32", bench_out;
  bool bench_no_local = false;
  CLI::App* bench = app.add_subcommand("bench", "seeded benchmark suite (CSV)");
  bench->add_option("--families", bench_families, "comma list of unit,ten,hundred");
  bench->add_option("--sizes", bench_sizes, "comma list of dimensions");
  bench->add_option("--eps", bench_eps, "comma list of tolerance settings");
  bench->add_option("--formulation", bench_formulation, "formulations to run");
  bench->add_option("--branch", bench_branch, "plus | minus | both");
  bench->add_option("--bounds", bench_bounds, "thm31 | thm32 | lpup");
  bench->add_flag("--no-local", bench_no_local, "skip the local-window variants");
  bench->add_option("--seed", bench_req.base_seed, "base seed of the suite");
  bench->add_option("--max-iter", bench_req.max_iter, "iteration cap");
  bench->add_option("--threads", bench_req.threads, "worker pool size (0 = auto)");
  bench->add_option("-o,--out", bench_out, "write CSV to a file");

  // verify
  std::string verify_instance, verify_xfile;
  double verify_lambda = 0.0, verify_tol = 1e-6;
  CLI::App* verify = app.add_subcommand("verify", "check a candidate eigenpair");
  verify->add_option("instance", verify_instance, "instance file")->required();
  verify->add_option("lambda", verify_lambda, "candidate eigenvalue")->required();
  verify->add_option("x", verify_xfile, "candidate eigenvector file (JSON array)")
      ->required();
  verify->add_option("--tol", verify_tol, "acceptance tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen(parse_family(gen_family), gen_n, gen_seed, gen_out, std::cout);
    }
    if (bounds->parsed()) {
      bounds_req.methods.clear();
      std::istringstream in(bounds_methods);
      std::string tok;
      while (std::getline(in, tok, ',')) bounds_req.methods.push_back(parse_bound_method(tok));
      bounds_req.format = bounds_format;
      if (!bounds_out.empty()) bounds_req.out_path = bounds_out;
      if (!bounds_external.empty()) bounds_req.external_sidecar = bounds_external;
      return cmd_bounds(bounds_req, std::cout, std::cerr);
    }
    if (solve->parsed()) {
      if (!solve_instance.empty()) run.instance_path = solve_instance;
      run.family = parse_family(solve_family);
      run.solve.formulations = parse_formulations(solve_formulation);
      run.solve.branches = parse_branches(solve_branch);
      run.solve.bound_method = parse_bound_method(solve_bounds);
      run.solve.bounds_literal = solve_literal;
      run.solve.local_dc = solve_local;
      run.format = solve_format;
      if (!solve_out.empty()) run.out_path = solve_out;
      return cmd_solve(run, std::cout, std::cerr);
    }
    if (bench->parsed()) {
      bench_req.families.clear();
      {
        std::istringstream in(bench_families);
        std::string tok;
        while (std::getline(in, tok, ',')) bench_req.families.push_back(parse_family(tok));
      }
      bench_req.sizes.clear();
      {
        std::istringstream in(bench_sizes);
        std::string tok;
        while (std::getline(in, tok, ',')) bench_req.sizes.push_back(std::stoul(tok));
      }
      bench_req.eps_values.clear();
      {
        std::istringstream in(bench_eps);
        std::string tok;
        while (std::getline(in, tok, ',')) bench_req.eps_values.push_back(std::stod(tok));
      }
      bench_req.formulations = parse_formulations(bench_formulation);
      bench_req.branches = parse_branches(bench_branch);
      bench_req.bound_method = parse_bound_method(bench_bounds);
      bench_req.with_local = !bench_no_local;
      std::optional<std::string> out_path;
      if (!bench_out.empty()) out_path = bench_out;
      return cmd_bench(bench_req, out_path, std::cout, std::cerr);
    }
    if (verify->parsed()) {
      return cmd_verify(verify_instance, verify_lambda, verify_xfile, verify_tol,
                        std::cout, std::cerr);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
