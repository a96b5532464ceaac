#include "qeicp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace qeicp {

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

namespace {

std::string format_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QEICP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace

QeicpInstance load_run_instance(const RunConfig& cfg) {
  if (cfg.instance_path) return read_instance(*cfg.instance_path);
  return generate_random(cfg.family, cfg.n, cfg.seed);
}

int cmd_gen(RandomFamily family, std::size_t n, std::uint64_t seed,
            const std::string& out_path, std::ostream& log) {
  const QeicpInstance inst = generate_random(family, n, seed);
  write_instance(inst, out_path);
  log << "wrote " << inst.label << " to " << out_path << "\n";
  return 0;
}

namespace {

struct BoundsCell {
  bool ok = false;
  LambdaBounds bounds;
  std::string note;
};

BoundsCell bounds_cell(const QeicpInstance& inst, BoundMethod m, bool literal) {
  BoundsCell cell;
  try {
    switch (m) {
      case BoundMethod::thm31:
        cell.bounds = lambda_bounds_thm31(inst).bounds;
        break;
      case BoundMethod::thm32:
        cell.bounds = lambda_bounds_thm32(inst, literal).bounds;
        break;
      case BoundMethod::lp_up:
        cell.bounds = lambda_bounds_lp_up(inst);
        break;
      case BoundMethod::external:
        cell.note = "external";
        return cell;
    }
    cell.ok = true;
  } catch (const AssumptionError& e) {
    cell.note = std::string("assumption violated: ") + e.what();
  } catch (const NumericError& e) {
    cell.note = std::string("numeric: ") + e.what();
  }
  return cell;
}

std::optional<LambdaBounds> sidecar_lookup(const std::string& sidecar_path,
                                           const std::string& label) {
  std::ifstream in(sidecar_path);
  if (!in) throw ParseError(sidecar_path + ": cannot open sidecar file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(sidecar_path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains(label)) return std::nullopt;
  const auto& entry = doc[label];
  if (!entry.contains("l") || !entry.contains("u")) return std::nullopt;
  return LambdaBounds{entry["l"].get<double>(), entry["u"].get<double>(),
                      BoundMethod::external};
}

}  // namespace

int cmd_bounds(const BoundsRequest& req, std::ostream& out, std::ostream& err) {
  if (req.instance_paths.empty()) {
    err << "bounds: no instances given\n";
    return 2;
  }
  const bool csv = req.format == "csv";
  std::ostringstream body;
  if (csv) {
    body << "label,n";
    for (BoundMethod m : req.methods) {
      body << "," << bound_method_name(m) << "_l," << bound_method_name(m) << "_u";
    }
    if (req.external_sidecar) body << ",external_l,external_u";
    body << "\n";
  } else {
    body << "| problem | n |";
    for (BoundMethod m : req.methods) {
      body << " " << bound_method_name(m) << " l | " << bound_method_name(m) << " u |";
    }
    if (req.external_sidecar) body << " external l | external u |";
    body << "\n|---|---|";
    for (std::size_t k = 0; k < req.methods.size(); ++k) body << "---|---|";
    if (req.external_sidecar) body << "---|---|";
    body << "\n";
  }

  int rc = 0;
  for (const std::string& path : req.instance_paths) {
    QeicpInstance inst;
    try {
      inst = read_instance(path);
    } catch (const std::exception& e) {
      err << "bounds: " << e.what() << "\n";
      return 2;
    }
    const std::string label = inst.label.empty() ? path : inst.label;
    if (csv) {
      body << label << "," << inst.n;
    } else {
      body << "| " << label << " | " << inst.n << " |";
    }
    for (BoundMethod m : req.methods) {
      const BoundsCell cell = bounds_cell(inst, m, req.literal_gamma);
      if (cell.ok) {
        if (csv) {
          body << "," << format_full(cell.bounds.l) << "," << format_full(cell.bounds.u);
        } else {
          body << " " << format_short(cell.bounds.l) << " | "
               << format_short(cell.bounds.u) << " |";
        }
      } else {
        err << "bounds[" << bound_method_name(m) << "] " << label << ": " << cell.note
            << "\n";
        if (csv) {
          body << ",,";
        } else {
          body << " n/a | n/a |";
        }
      }
    }
    if (req.external_sidecar) {
      const auto ext = sidecar_lookup(*req.external_sidecar, label);
      if (ext) {
        if (csv) {
          body << "," << format_full(ext->l) << "," << format_full(ext->u);
        } else {
          body << " " << format_short(ext->l) << " | " << format_short(ext->u) << " |";
        }
      } else {
        body << (csv ? ",," : " n/a | n/a |");
      }
    }
    body << "\n";
  }

  if (req.out_path) {
    std::ofstream f(*req.out_path);
    if (!f) {
      err << "bounds: cannot open " << *req.out_path << "\n";
      return 2;
    }
    f << body.str();
  } else {
    out << body.str();
  }
  return rc;
}

namespace {

double outcome_residual(const DcaOutcome& out) {
  if (out.solution) return out.solution->residual.worst();
  return kInf;
}

}  // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  QeicpInstance inst;
  try {
    inst = load_run_instance(cfg);
  } catch (const std::exception& e) {
    err << "solve: " << e.what() << "\n";
    return 2;
  }

  std::vector<DcaOutcome> outcomes;
  LambdaBounds bounds;
  try {
    bounds = compute_bounds(inst, cfg.solve);
    outcomes = solve_qeicp(inst, cfg.solve);
  } catch (const std::exception& e) {
    err << "solve: " << e.what() << "\n";
    return 2;
  }

  const bool csv = cfg.format == "csv";
  std::ostringstream body;
  if (!csv) {
    body << "instance: " << (inst.label.empty() ? "(unnamed)" : inst.label)
         << " (n = " << inst.n << ")\n";
    body << "lambda bounds [" << bound_method_name(bounds.method)
         << "]: l = " << format_short(bounds.l) << ", u = " << format_short(bounds.u)
         << "\n\n";
    body << "| formulation | branch | local | lambda | IT | CPU | status | f* | residual |\n";
    body << "|---|---|---|---|---|---|---|---|---|\n";
  } else {
    body << "formulation,branch,local_dc,lambda,iterations,cpu_seconds,status,f_star,"
            "residual\n";
  }

  bool any_verified = false;
  for (const DcaOutcome& o : outcomes) {
    const bool verified = o.status == DcaStatus::global_eps && o.solution;
    any_verified = any_verified || verified;
    const double lambda = o.solution ? o.solution->lambda : o.point.lambda;
    const double res = outcome_residual(o);
    if (csv) {
      body << formulation_name(o.formulation) << "," << branch_name(o.branch) << ","
           << (o.local_dc ? 1 : 0) << "," << format_full(lambda) << ","
           << o.trace.iterations() << "," << format_full(o.wall_time) << ","
           << dca_status_name(o.status) << "," << format_full(o.f_star) << ","
           << format_full(res) << "\n";
    } else {
      body << "| " << formulation_name(o.formulation) << " | " << branch_name(o.branch)
           << " | " << (o.local_dc ? "yes" : "no") << " | " << format_short(lambda)
           << " | " << o.trace.iterations() << " | " << format_short(o.wall_time)
           << " | " << dca_status_name(o.status) << " | " << format_short(o.f_star)
           << " | " << (o.solution ? format_short(res) : std::string("-")) << " |\n";
    }
  }

  if (cfg.out_path) {
    std::ofstream f(*cfg.out_path);
    if (!f) {
      err << "solve: cannot open " << *cfg.out_path << "\n";
      return 2;
    }
    f << body.str();
  } else {
    out << body.str();
  }
  return any_verified ? 0 : 1;
}

std::uint64_t bench_cell_seed(const BenchRequest& req, RandomFamily family,
                              std::size_t n) {
  std::size_t family_index = 0;
  switch (family) {
    case RandomFamily::unit: family_index = 0; break;
    case RandomFamily::ten: family_index = 1; break;
    case RandomFamily::hundred: family_index = 2; break;
  }
  return req.base_seed + 1000 * family_index + n;
}

std::vector<BenchmarkRow> run_bench(const BenchRequest& req) {
  struct Cell {
    RandomFamily family;
    std::size_t n;
    double eps;
    FormulationKind kind;
    Branch branch;
    bool local;
  };
  std::vector<Cell> cells;
  for (RandomFamily fam : req.families) {
    for (std::size_t n : req.sizes) {
      for (double eps : req.eps_values) {
        for (FormulationKind kind : req.formulations) {
          const bool hat = kind == FormulationKind::phat ||
                           kind == FormulationKind::phatprime;
          for (Branch b : req.branches) {
            cells.push_back({fam, n, eps, kind, b, false});
            if (req.with_local && hat) cells.push_back({fam, n, eps, kind, b, true});
          }
        }
      }
    }
  }

  std::vector<BenchmarkRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const std::uint64_t seed = bench_cell_seed(req, cell.family, cell.n);
      const QeicpInstance inst = generate_random(cell.family, cell.n, seed);

      SolveConfig sc;
      sc.formulations = {cell.kind};
      sc.branches = {cell.branch};
      sc.bound_method = req.bound_method;
      sc.tol = {cell.eps, cell.eps, cell.eps};
      sc.max_iter = req.max_iter;
      sc.local_dc = cell.local;

      BenchmarkRow row;
      row.family = family_name(cell.family);
      row.n = cell.n;
      row.seed = seed;
      row.eps = cell.eps;
      row.formulation = formulation_name(cell.kind);
      row.branch = branch_name(cell.branch);
      row.local_dc = cell.local;
      try {
        const std::vector<DcaOutcome> outs = solve_qeicp(inst, sc);
        const DcaOutcome& o = outs.front();
        row.lambda = o.solution ? o.solution->lambda : o.point.lambda;
        row.iterations = static_cast<int>(o.trace.iterations());
        row.cpu_seconds = o.wall_time;
        row.status = dca_status_name(o.status);
        row.f_star = o.f_star;
        row.residual = outcome_residual(o);
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        row.lambda = 0.0;
        row.f_star = kInf;
        row.residual = kInf;
      }
      rows[i] = std::move(row);
    }
  };

  const std::size_t workers = std::min(worker_count(req.threads), std::max<std::size_t>(cells.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (std::thread& th : pool) th.join();
  return rows;
}

std::string bench_to_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream os;
  os << "family,n,seed,eps,formulation,branch,local_dc,lambda,iterations,cpu_seconds,"
        "status,f_star,residual\n";
  for (const BenchmarkRow& r : rows) {
    os << r.family << "," << r.n << "," << r.seed << "," << format_full(r.eps) << ","
       << r.formulation << "," << r.branch << "," << (r.local_dc ? 1 : 0) << ","
       << format_full(r.lambda) << "," << r.iterations << ","
       << format_full(r.cpu_seconds) << "," << r.status << "," << format_full(r.f_star)
       << "," << format_full(r.residual) << "\n";
  }
  return os.str();
}

std::vector<BenchmarkRow> bench_from_csv(const std::string& text) {
  std::vector<BenchmarkRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
    if (fields.size() != 13) {
      throw ParseError("bench csv line " + std::to_string(lineno) + ": expected 13 fields, got " +
                       std::to_string(fields.size()));
    }
    BenchmarkRow r;
    r.family = fields[0];
    r.n = static_cast<std::size_t>(std::strtoull(fields[1].c_str(), nullptr, 10));
    r.seed = std::strtoull(fields[2].c_str(), nullptr, 10);
    r.eps = std::strtod(fields[3].c_str(), nullptr);
    r.formulation = fields[4];
    r.branch = fields[5];
    r.local_dc = fields[6] == "1";
    r.lambda = std::strtod(fields[7].c_str(), nullptr);
    r.iterations = static_cast<int>(std::strtol(fields[8].c_str(), nullptr, 10));
    r.cpu_seconds = std::strtod(fields[9].c_str(), nullptr);
    r.status = fields[10];
    r.f_star = std::strtod(fields[11].c_str(), nullptr);
    r.residual = std::strtod(fields[12].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

int cmd_bench(const BenchRequest& req, const std::optional<std::string>& out_path,
              std::ostream& out, std::ostream& err) {
  std::vector<BenchmarkRow> rows;
  try {
    rows = run_bench(req);
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << "\n";
    return 2;
  }
  const std::string csv = bench_to_csv(rows);
  if (out_path) {
    std::ofstream f(*out_path);
    if (!f) {
      err << "bench: cannot open " << *out_path << "\n";
      return 2;
    }
    f << csv;
  } else {
    out << csv;
  }
  for (const BenchmarkRow& r : rows) {
    if (r.status.rfind("error", 0) == 0) return 1;
  }
  return 0;
}

DenseVector read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  const nlohmann::json* arr = &doc;
  if (doc.is_object()) {
    if (!doc.contains("x")) throw ParseError(path + ": object form needs field \"x\"");
    arr = &doc["x"];
  }
  if (!arr->is_array()) throw ParseError(path + ": expected an array of numbers");
  DenseVector v(arr->size());
  for (std::size_t i = 0; i < arr->size(); ++i) {
    if (!(*arr)[i].is_number()) {
      throw ParseError(path + ": entry " + std::to_string(i) + " is not a number");
    }
    v[i] = (*arr)[i].get<double>();
  }
  return v;
}

int cmd_verify(const std::string& instance_path, double lambda,
               const std::string& x_path, double tol, std::ostream& out,
               std::ostream& err) {
  try {
    const QeicpInstance inst = read_instance(instance_path);
    const DenseVector x = read_vector_file(x_path);
    const VerifyResult res = verify_solution(inst, lambda, x, tol);
    out << "lambda: " << format_full(lambda) << "\n";
    out << "eq_residual: " << format_full(res.report.eq_residual) << "\n";
    out << "compl_residual: " << format_full(res.report.compl_residual) << "\n";
    out << "neg_x: " << format_full(res.report.neg_x) << "\n";
    out << "neg_w: " << format_full(res.report.neg_w) << "\n";
    out << "verdict: " << (res.ok ? "PASS" : "FAIL") << " at tol " << format_short(tol)
        << "\n";
    return res.ok ? 0 : 1;
  } catch (const std::exception& e) {
    err << "verify: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qeicp
