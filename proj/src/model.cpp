#include "qeicp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qeicp {

void QeicpInstance::validate() const {
  auto check = [&](const DenseMatrix& m, const char* name) {
    if (m.rows() != n || m.cols() != n) {
      throw DimensionError(std::string("instance matrix ") + name + " is " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", expected " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (!m.all_finite()) {
      throw NumericError(std::string("instance matrix ") + name + " has non-finite entries");
    }
  };
  if (n == 0) throw DimensionError("instance dimension must be >= 1");
  check(A, "A");
  check(B, "B");
  check(C, "C");
}

IteratePoint IteratePoint::zeros(std::size_t n) {
  IteratePoint pt;
  pt.x = DenseVector(n);
  pt.y = DenseVector(n);
  pt.z = DenseVector(n);
  pt.w = DenseVector(n);
  pt.lambda = 0.0;
  return pt;
}

DenseVector flatten(const IteratePoint& pt) {
  const std::size_t n = pt.x.size();
  DenseVector v(flat_size(n));
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = pt.x[i];
    v[n + i] = pt.y[i];
    v[2 * n + i] = pt.z[i];
    v[3 * n + i] = pt.w[i];
  }
  v[4 * n] = pt.lambda;
  return v;
}

IteratePoint unflatten(const DenseVector& v, std::size_t n) {
  if (v.size() < flat_size(n)) throw DimensionError("unflatten: vector too short");
  IteratePoint pt = IteratePoint::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    pt.x[i] = v[i];
    pt.y[i] = v[n + i];
    pt.z[i] = v[2 * n + i];
    pt.w[i] = v[3 * n + i];
  }
  pt.lambda = v[4 * n];
  return pt;
}

double ResidualReport::worst() const {
  return std::max(std::max(eq_residual, compl_residual), std::max(neg_x, neg_w));
}

namespace {

DenseVector pencil_apply(const QeicpInstance& inst, double lambda, const DenseVector& x) {
  DenseVector w = inst.C.matvec(x);
  w += lambda * inst.B.matvec(x);
  w += (lambda * lambda) * inst.A.matvec(x);
  return w;
}

}  // namespace

ResidualReport residual_report(const QeicpInstance& inst, double lambda,
                               const DenseVector& x, const DenseVector& w) {
  if (x.size() != inst.n || w.size() != inst.n) {
    throw DimensionError("residual_report: vector length mismatch");
  }
  ResidualReport rep;
  const DenseVector wdef = pencil_apply(inst, lambda, x);
  rep.eq_residual = (w - wdef).norm_inf();
  rep.compl_residual = std::fabs(x.dot(w));
  for (std::size_t i = 0; i < inst.n; ++i) {
    rep.neg_x = std::max(rep.neg_x, -std::min(x[i], 0.0));
    rep.neg_w = std::max(rep.neg_w, -std::min(w[i], 0.0));
  }
  return rep;
}

VerifyResult verify_solution(const QeicpInstance& inst, double lambda,
                             const DenseVector& x, double tol) {
  if (x.size() != inst.n) throw DimensionError("verify_solution: x length mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("verify_solution: tol must be positive");

  DenseVector xc = x;
  for (std::size_t i = 0; i < inst.n; ++i) {
    if (xc[i] < 0.0 && xc[i] >= -tol) xc[i] = 0.0;  // subproblem tolerance dust
  }
  const double mass = xc.sum();
  if (!(mass > 0.0)) {
    throw std::invalid_argument("verify_solution: degenerate vector, e^T x <= 0 after clipping");
  }
  xc *= 1.0 / mass;

  VerifyResult out;
  out.solution.lambda = lambda;
  out.solution.x = xc;
  out.solution.w = pencil_apply(inst, lambda, xc);
  out.report = residual_report(inst, lambda, xc, out.solution.w);
  out.solution.residual = out.report;
  out.ok = out.report.worst() <= tol;
  return out;
}

double eval_f(const QeicpInstance& inst, const IteratePoint& pt) {
  (void)inst;
  const DenseVector r1 = pt.y - pt.lambda * pt.x;
  const DenseVector r2 = pt.z - pt.lambda * pt.y;
  return r1.dot(r1) + r2.dot(r2) + pt.x.dot(pt.w);
}

double eval_f_prime(const QeicpInstance& inst, const IteratePoint& pt) {
  (void)inst;
  const DenseVector r1 = pt.y - pt.lambda * pt.x;
  const DenseVector r2 = pt.z - pt.lambda * pt.y;
  double acc = r1.dot(r1) + r2.dot(r2);
  for (std::size_t i = 0; i < pt.x.size(); ++i) acc += std::min(pt.x[i], pt.w[i]);
  return acc;
}

double family_scale(RandomFamily family) {
  switch (family) {
    case RandomFamily::unit: return 1.0;
    case RandomFamily::ten: return 10.0;
    case RandomFamily::hundred: return 100.0;
  }
  return 1.0;
}

std::string family_name(RandomFamily family) {
  switch (family) {
    case RandomFamily::unit: return "unit";
    case RandomFamily::ten: return "ten";
    case RandomFamily::hundred: return "hundred";
  }
  return "unit";
}

std::optional<RandomFamily> family_from_name(const std::string& name) {
  if (name == "unit") return RandomFamily::unit;
  if (name == "ten") return RandomFamily::ten;
  if (name == "hundred") return RandomFamily::hundred;
  return std::nullopt;
}

QeicpInstance generate_random(RandomFamily family, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw DimensionError("generate_random: n must be >= 1");
  const double scale = family_scale(family);
  std::mt19937_64 rng(seed);

  QeicpInstance inst;
  inst.n = n;
  inst.A = DenseMatrix::identity(n);
  inst.B = DenseMatrix(n, n);
  inst.C = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inst.B(i, j) = scale * uniform01(rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inst.C(i, j) = -scale * uniform01(rng);

  std::ostringstream label;
  label << "Rand(0," << scale << "," << n << ")#" << seed;
  inst.label = label.str();
  return inst;
}

namespace {

using nlohmann::json;

DenseMatrix matrix_from_json(const json& rows, std::size_t n, const char* name,
                             const std::string& origin) {
  if (!rows.is_array() || rows.size() != n) {
    throw ParseError(origin + ": field \"" + name + "\" must be an array of " +
                     std::to_string(n) + " rows");
  }
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = rows[i];
    if (!row.is_array() || row.size() != n) {
      throw ParseError(origin + ": \"" + name + "\" row " + std::to_string(i) +
                       " has " + std::to_string(row.is_array() ? row.size() : 0) +
                       " entries, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j].is_number()) {
        throw ParseError(origin + ": \"" + name + "\"[" + std::to_string(i) + "][" +
                         std::to_string(j) + "] is not a number");
      }
      m(i, j) = row[j].get<double>();
    }
  }
  return m;
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

}  // namespace

QeicpInstance parse_instance_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ":" + std::to_string(line_of_byte(text, e.byte)) +
                     ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(origin + ": top level must be an object");
  if (!doc.contains("n") || !doc["n"].is_number_integer()) {
    throw ParseError(origin + ": missing integer field \"n\"");
  }
  const long long n_raw = doc["n"].get<long long>();
  if (n_raw < 1) throw ParseError(origin + ": field \"n\" must be >= 1");
  const std::size_t n = static_cast<std::size_t>(n_raw);

  for (const char* name : {"A", "B", "C"}) {
    if (!doc.contains(name)) throw ParseError(origin + ": missing field \"" + name + "\"");
  }

  QeicpInstance inst;
  inst.n = n;
  inst.A = matrix_from_json(doc["A"], n, "A", origin);
  inst.B = matrix_from_json(doc["B"], n, "B", origin);
  inst.C = matrix_from_json(doc["C"], n, "C", origin);
  if (doc.contains("label")) {
    if (!doc["label"].is_string()) throw ParseError(origin + ": \"label\" must be a string");
    inst.label = doc["label"].get<std::string>();
  }
  inst.validate();
  return inst;
}

std::string instance_to_text(const QeicpInstance& inst) {
  // 17 significant digits round-trips IEEE doubles exactly.
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto matrix = [&](const DenseMatrix& m) {
    std::ostringstream os;
    os << "[\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
      os << "    [";
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (j) os << ", ";
        os << num(m(i, j));
      }
      os << (i + 1 < m.rows() ? "],\n" : "]\n");
    }
    os << "  ]";
    return os.str();
  };

  std::ostringstream os;
  os << "{\n";
  os << "  \"n\": " << inst.n << ",\n";
  os << "  \"A\": " << matrix(inst.A) << ",\n";
  os << "  \"B\": " << matrix(inst.B) << ",\n";
  os << "  \"C\": " << matrix(inst.C);
  if (!inst.label.empty()) {
    os << ",\n  \"label\": " << nlohmann::json(inst.label).dump();
  }
  os << "\n}\n";
  return os.str();
}

QeicpInstance read_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance_text(buf.str(), path);
}

void write_instance(const QeicpInstance& inst, const std::string& path) {
  inst.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out << instance_to_text(inst);
  if (!out) throw ParseError(path + ": write failed");
}

}  // namespace qeicp
