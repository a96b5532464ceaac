#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "qeicp/linalg.hpp"

namespace qeicp {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Problem data: find lambda and x != 0 with
///   w = lambda^2 A x + lambda B x + C x,  x^T w = 0,  x >= 0,  w >= 0.
struct QeicpInstance {
  std::size_t n = 0;
  DenseMatrix A, B, C;
  std::string label;

  void validate() const;  // throws DimensionError / NumericError
};

/// The tuple the lifted formulations optimize over.
struct IteratePoint {
  DenseVector x, y, z, w;
  double lambda = 0.0;

  static IteratePoint zeros(std::size_t n);
};

/// Flattened layout shared by every module: (x, y, z, w, lambda).
inline std::size_t flat_size(std::size_t n) { return 4 * n + 1; }
DenseVector flatten(const IteratePoint& pt);
IteratePoint unflatten(const DenseVector& v, std::size_t n);

struct ResidualReport {
  double eq_residual = 0.0;     // ||w - (lambda^2 A + lambda B + C) x||_inf
  double compl_residual = 0.0;  // |x^T w|
  double neg_x = 0.0;           // ||min(x,0)||_inf
  double neg_w = 0.0;           // ||min(w,0)||_inf

  double worst() const;
};

struct QeicpSolution {
  double lambda = 0.0;
  DenseVector x;  // normalized so that e^T x = 1
  DenseVector w;
  ResidualReport residual;
};

/// Residuals of a candidate (lambda, x, w) against the complementarity system.
ResidualReport residual_report(const QeicpInstance& inst, double lambda,
                               const DenseVector& x, const DenseVector& w);

struct VerifyResult {
  bool ok = false;
  ResidualReport report;
  QeicpSolution solution;  // normalized candidate, w recomputed
};

/// Normalizes x by e^T x (entries in [-tol, 0) are clipped to zero first),
/// recomputes w from the definition and checks all residuals against tol.
/// Throws std::invalid_argument when x degenerates (e^T x <= 0 after clipping).
VerifyResult verify_solution(const QeicpInstance& inst, double lambda,
                             const DenseVector& x, double tol);

/// ||y - lambda x||^2 + ||z - lambda y||^2 + x^T w
double eval_f(const QeicpInstance& inst, const IteratePoint& pt);
/// ||y - lambda x||^2 + ||z - lambda y||^2 + sum_i min(x_i, w_i)
double eval_f_prime(const QeicpInstance& inst, const IteratePoint& pt);

enum class RandomFamily { unit, ten, hundred };

double family_scale(RandomFamily family);            // 1, 10, 100
std::string family_name(RandomFamily family);        // "unit", ...
std::optional<RandomFamily> family_from_name(const std::string& name);

/// Map the top 53 bits of a 64-bit draw to [0,1). Used everywhere randomness
/// must be bit-reproducible across platforms (std distributions are not).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Benchmark instance family: A = I, B entries uniform on [0,U] and C entries
/// uniform on [-U,0], drawn row-major (B first, then C) from mt19937_64(seed).
QeicpInstance generate_random(RandomFamily family, std::size_t n, std::uint64_t seed);

QeicpInstance read_instance(const std::string& path);
void write_instance(const QeicpInstance& inst, const std::string& path);

QeicpInstance parse_instance_text(const std::string& text, const std::string& origin);
std::string instance_to_text(const QeicpInstance& inst);

}  // namespace qeicp
