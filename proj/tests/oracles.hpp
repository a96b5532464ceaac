#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they are used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "qeicp/linalg.hpp"
#include "qeicp/model.hpp"

namespace qeicp::oracle {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols,
                                 std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * uniform01(rng);
  return m;
}

inline DenseVector random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
  DenseVector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * uniform01(rng);
  return v;
}

// Largest/smallest eigenvalue of a symmetric matrix by shifted power
// iteration; unrelated to the Jacobi path in the library.
inline double power_extreme(const DenseMatrix& sym, bool largest, int iters = 20000) {
  const std::size_t n = sym.rows();
  const double shift = sym.frobenius_norm() + 1.0;
  // largest: iterate on (M + shift I); smallest: iterate on (shift I - M).
  std::mt19937_64 rng(12345);
  DenseVector v = random_vector(n, rng, 0.1, 1.0);
  v *= 1.0 / v.norm2();
  double mu = 0.0;
  for (int it = 0; it < iters; ++it) {
    DenseVector w = sym.matvec(v);
    if (!largest) w *= -1.0;
    for (std::size_t i = 0; i < n; ++i) w[i] += shift * v[i];
    mu = w.norm2();
    if (mu == 0.0) return largest ? shift : -shift;
    w *= 1.0 / mu;
    v = w;
  }
  const double rayleigh = v.dot(sym.matvec(v));
  return rayleigh;
}

// Euclidean projection onto the unit simplex (sort-based closed form).
inline DenseVector project_simplex(const DenseVector& c) {
  const std::size_t n = c.size();
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = c[i];
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  std::size_t rho = 0;
  for (std::size_t i = 0; i < n; ++i) {
    css += u[i];
    const double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  DenseVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::max(c[i] - theta, 0.0);
  return x;
}

// Central finite differences of a scalar function over a flat vector.
inline DenseVector finite_difference_gradient(
    const std::function<double(const DenseVector&)>& fn, const DenseVector& at,
    double step_scale = 1e-5) {
  DenseVector g(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double h = step_scale * (1.0 + std::fabs(at[i]));
    DenseVector p = at, m = at;
    p[i] += h;
    m[i] -= h;
    g[i] = (fn(p) - fn(m)) / (2.0 * h);
  }
  return g;
}

inline DenseVector sample_simplex(std::size_t n, std::mt19937_64& rng) {
  DenseVector v(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = -std::log(1.0 - uniform01(rng));
    total += v[i];
  }
  v *= 1.0 / total;
  return v;
}

inline IteratePoint random_point(std::size_t n, std::mt19937_64& rng, double scale = 2.0) {
  IteratePoint pt = IteratePoint::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    pt.x[i] = scale * (2.0 * uniform01(rng) - 1.0);
    pt.y[i] = scale * (2.0 * uniform01(rng) - 1.0);
    pt.z[i] = scale * (2.0 * uniform01(rng) - 1.0);
    pt.w[i] = scale * (2.0 * uniform01(rng) - 1.0);
  }
  pt.lambda = scale * (2.0 * uniform01(rng) - 1.0);
  return pt;
}

}  // namespace qeicp::oracle
