#include "qeicp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qeicp {

namespace {

void check_same_size(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("vector size mismatch: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
}

void check_square(const DenseMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("square matrix required, got " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()));
  }
}

}  // namespace

DenseVector& DenseVector::operator+=(const DenseVector& o) {
  check_same_size(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseVector& DenseVector::operator-=(const DenseVector& o) {
  check_same_size(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseVector& DenseVector::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double DenseVector::dot(const DenseVector& o) const {
  check_same_size(*this, o);
  double acc = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * o.data_[i];
  return acc;
}

double DenseVector::norm2() const { return std::sqrt(dot(*this)); }

double DenseVector::norm1() const {
  double acc = 0.0;
  for (double v : data_) acc += std::fabs(v);
  return acc;
}

double DenseVector::norm_inf() const {
  double acc = 0.0;
  for (double v : data_) acc = std::max(acc, std::fabs(v));
  return acc;
}

double DenseVector::sum() const {
  double acc = 0.0;
  for (double v : data_) acc += v;
  return acc;
}

double DenseVector::min() const {
  double acc = std::numeric_limits<double>::infinity();
  for (double v : data_) acc = std::min(acc, v);
  return acc;
}

double DenseVector::max() const {
  double acc = -std::numeric_limits<double>::infinity();
  for (double v : data_) acc = std::max(acc, v);
  return acc;
}

bool DenseVector::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
DenseVector operator*(double s, DenseVector a) { return a *= s; }

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseVector DenseMatrix::matvec(const DenseVector& x) const {
  if (x.size() != cols_) throw DimensionError("matvec: incompatible sizes");
  DenseVector y(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    double acc = 0.0;
    const double* row = data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

DenseVector DenseMatrix::matvec_transposed(const DenseVector& x) const {
  if (x.size() != rows_) throw DimensionError("matvec_transposed: incompatible sizes");
  DenseVector y(cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* row = data_.data() + i * cols_;
    const double xi = x[i];
    for (std::size_t j = 0; j < cols_; ++j) y[j] += row[j] * xi;
  }
  return y;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix DenseMatrix::symmetrized() const {
  check_square(*this);
  DenseMatrix s(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j)
      s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
  return s;
}

DenseMatrix DenseMatrix::scaled(double s) const {
  DenseMatrix m = *this;
  for (double& v : m.data_) v *= s;
  return m;
}

DenseMatrix DenseMatrix::operator+(const DenseMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("matrix add: size mismatch");
  DenseMatrix m = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) m.data_[i] += o.data_[i];
  return m;
}

DenseMatrix DenseMatrix::operator-(const DenseMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("matrix sub: size mismatch");
  DenseMatrix m = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) m.data_[i] -= o.data_[i];
  return m;
}

double DenseMatrix::quad_form(const DenseVector& x) const {
  return x.dot(matvec(x));
}

double DenseMatrix::frobenius_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

double DenseMatrix::max_entry() const {
  double acc = -std::numeric_limits<double>::infinity();
  for (double v : data_) acc = std::max(acc, v);
  return acc;
}

double DenseMatrix::min_entry() const {
  double acc = std::numeric_limits<double>::infinity();
  for (double v : data_) acc = std::min(acc, v);
  return acc;
}

double DenseMatrix::max_abs_entry() const {
  double acc = 0.0;
  for (double v : data_) acc = std::max(acc, std::fabs(v));
  return acc;
}

double DenseMatrix::max_diagonal() const {
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) acc = std::max(acc, (*this)(i, i));
  return acc;
}

double DenseMatrix::row_norm2(std::size_t i) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * (*this)(i, j);
  return std::sqrt(acc);
}

bool DenseMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

CholeskyResult cholesky_pd_check(const DenseMatrix& m) {
  check_square(m);
  const std::size_t n = m.rows();
  DenseMatrix a = m.symmetrized();
  const double pivot_floor = 1e-12 * std::max(a.max_diagonal(), 0.0);

  CholeskyResult res;
  res.factor = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= res.factor(j, k) * res.factor(j, k);
    if (!(d > pivot_floor)) {
      res.is_pd = false;
      return res;
    }
    res.factor(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= res.factor(i, k) * res.factor(j, k);
      res.factor(i, j) = s / res.factor(j, j);
    }
  }
  res.is_pd = true;
  return res;
}

DenseVector cholesky_solve(const DenseMatrix& factor, DenseVector b) {
  const std::size_t n = factor.rows();
  if (b.size() != n) throw DimensionError("cholesky_solve: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= factor(i, k) * b[k];
    b[i] = s / factor(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= factor(k, ii) * b[k];
    b[ii] = s / factor(ii, ii);
  }
  return b;
}

namespace {

double off_diagonal_frobenius(const DenseMatrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) acc += a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace

SymmetricEigen symmetric_eigen(const DenseMatrix& m) {
  check_square(m);
  const std::size_t n = m.rows();
  DenseMatrix a = m.symmetrized();
  DenseMatrix v = DenseMatrix::identity(n);
  const double scale = a.frobenius_norm();
  const double tol = 1e-12 * scale;

  SymmetricEigen out;
  out.vectors = v;
  out.values = DenseVector(n);
  if (scale == 0.0 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    return out;
  }

  constexpr int kMaxSweeps = 60;
  int sweep = 0;
  while (off_diagonal_frobenius(a) > tol && sweep < kMaxSweeps) {
    ++sweep;
    for (std::size_t p = 0; p < n - 1; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a(r, p), arq = a(r, q);
            a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
            a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
          }
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  out.vectors = v;
  out.sweeps = sweep;
  return out;
}

ExtremeEigenvalues symmetric_extreme_eigenvalues(const DenseMatrix& m) {
  const SymmetricEigen eig = symmetric_eigen(m);
  ExtremeEigenvalues out;
  out.lambda_min = eig.values.min();
  out.lambda_max = eig.values.max();
  return out;
}

double spectral_radius_symmetric(const DenseMatrix& m) {
  const ExtremeEigenvalues e = symmetric_extreme_eigenvalues(m);
  return std::max(std::fabs(e.lambda_min), std::fabs(e.lambda_max));
}

LuFactorization::LuFactorization(DenseMatrix a) : lu_(std::move(a)) {
  check_square(lu_);
  const std::size_t n = lu_.rows();
  perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::fabs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double cand = std::fabs(lu_(i, k));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (best == 0.0 || !std::isfinite(best)) {
      throw NumericError("lu_factor: singular or non-finite pivot at column " +
                         std::to_string(k));
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
      std::swap(perm_[k], perm_[piv]);
    }
    const double inv = 1.0 / lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) * inv;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
}

DenseVector LuFactorization::solve(DenseVector b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw DimensionError("LuFactorization::solve: size mismatch");
  DenseVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= lu_(i, k) * x[k];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
    x[ii] = s / lu_(ii, ii);
  }
  return x;
}

DenseVector lu_solve(DenseMatrix a, DenseVector b) {
  const LuFactorization f(std::move(a));
  return f.solve(std::move(b));
}

}  // namespace qeicp
