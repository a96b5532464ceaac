#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace qeicp {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense real vector. All solver state is stored in these; entries are
/// expected to stay finite (checked at module boundaries, not per-op).
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  DenseVector(std::initializer_list<double> init) : data_(init) {}

  std::size_t size() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  DenseVector& operator+=(const DenseVector& o);
  DenseVector& operator-=(const DenseVector& o);
  DenseVector& operator*=(double s);

  double dot(const DenseVector& o) const;
  double norm2() const;
  double norm1() const;
  double norm_inf() const;
  double sum() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  bool operator==(const DenseVector& o) const { return data_ == o.data_; }

 private:
  std::vector<double> data_;
};

DenseVector operator+(DenseVector a, const DenseVector& b);
DenseVector operator-(DenseVector a, const DenseVector& b);
DenseVector operator*(double s, DenseVector a);

/// Dense row-major matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  DenseVector matvec(const DenseVector& x) const;
  DenseVector matvec_transposed(const DenseVector& x) const;
  DenseMatrix transposed() const;
  /// (M + M^T)/2; requires a square matrix.
  DenseMatrix symmetrized() const;
  DenseMatrix scaled(double s) const;
  DenseMatrix operator+(const DenseMatrix& o) const;
  DenseMatrix operator-(const DenseMatrix& o) const;

  double quad_form(const DenseVector& x) const;  // x^T M x
  double frobenius_norm() const;
  double max_entry() const;
  double min_entry() const;
  double max_abs_entry() const;
  double max_diagonal() const;
  double row_norm2(std::size_t i) const;
  bool all_finite() const;

  bool operator==(const DenseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct CholeskyResult {
  bool is_pd = false;
  DenseMatrix factor;  // lower triangular L with L L^T = (M+M^T)/2, valid when is_pd
};

/// Positive-definiteness test via Cholesky on the symmetrized input.
/// A pivot counts as positive when it exceeds 1e-12 * max-diagonal.
CholeskyResult cholesky_pd_check(const DenseMatrix& m);

/// Solve L L^T x = b given the Cholesky factor.
DenseVector cholesky_solve(const DenseMatrix& factor, DenseVector b);

struct SymmetricEigen {
  DenseVector values;   // unsorted (diagonal after rotations)
  DenseMatrix vectors;  // columns are the associated basis vectors
  int sweeps = 0;
};

/// Full spectrum of the symmetrized input by cyclic Jacobi rotations.
/// Sweeps run until the off-diagonal Frobenius norm is <= 1e-12 * ||M||_F.
SymmetricEigen symmetric_eigen(const DenseMatrix& m);

struct ExtremeEigenvalues {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

ExtremeEigenvalues symmetric_extreme_eigenvalues(const DenseMatrix& m);

/// Spectral radius max|eig| of the symmetrized input.
double spectral_radius_symmetric(const DenseMatrix& m);

/// Solve A x = b by LU with partial pivoting. Throws NumericError when the
/// matrix is numerically singular.
DenseVector lu_solve(DenseMatrix a, DenseVector b);

/// Reusable LU factorization (partial pivoting); lets callers run cheap
/// iterative refinement without refactoring.
class LuFactorization {
 public:
  explicit LuFactorization(DenseMatrix a);  // throws NumericError when singular
  DenseVector solve(DenseVector b) const;

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

}  // namespace qeicp
