#pragma once

// Dense real/complex array kernels shared by every model class.
//
// Storage of DenseTensor is row-major. Matrices are Eigen column-major values;
// vec()/unvec() implement the column-first vectorization, so that
//   vec(X * Y * Z) == kron(Z^T, X) * vec(Y).

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tnqmm {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

enum class ScalarKind { Real, Complex };

class DenseTensor {
 public:
  DenseTensor() = default;
  // Zero-filled tensor.
  explicit DenseTensor(std::vector<std::size_t> shape, ScalarKind kind = ScalarKind::Complex);
  DenseTensor(std::vector<std::size_t> shape, std::vector<cplx> entries,
              ScalarKind kind = ScalarKind::Complex);

  static DenseTensor scalar(cplx value);
  static DenseTensor from_matrix(const Matrix& m, ScalarKind kind = ScalarKind::Complex);
  static DenseTensor from_vector(const Vector& v, ScalarKind kind = ScalarKind::Complex);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t size() const { return entries_.size(); }
  ScalarKind kind() const { return kind_; }

  std::span<const cplx> data() const { return entries_; }
  std::span<cplx> data() { return entries_; }

  std::vector<std::size_t> strides() const;
  std::size_t offset(std::span<const std::size_t> index) const;

  cplx operator()(std::initializer_list<std::size_t> index) const;
  cplx& operator()(std::initializer_list<std::size_t> index);

  DenseTensor reshaped(std::vector<std::size_t> shape) const;
  // Requires order 2.
  Matrix to_matrix() const;

  // Throws PreconditionError if kind is Real and an imaginary part is nonzero.
  void check_invariants() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<cplx> entries_;
  ScalarKind kind_ = ScalarKind::Complex;
};

using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;

// Sum over paired axes. Result axes: unpaired axes of a (in order) followed by
// unpaired axes of b (in order).
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, const AxisPairs& pairs);

Matrix kron(const Matrix& a, const Matrix& b);

// Column-first vectorization and its inverse.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, Eigen::Index rows);

// ||m - m^dagger||_F / max(1, ||m||_F)
double hermitian_residual(const Matrix& m);

struct HermitianEig {
  RealVector values;  // descending
  Matrix vectors;     // columns are eigenvectors
};

HermitianEig hermitian_eig(const Matrix& m, double tol = 1e-10);

// Nearest PSD matrix (Frobenius) to the Hermitian part of m.
Matrix psd_project(const Matrix& m);

bool is_psd(const Matrix& m, double tol = 1e-10);
double min_hermitian_eigenvalue(const Matrix& m);

// Principal square root and inverse square root of a Hermitian positive matrix.
Matrix psd_sqrt(const Matrix& m);
Matrix psd_inverse_sqrt(const Matrix& m);

struct Eigenpair {
  cplx value;
  Vector vector;             // unit 2-norm
  cplx second_value;         // deflated estimate of the next eigenvalue
  int iterations = 0;
};

// Power iteration for the dominant eigenpair. Convergence means
// ||m v - lambda v|| <= tol * max(|lambda|, tiny). Throws DegenerateSpectrumError
// when max_iter is exhausted (typically |lambda1| == |lambda2|).
Eigenpair leading_eigenpair(const Matrix& m, double tol = 1e-10, int max_iter = 10000);
Eigenpair leading_eigenpair(const Matrix& m, const Vector& start, double tol, int max_iter);

}  // namespace tnqmm
