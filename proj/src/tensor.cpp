#include "tnqmm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "tnqmm/errors.hpp"

namespace tnqmm {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// Entries of t re-laid out so that axis order is `axes` (row-major).
std::vector<cplx> permuted_entries(const DenseTensor& t, const std::vector<std::size_t>& axes) {
  const auto& shape = t.shape();
  const auto strides = t.strides();
  std::vector<std::size_t> new_shape(axes.size());
  std::vector<std::size_t> src_stride(axes.size());
  for (std::size_t k = 0; k < axes.size(); ++k) {
    new_shape[k] = shape[axes[k]];
    src_stride[k] = strides[axes[k]];
  }
  std::vector<cplx> out(t.size());
  std::vector<std::size_t> idx(axes.size(), 0);
  auto src = t.data();
  std::size_t offset = 0;
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = src[offset];
    // odometer increment over the new axis order
    for (std::size_t k = axes.size(); k-- > 0;) {
      if (++idx[k] < new_shape[k]) {
        offset += src_stride[k];
        break;
      }
      offset -= src_stride[k] * (new_shape[k] - 1);
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape, ScalarKind kind)
    : shape_(std::move(shape)), entries_(product(shape_), cplx{0.0, 0.0}), kind_(kind) {
  for (auto e : shape_)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<cplx> entries, ScalarKind kind)
    : shape_(std::move(shape)), entries_(std::move(entries)), kind_(kind) {
  for (auto e : shape_)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
  if (product(shape_) != entries_.size())
    throw DimensionError("shape " + shape_string(shape_) + " needs " + std::to_string(product(shape_)) +
                         " entries, got " + std::to_string(entries_.size()));
  check_invariants();
}

DenseTensor DenseTensor::scalar(cplx value) { return DenseTensor({}, {value}); }

DenseTensor DenseTensor::from_matrix(const Matrix& m, ScalarKind kind) {
  DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, kind);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.entries_[i * m.cols() + j] = m(i, j);
  t.check_invariants();
  return t;
}

DenseTensor DenseTensor::from_vector(const Vector& v, ScalarKind kind) {
  std::vector<cplx> e(v.data(), v.data() + v.size());
  return DenseTensor({static_cast<std::size_t>(v.size())}, std::move(e), kind);
}

std::vector<std::size_t> DenseTensor::strides() const {
  std::vector<std::size_t> s(shape_.size(), 1);
  for (std::size_t k = shape_.size(); k-- > 1;) s[k - 1] = s[k] * shape_[k];
  return s;
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size())
    throw DimensionError("index of order " + std::to_string(index.size()) + " for tensor of order " +
                         std::to_string(shape_.size()));
  std::size_t off = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= shape_[k]) throw DimensionError("index out of range on axis " + std::to_string(k));
    off = off * shape_[k] + index[k];
  }
  return off;
}

cplx DenseTensor::operator()(std::initializer_list<std::size_t> index) const {
  return entries_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

cplx& DenseTensor::operator()(std::initializer_list<std::size_t> index) {
  return entries_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

DenseTensor DenseTensor::reshaped(std::vector<std::size_t> shape) const {
  return DenseTensor(std::move(shape), entries_, kind_);
}

Matrix DenseTensor::to_matrix() const {
  if (order() != 2) throw DimensionError("to_matrix needs an order-2 tensor, got " + shape_string(shape_));
  Matrix m(shape_[0], shape_[1]);
  for (std::size_t i = 0; i < shape_[0]; ++i)
    for (std::size_t j = 0; j < shape_[1]; ++j) m(i, j) = entries_[i * shape_[1] + j];
  return m;
}

void DenseTensor::check_invariants() const {
  if (product(shape_) != entries_.size()) throw DimensionError("entry count does not match shape");
  if (kind_ == ScalarKind::Real)
    for (const auto& z : entries_)
      if (z.imag() != 0.0) throw PreconditionError("real-kind tensor has a nonzero imaginary part");
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b, const AxisPairs& pairs) {
  std::vector<bool> used_a(a.order(), false), used_b(b.order(), false);
  std::vector<std::size_t> paired_a, paired_b;
  for (auto [ia, ib] : pairs) {
    if (ia >= a.order() || ib >= b.order())
      throw DimensionError("axis pair (" + std::to_string(ia) + "," + std::to_string(ib) + ") out of range");
    if (used_a[ia] || used_b[ib])
      throw DimensionError("axis paired twice in (" + std::to_string(ia) + "," + std::to_string(ib) + ")");
    if (a.shape()[ia] != b.shape()[ib])
      throw DimensionError("extent mismatch on axes (" + std::to_string(ia) + "," + std::to_string(ib) +
                           "): " + std::to_string(a.shape()[ia]) + " vs " + std::to_string(b.shape()[ib]));
    used_a[ia] = used_b[ib] = true;
    paired_a.push_back(ia);
    paired_b.push_back(ib);
  }
  std::vector<std::size_t> free_a, free_b, out_shape;
  for (std::size_t k = 0; k < a.order(); ++k)
    if (!used_a[k]) free_a.push_back(k), out_shape.push_back(a.shape()[k]);
  for (std::size_t k = 0; k < b.order(); ++k)
    if (!used_b[k]) free_b.push_back(k), out_shape.push_back(b.shape()[k]);

  std::size_t rows = 1, inner = 1, cols = 1;
  for (auto k : free_a) rows *= a.shape()[k];
  for (auto k : paired_a) inner *= a.shape()[k];
  for (auto k : free_b) cols *= b.shape()[k];

  std::vector<std::size_t> order_a = free_a;
  order_a.insert(order_a.end(), paired_a.begin(), paired_a.end());
  std::vector<std::size_t> order_b = paired_b;
  order_b.insert(order_b.end(), free_b.begin(), free_b.end());
  auto ea = permuted_entries(a, order_a);
  auto eb = permuted_entries(b, order_b);

  using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> ma(ea.data(), rows, inner);
  Eigen::Map<const RowMajor> mb(eb.data(), inner, cols);
  RowMajor prod = ma * mb;

  ScalarKind kind = (a.kind() == ScalarKind::Real && b.kind() == ScalarKind::Real) ? ScalarKind::Real
                                                                                    : ScalarKind::Complex;
  std::vector<cplx> entries(prod.data(), prod.data() + prod.size());
  return DenseTensor(std::move(out_shape), std::move(entries), kind);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unvec(const Vector& v, Eigen::Index rows) {
  if (rows <= 0 || v.size() % rows != 0) throw DimensionError("unvec: length not divisible by rows");
  return Eigen::Map<const Matrix>(v.data(), rows, v.size() / rows);
}

double hermitian_residual(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.adjoint()).norm() / std::max(1.0, m.norm());
}

HermitianEig hermitian_eig(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) throw DimensionError("hermitian_eig needs a square matrix");
  if (hermitian_residual(m) > tol) throw PreconditionError("hermitian_eig: input is not Hermitian");
  Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success) throw Error("hermitian_eig: eigensolver failed");
  // Eigen returns ascending order.
  const auto n = m.rows();
  HermitianEig out{RealVector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

Matrix psd_project(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("psd_project needs a square matrix");
  Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  RealVector lambda = solver.eigenvalues().cwiseMax(0.0);
  const Matrix& v = solver.eigenvectors();
  Matrix p = v * lambda.cast<cplx>().asDiagonal() * v.adjoint();
  return 0.5 * (p + p.adjoint());
}

double min_hermitian_eigenvalue(const Matrix& m) {
  Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool is_psd(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (hermitian_residual(m) >= tol) return false;
  return min_hermitian_eigenvalue(m) >= -tol;
}

Matrix psd_sqrt(const Matrix& m) {
  auto eig = hermitian_eig(m, 1e-8);
  RealVector s = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * s.cast<cplx>().asDiagonal() * eig.vectors.adjoint();
}

Matrix psd_inverse_sqrt(const Matrix& m) {
  auto eig = hermitian_eig(m, 1e-8);
  if (eig.values.minCoeff() <= 0.0) throw SingularFixedPointError("inverse square root of a singular matrix");
  RealVector s = eig.values.cwiseSqrt().cwiseInverse();
  return eig.vectors * s.cast<cplx>().asDiagonal() * eig.vectors.adjoint();
}

namespace {

Vector default_start(Eigen::Index n) {
  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v;
}

struct PowerResult {
  cplx value;
  Vector vector;
  int iterations;
  bool converged;
};

template <typename Apply>
PowerResult power_iterate(Apply&& apply, Vector v, double tol, int max_iter) {
  v /= v.norm();
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = apply(v);
    cplx lambda = v.dot(w);  // v^dagger w
    double scale = std::max(std::abs(lambda), 1e-300);
    if ((w - lambda * v).norm() <= tol * scale) return {lambda, v, it, true};
    double nrm = w.norm();
    if (nrm == 0.0) return {cplx{0.0, 0.0}, v, it, true};
    v = w / nrm;
  }
  return {v.dot(apply(v)), v, max_iter, false};
}

}  // namespace

Eigenpair leading_eigenpair(const Matrix& m, double tol, int max_iter) {
  return leading_eigenpair(m, default_start(m.rows()), tol, max_iter);
}

Eigenpair leading_eigenpair(const Matrix& m, const Vector& start, double tol, int max_iter) {
  if (m.rows() != m.cols()) throw DimensionError("leading_eigenpair needs a square matrix");
  if (start.size() != m.rows()) throw DimensionError("leading_eigenpair: start vector size mismatch");
  if (start.norm() == 0.0) throw PreconditionError("leading_eigenpair: zero start vector");
  auto lead = power_iterate([&](const Vector& v) { return Vector(m * v); }, start, tol, max_iter);
  if (!lead.converged)
    throw DegenerateSpectrumError("power iteration did not converge in " + std::to_string(max_iter) +
                                  " iterations (no spectral gap between the two leading eigenvalues)");
  Eigenpair out{lead.value, lead.vector, cplx{0.0, 0.0}, lead.iterations};
  if (m.rows() > 1) {
    // Schur deflation: the compression of m to the orthogonal complement of the
    // converged eigenvector carries the remaining spectrum.
    const Vector& u = lead.vector;
    auto deflated = [&](const Vector& v) {
      Vector p = v - u * u.dot(v);
      Vector w = m * p;
      return Vector(w - u * u.dot(w));
    };
    Vector s = default_start(m.rows());
    s -= u * u.dot(s);
    if (s.norm() > 0.0) {
      auto second = power_iterate(deflated, s, 1e-8, std::min(max_iter, 2000));
      out.second_value = second.value;
    }
  }
  return out;
}

}  // namespace tnqmm
