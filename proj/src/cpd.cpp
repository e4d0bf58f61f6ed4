#include "tnqmm/cpd.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "tnqmm/errors.hpp"

namespace tnqmm {

namespace {

void check_tensor(const Tensor3& x) {
  if (x.empty() || x.front().size() == 0) throw DimensionError("CPD input must be non-empty");
  for (const auto& s : x)
    if (s.rows() != x.front().rows() || s.cols() != x.front().cols()) throw DimensionError("ragged CPD input");
}

double frob(const Tensor3& x) {
  double s = 0.0;
  for (const auto& m : x) s += m.squaredNorm();
  return std::sqrt(s);
}

// Matricized-tensor times Khatri-Rao product for each mode.
RealMatrix mttkrp_a(const Tensor3& x, const RealMatrix& b, const RealMatrix& c) {
  RealMatrix out(x.size(), b.cols());
  for (std::size_t l = 0; l < x.size(); ++l)
    for (Eigen::Index s = 0; s < b.cols(); ++s) out(l, s) = b.col(s).dot(x[l] * c.col(s));
  return out;
}

RealMatrix mttkrp_b(const Tensor3& x, const RealMatrix& a, const RealMatrix& c) {
  RealMatrix out = RealMatrix::Zero(x.front().rows(), a.cols());
  for (std::size_t l = 0; l < x.size(); ++l)
    for (Eigen::Index s = 0; s < a.cols(); ++s) out.col(s) += a(l, s) * (x[l] * c.col(s));
  return out;
}

RealMatrix mttkrp_c(const Tensor3& x, const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out = RealMatrix::Zero(x.front().cols(), a.cols());
  for (std::size_t l = 0; l < x.size(); ++l)
    for (Eigen::Index s = 0; s < a.cols(); ++s) out.col(s) += a(l, s) * (x[l].transpose() * b.col(s));
  return out;
}

void multiplicative_step(RealMatrix& f, const RealMatrix& numer, const RealMatrix& gram) {
  RealMatrix denom = f * gram;
  for (Eigen::Index k = 0; k < f.size(); ++k) f.data()[k] *= numer.data()[k] / std::max(denom.data()[k], 1e-300);
}

}  // namespace

Tensor3 cpd_reconstruct(const CpdResult& f) {
  Tensor3 out(f.a.rows(), RealMatrix::Zero(f.b.rows(), f.c.rows()));
  for (Eigen::Index l = 0; l < f.a.rows(); ++l)
    for (Eigen::Index s = 0; s < f.a.cols(); ++s) out[l] += f.a(l, s) * f.b.col(s) * f.c.col(s).transpose();
  return out;
}

double cpd_residual(const Tensor3& x, const CpdResult& f) {
  Tensor3 y = cpd_reconstruct(f);
  double num = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l) num += (x[l] - y[l]).squaredNorm();
  const double den = frob(x);
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num) / den;
}

CpdResult nonnegative_cpd(const Tensor3& x, int rank, const CpdOptions& opts) {
  check_tensor(x);
  if (rank < 1) throw PreconditionError("CPD rank must be positive");
  for (const auto& s : x)
    if ((s.array() < 0.0).any()) throw PreconditionError("non-negative CPD needs a non-negative tensor");
  const Eigen::Index L = x.size(), J = x.front().rows(), K = x.front().cols();
  const double norm = frob(x);

  CpdResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(restart));
    std::uniform_real_distribution<double> u(0.1, 1.0);
    CpdResult f;
    f.restart = restart;
    f.a = RealMatrix::NullaryExpr(L, rank, [&]() { return u(rng); });
    f.b = RealMatrix::NullaryExpr(J, rank, [&]() { return u(rng); });
    f.c = RealMatrix::NullaryExpr(K, rank, [&]() { return u(rng); });
    if (norm == 0.0) {
      f.a.setZero();
      f.residual = 0.0;
      f.history.push_back(0.0);
      return f;
    }
    const double fit = frob(cpd_reconstruct(f));
    const double s = std::cbrt(norm / fit);
    f.a *= s;
    f.b *= s;
    f.c *= s;
    f.residual = cpd_residual(x, f);
    for (int it = 1; it <= opts.max_iter && f.residual > opts.tol; ++it) {
      multiplicative_step(f.a, mttkrp_a(x, f.b, f.c), (f.b.transpose() * f.b).cwiseProduct(f.c.transpose() * f.c));
      multiplicative_step(f.b, mttkrp_b(x, f.a, f.c), (f.a.transpose() * f.a).cwiseProduct(f.c.transpose() * f.c));
      multiplicative_step(f.c, mttkrp_c(x, f.a, f.b), (f.a.transpose() * f.a).cwiseProduct(f.b.transpose() * f.b));
      f.residual = cpd_residual(x, f);
      f.history.push_back(f.residual);
      f.iterations = it;
      // stalled
      if (it > 500 && f.history[it - 501] - f.residual <= 1e-9 * f.residual) break;
    }
    if (f.residual < best.residual) best = std::move(f);
  }
  return best;
}

CpdResult exact_cpd(const Tensor3& x) {
  check_tensor(x);
  const Eigen::Index L = x.size(), J = x.front().rows(), K = x.front().cols();
  CpdResult f;
  if (L * J <= J * K) {
    // one component per (l, j): selectors in modes 1 and 2, the fibre in mode 3
    f.a = RealMatrix::Zero(L, L * J);
    f.b = RealMatrix::Zero(J, L * J);
    f.c = RealMatrix::Zero(K, L * J);
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index j = 0; j < J; ++j) {
        const Eigen::Index s = l * J + j;
        f.a(l, s) = 1.0;
        f.b(j, s) = 1.0;
        f.c.col(s) = x[l].row(j).transpose();
      }
  } else {
    f.a = RealMatrix::Zero(L, J * K);
    f.b = RealMatrix::Zero(J, J * K);
    f.c = RealMatrix::Zero(K, J * K);
    for (Eigen::Index j = 0; j < J; ++j)
      for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::Index s = j * K + k;
        for (Eigen::Index l = 0; l < L; ++l) f.a(l, s) = x[l](j, k);
        f.b(j, s) = 1.0;
        f.c(k, s) = 1.0;
      }
  }
  f.residual = cpd_residual(x, f);
  f.history.push_back(f.residual);
  return f;
}

void pad_cpd_rank(CpdResult& f, int rank) {
  if (f.a.cols() == 0) throw PreconditionError("cannot pad an empty decomposition");
  while (f.a.cols() < rank) {
    Eigen::Index heavy = 0;
    double w = -1.0;
    for (Eigen::Index s = 0; s < f.a.cols(); ++s) {
      double ws = f.a.col(s).sum() * f.b.col(s).sum() * f.c.col(s).sum();
      if (ws > w) {
        w = ws;
        heavy = s;
      }
    }
    const Eigen::Index n = f.a.cols();
    f.a.conservativeResize(Eigen::NoChange, n + 1);
    f.b.conservativeResize(Eigen::NoChange, n + 1);
    f.c.conservativeResize(Eigen::NoChange, n + 1);
    f.a.col(heavy) *= 0.5;
    f.a.col(n) = f.a.col(heavy);
    f.b.col(n) = f.b.col(heavy);
    f.c.col(n) = f.c.col(heavy);
  }
}

}  // namespace tnqmm
