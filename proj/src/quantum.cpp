#include "tnqmm/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tnqmm/errors.hpp"

namespace tnqmm {

int KrausModel::max_kraus_rank() const {
  std::size_t w = 0;
  for (const auto& step : kraus)
    for (const auto& ops : step) w = std::max(w, ops.size());
  return static_cast<int>(w);
}

double KrausModel::completeness_residual(int step) const {
  Matrix s = Matrix::Zero(dim, dim);
  for (const auto& ops : kraus.at(step))
    for (const auto& k : ops) s += k.adjoint() * k;
  return (s - Matrix::Identity(dim, dim)).norm();
}

double KrausModel::max_completeness_residual() const {
  double worst = 0.0;
  for (int i = 0; i < length(); ++i) worst = std::max(worst, completeness_residual(i));
  return worst;
}

bool is_density_matrix(const Matrix& rho, double tol) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) return false;
  if (hermitian_residual(rho) > tol) return false;
  if (std::abs(rho.trace() - 1.0) > tol) return false;
  return min_hermitian_eigenvalue(rho) >= -tol;
}

void KrausModel::validate(double tol) const {
  if (dim < 1) throw ModelError("Kraus operator dimension must be positive");
  if (alphabet.empty()) throw ModelError("Kraus model needs at least one step");
  if (kraus.size() != alphabet.size()) throw ModelError("Kraus step count does not match alphabet list");
  for (int i = 0; i < length(); ++i) {
    if (alphabet[i] < 1) throw ModelError("alphabet sizes must be positive");
    if (static_cast<int>(kraus[i].size()) != alphabet[i])
      throw ModelError("step " + std::to_string(i) + " has the wrong number of symbols");
    for (const auto& ops : kraus[i]) {
      if (ops.empty()) throw ModelError("every symbol needs at least one Kraus operator");
      for (const auto& k : ops)
        if (k.rows() != dim || k.cols() != dim)
          throw ModelError("Kraus operator shape mismatch at step " + std::to_string(i));
    }
    double res = completeness_residual(i);
    if (!(res <= tol))
      throw ModelError("completeness violated at step " + std::to_string(i) + " (residual " + std::to_string(res) + ")");
  }
  if (topology == Topology::Chain) {
    if (rho0.rows() != dim || rho0.cols() != dim) throw ModelError("rho0 shape mismatch");
    if (!is_density_matrix(rho0, tol)) throw ModelError("rho0 is not a density matrix");
  }
}

bool KrausModel::operator==(const KrausModel& o) const {
  return topology == o.topology && dim == o.dim && alphabet == o.alphabet && kraus == o.kraus &&
         rho0.rows() == o.rho0.rows() && rho0.cols() == o.rho0.cols() && (rho0.size() == 0 || rho0 == o.rho0);
}

namespace {

void check_sequence(const KrausModel& m, std::span<const int> x) {
  if (static_cast<int>(x.size()) != m.length())
    throw DimensionError("sequence length " + std::to_string(x.size()) + " does not match horizon " +
                         std::to_string(m.length()));
  for (int i = 0; i < m.length(); ++i)
    if (x[i] < 0 || x[i] >= m.alphabet[i])
      throw DimensionError("symbol " + std::to_string(x[i]) + " out of range at step " + std::to_string(i));
}

Matrix step_superoperator(const KrausModel& m, int i, int x) {
  const int d2 = m.dim * m.dim;
  Matrix t = Matrix::Zero(d2, d2);
  for (const auto& k : m.kraus[i][x]) t += kron(k.conjugate(), k);
  return t;
}

}  // namespace

double hqmm_probability(const KrausModel& m, std::span<const int> x) {
  if (m.topology != Topology::Chain) throw PreconditionError("hqmm_probability needs a chain model");
  m.validate();
  check_sequence(m, x);
  Vector v = vec(m.rho0);
  for (int i = 0; i < m.length(); ++i) v = step_superoperator(m, i, x[i]) * v;
  return vec(Matrix::Identity(m.dim, m.dim)).cwiseProduct(v).sum().real();
}

double chqmm_probability(const KrausModel& m, std::span<const int> x) {
  if (m.topology != Topology::Circular) throw PreconditionError("chqmm_probability needs a circular model");
  m.validate();
  check_sequence(m, x);
  Matrix p = step_superoperator(m, 0, x[0]);
  for (int i = 1; i < m.length(); ++i) p = step_superoperator(m, i, x[i]) * p;
  return p.trace().real();
}

BeliefState belief_update(const Matrix& rho, const KrausModel& m, int step, int x) {
  if (rho.rows() != m.dim || rho.cols() != m.dim) throw DimensionError("belief state dimension mismatch");
  if (!is_density_matrix(rho)) throw PreconditionError("belief state is not a density matrix");
  if (step < 0 || step >= m.length()) throw DimensionError("step index out of range");
  if (x < 0 || x >= m.alphabet[step]) throw DimensionError("symbol out of range at step " + std::to_string(step));
  Matrix s = Matrix::Zero(m.dim, m.dim);
  for (const auto& k : m.kraus[step][x]) s += k * rho * k.adjoint();
  double l = s.trace().real();
  if (!(l > 0.0)) throw ZeroProbabilityError("symbol " + std::to_string(x) + " has zero likelihood at step " + std::to_string(step));
  s /= l;
  return {0.5 * (s + s.adjoint()), l};
}

SequenceModel kraus_to_tensor(const KrausModel& m) {
  m.validate();
  const Variant v = m.topology == Topology::Chain ? Variant::Lps : Variant::CLps;
  SequenceModel out(v, Constraint::Unconstrained, m.alphabet, m.dim, m.max_kraus_rank());
  bool psd = true;
  for (int i = 0; i < m.length(); ++i)
    for (int x = 0; x < m.alphabet[i]; ++x)
      for (std::size_t w = 0; w < m.kraus[i][x].size(); ++w) {
        out.slice(i, x, static_cast<int>(w)) = m.kraus[i][x][w];
        psd = psd && is_psd(m.kraus[i][x][w]);
      }
  if (v == Variant::Lps) {
    out.left_boundary() = m.rho0;
    out.right_boundary() = Matrix::Identity(m.dim, m.dim);
    psd = psd && is_psd(m.rho0);
  }
  if (psd) out.set_constraint(Constraint::PsdSlices);
  return out;
}

namespace {

// Heisenberg picture of one site: sigma -> sum_{x,beta} B^dagger sigma B.
Matrix heisenberg(const SequenceModel& model, int site, const Matrix& sigma) {
  Matrix out = Matrix::Zero(model.rank(), model.rank());
  for (const auto& b : model.site_slices(site)) out += b.adjoint() * sigma * b;
  return out;
}

Matrix hermitian_unit_trace(Matrix s) {
  cplx t = s.trace();
  if (std::abs(t) == 0.0) throw SingularFixedPointError("gauge matrix has zero trace");
  s /= t;
  return 0.5 * (s + s.adjoint());
}

void check_full_rank(const Matrix& s, int bond) {
  auto eig = hermitian_eig(s, 1e-8);
  const double hi = eig.values(0);
  const double lo = eig.values(eig.values.size() - 1);
  if (!(hi > 0.0) || lo < 1e-12 * hi)
    throw SingularFixedPointError("fixed point at bond " + std::to_string(bond) +
                                  " is not full rank (min/max eigenvalue " + std::to_string(lo / hi) + ")");
}

}  // namespace

Canonicalization canonicalize_transfer(const SequenceModel& model, double tol, int max_iter) {
  if (!is_purified(model.variant())) throw PreconditionError("canonicalization applies to LPS and cLPS models");
  model.validate(1e-8);
  const int N = model.length();
  const int r = model.rank();
  Canonicalization out;
  out.sigma.assign(N + 1, Matrix());

  if (model.variant() == Variant::CLps) {
    // Ring Heisenberg map tau_0^dag ... tau_{N-1}^dag (site N-1 acts first).
    // Rescaled per factor; only the eigenvector matters here.
    Matrix ring = Matrix::Identity(r * r, r * r);
    for (int i = 0; i < N; ++i) {
      Matrix t = site_transfer(model, i, kAllSymbols).adjoint();
      ring = ring * t;
      double mx = ring.cwiseAbs().maxCoeff();
      if (mx == 0.0) throw SingularFixedPointError("ring transfer operator vanishes");
      ring /= mx;
    }
    // Hermitian positive start: identity plus a small deterministic perturbation.
    std::mt19937_64 rng(0x6a09e667ULL);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix h(r, r);
    for (Eigen::Index k = 0; k < h.size(); ++k) h.data()[k] = cplx(g(rng), g(rng));
    Matrix start = Matrix::Identity(r, r) + 0.1 * (h + h.adjoint()) / (2.0 * std::sqrt(double(r)));
    auto lead = leading_eigenpair(ring, vec(start), tol, max_iter);
    out.sigma[N] = hermitian_unit_trace(unvec(lead.vector, r));
  } else {
    const Matrix& a = model.right_boundary();
    if (hermitian_residual(a) > 1e-10) throw PreconditionError("right boundary must be Hermitian");
    out.sigma[N] = hermitian_unit_trace(a.transpose());
  }
  check_full_rank(out.sigma[N], N);

  out.site_scale.assign(N, 0.0);
  for (int i = N - 1; i >= 0; --i) {
    Matrix s = heisenberg(model, i, out.sigma[i + 1]);
    double lambda = s.trace().real();
    if (!(lambda > 0.0)) throw SingularFixedPointError("site " + std::to_string(i) + " transfer annihilates the gauge");
    out.site_scale[i] = lambda;
    out.sigma[i] = hermitian_unit_trace(s);
    out.log_ring_eigenvalue += std::log(lambda);
  }
  if (model.variant() == Variant::CLps) out.sigma[0] = out.sigma[N];
  for (int i = 0; i < N; ++i) check_full_rank(out.sigma[i], i);

  std::vector<Matrix> root(N + 1), inv_root(N + 1);
  for (int i = 0; i <= N; ++i) {
    root[i] = psd_sqrt(out.sigma[i]);
    inv_root[i] = psd_inverse_sqrt(out.sigma[i]);
  }

  SequenceModel res(model.variant(), Constraint::Unconstrained, model.dims(), r, model.mu());
  bool psd = true;
  for (int i = 0; i < N; ++i) {
    const double c = 1.0 / std::sqrt(out.site_scale[i]);
    auto& dst = res.site_slices(i);
    const auto& src = model.site_slices(i);
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k] = c * root[i + 1] * src[k] * inv_root[i];
      psd = psd && is_psd(dst[k]);
    }
  }
  if (model.variant() == Variant::Lps) {
    Matrix rho = root[0] * model.left_boundary() * root[0];
    cplx t = rho.trace();
    if (std::abs(t) == 0.0) throw SingularFixedPointError("left boundary vanishes under the gauge");
    rho /= t.real();
    res.left_boundary() = 0.5 * (rho + rho.adjoint());
    res.right_boundary() = Matrix::Identity(r, r);
    psd = psd && is_psd(res.left_boundary());
  }
  if (psd) res.set_constraint(Constraint::PsdSlices);
  out.model = std::move(res);
  return out;
}

KrausModel tensor_to_kraus(const SequenceModel& model) {
  auto c = canonicalize_transfer(model);
  const SequenceModel& m = c.model;
  KrausModel out;
  out.topology = m.variant() == Variant::Lps ? Topology::Chain : Topology::Circular;
  out.dim = m.rank();
  out.alphabet = m.dims();
  out.kraus.resize(m.length());
  for (int i = 0; i < m.length(); ++i) {
    out.kraus[i].resize(m.dim(i));
    for (int x = 0; x < m.dim(i); ++x) {
      for (int b = 0; b < m.mu(); ++b)
        if (!m.slice(i, x, b).isZero(0.0)) out.kraus[i][x].push_back(m.slice(i, x, b));
      if (out.kraus[i][x].empty()) out.kraus[i][x].push_back(Matrix::Zero(m.rank(), m.rank()));
    }
  }
  if (out.topology == Topology::Chain) out.rho0 = m.left_boundary();
  return out;
}

KrausModel random_kraus_model(Topology topology, std::vector<int> alphabet, int dim, int max_rank,
                              std::uint64_t seed, bool pure_rho0) {
  if (dim < 1 || max_rank < 1 || alphabet.empty()) throw ModelError("invalid random Kraus model parameters");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = cplx(g(rng), g(rng)) / std::sqrt(2.0);
    return a;
  };
  KrausModel m;
  m.topology = topology;
  m.dim = dim;
  m.alphabet = std::move(alphabet);
  m.kraus.resize(m.alphabet.size());
  for (std::size_t i = 0; i < m.alphabet.size(); ++i) {
    std::vector<int> ranks(m.alphabet[i]);
    int total = 0;
    for (int& w : ranks) total += (w = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_rank)));
    // Haar isometry: QR of a complex Gaussian with the R-diagonal phases removed.
    Matrix z = gaussian(Eigen::Index(dim) * total, dim);
    Eigen::HouseholderQR<Matrix> qr(z);
    Matrix q = qr.householderQ() * Matrix::Identity(z.rows(), dim);
    for (int j = 0; j < dim; ++j) {
      cplx rjj = qr.matrixQR()(j, j);
      if (std::abs(rjj) > 0.0) q.col(j) *= rjj / std::abs(rjj);
    }
    int block = 0;
    m.kraus[i].resize(m.alphabet[i]);
    for (int x = 0; x < m.alphabet[i]; ++x)
      for (int w = 0; w < ranks[x]; ++w, ++block) m.kraus[i][x].push_back(q.middleRows(Eigen::Index(block) * dim, dim));
  }
  if (topology == Topology::Chain) {
    Matrix a = pure_rho0 ? gaussian(dim, 1) : gaussian(dim, dim);
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    m.rho0 = 0.5 * (rho + rho.adjoint());
  }
  return m;
}

}  // namespace tnqmm
