#include "tnqmm/classical.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "tnqmm/errors.hpp"

namespace tnqmm {

namespace {

void check_stochastic(const RealMatrix& m, double tol, const std::string& what) {
  if (!m.allFinite() || (m.array() < 0.0).any()) throw ModelError(what + " has negative or non-finite entries");
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (std::abs(m.col(j).sum() - 1.0) > tol)
      throw ModelError(what + " column " + std::to_string(j) + " sums to " + std::to_string(m.col(j).sum()));
}

void check_observations(const ClassicalHmm& m, std::span<const int> o) {
  if (static_cast<int>(o.size()) != m.length())
    throw DimensionError("sequence length " + std::to_string(o.size()) + " does not match horizon " +
                         std::to_string(m.length()));
  for (int t = 0; t < m.length(); ++t)
    if (o[t] < 0 || o[t] >= m.obs_dims[t])
      throw DimensionError("symbol " + std::to_string(o[t]) + " out of range at step " + std::to_string(t));
}

}  // namespace

void ClassicalHmm::validate(double tol) const {
  if (hidden < 1) throw ModelError("hidden dimension must be positive");
  if (obs_dims.empty()) throw ModelError("HMM needs at least one step");
  const int N = length();
  const std::size_t n_trans = topology == Topology::Chain ? N - 1 : N;
  if (transitions.size() != n_trans)
    throw ModelError("expected " + std::to_string(n_trans) + " transition matrices, got " +
                     std::to_string(transitions.size()));
  if (emissions.size() != obs_dims.size()) throw ModelError("expected one emission matrix per step");
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    if (transitions[t].rows() != hidden || transitions[t].cols() != hidden)
      throw ModelError("transition " + std::to_string(t) + " has the wrong shape");
    check_stochastic(transitions[t], tol, "transition " + std::to_string(t));
  }
  for (int t = 0; t < N; ++t) {
    if (obs_dims[t] < 1) throw ModelError("observation alphabets must be non-empty");
    if (emissions[t].rows() != obs_dims[t] || emissions[t].cols() != hidden)
      throw ModelError("emission " + std::to_string(t) + " has the wrong shape");
    check_stochastic(emissions[t], tol, "emission " + std::to_string(t));
  }
  if (topology == Topology::Chain) {
    if (initial.size() != hidden) throw ModelError("initial distribution has the wrong size");
    if (!initial.allFinite() || (initial.array() < 0.0).any() || std::abs(initial.sum() - 1.0) > tol)
      throw ModelError("initial distribution is not a probability vector");
  }
}

bool ClassicalHmm::operator==(const ClassicalHmm& o) const {
  return topology == o.topology && hidden == o.hidden && obs_dims == o.obs_dims && transitions == o.transitions &&
         emissions == o.emissions && initial.size() == o.initial.size() && initial == o.initial;
}

double chmm_weight(const ClassicalHmm& m, std::span<const int> o) {
  if (m.topology != Topology::Circular) throw PreconditionError("chmm_weight needs a circular model");
  m.validate();
  check_observations(m, o);
  RealMatrix p = RealMatrix::Identity(m.hidden, m.hidden);
  for (int t = 0; t < m.length(); ++t)
    p = m.emissions[t].row(o[t]).transpose().asDiagonal() * (m.transitions[t] * p);
  return p.trace();
}

double chmm_normalizer(const ClassicalHmm& m) {
  if (m.topology != Topology::Circular) throw PreconditionError("chmm_normalizer needs a circular model");
  m.validate();
  RealMatrix p = RealMatrix::Identity(m.hidden, m.hidden);
  for (int t = 0; t < m.length(); ++t) p = m.transitions[t] * p;
  return p.trace();
}

double hmm_joint(const ClassicalHmm& m, std::span<const int> o) {
  if (m.topology == Topology::Circular) {
    const double z = chmm_normalizer(m);
    if (!(z > 0.0)) throw NonpositiveNormalizationError("ring normalizer tr(A_N ... A_1) is zero");
    return chmm_weight(m, o) / z;
  }
  m.validate();
  check_observations(m, o);
  RealVector alpha = m.emissions[0].row(o[0]).transpose().cwiseProduct(m.initial);
  for (int t = 1; t < m.length(); ++t)
    alpha = m.emissions[t].row(o[t]).transpose().cwiseProduct(m.transitions[t - 1] * alpha);
  return alpha.sum();
}

SequenceModel chmm_to_cmps(const ClassicalHmm& m) {
  if (m.topology != Topology::Circular) throw PreconditionError("chmm_to_cmps needs a circular model");
  m.validate();
  SequenceModel out(Variant::CMps, Constraint::NonNegative, m.obs_dims, m.hidden);
  for (int t = 0; t < m.length(); ++t)
    for (int x = 0; x < m.obs_dims[t]; ++x)
      out.slice(t, x) = (m.emissions[t].row(x).transpose().asDiagonal() * m.transitions[t]).cast<cplx>();
  return out;
}

SequenceModel hmm_to_mps(const ClassicalHmm& m) {
  if (m.topology != Topology::Chain) throw PreconditionError("hmm_to_mps needs a chain model");
  m.validate();
  SequenceModel out(Variant::Mps, Constraint::NonNegative, m.obs_dims, m.hidden);
  for (int t = 0; t < m.length(); ++t)
    for (int x = 0; x < m.obs_dims[t]; ++x) {
      RealMatrix d = m.emissions[t].row(x).transpose().asDiagonal();
      out.slice(t, x) = (t == 0 ? d : RealMatrix(d * m.transitions[t - 1])).cast<cplx>();
    }
  out.left_boundary() = m.initial.cast<cplx>();
  out.right_boundary() = Matrix::Ones(m.hidden, 1);
  return out;
}

namespace {

Tensor3 core_as_tensor(const SequenceModel& model, int site) {
  // X[l](j, k) = core(x = l, left = j, right = k)
  Tensor3 x;
  for (int l = 0; l < model.dim(site); ++l) x.push_back(model.slice(site, l).real().transpose());
  return x;
}

void drop_empty_components(CpdResult& f) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index s = 0; s < f.a.cols(); ++s)
    if (f.a.col(s).sum() > 0.0 && f.b.col(s).sum() > 0.0 && f.c.col(s).sum() > 0.0) keep.push_back(s);
  if (keep.size() == static_cast<std::size_t>(f.a.cols())) return;
  RealMatrix a(f.a.rows(), keep.size()), b(f.b.rows(), keep.size()), c(f.c.rows(), keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    a.col(k) = f.a.col(keep[k]);
    b.col(k) = f.b.col(keep[k]);
    c.col(k) = f.c.col(keep[k]);
  }
  f.a = std::move(a);
  f.b = std::move(b);
  f.c = std::move(c);
}

CpdResult exact_at_rank(const Tensor3& x, int rank) {
  CpdResult f = exact_cpd(x);
  drop_empty_components(f);
  if (f.a.cols() == 0) throw ApproximationError("a core of the circular MPS is identically zero", 0.0);
  if (f.a.cols() > rank) throw ApproximationError("exact decomposition needs more components than requested", 1.0);
  pad_cpd_rank(f, rank);
  f.residual = cpd_residual(x, f);
  return f;
}

ClassicalHmm factors_to_chmm(const std::vector<CpdResult>& f, const std::vector<int>& dims) {
  const int N = static_cast<int>(f.size());
  const int R = static_cast<int>(f.front().a.cols());
  ClassicalHmm h;
  h.topology = Topology::Circular;
  h.hidden = R;
  h.obs_dims = dims;
  std::vector<RealMatrix> m(N);
  for (int i = 0; i < N; ++i) {
    // M_i(s, u) = sum_bond B_i(bond, s) D_{i-1}(bond, u)
    m[i] = f[i].b.transpose() * f[(i + N - 1) % N].c;
    RealMatrix c = f[i].a;
    for (int s = 0; s < R; ++s) {
      const double w = c.col(s).sum();
      if (w > 0.0) {
        c.col(s) /= w;
        m[i].row(s) *= w;
      } else {
        c.col(s).setConstant(1.0 / dims[i]);
        m[i].row(s).setZero();
      }
    }
    h.emissions.push_back(std::move(c));
  }

  // Diagonal gauge from the left Perron vector of the ring product.
  RealMatrix p = RealMatrix::Identity(R, R);
  for (int i = 0; i < N; ++i) {
    p = m[i] * p;
    const double mx = p.cwiseAbs().maxCoeff();
    if (mx == 0.0) throw ApproximationError("hidden ring carries no mass", 1.0);
    p /= mx;
  }
  Eigen::EigenSolver<RealMatrix> es(p.transpose());
  Eigen::Index lead = 0;
  for (Eigen::Index k = 1; k < R; ++k)
    if (es.eigenvalues()(k).real() > es.eigenvalues()(lead).real()) lead = k;
  RealVector g = es.eigenvectors().col(lead).real();
  if (g.sum() < 0.0) g = -g;
  const double gmax = g.cwiseAbs().maxCoeff();
  auto positive = [&](RealVector& v, const char* where) {
    const double hi = v.maxCoeff();
    if (!(hi > 0.0) || (v.array() <= 1e-13 * hi).any())
      throw ApproximationError(std::string("hidden chain is reducible (zero gauge entry at ") + where + ")", 1.0);
    v /= v.sum();
  };
  if (gmax == 0.0) throw ApproximationError("hidden chain is reducible", 1.0);
  positive(g, "ring closure");

  std::vector<RealVector> gauge(N);
  gauge[N - 1] = g;
  for (int i = N - 1; i >= 1; --i) {
    gauge[i - 1] = m[i].transpose() * gauge[i];
    positive(gauge[i - 1], "inner bond");
  }
  for (int i = 0; i < N; ++i) {
    const RealVector& gi = gauge[i];
    const RealVector& gp = gauge[(i + N - 1) % N];
    RealMatrix a = gi.asDiagonal() * m[i] * gp.cwiseInverse().asDiagonal();
    for (int j = 0; j < R; ++j) {
      const double cs = a.col(j).sum();
      if (!(cs > 0.0)) throw ApproximationError("hidden chain is reducible (empty transition column)", 1.0);
      a.col(j) /= cs;
    }
    h.transitions.push_back(std::move(a));
  }
  return h;
}

}  // namespace

ChmmConversion cmps_to_chmm(const SequenceModel& model, int cpd_rank, const CpdOptions& opts) {
  if (model.variant() != Variant::CMps) throw PreconditionError("cmps_to_chmm needs a circular MPS");
  for (int i = 0; i < model.length(); ++i)
    for (const auto& s : model.site_slices(i))
      if ((s.imag().array() != 0.0).any() || (s.real().array() < 0.0).any())
        throw PreconditionError("cmps_to_chmm needs non-negative real cores");
  if (cpd_rank < 0) throw PreconditionError("CPD rank must be positive (or AUTO)");
  const int N = model.length();
  const int r = model.rank();
  std::vector<Tensor3> cores;
  int exact_rank = 0;
  for (int i = 0; i < N; ++i) {
    cores.push_back(core_as_tensor(model, i));
    exact_rank = std::max(exact_rank, std::min(model.dim(i) * r, r * r));
  }

  auto fit_all = [&](int rank, bool exact) {
    std::vector<CpdResult> f;
    for (int i = 0; i < N; ++i) {
      f.push_back(exact ? exact_at_rank(cores[i], rank) : nonnegative_cpd(cores[i], rank, opts));
      if (!exact && f.back().residual > opts.tol) break;
    }
    return f;
  };
  auto worst = [](const std::vector<CpdResult>& f) {
    double w = 0.0;
    for (const auto& x : f) w = std::max(w, x.residual);
    return w;
  };

  std::vector<CpdResult> factors;
  int rank = cpd_rank;
  if (cpd_rank == kAutoRank) {
    for (int k = 1; k < exact_rank && factors.empty(); ++k) {
      auto f = fit_all(k, false);
      if (static_cast<int>(f.size()) == N && worst(f) <= opts.tol) {
        factors = std::move(f);
        rank = k;
      }
    }
    if (factors.empty()) {
      factors = fit_all(exact_rank, true);
      rank = exact_rank;
    }
  } else if (cpd_rank >= exact_rank) {
    factors = fit_all(cpd_rank, true);
  } else {
    factors = fit_all(cpd_rank, false);
    const double w = worst(factors);
    if (static_cast<int>(factors.size()) < N || w > opts.tol)
      throw ApproximationError("non-negative CPD at rank " + std::to_string(cpd_rank) +
                                   " misses tolerance (residual " + std::to_string(w) + ")",
                               w);
  }

  ChmmConversion out;
  out.cpd_rank = rank;
  for (const auto& f : factors) out.site_residuals.push_back(f.residual);
  out.residual = worst(factors);
  out.hmm = factors_to_chmm(factors, model.dims());
  out.hmm.validate(1e-12);
  return out;
}

ClassicalHmm random_hmm(Topology topology, std::vector<int> obs_dims, int hidden, std::uint64_t seed) {
  if (hidden < 1 || obs_dims.empty()) throw ModelError("invalid random HMM parameters");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto stochastic = [&](int rows, int cols) {
    RealMatrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = -std::log(1.0 - u(rng));
    for (int j = 0; j < cols; ++j) m.col(j) /= m.col(j).sum();
    return m;
  };
  ClassicalHmm h;
  h.topology = topology;
  h.hidden = hidden;
  h.obs_dims = std::move(obs_dims);
  const int N = h.length();
  const int n_trans = topology == Topology::Chain ? N - 1 : N;
  for (int t = 0; t < n_trans; ++t) h.transitions.push_back(stochastic(hidden, hidden));
  for (int t = 0; t < N; ++t) h.emissions.push_back(stochastic(h.obs_dims[t], hidden));
  if (topology == Topology::Chain) h.initial = stochastic(hidden, 1).col(0);
  return h;
}

}  // namespace tnqmm
