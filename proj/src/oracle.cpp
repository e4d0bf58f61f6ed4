#include "tnqmm/oracle.hpp"

#include <cmath>
#include <limits>

#include "tnqmm/errors.hpp"

namespace tnqmm {

std::size_t Distribution::index(std::span<const int> x) const {
  if (x.size() != dims.size()) throw DimensionError("sequence length does not match the distribution");
  std::size_t k = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (x[i] < 0 || x[i] >= dims[i]) throw DimensionError("symbol out of range");
    k = k * dims[i] + x[i];
  }
  return k;
}

std::vector<int> Distribution::sequence(std::size_t index) const {
  std::vector<int> x(dims.size());
  for (std::size_t i = dims.size(); i-- > 0;) {
    x[i] = static_cast<int>(index % dims[i]);
    index /= dims[i];
  }
  return x;
}

void for_each_sequence(const std::vector<int>& dims, const std::function<void(std::span<const int>)>& fn,
                       double limit) {
  double states = 1.0;
  for (int d : dims) states *= d;
  if (states > limit)
    throw StateSpaceTooLarge("enumeration over " + std::to_string(static_cast<long long>(states)) +
                             " sequences exceeds the limit of " + std::to_string(static_cast<long long>(limit)));
  std::vector<int> x(dims.size(), 0);
  while (true) {
    fn(x);
    std::size_t i = dims.size();
    while (i > 0) {
      --i;
      if (++x[i] < dims[i]) break;
      x[i] = 0;
      if (i == 0) return;
    }
    if (dims.empty()) return;
  }
}

namespace {

Distribution normalize(std::vector<int> dims, std::vector<double> w) {
  double total = 0.0, scale = 0.0;
  for (double v : w) scale = std::max(scale, std::abs(v));
  for (double& v : w) {
    if (v < 0.0) {
      if (v < -1e-12 * scale) throw NonpositiveNormalizationError("negative sequence weight in enumeration");
      v = 0.0;
    }
    total += v;
  }
  if (!(total > 0.0)) throw NonpositiveNormalizationError("enumerated weights sum to zero");
  for (double& v : w) v /= total;
  return {std::move(dims), std::move(w)};
}

}  // namespace

Distribution enumerate_distribution(const SequenceModel& model) {
  TransferTable table(model);
  std::vector<LogValue> vals;
  double hi = -std::numeric_limits<double>::infinity();
  for_each_sequence(model.dims(), [&](std::span<const int> x) {
    vals.push_back(evaluate(table, x));
    if (!vals.back().is_zero()) hi = std::max(hi, vals.back().log_abs);
  });
  std::vector<double> w;
  w.reserve(vals.size());
  for (const auto& v : vals) w.push_back(v.is_zero() ? 0.0 : v.phase.real() * std::exp(v.log_abs - hi));
  return normalize(model.dims(), std::move(w));
}

Distribution enumerate_distribution(const KrausModel& model) {
  model.validate();
  std::vector<double> w;
  for_each_sequence(model.alphabet, [&](std::span<const int> x) { w.push_back(kraus_string_expansion(model, x)); });
  return normalize(model.alphabet, std::move(w));
}

Distribution enumerate_distribution(const ClassicalHmm& model) {
  model.validate();
  std::vector<double> w;
  for_each_sequence(model.obs_dims, [&](std::span<const int> o) { w.push_back(path_enumeration_weight(model, o)); });
  return normalize(model.obs_dims, std::move(w));
}

Distribution enumerate_distribution(const CategoricalDataset& data) {
  Distribution out;
  out.dims = data.dims();
  double states = 1.0;
  for (int d : out.dims) states *= d;
  if (states > kEnumerationLimit) throw StateSpaceTooLarge("dataset state space too large to enumerate");
  out.p.assign(static_cast<std::size_t>(states), 0.0);
  if (data.size() == 0) throw DataError("empty dataset");
  for (std::size_t r = 0; r < data.size(); ++r) out.p[out.index(data.row(r))] += 1.0;
  for (double& v : out.p) v /= static_cast<double>(data.size());
  return out;
}

double tv_distance(const Distribution& a, const Distribution& b) {
  if (a.dims != b.dims) throw DimensionError("distributions are over different alphabets");
  double s = 0.0;
  for (std::size_t k = 0; k < a.p.size(); ++k) s += std::abs(a.p[k] - b.p[k]);
  return 0.5 * s;
}

double max_abs_deviation(const Distribution& a, const Distribution& b) {
  if (a.dims != b.dims) throw DimensionError("distributions are over different alphabets");
  double s = 0.0;
  for (std::size_t k = 0; k < a.p.size(); ++k) s = std::max(s, std::abs(a.p[k] - b.p[k]));
  return s;
}

namespace {

void check_sequence(const SequenceModel& model, std::span<const int> x) {
  if (static_cast<int>(x.size()) != model.length()) throw DimensionError("sequence length mismatch");
  for (int i = 0; i < model.length(); ++i)
    if (x[i] < 0 || x[i] >= model.dim(i)) throw DimensionError("symbol out of range");
}

// Core matrix in (left, right) layout read from the exported tensor.
Matrix core_matrix(const DenseTensor& core, bool purified, int x, int beta, int r) {
  Matrix a(r, r);
  for (int l = 0; l < r; ++l)
    for (int k = 0; k < r; ++k)
      a(l, k) = purified ? core({std::size_t(x), std::size_t(beta), std::size_t(l), std::size_t(k)})
                         : core({std::size_t(x), std::size_t(l), std::size_t(k)});
  return a;
}

bool next_index(std::vector<int>& idx, int base) {
  for (std::size_t i = idx.size(); i-- > 0;) {
    if (++idx[i] < base) return true;
    idx[i] = 0;
  }
  return false;
}

}  // namespace

cplx literal_evaluate(const SequenceModel& model, std::span<const int> x) {
  check_sequence(model, x);
  const int N = model.length(), r = model.rank(), mu = model.mu();
  const bool purified = is_purified(model.variant());
  std::vector<DenseTensor> cores;
  for (int i = 0; i < N; ++i) cores.push_back(model.core_tensor(i));
  std::vector<int> beta(N, 0);
  cplx total{0.0, 0.0};
  do {
    Matrix p = Matrix::Identity(r, r);  // p(a_0, a_i) after site i
    for (int i = 0; i < N; ++i) p = p * core_matrix(cores[i], purified, x[i], beta[i], r);
    switch (model.variant()) {
      case Variant::CMps:
        total += p.trace();
        break;
      case Variant::CLps:
        total += std::norm(p.trace());
        break;
      case Variant::Mps: {
        const Matrix& a0 = model.left_boundary();
        const Matrix& an = model.right_boundary();
        for (int a = 0; a < r; ++a)
          for (int b = 0; b < r; ++b) total += a0(a, 0) * p(a, b) * an(b, 0);
        break;
      }
      case Variant::Lps: {
        // boundaries are indexed (plain branch, conjugate branch)
        const Matrix& a0 = model.left_boundary();
        const Matrix& an = model.right_boundary();
        for (int a = 0; a < r; ++a)
          for (int ac = 0; ac < r; ++ac)
            for (int b = 0; b < r; ++b)
              for (int bc = 0; bc < r; ++bc) total += a0(a, ac) * p(a, b) * std::conj(p(ac, bc)) * an(b, bc);
        break;
      }
    }
  } while (purified && next_index(beta, mu));
  return total;
}

cplx literal_partition_function(const SequenceModel& model) {
  cplx z{0.0, 0.0};
  for_each_sequence(model.dims(), [&](std::span<const int> x) { z += literal_evaluate(model, x); });
  return z;
}

cplx nested_loop_evaluate(const SequenceModel& model, std::span<const int> x) {
  check_sequence(model, x);
  const int N = model.length(), r = model.rank(), mu = model.mu();
  const bool purified = is_purified(model.variant());
  const bool ring = is_circular(model.variant());
  const int bonds = ring ? N : N + 1;  // ring: a_N identified with a_0
  double terms = std::pow(double(r), bonds) * (purified ? std::pow(double(r), bonds) * std::pow(double(mu), N) : 1.0);
  if (terms > 1e7) throw StateSpaceTooLarge("nested-loop evaluation exceeds 1e7 terms");
  std::vector<DenseTensor> cores;
  for (int i = 0; i < N; ++i) cores.push_back(model.core_tensor(i));
  auto entry = [&](int i, int b, int l, int k) {
    return purified ? cores[i]({std::size_t(x[i]), std::size_t(b), std::size_t(l), std::size_t(k)})
                    : cores[i]({std::size_t(x[i]), std::size_t(l), std::size_t(k)});
  };
  auto bond = [&](const std::vector<int>& a, int i) { return ring ? a[i % N] : a[i]; };
  cplx total{0.0, 0.0};
  std::vector<int> a(bonds, 0);
  do {
    if (!purified) {
      cplx t = ring ? cplx{1.0, 0.0} : model.left_boundary()(a[0], 0) * model.right_boundary()(a[N], 0);
      for (int i = 0; i < N; ++i) t *= entry(i, 0, bond(a, i), bond(a, i + 1));
      total += t;
      continue;
    }
    std::vector<int> ac(bonds, 0);
    do {
      cplx edge = ring ? cplx{1.0, 0.0}
                       : model.left_boundary()(a[0], ac[0]) * model.right_boundary()(a[N], ac[N]);
      std::vector<int> beta(N, 0);
      do {
        cplx t = edge;
        for (int i = 0; i < N; ++i)
          t *= entry(i, beta[i], bond(a, i), bond(a, i + 1)) * std::conj(entry(i, beta[i], bond(ac, i), bond(ac, i + 1)));
        total += t;
      } while (next_index(beta, mu));
    } while (next_index(ac, r));
  } while (next_index(a, r));
  return total;
}

double path_enumeration_weight(const ClassicalHmm& m, std::span<const int> o) {
  if (static_cast<int>(o.size()) != m.length()) throw DimensionError("sequence length mismatch");
  const int N = m.length(), r = m.hidden;
  if (std::pow(double(r), N) > 1e7) throw StateSpaceTooLarge("hidden-path enumeration exceeds 1e7 paths");
  std::vector<int> s(N, 0);
  double total = 0.0;
  do {
    double w = 1.0;
    for (int t = 0; t < N; ++t) {
      w *= m.emissions[t](o[t], s[t]);
      if (m.topology == Topology::Chain)
        w *= t == 0 ? m.initial(s[0]) : m.transitions[t - 1](s[t], s[t - 1]);
      else
        w *= m.transitions[t](s[t], s[(t + N - 1) % N]);
    }
    total += w;
  } while (next_index(s, r));
  return total;
}

double kraus_string_expansion(const KrausModel& m, std::span<const int> x) {
  if (static_cast<int>(x.size()) != m.length()) throw DimensionError("sequence length mismatch");
  const int N = m.length();
  std::vector<std::size_t> w(N, 0);
  double total = 0.0;
  while (true) {
    Matrix k = Matrix::Identity(m.dim, m.dim);
    for (int i = 0; i < N; ++i) k = m.kraus[i][x[i]][w[i]] * k;
    if (m.topology == Topology::Circular)
      total += std::norm(k.trace());
    else
      total += (k * m.rho0 * k.adjoint()).trace().real();
    int i = N - 1;
    for (; i >= 0; --i) {
      if (++w[i] < m.kraus[i][x[i]].size()) break;
      w[i] = 0;
    }
    if (i < 0) break;
  }
  return total;
}

double unchecked_nll(const SequenceModel& model, const CategoricalDataset& batch) {
  TransferTable table(model);
  std::vector<int> all(model.length(), kAllSymbols);
  const LogValue z = evaluate(table, all);
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) total -= evaluate(table, batch.row(n)).log_abs - z.log_abs;
  return total;
}

cplx wirtinger_finite_difference(const std::function<double(cplx)>& f, cplx z, double h) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw PreconditionError("finite-difference step must lie in [1e-7, 1e-4]");
  const double dre = (f(z + cplx(h, 0.0)) - f(z - cplx(h, 0.0))) / (2.0 * h);
  const double dim = (f(z + cplx(0.0, h)) - f(z - cplx(0.0, h))) / (2.0 * h);
  return 0.5 * cplx(dre, dim);
}

Cotangent finite_difference_gradient(const SequenceModel& model, const CategoricalDataset& batch, double h) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw PreconditionError("finite-difference step must lie in [1e-7, 1e-4]");
  SequenceModel work = model;
  Cotangent out = Cotangent::zeros_like(model);
  auto probe = [&](cplx& entry) {
    const cplx saved = entry;
    auto f = [&](cplx v) {
      entry = v;
      return unchecked_nll(work, batch);
    };
    cplx g = wirtinger_finite_difference(f, saved, h);
    entry = saved;
    return g;
  };
  for (int i = 0; i < work.length(); ++i)
    for (std::size_t k = 0; k < work.site_slices(i).size(); ++k) {
      Matrix& s = work.site_slices(i)[k];
      for (Eigen::Index e = 0; e < s.size(); ++e) out.cores[i][k].data()[e] = probe(s.data()[e]);
    }
  if (work.has_boundaries()) {
    for (Eigen::Index e = 0; e < work.left_boundary().size(); ++e)
      out.left.data()[e] = probe(work.left_boundary().data()[e]);
    for (Eigen::Index e = 0; e < work.right_boundary().size(); ++e)
      out.right.data()[e] = probe(work.right_boundary().data()[e]);
  }
  return out;
}

}  // namespace tnqmm
