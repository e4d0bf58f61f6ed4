#include "tnqmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tnqmm/data.hpp"
#include "tnqmm/errors.hpp"

namespace tnqmm {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Mps: return "mps";
    case Variant::CMps: return "cmps";
    case Variant::Lps: return "lps";
    case Variant::CLps: return "clps";
  }
  return "?";
}

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::NonNegative: return "nonnegative";
    case Constraint::PsdSlices: return "psd_slices";
    case Constraint::Unconstrained: return "unconstrained";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "mps") return Variant::Mps;
  if (s == "cmps") return Variant::CMps;
  if (s == "lps") return Variant::Lps;
  if (s == "clps") return Variant::CLps;
  throw ConfigError("unknown model variant '" + s + "' (expected mps, cmps, lps or clps)");
}

Constraint parse_constraint(const std::string& s) {
  if (s == "nonnegative" || s == "nonnegative-clip") return Constraint::NonNegative;
  if (s == "psd_slices" || s == "psd-slices" || s == "psd") return Constraint::PsdSlices;
  if (s == "unconstrained" || s == "none") return Constraint::Unconstrained;
  throw ConfigError("unknown constraint '" + s + "' (expected nonnegative, psd_slices or unconstrained)");
}

std::string to_string(Topology t) { return t == Topology::Chain ? "chain" : "circular"; }

Topology parse_topology(const std::string& s) {
  if (s == "chain") return Topology::Chain;
  if (s == "circular" || s == "ring") return Topology::Circular;
  throw ConfigError("unknown topology '" + s + "' (expected chain or circular)");
}

LogValue LogValue::from(cplx value, double log_scale) {
  double a = std::abs(value);
  if (a == 0.0 || !std::isfinite(log_scale)) return {-std::numeric_limits<double>::infinity(), {1.0, 0.0}};
  return {std::log(a) + log_scale, value / a};
}

double LogValue::value() const { return is_zero() ? 0.0 : phase.real() * std::exp(log_abs); }

bool LogValue::is_zero() const { return log_abs == -std::numeric_limits<double>::infinity(); }

SequenceModel::SequenceModel(Variant variant, Constraint constraint, std::vector<int> dims, int rank, int mu)
    : variant_(variant), constraint_(constraint), dims_(std::move(dims)), rank_(rank), mu_(mu) {
  if (dims_.empty()) throw ModelError("a model needs at least one site");
  for (int d : dims_)
    if (d < 1) throw ModelError("alphabet sizes must be positive");
  if (rank_ < 1) throw ModelError("rank must be positive");
  if (mu_ < 1) throw ModelError("purification dimension must be positive");
  if (!is_purified(variant_) && mu_ != 1) throw ModelError("MPS variants have no purification index (mu must be 1)");
  if (constraint_ == Constraint::PsdSlices && !is_purified(variant_))
    throw UnsupportedConstraintError("psd_slices applies to LPS variants only");
  if (constraint_ == Constraint::NonNegative && is_purified(variant_))
    throw UnsupportedConstraintError("nonnegative applies to MPS variants only");
  cores_.resize(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i)
    cores_[i].assign(static_cast<std::size_t>(dims_[i] * mu_), Matrix::Zero(rank_, rank_));
  if (!is_circular(variant_)) {
    if (is_purified(variant_)) {
      left_ = Matrix::Identity(rank_, rank_);
      right_ = Matrix::Identity(rank_, rank_);
    } else {
      left_ = Matrix::Ones(rank_, 1);
      right_ = Matrix::Ones(rank_, 1);
    }
  }
}

DenseTensor SequenceModel::core_tensor(int site) const {
  const int d = dims_.at(site), r = rank_;
  std::vector<std::size_t> shape;
  if (is_purified(variant_))
    shape = {std::size_t(d), std::size_t(mu_), std::size_t(r), std::size_t(r)};
  else
    shape = {std::size_t(d), std::size_t(r), std::size_t(r)};
  std::vector<cplx> e;
  e.reserve(std::size_t(d) * mu_ * r * r);
  for (int x = 0; x < d; ++x)
    for (int b = 0; b < mu_; ++b) {
      const Matrix& s = slice(site, x, b);
      for (int l = 0; l < r; ++l)
        for (int rr = 0; rr < r; ++rr) e.push_back(s(rr, l));
    }
  return DenseTensor(std::move(shape), std::move(e), scalar_kind());
}

void SequenceModel::set_core_tensor(int site, const DenseTensor& t) {
  const int d = dims_.at(site), r = rank_;
  std::vector<std::size_t> expect;
  if (is_purified(variant_))
    expect = {std::size_t(d), std::size_t(mu_), std::size_t(r), std::size_t(r)};
  else
    expect = {std::size_t(d), std::size_t(r), std::size_t(r)};
  if (t.shape() != expect) throw DimensionError("core tensor shape does not match the model at site " + std::to_string(site));
  auto e = t.data();
  std::size_t n = 0;
  for (int x = 0; x < d; ++x)
    for (int b = 0; b < mu_; ++b) {
      Matrix& s = slice(site, x, b);
      for (int l = 0; l < r; ++l)
        for (int rr = 0; rr < r; ++rr) s(rr, l) = e[n++];
    }
}

std::size_t SequenceModel::parameter_count() const {
  std::size_t n = 0;
  for (int d : dims_) n += std::size_t(d) * mu_ * rank_ * rank_;
  return n + left_.size() + right_.size();
}

namespace {

bool all_nonnegative_real(const Matrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k)
    if (m.data()[k].imag() != 0.0 || !(m.data()[k].real() >= 0.0)) return false;
  return true;
}

bool all_real(const Matrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k)
    if (m.data()[k].imag() != 0.0) return false;
  return true;
}

}  // namespace

bool SequenceModel::satisfies_constraint(double tol) const {
  switch (constraint_) {
    case Constraint::NonNegative:
      for (const auto& site : cores_)
        for (const auto& s : site)
          if (!all_nonnegative_real(s)) return false;
      if (has_boundaries() && (!all_nonnegative_real(left_) || !all_nonnegative_real(right_))) return false;
      return true;
    case Constraint::PsdSlices:
      for (const auto& site : cores_)
        for (const auto& s : site)
          if (!is_psd(s, tol)) return false;
      if (variant_ == Variant::Lps) {
        if (!is_psd(left_, tol)) return false;
        if (right_ != Matrix::Identity(rank_, rank_)) return false;
      }
      return true;
    case Constraint::Unconstrained:
      return true;
  }
  return false;
}

void SequenceModel::validate(double tol) const {
  if (cores_.size() != dims_.size()) throw ModelError("core count does not match horizon");
  for (std::size_t i = 0; i < cores_.size(); ++i) {
    if (cores_[i].size() != std::size_t(dims_[i] * mu_))
      throw ModelError("site " + std::to_string(i) + " has the wrong number of slices");
    for (const auto& s : cores_[i]) {
      if (s.rows() != rank_ || s.cols() != rank_) throw ModelError("slice shape mismatch at site " + std::to_string(i));
      if (!is_purified(variant_) && !all_real(s)) throw ModelError("MPS cores must be real");
    }
  }
  if (has_boundaries()) {
    const Eigen::Index cols = is_purified(variant_) ? rank_ : 1;
    if (left_.rows() != rank_ || left_.cols() != cols || right_.rows() != rank_ || right_.cols() != cols)
      throw ModelError("boundary shape mismatch");
    if (!is_purified(variant_) && (!all_real(left_) || !all_real(right_)))
      throw ModelError("MPS boundaries must be real");
  } else if (left_.size() != 0 || right_.size() != 0) {
    throw ModelError("circular models have no boundaries");
  }
  if (!satisfies_constraint(tol))
    throw ModelError("model violates its " + to_string(constraint_) + " constraint");
}

bool SequenceModel::operator==(const SequenceModel& o) const {
  return variant_ == o.variant_ && constraint_ == o.constraint_ && dims_ == o.dims_ && rank_ == o.rank_ &&
         mu_ == o.mu_ && cores_ == o.cores_ && left_ == o.left_ && right_ == o.right_;
}

Matrix site_transfer(const SequenceModel& model, int site, int x) {
  if (site < 0 || site >= model.length()) throw DimensionError("site index out of range");
  const int d = model.dim(site);
  if (x != kAllSymbols && (x < 0 || x >= d))
    throw DimensionError("symbol " + std::to_string(x) + " out of range at site " + std::to_string(site));
  const int first = x == kAllSymbols ? 0 : x;
  const int last = x == kAllSymbols ? d : x + 1;
  const int D = model.transfer_dim();
  Matrix out = Matrix::Zero(D, D);
  for (int s = first; s < last; ++s)
    for (int b = 0; b < model.mu(); ++b) {
      const Matrix& B = model.slice(site, s, b);
      if (is_purified(model.variant()))
        out += kron(B.conjugate(), B);
      else
        out += B;
    }
  return out;
}

Vector left_boundary_vector(const SequenceModel& model) {
  if (!model.has_boundaries()) throw PreconditionError("circular models have no boundary vectors");
  return vec(model.left_boundary());
}

Vector right_boundary_vector(const SequenceModel& model) {
  if (!model.has_boundaries()) throw PreconditionError("circular models have no boundary vectors");
  return vec(model.right_boundary());
}

TransferTable::TransferTable(const SequenceModel& model) : model_(&model) {
  table_.resize(model.length());
  for (int i = 0; i < model.length(); ++i) {
    const int d = model.dim(i);
    table_[i].reserve(d + 1);
    Matrix sum = Matrix::Zero(model.transfer_dim(), model.transfer_dim());
    for (int x = 0; x < d; ++x) {
      table_[i].push_back(site_transfer(model, i, x));
      sum += table_[i].back();
    }
    table_[i].push_back(std::move(sum));
  }
}

const Matrix& TransferTable::at(int site, int x) const {
  if (site < 0 || site >= length()) throw DimensionError("site index out of range");
  const int d = model_->dim(site);
  if (x == kAllSymbols) return table_[site][d];
  if (x < 0 || x >= d)
    throw DimensionError("symbol " + std::to_string(x) + " out of range at site " + std::to_string(site));
  return table_[site][x];
}

namespace {

double rescale(Matrix& m) {
  double mx = m.cwiseAbs().maxCoeff();
  if (mx == 0.0 || !std::isfinite(mx)) return 0.0;
  m /= mx;
  return std::log(mx);
}

void check_length(const SequenceModel& model, std::span<const int> symbols) {
  if (static_cast<int>(symbols.size()) != model.length())
    throw DimensionError("sequence length " + std::to_string(symbols.size()) + " does not match model horizon " +
                         std::to_string(model.length()));
}

cplx trace_of_product(const Matrix& a, const Matrix& b) {
  // tr(a * b) without forming the product
  return (a.transpose().cwiseProduct(b)).sum();
}

}  // namespace

LogValue EnvironmentCache::splice(int k) const {
  if (k < 0 || k >= static_cast<int>(left.size())) throw DimensionError("splice position out of range");
  return LogValue::from(trace_of_product(right[k], left[k]), left_log_scale[k] + right_log_scale[k]);
}

EnvironmentCache build_environments(const TransferTable& table, std::span<const int> symbols) {
  const SequenceModel& model = table.model();
  check_length(model, symbols);
  const int N = model.length();
  const int D = model.transfer_dim();
  EnvironmentCache env;
  env.circular = is_circular(model.variant());
  env.left.resize(N + 1);
  env.right.resize(N + 1);
  env.left_log_scale.assign(N + 1, 0.0);
  env.right_log_scale.assign(N + 1, 0.0);
  if (env.circular) {
    env.left[0] = Matrix::Identity(D, D);
    env.right[N] = Matrix::Identity(D, D);
  } else {
    env.left[0] = left_boundary_vector(model);
    env.right[N] = right_boundary_vector(model).transpose();
    env.left_log_scale[0] = rescale(env.left[0]);
    env.right_log_scale[N] = rescale(env.right[N]);
  }
  for (int k = 0; k < N; ++k) {
    env.left[k + 1] = table.at(k, symbols[k]) * env.left[k];
    env.left_log_scale[k + 1] = env.left_log_scale[k] + rescale(env.left[k + 1]);
  }
  for (int k = N - 1; k >= 0; --k) {
    env.right[k] = env.right[k + 1] * table.at(k, symbols[k]);
    env.right_log_scale[k] = env.right_log_scale[k + 1] + rescale(env.right[k]);
  }
  return env;
}

EnvironmentCache build_environments(const SequenceModel& model, std::span<const int> symbols) {
  TransferTable table(model);
  return build_environments(table, symbols);
}

EnvironmentCache build_environments(const SequenceModel& model) {
  std::vector<int> all(model.length(), kAllSymbols);
  return build_environments(model, all);
}

LogValue evaluate(const TransferTable& table, std::span<const int> symbols) {
  const SequenceModel& model = table.model();
  check_length(model, symbols);
  const int N = model.length();
  double log_scale = 0.0;
  if (is_circular(model.variant())) {
    Matrix m = table.at(0, symbols[0]);
    log_scale += rescale(m);
    for (int k = 1; k < N; ++k) {
      m = table.at(k, symbols[k]) * m;
      log_scale += rescale(m);
    }
    return LogValue::from(m.trace(), log_scale);
  }
  Matrix v = left_boundary_vector(model);
  log_scale += rescale(v);
  for (int k = 0; k < N; ++k) {
    v = table.at(k, symbols[k]) * v;
    log_scale += rescale(v);
  }
  return LogValue::from(right_boundary_vector(model).cwiseProduct(v.col(0)).sum(), log_scale);
}

LogValue evaluate(const SequenceModel& model, std::span<const int> symbols) {
  check_length(model, symbols);
  for (int i = 0; i < model.length(); ++i)
    if (symbols[i] < 0 || symbols[i] >= model.dim(i))
      throw DimensionError("symbol " + std::to_string(symbols[i]) + " out of range at site " + std::to_string(i));
  TransferTable table(model);
  return evaluate(table, symbols);
}

LogValue partition_function(const TransferTable& table) {
  std::vector<int> all(table.model().length(), kAllSymbols);
  LogValue z = evaluate(table, all);
  if (z.is_zero() || !std::isfinite(z.log_abs) || z.phase.real() <= 0.0 ||
      std::abs(z.phase.imag()) > 1e-8)
    throw NonpositiveNormalizationError("partition function is not a positive real number");
  z.phase = {1.0, 0.0};
  return z;
}

LogValue partition_function(const SequenceModel& model) {
  TransferTable table(model);
  return partition_function(table);
}

CategoricalDataset sample(const SequenceModel& model, std::uint64_t seed, std::size_t count) {
  if (model.constraint() == Constraint::Unconstrained)
    throw UnsupportedConstraintError("sampling needs a nonnegative or psd_slices model");
  const int N = model.length();
  TransferTable table(model);
  std::vector<int> all(N, kAllSymbols);
  EnvironmentCache z = build_environments(table, all);

  // rg[k][x] = right[k+1] * G_{k,x}; symbol weights are then tr(rg * L).
  std::vector<std::vector<Matrix>> rg(N);
  for (int k = 0; k < N; ++k)
    for (int x = 0; x < model.dim(k); ++x) rg[k].push_back(z.right[k + 1] * table.at(k, x));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> symbols;
  symbols.reserve(count * N);
  std::vector<double> weights;
  for (std::size_t n = 0; n < count; ++n) {
    Matrix state = z.left[0];
    for (int k = 0; k < N; ++k) {
      const int d = model.dim(k);
      weights.assign(d, 0.0);
      double total = 0.0;
      for (int x = 0; x < d; ++x) {
        weights[x] = std::max(0.0, trace_of_product(rg[k][x], state).real());
        total += weights[x];
      }
      if (!(total > 0.0) || !std::isfinite(total)) throw ModelError("sampling reached a zero-probability prefix");
      double u = unif(rng) * total;
      int pick = d - 1;
      for (int x = 0; x < d; ++x) {
        if (u < weights[x]) {
          pick = x;
          break;
        }
        u -= weights[x];
      }
      while (weights[pick] == 0.0 && pick > 0) --pick;
      symbols.push_back(pick);
      state = table.at(k, pick) * state;
      rescale(state);
    }
  }
  CategoricalDataset out(model.dims(), std::move(symbols));
  out.provenance = "sample(" + to_string(model.variant()) + ", seed=" + std::to_string(seed) + ")";
  return out;
}

SequenceModel random_model(Variant variant, Constraint constraint, std::vector<int> dims, int rank, int mu,
                           std::uint64_t seed, double init_scale) {
  SequenceModel m(variant, constraint, std::move(dims), rank, is_purified(variant) ? mu : 1);
  std::mt19937_64 rng(seed);
  const double sd = init_scale / std::sqrt(static_cast<double>(rank));
  std::normal_distribution<double> g(0.0, 1.0);
  const bool complex_entries = is_purified(variant);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (complex_entries)
        a.data()[k] = cplx(g(rng), g(rng)) * (sd / std::sqrt(2.0));
      else
        a.data()[k] = cplx(g(rng) * sd, 0.0);
    }
    return a;
  };
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) -> Matrix {
    Matrix a = gaussian(rows, cols);
    if (constraint == Constraint::NonNegative) a = a.cwiseAbs().cast<cplx>();
    return a;
  };
  auto gram = [&]() -> Matrix {
    Matrix a = gaussian(rank, rank);
    return a * a.adjoint() / static_cast<double>(rank);
  };
  for (int i = 0; i < m.length(); ++i)
    for (auto& s : m.site_slices(i)) s = constraint == Constraint::PsdSlices ? gram() : draw(rank, rank);
  if (m.has_boundaries()) {
    if (is_purified(variant)) {
      m.left_boundary() = gram();
      m.right_boundary() = constraint == Constraint::PsdSlices ? Matrix(Matrix::Identity(rank, rank)) : gram();
    } else {
      m.left_boundary() = draw(rank, 1);
      m.right_boundary() = draw(rank, 1);
    }
  }
  project_to_constraint(m);
  return m;
}

void project_to_constraint(SequenceModel& model) {
  auto clip = [](Matrix& a) {
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = cplx(std::max(0.0, a.data()[k].real()), 0.0);
  };
  switch (model.constraint()) {
    case Constraint::NonNegative:
      for (int i = 0; i < model.length(); ++i)
        for (auto& s : model.site_slices(i)) clip(s);
      if (model.has_boundaries()) {
        clip(model.left_boundary());
        clip(model.right_boundary());
      }
      break;
    case Constraint::PsdSlices:
      for (int i = 0; i < model.length(); ++i)
        for (auto& s : model.site_slices(i)) s = psd_project(s);
      if (model.variant() == Variant::Lps) {
        model.left_boundary() = psd_project(model.left_boundary());
        model.right_boundary() = Matrix::Identity(model.rank(), model.rank());
      }
      break;
    case Constraint::Unconstrained:
      if (!is_purified(model.variant())) {
        auto drop_imag = [](Matrix& a) { a = a.real().cast<cplx>(); };
        for (int i = 0; i < model.length(); ++i)
          for (auto& s : model.site_slices(i)) drop_imag(s);
        if (model.has_boundaries()) {
          drop_imag(model.left_boundary());
          drop_imag(model.right_boundary());
        }
      }
      break;
  }
}

}  // namespace tnqmm
