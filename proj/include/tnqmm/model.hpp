#pragma once

// Tensor-network sequence models: MPS, circular MPS, LPS and circular LPS.
//
// Storage convention. Each site i holds d_i * mu operator slices B_{i,x,beta}
// (r x r). A slice maps the left bond to the right bond:
//   B(right, left) == A_{i,x}^{beta, left, right}
// where A is the usual tensor-network core. With this reading a sequence
// value is an ordered operator product, e.g. for a circular MPS
//   T(x) = tr(B_{N,x_N} ... B_{1,x_1})
// and for a circular LPS
//   T(x) = sum_beta |tr(B_{N,x_N,beta_N} ... B_{1,x_1,beta_1})|^2.
// core_tensor() exports the usual (x, [beta,] left, right) layout.
//
// Sites are 0-based throughout the API.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tnqmm/tensor.hpp"

namespace tnqmm {

enum class Variant { Mps, CMps, Lps, CLps };
// Topology of Kraus and classical hidden-state models.
enum class Topology { Chain, Circular };
enum class Constraint { NonNegative, PsdSlices, Unconstrained };

std::string to_string(Variant v);
std::string to_string(Constraint c);
Variant parse_variant(const std::string& s);
Constraint parse_constraint(const std::string& s);
std::string to_string(Topology t);
Topology parse_topology(const std::string& s);

constexpr bool is_circular(Variant v) { return v == Variant::CMps || v == Variant::CLps; }
constexpr bool is_purified(Variant v) { return v == Variant::Lps || v == Variant::CLps; }

// Sentinel symbol meaning "sum over the whole alphabet of this site".
inline constexpr int kAllSymbols = -1;

// A value held as log|v| plus a unit phase. log_abs == -inf encodes zero.
struct LogValue {
  double log_abs = 0.0;
  cplx phase{1.0, 0.0};

  static LogValue from(cplx value, double log_scale = 0.0);
  double value() const;  // real part of the represented number
  bool is_zero() const;
};

class SequenceModel {
 public:
  SequenceModel() = default;
  // Zero cores. Boundaries default to ones (MPS) / identity (LPS).
  SequenceModel(Variant variant, Constraint constraint, std::vector<int> dims, int rank, int mu = 1);

  Variant variant() const { return variant_; }
  Constraint constraint() const { return constraint_; }
  void set_constraint(Constraint c) { constraint_ = c; }
  int length() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int dim(int site) const { return dims_.at(site); }
  int rank() const { return rank_; }
  int mu() const { return mu_; }
  // Dimension of the space the per-site transfer matrices act on (r or r^2).
  int transfer_dim() const { return is_purified(variant_) ? rank_ * rank_ : rank_; }
  bool has_boundaries() const { return !is_circular(variant_); }
  ScalarKind scalar_kind() const {
    return is_purified(variant_) ? ScalarKind::Complex : ScalarKind::Real;
  }

  Matrix& slice(int site, int x, int beta = 0) { return cores_.at(site).at(x * mu_ + beta); }
  const Matrix& slice(int site, int x, int beta = 0) const { return cores_.at(site).at(x * mu_ + beta); }
  std::vector<Matrix>& site_slices(int site) { return cores_.at(site); }
  const std::vector<Matrix>& site_slices(int site) const { return cores_.at(site); }

  // MPS: r x 1 vectors A_0 and A_{N+1}. LPS: r x r matrices. Circular: empty.
  Matrix& left_boundary() { return left_; }
  const Matrix& left_boundary() const { return left_; }
  Matrix& right_boundary() { return right_; }
  const Matrix& right_boundary() const { return right_; }

  // Core in (x, left, right) or (x, beta, left, right) layout.
  DenseTensor core_tensor(int site) const;
  void set_core_tensor(int site, const DenseTensor& t);

  std::size_t parameter_count() const;

  // Checks shapes and the constraint invariant; throws ModelError.
  void validate(double tol = 1e-10) const;
  bool satisfies_constraint(double tol = 1e-10) const;

  bool operator==(const SequenceModel& other) const;

 private:
  Variant variant_ = Variant::Mps;
  Constraint constraint_ = Constraint::Unconstrained;
  std::vector<int> dims_;
  int rank_ = 1;
  int mu_ = 1;
  std::vector<std::vector<Matrix>> cores_;
  Matrix left_, right_;
};

// Per-site transfer matrix. LPS: sum_beta conj(B) (x) B on the r^2 space;
// MPS: the slice itself. x == kAllSymbols sums over the alphabet.
Matrix site_transfer(const SequenceModel& model, int site, int x);

// Boundary vectors in transfer space: vec(A_0) and vec(A_{N+1}) for LPS.
Vector left_boundary_vector(const SequenceModel& model);
Vector right_boundary_vector(const SequenceModel& model);

// Cached transfer matrices for every (site, symbol) plus the per-site sum.
class TransferTable {
 public:
  explicit TransferTable(const SequenceModel& model);
  const SequenceModel& model() const { return *model_; }
  const Matrix& at(int site, int x) const;
  int length() const { return static_cast<int>(table_.size()); }

 private:
  const SequenceModel* model_;
  std::vector<std::vector<Matrix>> table_;  // [site][x], index dims[site] holds the sum
};

// Partial contractions. left[k] covers sites 0..k-1, right[k] covers sites
// k..N-1 (plus boundaries for chains). Chain entries are vectors (left: D x 1,
// right: 1 x D); circular entries are D x D operators with the ring open.
// Each entry is stored scaled to unit max-magnitude; the true value is
// entry * exp(log_scale).
struct EnvironmentCache {
  bool circular = false;
  std::vector<Matrix> left;
  std::vector<Matrix> right;
  std::vector<double> left_log_scale;
  std::vector<double> right_log_scale;

  int length() const { return static_cast<int>(left.size()) - 1; }
  // Full contraction assembled from left[k] and right[k], 0 <= k <= N.
  LogValue splice(int k) const;
};

EnvironmentCache build_environments(const TransferTable& table, std::span<const int> symbols);
EnvironmentCache build_environments(const SequenceModel& model, std::span<const int> symbols);
// All sites summed over their alphabets (the partition-function network).
EnvironmentCache build_environments(const SequenceModel& model);

LogValue evaluate(const TransferTable& table, std::span<const int> symbols);
LogValue evaluate(const SequenceModel& model, std::span<const int> symbols);

// log Z. Throws NonpositiveNormalizationError if Z is not a positive real.
LogValue partition_function(const TransferTable& table);
LogValue partition_function(const SequenceModel& model);

class CategoricalDataset;

// Ancestral sampling from p(x) = T(x)/Z. Requires NonNegative or PsdSlices.
CategoricalDataset sample(const SequenceModel& model, std::uint64_t seed, std::size_t count);

// Random model with entries drawn as in training initialization.
SequenceModel random_model(Variant variant, Constraint constraint, std::vector<int> dims, int rank,
                           int mu, std::uint64_t seed, double init_scale = 1.0);

// Applies the constraint projection in place (clip or PSD-project slices and boundaries).
void project_to_constraint(SequenceModel& model);

}  // namespace tnqmm
