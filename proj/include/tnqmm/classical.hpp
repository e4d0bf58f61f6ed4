#pragma once

// Classical hidden Markov models (chain and circular) and their non-negative
// tensor-network forms.

#include <cstdint>
#include <span>
#include <vector>

#include "tnqmm/cpd.hpp"
#include "tnqmm/model.hpp"

namespace tnqmm {

// Column-stochastic parameters. transitions(s, j) = p(X_t = s | X_{t-1} = j),
// emissions(o, s) = p(O_t = o | X_t = s).
// Chain: N-1 transitions, transitions[t-1] drives step t; initial is p(X_0).
// Circular: N transitions, transitions[0] = p(X_0 | X_{N-1}) closes the ring.
struct ClassicalHmm {
  Topology topology = Topology::Chain;
  int hidden = 1;
  std::vector<int> obs_dims;
  std::vector<RealMatrix> transitions;
  std::vector<RealMatrix> emissions;
  RealVector initial;

  int length() const { return static_cast<int>(obs_dims.size()); }
  // Throws ModelError.
  void validate(double tol = 1e-12) const;
  bool operator==(const ClassicalHmm& o) const;
};

// Chain: forward algorithm. Circular: ring weight divided by the ring
// normalizer tr(A_{N-1} ... A_0), so values sum to one over sequences.
double hmm_joint(const ClassicalHmm& m, std::span<const int> o);
// Circular only: the raw weight tr(prod_t diag(C_t[o_t]) A_t).
double chmm_weight(const ClassicalHmm& m, std::span<const int> o);
double chmm_normalizer(const ClassicalHmm& m);

SequenceModel chmm_to_cmps(const ClassicalHmm& m);
SequenceModel hmm_to_mps(const ClassicalHmm& m);

inline constexpr int kAutoRank = 0;

struct ChmmConversion {
  ClassicalHmm hmm;
  int cpd_rank = 0;
  double residual = 0.0;  // worst per-site relative CPD residual
  std::vector<double> site_residuals;
};

// Non-negative CPD of each core, then edge normalization. cpd_rank == kAutoRank
// searches ranks upward and falls back to the exact closed form. Throws
// ApproximationError when an explicit rank cannot meet opts.tol, and
// ApproximationError when the hidden chain is reducible.
ChmmConversion cmps_to_chmm(const SequenceModel& model, int cpd_rank = kAutoRank, const CpdOptions& opts = {});

ClassicalHmm random_hmm(Topology topology, std::vector<int> obs_dims, int hidden, std::uint64_t seed);

}  // namespace tnqmm
