#pragma once

// Kraus-operator sequence models (finite-horizon and circular hidden quantum
// Markov models) and their mapping to/from locally purified states.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tnqmm/model.hpp"
#include "tnqmm/tensor.hpp"

namespace tnqmm {

struct KrausModel {
  Topology topology = Topology::Chain;
  int dim = 1;                                        // operators are dim x dim
  std::vector<int> alphabet;                          // per step
  std::vector<std::vector<std::vector<Matrix>>> kraus;  // [step][x][w]
  Matrix rho0;                                        // chain only

  int length() const { return static_cast<int>(alphabet.size()); }
  int max_kraus_rank() const;

  // || sum_{x,w} K^dagger K - I ||_F at one step.
  double completeness_residual(int step) const;
  double max_completeness_residual() const;

  // Shapes, per-step completeness and (chain) density-matrix checks. Throws ModelError.
  void validate(double tol = 1e-10) const;

  bool operator==(const KrausModel& o) const;
};

// Hermitian, PSD and unit trace within tol.
bool is_density_matrix(const Matrix& rho, double tol = 1e-10);

// vec(I)^T prod_i (sum_w conj(K) (x) K) vec(rho0).
double hqmm_probability(const KrausModel& m, std::span<const int> x);
// tr prod_i (sum_w conj(K) (x) K). Unnormalized weight.
double chqmm_probability(const KrausModel& m, std::span<const int> x);

struct BeliefState {
  Matrix rho;
  double likelihood = 0.0;
};

// One step of the quantum state update rule. Throws ZeroProbabilityError when
// the symbol has zero likelihood under rho.
BeliefState belief_update(const Matrix& rho, const KrausModel& m, int step, int x);

// Slice (x, w) of site i is K_{i,x,w}; missing Kraus indices are zero padded.
// Chain models get A_0 = rho0 and A_{N+1} = I. The result is labelled
// PsdSlices only when every slice and rho0 are PSD.
SequenceModel kraus_to_tensor(const KrausModel& m);

struct Canonicalization {
  SequenceModel model;
  std::vector<double> site_scale;  // lambda_i per site
  std::vector<Matrix> sigma;       // gauge at every bond, trace one, size N+1
  double log_ring_eigenvalue = 0.0;  // log prod_i lambda_i
};

// Rescales and gauge-transforms an LPS/cLPS so that every site transfer is
// trace preserving (tau''^dagger vec(I) == vec(I)); the normalized
// distribution is unchanged. Throws DegenerateSpectrumError or
// SingularFixedPointError.
Canonicalization canonicalize_transfer(const SequenceModel& model, double tol = 1e-13,
                                       int max_iter = 200000);

// Canonicalize, then read the slices as Kraus operators.
KrausModel tensor_to_kraus(const SequenceModel& model);

// Random model with exactly complete Kraus sets built from blocks of a
// Haar-random isometry. Kraus ranks per (step, symbol) are drawn from
// 1..max_rank. rho0 is a random mixed state (pure when pure_rho0).
KrausModel random_kraus_model(Topology topology, std::vector<int> alphabet, int dim, int max_rank,
                              std::uint64_t seed, bool pure_rho0 = false);

}  // namespace tnqmm
