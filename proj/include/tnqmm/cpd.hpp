#pragma once

// Non-negative canonical polyadic decomposition of small order-3 tensors.

#include <cstdint>
#include <vector>

#include "tnqmm/tensor.hpp"

namespace tnqmm {

// Order-3 real tensor X[l][j][k] held as L frontal slices of size J x K.
using Tensor3 = std::vector<RealMatrix>;

// X[l,j,k] ~ sum_s a(l,s) * b(j,s) * c(k,s)
struct CpdResult {
  RealMatrix a, b, c;
  double residual = 0.0;         // ||X - X_hat||_F / ||X||_F
  std::vector<double> history;   // residual after each update sweep
  int iterations = 0;
  int restart = 0;
};

struct CpdOptions {
  double tol = 1e-10;
  int max_iter = 5000;
  int restarts = 5;
  std::uint64_t seed = 7;
};

Tensor3 cpd_reconstruct(const CpdResult& f);
double cpd_residual(const Tensor3& x, const CpdResult& f);

// Multiplicative updates, best of opts.restarts seeded restarts (ties go to
// the lower restart index).
CpdResult nonnegative_cpd(const Tensor3& x, int rank, const CpdOptions& opts = {});

// Closed-form exact decomposition with min(L*J, J*K) components.
CpdResult exact_cpd(const Tensor3& x);

// Splits the heaviest components in half until f has `rank` components.
void pad_cpd_rank(CpdResult& f, int rank);

}  // namespace tnqmm
