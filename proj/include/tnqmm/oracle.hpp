#pragma once

// Brute-force reference computations. Everything here is exponential in the
// horizon and guarded by explicit size limits.

#include <functional>
#include <span>
#include <vector>

#include "tnqmm/classical.hpp"
#include "tnqmm/data.hpp"
#include "tnqmm/model.hpp"
#include "tnqmm/quantum.hpp"
#include "tnqmm/training.hpp"

namespace tnqmm {

inline constexpr double kEnumerationLimit = 1e5;

// Normalized probabilities of every sequence, row-major over (x_0, ..., x_{N-1}).
struct Distribution {
  std::vector<int> dims;
  std::vector<double> p;

  std::size_t index(std::span<const int> x) const;
  std::vector<int> sequence(std::size_t index) const;
  double at(std::span<const int> x) const { return p[index(x)]; }
};

// Calls fn for every sequence over the given alphabets. Throws StateSpaceTooLarge
// above `limit` sequences.
void for_each_sequence(const std::vector<int>& dims, const std::function<void(std::span<const int>)>& fn,
                       double limit = kEnumerationLimit);

Distribution enumerate_distribution(const SequenceModel& model);
Distribution enumerate_distribution(const KrausModel& model);
Distribution enumerate_distribution(const ClassicalHmm& model);
Distribution enumerate_distribution(const CategoricalDataset& data);

// Throws DimensionError when the alphabets differ.
double tv_distance(const Distribution& a, const Distribution& b);
double max_abs_deviation(const Distribution& a, const Distribution& b);

// T(x) from the exported (x, [beta,] left, right) cores: an explicit sum over
// purification strings of products of core matrices in site order, with the
// conjugate branch written out entrywise. Independent of the transfer-matrix code.
cplx literal_evaluate(const SequenceModel& model, std::span<const int> x);
// Sum of literal_evaluate over every sequence.
cplx literal_partition_function(const SequenceModel& model);
// Fully nested loops over every bond and purification index. Guarded at 1e7 terms.
cplx nested_loop_evaluate(const SequenceModel& model, std::span<const int> x);

// Sum over hidden paths. Chain: joint probability. Circular: raw ring weight.
double path_enumeration_weight(const ClassicalHmm& m, std::span<const int> o);

// Sum over Kraus-index strings: |tr(K_N ... K_1)|^2 (circular) or
// tr(K_N ... K_1 rho0 (K_N ... K_1)^dagger) (chain).
double kraus_string_expansion(const KrausModel& m, std::span<const int> x);

// Batch loss -sum_i log(|T(x_i)| / |Z|) without positivity checks, so it can be
// probed off the constraint set.
double unchecked_nll(const SequenceModel& model, const CategoricalDataset& batch);

// Central differences on real and imaginary parts, combined as
// (d/dRe + i d/dIm) / 2. h must lie in [1e-7, 1e-4].
Cotangent finite_difference_gradient(const SequenceModel& model, const CategoricalDataset& batch, double h = 1e-5);

// Same stencil for a scalar function of one complex variable.
cplx wirtinger_finite_difference(const std::function<double(cplx)>& f, cplx z, double h = 1e-5);

}  // namespace tnqmm
