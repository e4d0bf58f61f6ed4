#pragma once

#include <cmath>
#include <random>

#include "tnqmm/model.hpp"
#include "tnqmm/tensor.hpp"

namespace tnqmm::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, bool complex = true) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = cplx(g(rng), complex ? g(rng) : 0.0);
  return m;
}

inline Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  Matrix a = random_matrix(n, n, rng);
  return (a + a.adjoint()) / 2.0;
}

inline double rel_err(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace tnqmm::test
