#include <doctest.h>

#include <numeric>

#include "support.hpp"
#include "tnqmm/errors.hpp"
#include "tnqmm/tensor.hpp"

using namespace tnqmm;
using tnqmm::test::random_hermitian;
using tnqmm::test::random_matrix;

namespace {

DenseTensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  std::vector<cplx> e(n);
  for (auto& v : e) v = cplx(g(rng), g(rng));
  return DenseTensor(std::move(shape), std::move(e));
}

// Contraction by walking every index combination of both operands.
DenseTensor naive_contract(const DenseTensor& a, const DenseTensor& b, const AxisPairs& pairs) {
  std::vector<bool> ap(a.order()), bp(b.order());
  for (auto [i, k] : pairs) ap[i] = bp[k] = true;
  std::vector<std::size_t> shape;
  for (std::size_t i = 0; i < a.order(); ++i)
    if (!ap[i]) shape.push_back(a.shape()[i]);
  for (std::size_t k = 0; k < b.order(); ++k)
    if (!bp[k]) shape.push_back(b.shape()[k]);
  DenseTensor out(shape);
  std::vector<std::size_t> ia(a.order()), ib(b.order());
  for (std::size_t fa = 0; fa < a.size(); ++fa) {
    std::size_t rem = fa;
    for (std::size_t i = a.order(); i-- > 0;) {
      ia[i] = rem % a.shape()[i];
      rem /= a.shape()[i];
    }
    for (std::size_t fb = 0; fb < b.size(); ++fb) {
      rem = fb;
      for (std::size_t k = b.order(); k-- > 0;) {
        ib[k] = rem % b.shape()[k];
        rem /= b.shape()[k];
      }
      bool match = true;
      for (auto [i, k] : pairs) match = match && ia[i] == ib[k];
      if (!match) continue;
      std::vector<std::size_t> io;
      for (std::size_t i = 0; i < a.order(); ++i)
        if (!ap[i]) io.push_back(ia[i]);
      for (std::size_t k = 0; k < b.order(); ++k)
        if (!bp[k]) io.push_back(ib[k]);
      out.data()[out.offset(io)] += a.data()[fa] * b.data()[fb];
    }
  }
  return out;
}

double max_diff(const DenseTensor& a, const DenseTensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("contract: identity matrix against a vector") {
  DenseTensor a({2, 2}, {1, 0, 0, 1});
  DenseTensor b({2}, {3, 4});
  DenseTensor c = contract(a, b, {{1, 0}});
  REQUIRE(c.shape() == std::vector<std::size_t>{2});
  CHECK(c({0}) == cplx(3));
  CHECK(c({1}) == cplx(4));
}

TEST_CASE("contract: vector dot product gives a scalar") {
  DenseTensor c = contract(DenseTensor({2}, {1, 2}), DenseTensor({2}, {3, 4}), {{0, 0}});
  CHECK(c.order() == 0);
  CHECK(c.data()[0] == cplx(11));
}

TEST_CASE("contract: 3x4x5 with 5x4 over both matching axes") {
  std::mt19937_64 rng(1);
  DenseTensor a = random_tensor({3, 4, 5}, rng), b = random_tensor({5, 4}, rng);
  DenseTensor c = contract(a, b, {{1, 1}, {2, 0}});
  REQUIRE(c.shape() == std::vector<std::size_t>{3});
  for (std::size_t i = 0; i < 3; ++i) {
    cplx s = 0;
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k) s += a({i, j, k}) * b({k, j});
    CHECK(std::abs(c({i}) - s) < 1e-12 * std::max(1.0, std::abs(s)));
  }
}

TEST_CASE("contract: randomized agreement with the index-walking oracle") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> ext(1, 4), ord(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const int oa = ord(rng), ob = std::min(ord(rng), 6 - oa);
    std::vector<std::size_t> sa(oa), sb(ob);
    for (auto& e : sa) e = ext(rng);
    for (auto& e : sb) e = ext(rng);
    // pair a random prefix of a's axes with random distinct axes of b
    std::vector<std::size_t> perm(ob);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int np = std::min(oa, ob) == 0 ? 0 : std::uniform_int_distribution<int>(0, std::min(oa, ob))(rng);
    AxisPairs pairs;
    for (int p = 0; p < np; ++p) {
      sb[perm[p]] = sa[p];
      pairs.emplace_back(p, perm[p]);
    }
    DenseTensor a = random_tensor(sa, rng), b = random_tensor(sb, rng);
    DenseTensor fast = contract(a, b, pairs), slow = naive_contract(a, b, pairs);
    double scale = 1.0;
    for (auto v : slow.data()) scale = std::max(scale, std::abs(v));
    CHECK(max_diff(fast, slow) <= 1e-12 * scale);
  }
}

TEST_CASE("contract: mismatched or repeated axes are rejected") {
  DenseTensor a({2, 3}), b({4, 2});
  CHECK_THROWS_AS(contract(a, b, {{1, 0}}), DimensionError);
  CHECK_THROWS_AS(contract(a, b, {{0, 1}, {0, 1}}), DimensionError);
  CHECK_THROWS_AS(contract(a, b, {{2, 0}}), DimensionError);
  try {
    contract(a, b, {{1, 0}});
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("dense tensor invariants") {
  CHECK_THROWS_AS(DenseTensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(DenseTensor({2}, {cplx(1, 0), cplx(0, 1)}, ScalarKind::Real), PreconditionError);
  DenseTensor t({2, 3});
  t({1, 2}) = 5.0;
  CHECK(t.reshaped({3, 2})({2, 1}) == cplx(5));
  CHECK(t.to_matrix()(1, 2) == cplx(5));
}

TEST_CASE("kron: identities and diagonal case") {
  CHECK(kron(Matrix::Identity(2, 2), Matrix::Identity(2, 2)).isApprox(Matrix::Identity(4, 4)));
  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
  a.diagonal() << 1, 2;
  b.diagonal() << 3, 4;
  Matrix expect = Matrix::Zero(4, 4);
  expect.diagonal() << 3, 4, 6, 8;
  CHECK((kron(a, b) - expect).norm() == 0.0);
}

TEST_CASE("kron: vectorization identity") {
  std::mt19937_64 rng(3);
  for (int n : {2, 3}) {
    Matrix x = random_matrix(n, n, rng), y = random_matrix(n, n, rng), z = random_matrix(n, n, rng);
    Vector lhs = kron(z.transpose(), x) * vec(y);
    Vector rhs = vec(x * y * z);
    CHECK((lhs - rhs).norm() < 1e-12 * rhs.norm());
  }
  Matrix m = random_matrix(3, 3, rng);
  CHECK(unvec(vec(m), 3) == m);
  CHECK(vec(m)(1) == m(1, 0));
}

TEST_CASE("hermitian_eig: small known spectra") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, -1;
  HermitianEig e = hermitian_eig(d);
  CHECK(e.values(0) == doctest::Approx(1.0));
  CHECK(e.values(1) == doctest::Approx(-1.0));
  CHECK((e.vectors.cwiseAbs() - RealMatrix::Identity(2, 2)).norm() < 1e-14);

  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  e = hermitian_eig(x);
  CHECK(e.values(0) == doctest::Approx(1.0));
  CHECK(e.values(1) == doctest::Approx(-1.0));
}

TEST_CASE("hermitian_eig: reconstruction of a random Hermitian matrix") {
  std::mt19937_64 rng(4);
  Matrix h = random_hermitian(5, rng);
  HermitianEig e = hermitian_eig(h);
  for (int i = 0; i + 1 < 5; ++i) CHECK(e.values(i) >= e.values(i + 1));
  Matrix back = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
  CHECK((back - h).norm() < 1e-10);
}

TEST_CASE("hermitian_eig: non-Hermitian input") {
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  CHECK_THROWS_AS(hermitian_eig(m), PreconditionError);
}

TEST_CASE("psd_project: clipping and fixed points") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, -1;
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1;
  CHECK((psd_project(d) - expect).norm() < 1e-15);

  std::mt19937_64 rng(5);
  Matrix g = random_matrix(4, 4, rng);
  Matrix p = g * g.adjoint();
  CHECK((psd_project(p) - p).norm() < 1e-12 * p.norm());
}

TEST_CASE("psd_project: idempotent with nonnegative spectrum") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    Matrix m = random_matrix(4, 4, rng);
    Matrix p = psd_project(m);
    CHECK(min_hermitian_eigenvalue(p) >= -1e-12);
    CHECK((psd_project(p) - p).norm() < 1e-12 * std::max(1.0, p.norm()));
  }
}

TEST_CASE("psd_project: 2x2 closed form") {
  // Eigen-decomposition of [[a, b], [conj(b), c]] by the quadratic formula.
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    Matrix m = random_matrix(2, 2, rng);
    Matrix h = (m + m.adjoint()) / 2.0;
    const double a = h(0, 0).real(), c = h(1, 1).real();
    const cplx b = h(0, 1);
    const double mid = (a + c) / 2, rad = std::sqrt((a - c) * (a - c) / 4 + std::norm(b));
    const double l1 = mid + rad, l2 = mid - rad;
    Matrix expect = Matrix::Zero(2, 2);
    for (double l : {l1, l2}) {
      if (l <= 0) continue;
      Vector v(2);
      v << b, l - a;  // b != 0 almost surely
      v.normalize();
      expect += l * v * v.adjoint();
    }
    CHECK((psd_project(m) - expect).norm() < 1e-12 * std::max(1.0, h.norm()));
  }
}

TEST_CASE("psd_project: variational optimality on 4x4 inputs") {
  // X is the projection iff <H - X, Y - X> <= 0 for every PSD Y.
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    Matrix m = random_matrix(4, 4, rng);
    Matrix h = (m + m.adjoint()) / 2.0, x = psd_project(m);
    for (int k = 0; k < 50; ++k) {
      Matrix g = random_matrix(4, 4, rng);
      Matrix y = g * g.adjoint();
      CHECK(((h - x).adjoint() * (y - x)).trace().real() <= 1e-10);
    }
  }
}

TEST_CASE("leading_eigenpair: diagonal matrix") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2, 1;
  Eigenpair e = leading_eigenpair(d);
  CHECK(std::abs(e.value - 2.0) < 1e-10);
  CHECK(std::abs(std::abs(e.vector(0)) - 1.0) < 1e-8);
  CHECK(std::abs(e.second_value - 1.0) < 1e-6);
}

TEST_CASE("leading_eigenpair: adjoint of a trace-preserving transfer fixes the identity") {
  // Kraus set from the column blocks of a random unitary.
  std::mt19937_64 rng(9);
  const int n = 3, k = 2;
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n * k, n * k, rng));
  Matrix u = qr.householderQ();
  Matrix tau = Matrix::Zero(n * n, n * n);
  for (int w = 0; w < k; ++w) {
    Matrix kw = u.block(w * n, 0, n, n);
    tau += kron(kw.conjugate(), kw);
  }
  Eigenpair e = leading_eigenpair(tau.adjoint());
  CHECK(std::abs(e.value - 1.0) < 1e-8);
  Matrix fixed = unvec(e.vector, n);
  fixed /= fixed.trace();
  CHECK((fixed - Matrix::Identity(n, n) / double(n)).norm() < 1e-8);
}

TEST_CASE("leading_eigenpair: tied magnitudes do not converge") {
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  CHECK_THROWS_AS(leading_eigenpair(x), DegenerateSpectrumError);
}

TEST_CASE("psd square roots") {
  std::mt19937_64 rng(10);
  Matrix g = random_matrix(3, 3, rng);
  Matrix p = g * g.adjoint() + Matrix::Identity(3, 3);
  Matrix s = psd_sqrt(p), si = psd_inverse_sqrt(p);
  CHECK((s * s - p).norm() < 1e-10 * p.norm());
  CHECK((s * si - Matrix::Identity(3, 3)).norm() < 1e-10);
  Matrix sing = Matrix::Zero(2, 2);
  sing(0, 0) = 1;
  CHECK_THROWS_AS(psd_inverse_sqrt(sing), SingularFixedPointError);
}
