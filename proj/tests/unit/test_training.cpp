#include <doctest.h>

#include "support.hpp"
#include "tnqmm/errors.hpp"
#include "tnqmm/oracle.hpp"
#include "tnqmm/training.hpp"

using namespace tnqmm;
using tnqmm::test::rel_err;

namespace {

double cot_rel_diff(const Cotangent& a, const Cotangent& b) {
  Cotangent d = a;
  d.add_scaled(b, -1.0);
  return d.norm() / std::max(b.norm(), 1e-300);
}

CategoricalDataset uniform_rows(const std::vector<int>& dims, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CategoricalDataset d(dims, {});
  std::vector<int> row(dims.size());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < dims.size(); ++i) row[i] = static_cast<int>(rng() % dims[i]);
    d.append(row);
  }
  return d;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.rank = 2;
  c.mu = 2;
  c.batch_size = 10;
  c.max_iterations = 60;
  c.learning_rates = {0.01, 0.1};
  c.restarts = 2;
  c.eval_interval = 20;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("nll: uniform model") {
  const int n_sites = 4, d = 3, rows = 17;
  SequenceModel m(Variant::CMps, Constraint::NonNegative, std::vector<int>(n_sites, d), 2);
  for (int i = 0; i < n_sites; ++i)
    for (int x = 0; x < d; ++x) m.slice(i, x) = Matrix::Identity(2, 2) / double(d);
  CategoricalDataset data = uniform_rows(m.dims(), rows, 1);
  CHECK(rel_err(nll(m, data), rows * n_sites * std::log(double(d))) < 1e-12);
}

TEST_CASE("nll: point mass on the only training sequence") {
  SequenceModel m(Variant::Mps, Constraint::NonNegative, {2, 3}, 1);
  m.slice(0, 1)(0, 0) = 0.3;
  m.slice(1, 2)(0, 0) = 7.0;
  CategoricalDataset data({2, 3}, {1, 2, 1, 2});
  CHECK(std::abs(nll(m, data)) < 1e-14);
}

TEST_CASE("nll: enumeration-normalized probabilities") {
  SequenceModel m = random_model(Variant::CLps, Constraint::PsdSlices, {2, 3, 2}, 2, 2, 2);
  CategoricalDataset data = uniform_rows(m.dims(), 30, 3);
  Distribution p = enumerate_distribution(m);
  double expect = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) expect -= std::log(p.at(data.row(k)));
  CHECK(rel_err(nll(m, data), expect) < 1e-9);
}

TEST_CASE("nll: nonpositive normalizer is a model error") {
  SequenceModel m(Variant::CMps, Constraint::Unconstrained, {2}, 1);
  m.slice(0, 0)(0, 0) = -1.0;
  m.slice(0, 1)(0, 0) = 0.5;
  CHECK_THROWS_AS(nll(m, CategoricalDataset({2}, {0})), ModelError);
}

TEST_CASE("nll: shape mismatch") {
  SequenceModel m = random_model(Variant::CMps, Constraint::NonNegative, {2, 2}, 2, 1, 4);
  CHECK_THROWS_AS(nll(m, CategoricalDataset({2, 3}, {0, 0})), DimensionError);
}

TEST_CASE("gradient: single site closed form") {
  // T(x) = |b_x|^2, Z = sum |b|^2, d/d conj(b_y) of -log(T(x)/Z) = -[y == x] b_x / |b_x|^2 + b_y / Z
  SequenceModel m(Variant::CLps, Constraint::Unconstrained, {3}, 1, 1);
  const cplx b[3] = {cplx(0.3, -0.2), cplx(-1.1, 0.4), cplx(0.5, 0.9)};
  double z = 0.0;
  for (int y = 0; y < 3; ++y) {
    m.slice(0, y)(0, 0) = b[y];
    z += std::norm(b[y]);
  }
  GradientResult g = gradient(m, CategoricalDataset({3}, {1}));
  for (int y = 0; y < 3; ++y) {
    cplx expect = b[y] / z - (y == 1 ? b[1] / std::norm(b[1]) : cplx(0));
    CHECK(std::abs(g.grad.cores[0][y](0, 0) - expect) < 1e-14);
  }
}

TEST_CASE("gradient: finite differences on every variant") {
  // unconstrained only where Z stays positive
  for (Variant v : {Variant::Mps, Variant::CMps, Variant::Lps, Variant::CLps})
    for (Constraint c : {is_purified(v) ? Constraint::PsdSlices : Constraint::NonNegative,
                         v == Variant::CLps ? Constraint::Unconstrained : Constraint::NonNegative}) {
      if (c == Constraint::NonNegative && is_purified(v)) continue;
      SequenceModel m = random_model(v, c, {2, 2, 3, 2}, 2, is_purified(v) ? 2 : 1, 6);
      CategoricalDataset data = uniform_rows(m.dims(), 8, 7);
      GradientResult g = gradient(m, data);
      CHECK(rel_err(g.nll, unchecked_nll(m, data)) < 1e-12);
      CHECK(cot_rel_diff(g.grad, finite_difference_gradient(m, data)) < 1e-6);
    }
}

TEST_CASE("gradient: nonnegative cMPS gradients are real") {
  SequenceModel m = random_model(Variant::CMps, Constraint::NonNegative, {3, 3, 3}, 3, 1, 8);
  GradientResult g = gradient(m, uniform_rows(m.dims(), 20, 9));
  for (const auto& site : g.grad.cores)
    for (const auto& s : site) CHECK(s.imag().cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradient: floored samples contribute nothing") {
  SequenceModel m = random_model(Variant::Mps, Constraint::NonNegative, {2, 2}, 2, 1, 10);
  m.slice(0, 1).setZero();  // every sequence starting with 1 has probability 0
  CategoricalDataset with({2, 2}, {0, 0, 1, 1, 0, 1});
  CategoricalDataset without({2, 2}, {0, 0, 0, 1});
  GradientResult a = gradient(m, with), b = gradient(m, without);
  CHECK(a.floor_hits == 1);
  CHECK(b.floor_hits == 0);
  CHECK(cot_rel_diff(a.grad, b.grad) < 1e-14);
  CHECK(std::abs(a.nll - b.nll + std::log(kProbabilityFloor)) < 1e-9);
  CHECK(nll_detail(m, with).floor_hits == 1);
}

TEST_CASE("apply_step projects back onto the constraint set") {
  SequenceModel m = random_model(Variant::Lps, Constraint::PsdSlices, {2, 2, 2}, 2, 2, 11);
  CategoricalDataset data = uniform_rows(m.dims(), 10, 12);
  GradientResult g = gradient(m, data);
  apply_step(m, g.grad, 10.0);
  CHECK(m.satisfies_constraint(1e-12));

  SequenceModel c = random_model(Variant::CMps, Constraint::NonNegative, {2, 2}, 2, 1, 13);
  SequenceModel before = c;
  apply_step(c, gradient(c, uniform_rows(c.dims(), 5, 14)).grad, 1e3);
  CHECK(c.satisfies_constraint(0.0));
  CHECK_FALSE(c == before);
}

TEST_CASE("train: constant dataset becomes a point mass") {
  CategoricalDataset data({2, 3, 2}, {});
  for (int k = 0; k < 40; ++k) data.append(std::vector<int>{1, 2, 0});
  TrainConfig c = quick_config();
  c.max_iterations = 400;
  c.learning_rates = {0.1, 1.0};
  c.eval_interval = 100;
  TrainReport r = train(Variant::CMps, Constraint::NonNegative, data, c);
  CHECK(r.best_nll < 0.01);
}

TEST_CASE("train: winner improves on its initialization") {
  SequenceModel gen = random_model(Variant::CMps, Constraint::NonNegative, std::vector<int>(5, 2), 2, 1, 15);
  CategoricalDataset data = sample(gen, 16, 400);
  TrainReport r = train(Variant::CLps, Constraint::PsdSlices, data, quick_config());
  REQUIRE(r.evaluations.size() >= 2);
  CHECK(r.evaluations.front().iteration == 0);
  CHECK(r.evaluations.back().iteration == 60);
  CHECK(r.evaluations.back().nll <= r.evaluations.front().nll);
  CHECK(r.best_nll == r.evaluations.back().nll);
  CHECK(r.trace.size() == 60);
  CHECK(r.runs.size() == 4);
  for (const auto& s : r.runs)
    if (!s.diverged) CHECK(s.final_nll >= r.best_nll);
  CHECK(r.model.satisfies_constraint(1e-12));
  CHECK(rel_err(nll(r.model, data) / data.size(), r.best_nll) < 1e-12);
}

TEST_CASE("train: deterministic under a seed and independent of thread count") {
  CategoricalDataset data = uniform_rows({2, 2, 3}, 50, 17);
  TrainConfig c = quick_config();
  TrainReport a = train(Variant::Mps, Constraint::NonNegative, data, c);
  c.jobs = 3;
  TrainReport b = train(Variant::Mps, Constraint::NonNegative, data, c);
  CHECK(a.model == b.model);
  CHECK(a.best_nll == b.best_nll);
  c.seed = 6;
  TrainReport other = train(Variant::Mps, Constraint::NonNegative, data, c);
  CHECK_FALSE(other.model == a.model);
}

TEST_CASE("train: one iteration records one step") {
  CategoricalDataset data = uniform_rows({2, 2}, 30, 18);
  TrainConfig c = quick_config();
  c.max_iterations = 1;
  TrainReport r = train(Variant::Lps, Constraint::PsdSlices, data, c);
  CHECK(r.trace.size() == 1);
  CHECK(r.evaluations.size() == 2);
}

TEST_CASE("train: minibatches cycle through the data") {
  CategoricalDataset data = uniform_rows({2, 2}, 25, 19);
  TrainConfig c = quick_config();
  c.batch_size = 10;
  c.max_iterations = 6;
  c.learning_rates = {0.01};
  c.restarts = 1;
  std::vector<int> seen;
  TrainReport r = train(Variant::Mps, Constraint::NonNegative, data, c,
                        [&](const SequenceModel&, double, int, int it) { seen.push_back(it); });
  CHECK(seen == std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(r.trace.size() == 6);
}

TEST_CASE("train: observer sees every projected step") {
  CategoricalDataset data = uniform_rows({2, 3, 2}, 40, 20);
  TrainConfig c = quick_config();
  std::size_t steps = 0;
  double worst = 0.0;
  train(Variant::CLps, Constraint::PsdSlices, data, c, [&](const SequenceModel& m, double, int, int) {
    ++steps;
    for (int i = 0; i < m.length(); ++i)
      for (const auto& s : m.site_slices(i)) worst = std::min(worst, min_hermitian_eigenvalue(s));
  });
  CHECK(steps == 60 * 4);
  CHECK(worst >= -1e-12);
}

TEST_CASE("train: holdout split") {
  CategoricalDataset data = uniform_rows({2, 2, 2}, 100, 21);
  TrainConfig c = quick_config();
  c.holdout_fraction = 0.2;
  TrainReport r = train(Variant::CMps, Constraint::NonNegative, data, c);
  CHECK(r.train_rows == 80);
  CHECK(r.holdout_rows == 20);
  REQUIRE(r.holdout_nll.has_value());
  CHECK(std::isfinite(*r.holdout_nll));
}

TEST_CASE("train: patience stops early") {
  CategoricalDataset data({2, 2}, {});
  for (int k = 0; k < 20; ++k) data.append(std::vector<int>{0, 1});
  TrainConfig c = quick_config();
  c.learning_rates = {1e-300};  // steps vanish below rounding, so the NLL never improves
  c.restarts = 1;
  c.max_iterations = 1000;
  c.eval_interval = 10;
  c.patience = 2;
  TrainReport r = train(Variant::Mps, Constraint::NonNegative, data, c);
  CHECK(r.evaluations.back().iteration < 1000);
}

TEST_CASE("train: every run diverging is a training failure") {
  CategoricalDataset data = uniform_rows({2, 2}, 20, 22);
  TrainConfig c = quick_config();
  c.learning_rates = {1e300};
  CHECK_THROWS_AS(train(Variant::CMps, Constraint::NonNegative, data, c), TrainingFailure);
  c.learning_rates = {1e300, 0.01};
  TrainReport r = train(Variant::CMps, Constraint::NonNegative, data, c);
  CHECK(r.best_learning_rate == 0.01);
  CHECK(r.runs.front().diverged);
}

TEST_CASE("train: configuration errors") {
  CategoricalDataset data = uniform_rows({2, 2}, 20, 23);
  TrainConfig c = quick_config();
  c.rank = 0;
  CHECK_THROWS_AS(train(Variant::Mps, Constraint::NonNegative, data, c), ConfigError);
  c = quick_config();
  c.learning_rates = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quick_config();
  c.holdout_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(train(Variant::Mps, Constraint::PsdSlices, data, quick_config()), UnsupportedConstraintError);
}
