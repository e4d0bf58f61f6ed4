#pragma once

// Maximum-likelihood training: batched negative log-likelihood, analytic
// Wirtinger gradients from cached environments, projected minibatch descent
// over a learning-rate grid with restarts.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnqmm/data.hpp"
#include "tnqmm/model.hpp"

namespace tnqmm {

inline constexpr double kProbabilityFloor = 1e-280;

// Derivatives with respect to the conjugated parameters, laid out like the
// model: cores[site][x * mu + beta] and the two boundaries.
struct Cotangent {
  std::vector<std::vector<Matrix>> cores;
  Matrix left, right;

  static Cotangent zeros_like(const SequenceModel& model);
  void add_scaled(const Cotangent& o, cplx c);
  double squared_norm() const;
  double norm() const;
  bool all_finite() const;
};

struct NllResult {
  double nll = 0.0;  // total over the sequences, nats
  std::size_t floor_hits = 0;
};

// -sum_i log(T(x_i) / Z). Sequences with T <= floor count as log(floor).
NllResult nll_detail(const SequenceModel& model, const CategoricalDataset& data, double floor = kProbabilityFloor);
double nll(const SequenceModel& model, const CategoricalDataset& data);

struct GradientResult {
  Cotangent grad;  // d L / d conj(w) for the batch loss L
  double nll = 0.0;
  std::size_t floor_hits = 0;
};

GradientResult gradient(const SequenceModel& model, const CategoricalDataset& batch, double floor = kProbabilityFloor);
// Batch given as row indices into data.
GradientResult gradient(const SequenceModel& model, const CategoricalDataset& data, std::span<const std::size_t> rows,
                        double floor = kProbabilityFloor);

// w <- w - eta * g (boundaries only if trainable), followed by the constraint projection.
void apply_step(SequenceModel& model, const Cotangent& g, double eta, bool trainable_boundaries = true);

std::vector<double> default_learning_rates();

struct TrainConfig {
  int rank = 2;
  int mu = 2;
  int batch_size = 20;
  int max_iterations = 1000;  // optimizer steps (one minibatch each)
  std::vector<double> learning_rates = default_learning_rates();
  int restarts = 10;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  int patience = 0;  // evaluations without improvement before stopping; 0 disables
  double floor = kProbabilityFloor;
  int eval_interval = 100;
  double holdout_fraction = 0.0;  // 0 trains on everything
  bool trainable_boundaries = true;
  int jobs = 1;

  // Throws ConfigError.
  void validate() const;
};

struct TracePoint {
  int iteration = 0;
  double nll = 0.0;  // mean per sequence over the minibatch
  double grad_norm = 0.0;
};

struct EvalPoint {
  int iteration = 0;
  double nll = 0.0;  // mean per sequence over the training set
};

struct RunSummary {
  double learning_rate = 0.0;
  int restart = 0;
  bool diverged = false;
  double final_nll = 0.0;
  int iterations = 0;
  std::string message;
};

struct TrainReport {
  Variant variant = Variant::Mps;
  Constraint constraint = Constraint::Unconstrained;
  TrainConfig config;
  SequenceModel model;  // winner
  double best_nll = 0.0;  // final mean training NLL of the winner (nats/sequence)
  double best_learning_rate = 0.0;
  int best_restart = 0;
  std::optional<double> holdout_nll;
  std::vector<TracePoint> trace;  // winner
  std::vector<EvalPoint> evaluations;  // winner
  std::vector<RunSummary> runs;  // every (eta, restart) pair, grid order
  std::size_t floor_hits = 0;
  std::size_t train_rows = 0;
  std::size_t holdout_rows = 0;
  double seconds = 0.0;
};

// Called after every optimizer step (post-projection) of every run.
using StepObserver = std::function<void(const SequenceModel& model, double learning_rate, int restart, int iteration)>;

// Throws TrainingFailure when every run diverges.
TrainReport train(Variant variant, Constraint constraint, const CategoricalDataset& data, const TrainConfig& config,
                  const StepObserver& observer = {});

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace tnqmm
