#include "tnqmm/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "tnqmm/errors.hpp"

namespace tnqmm {

Cotangent Cotangent::zeros_like(const SequenceModel& model) {
  Cotangent c;
  c.cores.resize(model.length());
  for (int i = 0; i < model.length(); ++i)
    c.cores[i].assign(model.site_slices(i).size(), Matrix::Zero(model.rank(), model.rank()));
  c.left = Matrix::Zero(model.left_boundary().rows(), model.left_boundary().cols());
  c.right = Matrix::Zero(model.right_boundary().rows(), model.right_boundary().cols());
  return c;
}

void Cotangent::add_scaled(const Cotangent& o, cplx c) {
  for (std::size_t i = 0; i < cores.size(); ++i)
    for (std::size_t k = 0; k < cores[i].size(); ++k) cores[i][k] += c * o.cores[i][k];
  if (left.size()) left += c * o.left;
  if (right.size()) right += c * o.right;
}

double Cotangent::squared_norm() const {
  double s = left.squaredNorm() + right.squaredNorm();
  for (const auto& site : cores)
    for (const auto& m : site) s += m.squaredNorm();
  return s;
}

double Cotangent::norm() const { return std::sqrt(squared_norm()); }

bool Cotangent::all_finite() const {
  for (const auto& site : cores)
    for (const auto& m : site)
      if (!m.allFinite()) return false;
  return left.allFinite() && right.allFinite();
}

std::vector<double> default_learning_rates() {
  std::vector<double> out;
  for (int e = -5; e <= 5; ++e) out.push_back(std::pow(10.0, e));
  return out;
}

void TrainConfig::validate() const {
  if (rank < 1) throw ConfigError("rank must be positive");
  if (mu < 1) throw ConfigError("mu must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (learning_rates.empty()) throw ConfigError("learning-rate grid is empty");
  for (double lr : learning_rates)
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rates must be positive and finite");
  if (restarts < 1) throw ConfigError("restarts must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  if (!(floor > 0.0)) throw ConfigError("probability floor must be positive");
  if (eval_interval < 1) throw ConfigError("eval_interval must be positive");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must lie in [0, 1)");
  if (jobs < 1) throw ConfigError("jobs must be positive");
}

namespace {

void check_shapes(const SequenceModel& model, const CategoricalDataset& data) {
  if (data.dims() != model.dims()) throw DimensionError("dataset alphabets do not match the model");
}

// log(T/Z) with the floor applied; returns false on a floor hit.
bool floored_log_prob(const LogValue& t, const LogValue& z, double log_floor, double& out) {
  const double lp = t.log_abs - z.log_abs;
  if (t.is_zero() || !(lp >= log_floor)) {
    out = log_floor;
    return false;
  }
  out = lp;
  return true;
}

// Accumulates coef * d log|T| / d conj(w) into out. `symbols` may hold
// kAllSymbols entries (the partition-function network).
void add_log_abs_cotangent(const SequenceModel& model, const EnvironmentCache& env, std::span<const int> symbols,
                           const LogValue& t, cplx coef, Cotangent& out) {
  const int N = model.length();
  const int r = model.rank();
  const int mu = model.mu();
  const bool lps = is_purified(model.variant());
  for (int i = 0; i < N; ++i) {
    const double s = std::exp(env.left_log_scale[i] + env.right_log_scale[i + 1] - t.log_abs);
    // W / T, with T = sum_{P,Q} W[P,Q] G[P,Q]
    Matrix w = (env.left[i] * env.right[i + 1]).transpose() * (s / t.phase);
    const int first = symbols[i] == kAllSymbols ? 0 : symbols[i];
    const int last = symbols[i] == kAllSymbols ? model.dim(i) : symbols[i] + 1;
    for (int x = first; x < last; ++x)
      for (int b = 0; b < mu; ++b) {
        const Matrix& B = model.slice(i, x, b);
        Matrix& g = out.cores[i][x * mu + b];
        if (!lps) {
          g += coef * 0.5 * w.conjugate();
          continue;
        }
        // G = sum_beta conj(B) (x) B, G[p r + q, s r + t] = conj(B(p,s)) B(q,t)
        Matrix a = Matrix::Zero(r, r);  // dT/dconj(B) / T
        Matrix d = Matrix::Zero(r, r);  // dT/dB / T
        for (int p = 0; p < r; ++p)
          for (int ss = 0; ss < r; ++ss) {
            auto blk = w.block(p * r, ss * r, r, r);
            a(p, ss) = blk.cwiseProduct(B).sum();
            d += blk * std::conj(B(p, ss));
          }
        g += coef * 0.5 * (a + d.conjugate());
      }
  }
  if (!model.has_boundaries()) return;
  // T = right_vec^T (...) left_vec, linear in each boundary.
  const double sl = std::exp(env.right_log_scale[0] - t.log_abs);
  const double sr = std::exp(env.left_log_scale[N] - t.log_abs);
  Vector dl = env.right[0].transpose().col(0) * (sl / t.phase);
  Vector dr = env.left[N].col(0) * (sr / t.phase);
  if (lps) {
    out.left += coef * 0.5 * unvec(dl, r).conjugate();
    out.right += coef * 0.5 * unvec(dr, r).conjugate();
  } else {
    out.left += coef * 0.5 * Matrix(dl).conjugate();
    out.right += coef * 0.5 * Matrix(dr).conjugate();
  }
}

}  // namespace

NllResult nll_detail(const SequenceModel& model, const CategoricalDataset& data, double floor) {
  check_shapes(model, data);
  TransferTable table(model);
  const LogValue z = partition_function(table);
  const double log_floor = std::log(floor);
  NllResult out;
  for (std::size_t n = 0; n < data.size(); ++n) {
    double lp = 0.0;
    if (!floored_log_prob(evaluate(table, data.row(n)), z, log_floor, lp)) ++out.floor_hits;
    out.nll -= lp;
  }
  return out;
}

double nll(const SequenceModel& model, const CategoricalDataset& data) { return nll_detail(model, data).nll; }

GradientResult gradient(const SequenceModel& model, const CategoricalDataset& data, std::span<const std::size_t> rows,
                        double floor) {
  check_shapes(model, data);
  TransferTable table(model);
  const LogValue z = partition_function(table);
  const double log_floor = std::log(floor);
  GradientResult out;
  out.grad = Cotangent::zeros_like(model);
  for (std::size_t n : rows) {
    if (n >= data.size()) throw DimensionError("batch row out of range");
    auto row = data.row(n);
    EnvironmentCache env = build_environments(table, row);
    const LogValue t = env.splice(model.length());
    double lp = 0.0;
    if (!floored_log_prob(t, z, log_floor, lp)) {
      ++out.floor_hits;
      out.nll -= lp;
      continue;
    }
    out.nll -= lp;
    add_log_abs_cotangent(model, env, row, t, -1.0, out.grad);
  }
  const std::size_t kept = rows.size() - out.floor_hits;
  if (kept > 0) {
    std::vector<int> all(model.length(), kAllSymbols);
    EnvironmentCache zenv = build_environments(table, all);
    add_log_abs_cotangent(model, zenv, all, zenv.splice(model.length()), static_cast<double>(kept), out.grad);
  }
  return out;
}

GradientResult gradient(const SequenceModel& model, const CategoricalDataset& batch, double floor) {
  std::vector<std::size_t> rows(batch.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return gradient(model, batch, rows, floor);
}

void apply_step(SequenceModel& model, const Cotangent& g, double eta, bool trainable_boundaries) {
  for (int i = 0; i < model.length(); ++i) {
    auto& slices = model.site_slices(i);
    for (std::size_t k = 0; k < slices.size(); ++k) slices[k] -= eta * g.cores[i][k];
  }
  if (trainable_boundaries && model.has_boundaries()) {
    model.left_boundary() -= eta * g.left;
    model.right_boundary() -= eta * g.right;
  }
  project_to_constraint(model);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool model_finite(const SequenceModel& m) {
  for (int i = 0; i < m.length(); ++i)
    for (const auto& s : m.site_slices(i))
      if (!s.allFinite()) return false;
  return m.left_boundary().allFinite() && m.right_boundary().allFinite();
}

struct RunResult {
  RunSummary summary;
  SequenceModel model;
  std::vector<TracePoint> trace;
  std::vector<EvalPoint> evaluations;
  std::size_t floor_hits = 0;
};

RunResult run_one(Variant variant, Constraint constraint, const CategoricalDataset& data, const TrainConfig& cfg,
                  double lr, int restart, const StepObserver& observer) {
  RunResult res;
  res.summary.learning_rate = lr;
  res.summary.restart = restart;
  const std::uint64_t init_seed = splitmix(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(restart));
  const std::uint64_t shuffle_seed = splitmix(init_seed ^ 0x5851f42d4c957f2dULL);
  const int mu = is_purified(variant) ? cfg.mu : 1;
  res.model = random_model(variant, constraint, data.dims(), cfg.rank, mu, init_seed, cfg.init_scale);

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(shuffle_seed);
  auto shuffle = [&]() {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
  };
  shuffle();
  std::size_t cursor = 0;

  auto fail = [&](const std::string& why, int it) {
    res.summary.diverged = true;
    res.summary.final_nll = std::numeric_limits<double>::quiet_NaN();
    res.summary.iterations = it;
    res.summary.message = why;
    return res;
  };
  auto evaluate_full = [&](int it) {
    auto r = nll_detail(res.model, data, cfg.floor);
    const double mean = r.nll / static_cast<double>(n);
    res.evaluations.push_back({it, mean});
    res.floor_hits = r.floor_hits;
    return mean;
  };

  double best_eval = std::numeric_limits<double>::infinity();
  int stale = 0;
  int it = 0;
  try {
    double e0 = evaluate_full(0);
    if (!std::isfinite(e0)) return fail("initial NLL is not finite", 0);
    best_eval = e0;
    std::vector<std::size_t> batch;
    for (it = 1; it <= cfg.max_iterations; ++it) {
      batch.clear();
      while (batch.size() < static_cast<std::size_t>(cfg.batch_size)) {
        if (cursor == n) {
          if (!batch.empty()) break;  // the epoch's last short batch is kept
          shuffle();
          cursor = 0;
        }
        batch.push_back(order[cursor++]);
      }
      GradientResult g = gradient(res.model, data, batch, cfg.floor);
      const double gn = g.grad.norm();
      const double bn = g.nll / static_cast<double>(batch.size());
      if (!std::isfinite(gn) || !std::isfinite(bn)) return fail("non-finite gradient or NLL", it);
      res.trace.push_back({it, bn, gn});
      apply_step(res.model, g.grad, lr, cfg.trainable_boundaries);
      if (!model_finite(res.model)) return fail("parameters became non-finite", it);
      if (observer) observer(res.model, lr, restart, it);
      if (it % cfg.eval_interval == 0 || it == cfg.max_iterations) {
        double e = evaluate_full(it);
        if (!std::isfinite(e)) return fail("NLL became non-finite", it);
        if (e < best_eval) {
          best_eval = e;
          stale = 0;
        } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
          break;
        }
      }
    }
    if (res.evaluations.back().iteration != std::min(it, cfg.max_iterations)) {
      double e = evaluate_full(std::min(it, cfg.max_iterations));
      if (!std::isfinite(e)) return fail("NLL became non-finite", it);
    }
  } catch (const Error& e) {
    return fail(e.what(), it);
  }
  res.summary.final_nll = res.evaluations.back().nll;
  res.summary.iterations = res.evaluations.back().iteration;
  return res;
}

}  // namespace

TrainReport train(Variant variant, Constraint constraint, const CategoricalDataset& data, const TrainConfig& config,
                  const StepObserver& observer) {
  config.validate();
  data.validate();
  if (data.size() == 0 || data.length() == 0) throw DataError("training data is empty");
  // Rejects incompatible variant/constraint pairs up front.
  SequenceModel probe(variant, constraint, data.dims(), config.rank, is_purified(variant) ? config.mu : 1);

  const auto start = std::chrono::steady_clock::now();
  CategoricalDataset train_set = data, holdout;
  if (config.holdout_fraction > 0.0) std::tie(holdout, train_set) = split(data, config.holdout_fraction, config.seed);

  const std::size_t R = static_cast<std::size_t>(config.restarts);
  const std::size_t runs = config.learning_rates.size() * R;
  std::vector<RunResult> results(runs);
  parallel_for(runs, config.jobs, [&](std::size_t k) {
    results[k] = run_one(variant, constraint, train_set, config, config.learning_rates[k / R], static_cast<int>(k % R),
                         observer);
  });

  TrainReport rep;
  rep.variant = variant;
  rep.constraint = constraint;
  rep.config = config;
  rep.train_rows = train_set.size();
  rep.holdout_rows = holdout.size();
  std::optional<std::size_t> win;
  for (std::size_t k = 0; k < runs; ++k) {
    rep.runs.push_back(results[k].summary);
    const auto& s = results[k].summary;
    if (s.diverged) continue;
    if (!win) {
      win = k;
      continue;
    }
    const auto& w = results[*win].summary;
    if (s.final_nll < w.final_nll ||
        (s.final_nll == w.final_nll &&
         (s.learning_rate < w.learning_rate || (s.learning_rate == w.learning_rate && s.restart < w.restart))))
      win = k;
  }
  if (!win) {
    std::string why = "all " + std::to_string(runs) + " runs diverged";
    if (!results.empty()) why += " (first: " + results.front().summary.message + ")";
    throw TrainingFailure(why);
  }
  RunResult& best = results[*win];
  rep.model = std::move(best.model);
  rep.best_nll = best.summary.final_nll;
  rep.best_learning_rate = best.summary.learning_rate;
  rep.best_restart = best.summary.restart;
  rep.trace = std::move(best.trace);
  rep.evaluations = std::move(best.evaluations);
  rep.floor_hits = best.floor_hits;
  if (holdout.size() > 0) rep.holdout_nll = nll(rep.model, holdout) / static_cast<double>(holdout.size());
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace tnqmm
