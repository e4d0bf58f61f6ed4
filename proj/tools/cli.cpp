#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "tnqmm/classical.hpp"
#include "tnqmm/errors.hpp"
#include "tnqmm/oracle.hpp"
#include "tnqmm/quantum.hpp"

namespace fs = std::filesystem;

namespace tnqmm::cli {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<Variant> out;
  for (const auto& n : names) {
    if (n == "all") {
      out = {Variant::Mps, Variant::CMps, Variant::Lps, Variant::CLps};
      continue;
    }
    out.push_back(parse_variant(n));
  }
  return out;
}

struct CsvFlags {
  bool header = false;
  std::string delimiter = ",";
  std::string missing = "?";
  std::string policy = "own";
  std::vector<std::string> columns;
  std::string label;

  void attach(CLI::App* app) {
    app->add_flag("--header", header, "CSV has a header row");
    app->add_option("--delimiter", delimiter, "CSV field delimiter")->capture_default_str();
    app->add_option("--missing-token", missing, "token marking a missing value")->capture_default_str();
    app->add_option("--missing", policy, "missing values: own (extra category) or drop (drop row)")
        ->check(CLI::IsMember({"own", "drop"}))
        ->capture_default_str();
    app->add_option("--columns", columns, "columns to model (names or 0-based indices)")->delimiter(',');
    app->add_option("--label", label, "label column excluded from the model");
  }

  CsvSchema schema() const {
    if (delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
    CsvSchema s;
    s.delimiter = delimiter[0];
    s.header = header;
    s.missing_token = missing;
    s.missing_policy = policy == "drop" ? MissingPolicy::DropRow : MissingPolicy::OwnCategory;
    s.columns = columns;
    if (!label.empty()) s.label_column = label;
    return s;
  }
};

CategoricalDataset read_dataset(const fs::path& path, const CsvSchema& schema) {
  if (!fs::exists(path)) throw DataError("dataset not found: " + path.string());
  return load_any(path, schema);
}

void write_dataset(const CategoricalDataset& d, const fs::path& path) {
  if (path.extension() == ".csv")
    write_csv(d, path);
  else
    save_dataset(d, path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
}

Distribution distribution_of(const Json& j) {
  switch (model_kind(j)) {
    case ModelKind::Sequence: return enumerate_distribution(sequence_model_from_json(j));
    case ModelKind::Kraus: return enumerate_distribution(kraus_model_from_json(j));
    case ModelKind::Classical: return enumerate_distribution(classical_hmm_from_json(j));
  }
  throw ModelError("unknown model kind");
}

std::string cell_name(const BenchmarkRow& r) {
  return r.dataset + "_" + to_string(r.variant) + "_r" + std::to_string(r.rank);
}

// Flags shared by train and benchmark; only flags the user actually passed override the config.
struct TrainFlags {
  int rank = 0, mu = 0, batch = 0, iterations = 0, restarts = 0, patience = -1, eval_interval = 0, jobs = 0;
  std::vector<double> lrs;
  std::uint64_t seed = 0;
  double holdout = -1.0, init_scale = 0.0;
  bool fixed_boundaries = false;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app, bool with_rank) {
    if (with_rank) app->add_option("--rank", rank, "bond dimension r")->check(CLI::PositiveNumber);
    app->add_option("--mu", mu, "purification dimension (LPS variants)")->check(CLI::PositiveNumber);
    app->add_option("--batch", batch, "minibatch size")->check(CLI::PositiveNumber);
    app->add_option("--iterations", iterations, "optimizer steps per run")->check(CLI::PositiveNumber);
    app->add_option("--restarts", restarts, "random restarts per learning rate")->check(CLI::PositiveNumber);
    app->add_option("--lr", lrs, "learning-rate grid")->delimiter(',');
    seed_opt = app->add_option("--seed", seed, "master seed");
    app->add_option("--patience", patience, "evaluations without improvement before stopping (0 = off)");
    app->add_option("--eval-interval", eval_interval, "iterations between full-data evaluations");
    app->add_option("--holdout", holdout, "held-out fraction in [0,1)");
    app->add_option("--init-scale", init_scale, "initialization scale");
    app->add_flag("--fixed-boundaries", fixed_boundaries, "do not train boundary tensors");
  }

  void apply(TrainConfig& c) const {
    if (rank) c.rank = rank;
    if (mu) c.mu = mu;
    if (batch) c.batch_size = batch;
    if (iterations) c.max_iterations = iterations;
    if (restarts) c.restarts = restarts;
    if (!lrs.empty()) c.learning_rates = lrs;
    if (seed_opt && seed_opt->count()) c.seed = seed;
    if (patience >= 0) c.patience = patience;
    if (eval_interval) c.eval_interval = eval_interval;
    if (holdout >= 0.0) c.holdout_fraction = holdout;
    if (init_scale > 0.0) c.init_scale = init_scale;
    if (fixed_boundaries) c.trainable_boundaries = false;
  }
};

int cmd_train(const fs::path& data_path, const std::string& variant_name, const std::string& constraint_name,
              const fs::path& config_path, const TrainFlags& flags, int jobs, const CsvSchema& schema,
              const fs::path& out_dir, std::ostream& out) {
  const Variant variant = parse_variant(variant_name);
  const Constraint constraint = constraint_name.empty() ? default_constraint(variant) : parse_constraint(constraint_name);
  TrainConfig cfg;
  if (!config_path.empty()) cfg = train_config_from_json(read_json(config_path));
  flags.apply(cfg);
  if (jobs) cfg.jobs = jobs;
  cfg.validate();
  const CategoricalDataset data = read_dataset(data_path, schema);
  const TrainReport rep = train(variant, constraint, data, cfg);

  ensure_dir(out_dir);
  save_model(rep.model, out_dir / "model.json");
  Json rj = to_json(rep);
  rj["dataset"] = {{"path", data_path.string()}, {"provenance", data.provenance}};
  write_json(rj, out_dir / "report.json");
  write_trace_csv(rep, out_dir / "trace.csv");
  out << "variant=" << to_string(variant) << " rank=" << cfg.rank << " best_nll=" << fmt(rep.best_nll)
      << " per_symbol=" << fmt(rep.best_nll / data.length()) << " lr=" << fmt(rep.best_learning_rate)
      << " restart=" << rep.best_restart;
  if (rep.holdout_nll) out << " holdout_nll=" << fmt(*rep.holdout_nll);
  out << '\n';
  return kOk;
}

int cmd_eval(const fs::path& model_path, const fs::path& data_path, const CsvSchema& schema,
             const fs::path& per_sequence, std::ostream& out) {
  const SequenceModel model = load_model(model_path);
  const CategoricalDataset data = read_dataset(data_path, schema);
  if (data.dims() != model.dims()) throw DimensionError("dataset alphabets do not match the model");
  const NllResult r = nll_detail(model, data);
  const double n = static_cast<double>(data.size());
  Json j{{"rows", data.size()},
         {"nll_total", r.nll},
         {"nll_mean", r.nll / n},
         {"nll_per_symbol", r.nll / n / model.length()},
         {"floor_hits", r.floor_hits}};
  out << j.dump() << '\n';
  if (!per_sequence.empty()) {
    const TransferTable table(model);
    const double log_z = partition_function(table).log_abs;
    std::ofstream f(per_sequence);
    if (!f) throw ConfigError("cannot write " + per_sequence.string());
    f << "row,log_p\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      const LogValue v = evaluate(table, data.row(i));
      f << i << ',' << fmt(v.is_zero() ? -std::numeric_limits<double>::infinity() : v.log_abs - log_z) << '\n';
    }
  }
  return kOk;
}

int cmd_convert(const fs::path& in, const std::string& to, int cpd_rank, const fs::path& out_path, std::ostream& out) {
  const Json j = read_json(in);
  Json result;
  const ModelKind kind = model_kind(j);
  auto mismatch = [&]() -> int {
    throw ConfigError("cannot convert a " + to_string(kind) + " document to '" + to + "'");
  };
  if (kind == ModelKind::Kraus) {
    const KrausModel k = kraus_model_from_json(j);
    const std::string want = k.topology == Topology::Chain ? "lps" : "clps";
    if (to != want) return mismatch();
    result = to_json(kraus_to_tensor(k));
  } else if (kind == ModelKind::Classical) {
    const ClassicalHmm h = classical_hmm_from_json(j);
    const std::string want = h.topology == Topology::Chain ? "mps" : "cmps";
    if (to != want) return mismatch();
    result = to_json(h.topology == Topology::Chain ? hmm_to_mps(h) : chmm_to_cmps(h));
  } else {
    const SequenceModel m = sequence_model_from_json(j);
    if ((to == "hqmm" && m.variant() == Variant::Lps) || (to == "chqmm" && m.variant() == Variant::CLps)) {
      result = to_json(tensor_to_kraus(m));
    } else if (to == "chmm" && m.variant() == Variant::CMps) {
      const ChmmConversion c = cmps_to_chmm(m, cpd_rank);
      result = to_json(c.hmm);
      out << "cpd_rank=" << c.cpd_rank << " residual=" << fmt(c.residual) << '\n';
    } else {
      return mismatch();
    }
  }
  write_json(result, out_path);
  out << "wrote " << to_string(model_kind(result)) << ' ' << out_path.string() << '\n';
  return kOk;
}

int cmd_verify(const fs::path& a, const fs::path& b, double tol, std::ostream& out) {
  const Distribution pa = distribution_of(read_json(a));
  const Distribution pb = distribution_of(read_json(b));
  const double dev = max_abs_deviation(pa, pb);
  const double tv = tv_distance(pa, pb);
  const bool ok = tv <= tol;
  out << Json{{"max_abs_deviation", dev}, {"tv", tv}, {"tolerance", tol}, {"within_tolerance", ok}}.dump() << '\n';
  return ok ? kOk : kOutOfTolerance;
}

int cmd_sample(const fs::path& model_path, std::size_t count, std::uint64_t seed, const fs::path& out_path,
               std::ostream& out) {
  const SequenceModel m = load_model(model_path);
  CategoricalDataset d = sample(m, seed, count);
  d.provenance = "sampled from " + model_path.filename().string() + " seed=" + std::to_string(seed);
  write_dataset(d, out_path);
  out << "wrote " << d.size() << " sequences to " << out_path.string() << '\n';
  return kOk;
}

struct RandomFlags {
  std::string kind = "sequence", variant = "clps", constraint, topology = "circular";
  std::vector<int> dims{2, 2, 2};
  int rank = 2, mu = 2, hidden = 2, kraus_rank = 2;
  std::uint64_t seed = 0;
  bool pure = false;
  fs::path out_path;
};

int cmd_random(const RandomFlags& f, std::ostream& out) {
  Json j;
  if (f.kind == "sequence") {
    const Variant v = parse_variant(f.variant);
    const Constraint c = f.constraint.empty() ? default_constraint(v) : parse_constraint(f.constraint);
    j = to_json(random_model(v, c, f.dims, f.rank, is_purified(v) ? f.mu : 1, f.seed));
  } else if (f.kind == "kraus") {
    j = to_json(random_kraus_model(parse_topology(f.topology), f.dims, f.rank, f.kraus_rank, f.seed, f.pure));
  } else {
    j = to_json(random_hmm(parse_topology(f.topology), f.dims, f.hidden, f.seed));
  }
  write_json(j, f.out_path);
  out << "wrote " << to_string(model_kind(j)) << ' ' << f.out_path.string() << '\n';
  return kOk;
}

int cmd_benchmark(BenchmarkSpec spec, std::ostream& out, std::ostream& err) {
  spec.validate();
  const auto rows = run_benchmark(spec, &err);
  write_benchmark(spec, rows);
  std::size_t ok = 0;
  for (const auto& r : rows) ok += r.status == "ok";
  out << ok << '/' << rows.size() << " cells completed; results in " << (spec.out_dir / "results.csv").string() << '\n';
  return ok > 0 ? kOk : kTrainingFailure;
}

}  // namespace

Constraint default_constraint(Variant v) {
  return is_purified(v) ? Constraint::PsdSlices : Constraint::NonNegative;
}

void BenchmarkSpec::validate() const {
  if (datasets.empty()) throw ConfigError("benchmark needs at least one dataset");
  if (variants.empty()) throw ConfigError("benchmark needs at least one variant");
  if (ranks.empty()) throw ConfigError("benchmark needs at least one rank");
  for (int r : ranks)
    if (r < 1) throw ConfigError("ranks must be positive");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  config.validate();
}

BenchmarkSpec benchmark_spec_from_json(const Json& j, BenchmarkSpec s) {
  if (!j.is_object()) throw ConfigError("benchmark spec must be a JSON object");
  static const std::set<std::string> known{"datasets", "variants", "ranks", "train", "out", "jobs"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown benchmark key '" + it.key() + "'");
  try {
    if (j.contains("datasets")) {
      s.datasets.clear();
      for (const auto& p : j.at("datasets")) s.datasets.emplace_back(p.get<std::string>());
    }
    if (j.contains("variants")) s.variants = parse_variants(j.at("variants").get<std::vector<std::string>>());
    if (j.contains("ranks")) s.ranks = j.at("ranks").get<std::vector<int>>();
    if (j.contains("out")) s.out_dir = j.at("out").get<std::string>();
    if (j.contains("jobs")) s.jobs = j.at("jobs").get<int>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad benchmark spec: ") + e.what());
  }
  if (j.contains("train")) s.config = train_config_from_json(j.at("train"), s.config);
  return s;
}

Json to_json(const BenchmarkSpec& s) {
  Json j;
  j["datasets"] = Json::array();
  for (const auto& p : s.datasets) j["datasets"].push_back(p.string());
  j["variants"] = Json::array();
  for (Variant v : s.variants) j["variants"].push_back(to_string(v));
  j["ranks"] = s.ranks;
  j["train"] = tnqmm::to_json(s.config);
  j["out"] = s.out_dir.string();
  j["jobs"] = s.jobs;
  return j;
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec, std::ostream* log) {
  spec.validate();
  std::vector<CategoricalDataset> data;
  for (const auto& p : spec.datasets) data.push_back(read_dataset(p, spec.schema));

  std::vector<BenchmarkRow> rows;
  for (std::size_t d = 0; d < data.size(); ++d)
    for (Variant v : spec.variants)
      for (int r : spec.ranks) {
        BenchmarkRow row;
        row.dataset = spec.datasets[d].stem().string();
        row.variant = v;
        row.rank = r;
        row.mu = is_purified(v) ? spec.config.mu : 1;
        row.length = data[d].length();
        rows.push_back(std::move(row));
      }

  std::vector<std::size_t> which(rows.size());
  {
    std::size_t k = 0;
    for (std::size_t d = 0; d < data.size(); ++d)
      for (std::size_t c = 0; c < spec.variants.size() * spec.ranks.size(); ++c) which[k++] = d;
  }

  std::mutex log_mutex;
  parallel_for(rows.size(), spec.jobs, [&](std::size_t i) {
    BenchmarkRow& row = rows[i];
    TrainConfig cfg = spec.config;
    cfg.rank = row.rank;
    cfg.jobs = 1;
    const auto start = std::chrono::steady_clock::now();
    try {
      TrainReport rep = train(row.variant, default_constraint(row.variant), data[which[i]], cfg);
      row.best_nll = rep.best_nll;
      row.learning_rate = rep.best_learning_rate;
      row.restart = rep.best_restart;
      row.report = std::move(rep);
    } catch (const TrainingFailure&) {
      row.status = "diverged";
    } catch (const Error& e) {
      row.status = std::string("error: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log) {
      std::lock_guard lock(log_mutex);
      *log << cell_name(row) << ' ' << row.status;
      if (row.status == "ok") *log << " nll=" << fmt(row.best_nll);
      *log << " (" << fmt(row.seconds) << " s)" << std::endl;
    }
  });
  return rows;
}

std::string results_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream s;
  s << "dataset,variant,rank,mu,best_nll,nll_per_symbol,lr,restart,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    s << r.dataset << ',' << to_string(r.variant) << ',' << r.rank << ',' << r.mu << ',';
    if (r.status == "ok")
      s << fmt(r.best_nll) << ',' << fmt(r.best_nll / r.length) << ',' << fmt(r.learning_rate) << ',' << r.restart;
    else
      s << ",,,";
    s << ',' << status << '\n';
  }
  return s.str();
}

std::string timings_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream s;
  s << "dataset,variant,rank,seconds\n";
  for (const auto& r : rows) s << r.dataset << ',' << to_string(r.variant) << ',' << r.rank << ',' << fmt(r.seconds) << '\n';
  return s.str();
}

void write_benchmark(const BenchmarkSpec& spec, const std::vector<BenchmarkRow>& rows) {
  ensure_dir(spec.out_dir / "reports");
  std::ofstream(spec.out_dir / "results.csv") << results_csv(rows);
  std::ofstream(spec.out_dir / "timings.csv") << timings_csv(rows);
  write_json(to_json(spec), spec.out_dir / "spec.json");
  for (const auto& r : rows) {
    if (!r.report) continue;
    Json j = tnqmm::to_json(*r.report);
    j["dataset"] = r.dataset;
    write_json(j, spec.out_dir / "reports" / (cell_name(r) + ".json"));
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor-network and quantum-inspired sequence models"};
  app.require_subcommand(1);

  CsvFlags csv_train, csv_eval, csv_bench;

  auto* train_cmd = app.add_subcommand("train", "fit a model by projected minibatch descent");
  std::string variant = "clps", constraint;
  fs::path data_path, config_path, out_dir = ".";
  int jobs = 0;
  TrainFlags train_flags;
  train_cmd->add_option("--variant", variant, "mps, cmps, lps or clps")->capture_default_str();
  train_cmd->add_option("--constraint", constraint, "nonnegative, psd_slices or unconstrained");
  train_cmd->add_option("--data", data_path, "dataset (canonical file or CSV)")->required();
  train_cmd->add_option("--config", config_path, "JSON training config");
  train_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
  train_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  train_flags.attach(train_cmd, true);
  csv_train.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "negative log-likelihood of a dataset");
  fs::path model_path, per_sequence;
  eval_cmd->add_option("--model", model_path, "model JSON")->required();
  eval_cmd->add_option("--data", data_path, "dataset")->required();
  eval_cmd->add_option("--per-sequence", per_sequence, "write log p per row to this CSV");
  csv_eval.attach(eval_cmd);

  auto* sample_cmd = app.add_subcommand("sample", "draw sequences from a model");
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  fs::path out_path;
  sample_cmd->add_option("--model", model_path, "model JSON")->required();
  sample_cmd->add_option("--count", count, "number of sequences")->capture_default_str();
  sample_cmd->add_option("--seed", seed, "sampler seed")->capture_default_str();
  sample_cmd->add_option("--out", out_path, "output dataset (.csv or canonical)")->required();

  auto* convert_cmd = app.add_subcommand("convert", "map a model between formalisms");
  std::string to;
  int cpd_rank = kAutoRank;
  fs::path in_path;
  convert_cmd->add_option("--in", in_path, "input model JSON")->required();
  convert_cmd->add_option("--to", to, "target: lps, clps, hqmm, chqmm, mps, cmps, chmm")
      ->required()
      ->check(CLI::IsMember({"lps", "clps", "hqmm", "chqmm", "mps", "cmps", "chmm"}));
  convert_cmd->add_option("--cpd-rank", cpd_rank, "CPD rank for cmps -> chmm (0 = search)")->capture_default_str();
  convert_cmd->add_option("--out", out_path, "output model JSON")->required();

  auto* verify_cmd = app.add_subcommand("verify", "compare the distributions of two models by enumeration");
  fs::path a_path, b_path;
  double tol = 1e-9;
  verify_cmd->add_option("a", a_path, "first model JSON")->required();
  verify_cmd->add_option("b", b_path, "second model JSON")->required();
  verify_cmd->add_option("--tol", tol, "total-variation tolerance")->capture_default_str();

  auto* bench_cmd = app.add_subcommand("benchmark", "variants x ranks matrix, best of restarts per cell");
  std::vector<std::string> datasets, variants;
  std::vector<int> ranks;
  fs::path spec_path, bench_out;
  TrainFlags bench_flags;
  bench_cmd->add_option("--data", datasets, "dataset files")->delimiter(',');
  bench_cmd->add_option("--variants", variants, "variants (or 'all')")->delimiter(',');
  bench_cmd->add_option("--ranks", ranks, "bond dimensions")->delimiter(',');
  bench_cmd->add_option("--spec", spec_path, "JSON benchmark spec");
  bench_cmd->add_option("--out", bench_out, "output directory");
  bench_cmd->add_option("--jobs", jobs, "cells run concurrently")->check(CLI::PositiveNumber);
  bench_flags.attach(bench_cmd, false);
  csv_bench.attach(bench_cmd);

  auto* random_cmd = app.add_subcommand("random", "write a random model");
  RandomFlags rf;
  random_cmd->add_option("--kind", rf.kind, "sequence, kraus or hmm")
      ->check(CLI::IsMember({"sequence", "kraus", "hmm"}))
      ->capture_default_str();
  random_cmd->add_option("--variant", rf.variant, "tensor-network variant")->capture_default_str();
  random_cmd->add_option("--constraint", rf.constraint, "constraint (default per variant)");
  random_cmd->add_option("--topology", rf.topology, "chain or circular (kraus, hmm)")->capture_default_str();
  random_cmd->add_option("--dims", rf.dims, "alphabet size per site")->delimiter(',');
  random_cmd->add_option("--rank", rf.rank, "bond / operator dimension")->capture_default_str();
  random_cmd->add_option("--mu", rf.mu, "purification dimension")->capture_default_str();
  random_cmd->add_option("--hidden", rf.hidden, "hidden states (hmm)")->capture_default_str();
  random_cmd->add_option("--kraus-rank", rf.kraus_rank, "maximum Kraus rank (kraus)")->capture_default_str();
  random_cmd->add_flag("--pure", rf.pure, "pure initial state (chain kraus)");
  random_cmd->add_option("--seed", rf.seed, "seed")->capture_default_str();
  random_cmd->add_option("--out", rf.out_path, "output model JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*train_cmd)
      return cmd_train(data_path, variant, constraint, config_path, train_flags, jobs, csv_train.schema(), out_dir, out);
    if (*eval_cmd) return cmd_eval(model_path, data_path, csv_eval.schema(), per_sequence, out);
    if (*sample_cmd) return cmd_sample(model_path, count, seed, out_path, out);
    if (*convert_cmd) return cmd_convert(in_path, to, cpd_rank, out_path, out);
    if (*verify_cmd) return cmd_verify(a_path, b_path, tol, out);
    if (*random_cmd) return cmd_random(rf, out);
    if (*bench_cmd) {
      BenchmarkSpec spec;
      if (!spec_path.empty()) spec = benchmark_spec_from_json(read_json(spec_path));
      if (!datasets.empty()) spec.datasets.assign(datasets.begin(), datasets.end());
      if (!variants.empty()) spec.variants = parse_variants(variants);
      if (!ranks.empty()) spec.ranks = ranks;
      if (!bench_out.empty()) spec.out_dir = bench_out;
      if (jobs) spec.jobs = jobs;
      bench_flags.apply(spec.config);
      spec.schema = csv_bench.schema();
      return cmd_benchmark(std::move(spec), out, err);
    }
  } catch (const TrainingFailure& e) {
    err << "training failed: " << e.what() << '\n';
    return kTrainingFailure;
  } catch (const ConversionError& e) {
    err << "conversion failed: " << e.what() << '\n';
    return kConversion;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace tnqmm::cli
