#pragma once

// Command-line front end. Exit codes: 0 ok, 1 verify out of tolerance,
// 2 usage/config/shape error, 3 training failure, 4 conversion precondition.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tnqmm/data.hpp"
#include "tnqmm/io.hpp"
#include "tnqmm/training.hpp"

namespace tnqmm::cli {

enum ExitCode { kOk = 0, kOutOfTolerance = 1, kUsage = 2, kTrainingFailure = 3, kConversion = 4 };

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// MPS variants train NonNegative cores, LPS variants PSD slices.
Constraint default_constraint(Variant v);

struct BenchmarkSpec {
  std::vector<std::filesystem::path> datasets;
  std::vector<Variant> variants{Variant::Mps, Variant::CMps, Variant::Lps, Variant::CLps};
  std::vector<int> ranks{2, 3, 4, 5, 6};
  TrainConfig config;
  CsvSchema schema;
  std::filesystem::path out_dir = "benchmark";
  int jobs = 1;

  void validate() const;
};

BenchmarkSpec benchmark_spec_from_json(const Json& j, BenchmarkSpec base = {});
Json to_json(const BenchmarkSpec& s);

struct BenchmarkRow {
  std::string dataset;
  Variant variant = Variant::Mps;
  int rank = 0;
  int mu = 1;
  int length = 0;
  std::string status = "ok";
  double best_nll = 0.0;  // nats per sequence
  double learning_rate = 0.0;
  int restart = 0;
  double seconds = 0.0;
  std::optional<TrainReport> report;
};

// One row per (dataset, variant, rank) in that order. Failed cells keep a
// status message instead of a number.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec, std::ostream* log = nullptr);

// dataset,variant,rank,mu,best_nll,nll_per_symbol,lr,restart,status
std::string results_csv(const std::vector<BenchmarkRow>& rows);
// dataset,variant,rank,seconds
std::string timings_csv(const std::vector<BenchmarkRow>& rows);

// Writes results.csv, timings.csv, spec.json and reports/<cell>.json.
void write_benchmark(const BenchmarkSpec& spec, const std::vector<BenchmarkRow>& rows);

}  // namespace tnqmm::cli
