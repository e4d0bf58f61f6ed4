#pragma once

// JSON serialization of models, configs and training reports.
//
// Complex arrays are stored as {"re": [...], "im": [...]} with identical
// nesting. Cores use the (x, [beta,] left, right) layout; matrices are
// nested [row][col]. Doubles are written in shortest round-trip form, so
// load(save(m)) == m exactly.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tnqmm/classical.hpp"
#include "tnqmm/model.hpp"
#include "tnqmm/quantum.hpp"
#include "tnqmm/training.hpp"

namespace tnqmm {

using Json = nlohmann::json;

Json to_json(const SequenceModel& m);
Json to_json(const KrausModel& m);
Json to_json(const ClassicalHmm& m);
Json to_json(const TrainConfig& c);
// The winner model is not embedded; it is saved next to the report.
Json to_json(const TrainReport& r);

SequenceModel sequence_model_from_json(const Json& j);
KrausModel kraus_model_from_json(const Json& j);
ClassicalHmm classical_hmm_from_json(const Json& j);
// Missing keys keep their defaults; unknown keys throw ConfigError.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

enum class ModelKind { Sequence, Kraus, Classical };
std::string to_string(ModelKind k);
ModelKind model_kind(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

void save_model(const SequenceModel& m, const std::filesystem::path& path);
SequenceModel load_model(const std::filesystem::path& path);

// iteration,nll,grad_norm
void write_trace_csv(const TrainReport& r, const std::filesystem::path& path);

}  // namespace tnqmm
