#include <doctest.h>

#include <filesystem>

#include "tnqmm/errors.hpp"
#include "tnqmm/io.hpp"

using namespace tnqmm;
namespace fs = std::filesystem;

TEST_CASE("sequence models survive a file round trip bit for bit") {
  fs::path dir = fs::temp_directory_path() / "tnqmm_test_io";
  fs::create_directories(dir);
  int k = 0;
  for (Variant v : {Variant::Mps, Variant::CMps, Variant::Lps, Variant::CLps})
    for (Constraint c : {is_purified(v) ? Constraint::PsdSlices : Constraint::NonNegative, Constraint::Unconstrained}) {
      SequenceModel m = random_model(v, c, {2, 3, 2}, 3, is_purified(v) ? 2 : 1, 10 + k);
      fs::path p = dir / ("m" + std::to_string(k++) + ".json");
      save_model(m, p);
      SequenceModel back = load_model(p);
      CHECK(back == m);
      CHECK(back.variant() == v);
      CHECK(back.constraint() == c);
    }
}

TEST_CASE("Kraus and classical models round trip") {
  KrausModel k = random_kraus_model(Topology::Chain, {2, 3}, 2, 2, 1);
  Json jk = to_json(k);
  CHECK(model_kind(jk) == ModelKind::Kraus);
  CHECK(kraus_model_from_json(Json::parse(jk.dump())) == k);

  ClassicalHmm h = random_hmm(Topology::Circular, {2, 2, 3}, 3, 2);
  Json jh = to_json(h);
  CHECK(model_kind(jh) == ModelKind::Classical);
  ClassicalHmm back = classical_hmm_from_json(Json::parse(jh.dump()));
  CHECK(back.topology == h.topology);
  CHECK(back.obs_dims == h.obs_dims);
  for (std::size_t t = 0; t < h.transitions.size(); ++t) CHECK(back.transitions[t] == h.transitions[t]);
  for (std::size_t t = 0; t < h.emissions.size(); ++t) CHECK(back.emissions[t] == h.emissions[t]);
}

TEST_CASE("malformed model documents") {
  CHECK_THROWS_AS(model_kind(Json{{"kind", "banana"}}), ModelError);
  CHECK_THROWS_AS(sequence_model_from_json(to_json(random_hmm(Topology::Chain, {2}, 1, 3))), ModelError);
  Json j = to_json(random_model(Variant::CMps, Constraint::NonNegative, {2, 2}, 2, 1, 4));
  j["cores"][0]["re"].erase(0);
  CHECK_THROWS_AS(sequence_model_from_json(j), ModelError);
  Json n = to_json(random_model(Variant::CMps, Constraint::NonNegative, {2, 2}, 2, 1, 4));
  n["d"] = {2, 2, 2};
  CHECK_THROWS_AS(sequence_model_from_json(n), ModelError);
}

TEST_CASE("training config keys are strict") {
  TrainConfig c = train_config_from_json(Json{{"rank", 4}, {"learning_rates", {0.5}}});
  CHECK(c.rank == 4);
  CHECK(c.learning_rates == std::vector<double>{0.5});
  CHECK(c.restarts == TrainConfig{}.restarts);
  CHECK_THROWS_AS(train_config_from_json(Json{{"rnak", 4}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json{{"rank", "four"}}), ConfigError);
  TrainConfig back = train_config_from_json(to_json(c));
  CHECK(back.rank == 4);
  CHECK(back.seed == c.seed);
}

TEST_CASE("report json carries the run summary") {
  TrainReport r;
  r.variant = Variant::CLps;
  r.constraint = Constraint::PsdSlices;
  r.best_nll = 1.5;
  r.best_learning_rate = 0.1;
  r.holdout_nll = 2.0;
  r.trace = {{1, 2.0, 0.5}};
  r.evaluations = {{0, 3.0}, {1, 1.5}};
  r.runs = {{0.1, 0, false, 1.5, 1, ""}};
  Json j = to_json(r);
  CHECK(j["variant"] == "clps");
  CHECK(j["best_nll"] == 1.5);
  CHECK(j["holdout_nll"] == 2.0);
  CHECK(j["runs"].size() == 1);
  CHECK(j["evaluations"].size() == 2);
}
