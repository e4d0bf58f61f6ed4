#include "tnqmm/io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "tnqmm/errors.hpp"

namespace tnqmm {

namespace {

Json matrix_json(const Matrix& m, bool with_imag = true) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json rr = Json::array(), ri = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      rr.push_back(m(i, k).real());
      ri.push_back(m(i, k).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  Json out{{"re", std::move(re)}};
  if (with_imag) out["im"] = std::move(im);
  return out;
}

Json vector_json(const Matrix& v, bool with_imag = true) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    re.push_back(v(i).real());
    im.push_back(v(i).imag());
  }
  Json out{{"re", std::move(re)}};
  if (with_imag) out["im"] = std::move(im);
  return out;
}

Json real_matrix_json(const RealMatrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

double number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ModelError("expected a number in model file");
  return j.get<double>();
}

Matrix matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  const Json& re = j.at("re");
  const bool has_im = j.contains("im");
  if (!re.is_array() || static_cast<Eigen::Index>(re.size()) != rows)
    throw ModelError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& rr = re[i];
    if (!rr.is_array() || static_cast<Eigen::Index>(rr.size()) != cols)
      throw ModelError(what + ": expected " + std::to_string(cols) + " columns");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = cplx(number(rr[k]), has_im ? number(j.at("im").at(i).at(k)) : 0.0);
  }
  return m;
}

Matrix vector_from(const Json& j, Eigen::Index n, const std::string& what) {
  const Json& re = j.at("re");
  const bool has_im = j.contains("im");
  if (!re.is_array() || static_cast<Eigen::Index>(re.size()) != n)
    throw ModelError(what + ": expected " + std::to_string(n) + " entries");
  Matrix v(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = cplx(number(re[i]), has_im ? number(j.at("im").at(i)) : 0.0);
  return v;
}

RealMatrix real_matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw ModelError(what + ": wrong row count");
  RealMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
      throw ModelError(what + ": wrong column count");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = number(j[i][k]);
  }
  return m;
}

void expect_kind(const Json& j, const char* kind) {
  if (!j.is_object() || j.value("kind", std::string{}) != kind)
    throw ModelError(std::string("not a ") + kind + " document");
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ModelError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json to_json(const SequenceModel& m) {
  Json j;
  j["kind"] = "sequence_model";
  j["variant"] = to_string(m.variant());
  j["constraint"] = to_string(m.constraint());
  j["N"] = m.length();
  j["d"] = m.dims();
  j["r"] = m.rank();
  j["mu"] = m.mu();
  const bool cx = m.scalar_kind() == ScalarKind::Complex;
  Json cores = Json::array();
  for (int i = 0; i < m.length(); ++i) {
    // [x][beta][left][right] (MPS: [x][left][right]); slices hold (right, left)
    Json re = Json::array(), im = Json::array();
    for (int x = 0; x < m.dim(i); ++x) {
      Json xr = Json::array(), xi = Json::array();
      for (int b = 0; b < m.mu(); ++b) {
        Matrix lr = m.slice(i, x, b).transpose();
        Json mj = matrix_json(lr);
        if (is_purified(m.variant())) {
          xr.push_back(mj["re"]);
          xi.push_back(mj["im"]);
        } else {
          xr = mj["re"];
          xi = mj["im"];
        }
      }
      re.push_back(std::move(xr));
      im.push_back(std::move(xi));
    }
    Json c{{"re", std::move(re)}};
    if (cx) c["im"] = std::move(im);
    cores.push_back(std::move(c));
  }
  j["cores"] = std::move(cores);
  if (m.has_boundaries()) {
    if (is_purified(m.variant()))
      j["boundaries"] = {{"left", matrix_json(m.left_boundary())}, {"right", matrix_json(m.right_boundary())}};
    else
      j["boundaries"] = {{"left", vector_json(m.left_boundary(), false)},
                         {"right", vector_json(m.right_boundary(), false)}};
  }
  return j;
}

SequenceModel sequence_model_from_json(const Json& j) {
  expect_kind(j, "sequence_model");
  return guarded("sequence model", [&]() {
    const Variant v = parse_variant(j.at("variant").get<std::string>());
    const Constraint c = parse_constraint(j.at("constraint").get<std::string>());
    const auto dims = j.at("d").get<std::vector<int>>();
    const int r = j.at("r").get<int>();
    const int mu = j.value("mu", 1);
    if (j.contains("N") && j.at("N").get<int>() != static_cast<int>(dims.size()))
      throw ModelError("N does not match the length of d");
    SequenceModel m(v, c, dims, r, mu);
    const Json& cores = j.at("cores");
    if (!cores.is_array() || cores.size() != dims.size()) throw ModelError("expected one core per site");
    for (int i = 0; i < m.length(); ++i) {
      const Json& core = cores[i];
      const bool has_im = core.contains("im");
      if (core.at("re").size() != static_cast<std::size_t>(dims[i]))
        throw ModelError("core " + std::to_string(i) + ": expected " + std::to_string(dims[i]) + " symbols");
      for (int x = 0; x < dims[i]; ++x)
        for (int b = 0; b < m.mu(); ++b) {
          Json part;
          if (is_purified(v)) {
            part["re"] = core.at("re").at(x).at(b);
            if (has_im) part["im"] = core.at("im").at(x).at(b);
          } else {
            part["re"] = core.at("re").at(x);
            if (has_im) part["im"] = core.at("im").at(x);
          }
          m.slice(i, x, b) = matrix_from(part, r, r, "core " + std::to_string(i)).transpose();
        }
    }
    if (m.has_boundaries()) {
      const Json& bd = j.at("boundaries");
      if (is_purified(v)) {
        m.left_boundary() = matrix_from(bd.at("left"), r, r, "left boundary");
        m.right_boundary() = matrix_from(bd.at("right"), r, r, "right boundary");
      } else {
        m.left_boundary() = vector_from(bd.at("left"), r, "left boundary");
        m.right_boundary() = vector_from(bd.at("right"), r, "right boundary");
      }
    }
    m.validate();
    return m;
  });
}

Json to_json(const KrausModel& m) {
  Json j;
  j["kind"] = "kraus_model";
  j["topology"] = to_string(m.topology);
  j["N"] = m.length();
  j["dim"] = m.dim;
  j["alphabet"] = m.alphabet;
  Json steps = Json::array();
  for (const auto& step : m.kraus) {
    Json xs = Json::array();
    for (const auto& ops : step) {
      Json ws = Json::array();
      for (const auto& k : ops) ws.push_back(matrix_json(k));
      xs.push_back(std::move(ws));
    }
    steps.push_back(std::move(xs));
  }
  j["kraus"] = std::move(steps);
  if (m.topology == Topology::Chain) j["rho0"] = matrix_json(m.rho0);
  return j;
}

KrausModel kraus_model_from_json(const Json& j) {
  expect_kind(j, "kraus_model");
  return guarded("Kraus model", [&]() {
    KrausModel m;
    m.topology = parse_topology(j.at("topology").get<std::string>());
    m.dim = j.at("dim").get<int>();
    m.alphabet = j.at("alphabet").get<std::vector<int>>();
    const Json& steps = j.at("kraus");
    if (!steps.is_array() || steps.size() != m.alphabet.size()) throw ModelError("expected one Kraus set per step");
    m.kraus.resize(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].size() != static_cast<std::size_t>(m.alphabet[i]))
        throw ModelError("step " + std::to_string(i) + ": expected one operator list per symbol");
      for (const auto& ws : steps[i]) {
        std::vector<Matrix> ops;
        for (const auto& k : ws) ops.push_back(matrix_from(k, m.dim, m.dim, "Kraus operator"));
        m.kraus[i].push_back(std::move(ops));
      }
    }
    if (m.topology == Topology::Chain) m.rho0 = matrix_from(j.at("rho0"), m.dim, m.dim, "rho0");
    m.validate(1e-8);
    return m;
  });
}

Json to_json(const ClassicalHmm& m) {
  Json j;
  j["kind"] = "classical_hmm";
  j["topology"] = to_string(m.topology);
  j["N"] = m.length();
  j["hidden"] = m.hidden;
  j["obs_dims"] = m.obs_dims;
  Json t = Json::array(), e = Json::array();
  for (const auto& a : m.transitions) t.push_back(real_matrix_json(a));
  for (const auto& c : m.emissions) e.push_back(real_matrix_json(c));
  j["transitions"] = std::move(t);
  j["emissions"] = std::move(e);
  if (m.topology == Topology::Chain) j["initial"] = std::vector<double>(m.initial.data(), m.initial.data() + m.initial.size());
  return j;
}

ClassicalHmm classical_hmm_from_json(const Json& j) {
  expect_kind(j, "classical_hmm");
  return guarded("classical HMM", [&]() {
    ClassicalHmm m;
    m.topology = parse_topology(j.at("topology").get<std::string>());
    m.hidden = j.at("hidden").get<int>();
    m.obs_dims = j.at("obs_dims").get<std::vector<int>>();
    for (const auto& a : j.at("transitions")) m.transitions.push_back(real_matrix_from(a, m.hidden, m.hidden, "transition"));
    std::size_t t = 0;
    for (const auto& c : j.at("emissions")) {
      if (t >= m.obs_dims.size()) throw ModelError("too many emission matrices");
      m.emissions.push_back(real_matrix_from(c, m.obs_dims[t++], m.hidden, "emission"));
    }
    if (m.topology == Topology::Chain) {
      auto init = j.at("initial").get<std::vector<double>>();
      m.initial = Eigen::Map<RealVector>(init.data(), init.size());
    }
    m.validate(1e-9);
    return m;
  });
}

Json to_json(const TrainConfig& c) {
  return Json{{"rank", c.rank},
              {"mu", c.mu},
              {"batch_size", c.batch_size},
              {"max_iterations", c.max_iterations},
              {"learning_rates", c.learning_rates},
              {"restarts", c.restarts},
              {"seed", c.seed},
              {"init_scale", c.init_scale},
              {"patience", c.patience},
              {"floor", c.floor},
              {"eval_interval", c.eval_interval},
              {"holdout_fraction", c.holdout_fraction},
              {"trainable_boundaries", c.trainable_boundaries},
              {"jobs", c.jobs}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::set<std::string> known{"rank",    "mu",    "batch_size",    "max_iterations",   "learning_rates",
                                           "restarts", "seed", "init_scale",    "patience",         "floor",
                                           "eval_interval",   "holdout_fraction", "trainable_boundaries", "jobs"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown training config key '" + it.key() + "'");
  try {
    c.rank = j.value("rank", c.rank);
    c.mu = j.value("mu", c.mu);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.learning_rates = j.value("learning_rates", c.learning_rates);
    c.restarts = j.value("restarts", c.restarts);
    c.seed = j.value("seed", c.seed);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.patience = j.value("patience", c.patience);
    c.floor = j.value("floor", c.floor);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.trainable_boundaries = j.value("trainable_boundaries", c.trainable_boundaries);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const TrainReport& r) {
  Json j;
  j["variant"] = to_string(r.variant);
  j["constraint"] = to_string(r.constraint);
  j["config"] = to_json(r.config);
  j["best_nll"] = r.best_nll;
  j["best_nll_per_symbol"] = r.best_nll / std::max(1, r.model.length());
  j["best_learning_rate"] = r.best_learning_rate;
  j["best_restart"] = r.best_restart;
  j["holdout_nll"] = r.holdout_nll ? Json(*r.holdout_nll) : Json(nullptr);
  j["floor_hits"] = r.floor_hits;
  j["train_rows"] = r.train_rows;
  j["holdout_rows"] = r.holdout_rows;
  j["seconds"] = r.seconds;
  Json ev = Json::array();
  for (const auto& e : r.evaluations) ev.push_back({{"iteration", e.iteration}, {"nll", e.nll}});
  j["evaluations"] = std::move(ev);
  Json runs = Json::array();
  for (const auto& s : r.runs)
    runs.push_back({{"learning_rate", s.learning_rate},
                    {"restart", s.restart},
                    {"diverged", s.diverged},
                    {"final_nll", s.diverged ? Json(nullptr) : Json(s.final_nll)},
                    {"iterations", s.iterations},
                    {"message", s.message}});
  j["runs"] = std::move(runs);
  return j;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Sequence: return "sequence_model";
    case ModelKind::Kraus: return "kraus_model";
    case ModelKind::Classical: return "classical_hmm";
  }
  return "?";
}

ModelKind model_kind(const Json& j) {
  const std::string k = j.is_object() ? j.value("kind", std::string{}) : std::string{};
  if (k == "sequence_model") return ModelKind::Sequence;
  if (k == "kraus_model") return ModelKind::Kraus;
  if (k == "classical_hmm") return ModelKind::Classical;
  throw ModelError("unknown model document kind '" + k + "'");
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << j.dump(1) << '\n';
}

void save_model(const SequenceModel& m, const std::filesystem::path& path) { write_json(to_json(m), path); }

SequenceModel load_model(const std::filesystem::path& path) { return sequence_model_from_json(read_json(path)); }

void write_trace_csv(const TrainReport& r, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << "iteration,nll,grad_norm\n" << std::setprecision(17);
  for (const auto& t : r.trace) f << t.iteration << ',' << t.nll << ',' << t.grad_norm << '\n';
}

}  // namespace tnqmm
