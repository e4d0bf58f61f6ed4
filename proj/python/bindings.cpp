#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tnqmm/classical.hpp"
#include "tnqmm/errors.hpp"
#include "tnqmm/io.hpp"
#include "tnqmm/oracle.hpp"
#include "tnqmm/quantum.hpp"
#include "tnqmm/training.hpp"

namespace py = pybind11;
using namespace tnqmm;

namespace {

using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

CategoricalDataset to_dataset(IntArray rows, std::optional<std::vector<int>> dims) {
  if (rows.ndim() != 2) throw DimensionError("expected a 2-D array of symbols (rows x sites)");
  const auto n = rows.shape(0), len = rows.shape(1);
  std::vector<int> sym(rows.data(), rows.data() + n * len);
  if (!dims) {
    dims = std::vector<int>(len, 1);
    for (py::ssize_t k = 0; k < n * len; ++k) (*dims)[k % len] = std::max((*dims)[k % len], sym[k] + 1);
  }
  return CategoricalDataset(*dims, std::move(sym));
}

IntArray to_array(const CategoricalDataset& d) {
  IntArray a({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.length())});
  std::copy(d.symbols().begin(), d.symbols().end(), a.mutable_data());
  return a;
}

std::vector<int> seq(IntArray x) {
  if (x.ndim() != 1) throw DimensionError("expected a 1-D sequence");
  return {x.data(), x.data() + x.shape(0)};
}

py::array_t<double> distribution_array(const Distribution& d) {
  std::vector<py::ssize_t> shape(d.dims.begin(), d.dims.end());
  py::array_t<double> a(shape);
  std::copy(d.p.begin(), d.p.end(), a.mutable_data());
  return a;
}

TrainConfig config_from(const py::dict& kw) {
  if (kw.empty()) return {};
  return train_config_from_json(Json::parse(py::str(py::module_::import("json").attr("dumps")(kw)).cast<std::string>()));
}

py::object json_to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tensor-network and quantum-inspired sequence models";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<DimensionError> dim_err(m, "DimensionError", base.ptr());
  static py::exception<ModelError> model_err(m, "ModelError", base.ptr());
  static py::exception<ConversionError> conv_err(m, "ConversionError", base.ptr());
  static py::exception<TrainingFailure> train_err(m, "TrainingFailure", base.ptr());
  static py::exception<DataError> data_err(m, "DataError", base.ptr());
  static py::exception<ConfigError> cfg_err(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DimensionError& e) {
      dim_err(e.what());
    } catch (const ModelError& e) {
      model_err(e.what());
    } catch (const ConversionError& e) {
      conv_err(e.what());
    } catch (const TrainingFailure& e) {
      train_err(e.what());
    } catch (const DataError& e) {
      data_err(e.what());
    } catch (const ConfigError& e) {
      cfg_err(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  py::enum_<Variant>(m, "Variant")
      .value("MPS", Variant::Mps)
      .value("CMPS", Variant::CMps)
      .value("LPS", Variant::Lps)
      .value("CLPS", Variant::CLps);
  py::enum_<Constraint>(m, "Constraint")
      .value("NONNEGATIVE", Constraint::NonNegative)
      .value("PSD_SLICES", Constraint::PsdSlices)
      .value("UNCONSTRAINED", Constraint::Unconstrained);
  py::enum_<Topology>(m, "Topology").value("CHAIN", Topology::Chain).value("CIRCULAR", Topology::Circular);

  py::class_<SequenceModel>(m, "SequenceModel")
      .def(py::init<Variant, Constraint, std::vector<int>, int, int>(), py::arg("variant"), py::arg("constraint"),
           py::arg("dims"), py::arg("rank"), py::arg("mu") = 1)
      .def_property_readonly("variant", &SequenceModel::variant)
      .def_property_readonly("constraint", &SequenceModel::constraint)
      .def_property_readonly("dims", &SequenceModel::dims)
      .def_property_readonly("rank", &SequenceModel::rank)
      .def_property_readonly("mu", &SequenceModel::mu)
      .def_property_readonly("length", &SequenceModel::length)
      .def("slice", [](const SequenceModel& s, int site, int x, int beta) { return Matrix(s.slice(site, x, beta)); },
           py::arg("site"), py::arg("x"), py::arg("beta") = 0, "slice in (right, left) storage")
      .def("set_slice", [](SequenceModel& s, int site, int x, int beta, const Matrix& v) {
             Matrix& dst = s.slice(site, x, beta);
             if (v.rows() != dst.rows() || v.cols() != dst.cols()) throw DimensionError("slice shape mismatch");
             dst = v;
           }, py::arg("site"), py::arg("x"), py::arg("beta"), py::arg("value"))
      .def("satisfies_constraint", &SequenceModel::satisfies_constraint, py::arg("tol") = 1e-10)
      .def("to_json", [](const SequenceModel& s) { return to_json(s).dump(); })
      .def_static("from_json", [](const std::string& t) { return sequence_model_from_json(Json::parse(t)); })
      .def("__eq__", &SequenceModel::operator==)
      .def("__repr__", [](const SequenceModel& s) {
        return "<SequenceModel " + to_string(s.variant()) + " N=" + std::to_string(s.length()) +
               " r=" + std::to_string(s.rank()) + " mu=" + std::to_string(s.mu()) + ">";
      });

  m.def("random_model", &random_model, py::arg("variant"), py::arg("constraint"), py::arg("dims"), py::arg("rank"),
        py::arg("mu") = 1, py::arg("seed") = 0, py::arg("init_scale") = 1.0);
  m.def("load_model", &load_model, py::arg("path"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("project_to_constraint", [](SequenceModel s) {
    project_to_constraint(s);
    return s;
  });

  m.def("evaluate", [](const SequenceModel& s, IntArray x) { return evaluate(s, seq(x)).value(); },
        "T(x), unnormalized");
  m.def("log_evaluate", [](const SequenceModel& s, IntArray x) {
    const LogValue v = evaluate(s, seq(x));
    return py::make_tuple(v.log_abs, v.phase);
  });
  m.def("partition_function", [](const SequenceModel& s) { return partition_function(s).value(); });
  m.def("log_partition_function", [](const SequenceModel& s) { return partition_function(s).log_abs; });
  m.def("probabilities", [](const SequenceModel& s) { return distribution_array(enumerate_distribution(s)); },
        "normalized probabilities of every sequence, by enumeration");
  m.def("sample", [](const SequenceModel& s, std::size_t count, std::uint64_t seed) { return to_array(sample(s, seed, count)); },
        py::arg("model"), py::arg("count"), py::arg("seed") = 0);
  m.def("nll", [](const SequenceModel& s, IntArray rows) { return nll(s, to_dataset(rows, s.dims())); },
        "total negative log-likelihood in nats");
  m.def("gradient", [](const SequenceModel& s, IntArray rows) {
    GradientResult g = gradient(s, to_dataset(rows, s.dims()));
    return py::make_tuple(g.nll, g.grad.cores, g.grad.left, g.grad.right);
  }, "(nll, cores[site][x*mu+beta], left, right), derivatives with respect to the conjugated parameters");

  m.def("train",
        [](Variant v, std::optional<Constraint> c, IntArray rows, std::optional<std::vector<int>> dims, py::kwargs kw) {
          TrainConfig cfg = config_from(kw);
          const Constraint con = c ? *c : (is_purified(v) ? Constraint::PsdSlices : Constraint::NonNegative);
          TrainReport rep;
          {
            py::gil_scoped_release release;
            rep = train(v, con, to_dataset(rows, dims), cfg);
          }
          return py::make_tuple(rep.model, json_to_py(to_json(rep)));
        },
        py::arg("variant"), py::arg("constraint") = py::none(), py::arg("data"), py::arg("dims") = py::none(),
        "train(variant, constraint, data, dims=None, **config) -> (model, report dict)");

  py::class_<KrausModel>(m, "KrausModel")
      .def_readonly("topology", &KrausModel::topology)
      .def_readonly("dim", &KrausModel::dim)
      .def_readonly("alphabet", &KrausModel::alphabet)
      .def_readonly("kraus", &KrausModel::kraus)
      .def_readonly("rho0", &KrausModel::rho0)
      .def("completeness_residual", &KrausModel::max_completeness_residual)
      .def("to_json", [](const KrausModel& k) { return to_json(k).dump(); })
      .def_static("from_json", [](const std::string& t) { return kraus_model_from_json(Json::parse(t)); });
  m.def("random_kraus_model", &random_kraus_model, py::arg("topology"), py::arg("alphabet"), py::arg("dim"),
        py::arg("max_rank"), py::arg("seed") = 0, py::arg("pure") = false);
  m.def("kraus_probability", [](const KrausModel& k, IntArray x) {
    return k.topology == Topology::Chain ? hqmm_probability(k, seq(x)) : chqmm_probability(k, seq(x));
  });
  m.def("kraus_to_tensor", &kraus_to_tensor);
  m.def("tensor_to_kraus", &tensor_to_kraus);
  m.def("canonicalize", [](const SequenceModel& s) {
    Canonicalization c = canonicalize_transfer(s);
    return py::make_tuple(c.model, c.site_scale, c.log_ring_eigenvalue);
  });
  m.def("kraus_probabilities", [](const KrausModel& k) { return distribution_array(enumerate_distribution(k)); });

  py::class_<ClassicalHmm>(m, "ClassicalHmm")
      .def_readonly("topology", &ClassicalHmm::topology)
      .def_readonly("hidden", &ClassicalHmm::hidden)
      .def_readonly("obs_dims", &ClassicalHmm::obs_dims)
      .def_readonly("transitions", &ClassicalHmm::transitions)
      .def_readonly("emissions", &ClassicalHmm::emissions)
      .def_readonly("initial", &ClassicalHmm::initial)
      .def("to_json", [](const ClassicalHmm& h) { return to_json(h).dump(); })
      .def_static("from_json", [](const std::string& t) { return classical_hmm_from_json(Json::parse(t)); });
  m.def("random_hmm", &random_hmm, py::arg("topology"), py::arg("obs_dims"), py::arg("hidden"), py::arg("seed") = 0);
  m.def("hmm_probability", [](const ClassicalHmm& h, IntArray x) { return hmm_joint(h, seq(x)); });
  m.def("hmm_probabilities", [](const ClassicalHmm& h) { return distribution_array(enumerate_distribution(h)); });
  m.def("chmm_to_cmps", &chmm_to_cmps);
  m.def("hmm_to_mps", &hmm_to_mps);
  m.def("cmps_to_chmm", [](const SequenceModel& s, int rank) {
    ChmmConversion c = cmps_to_chmm(s, rank);
    return py::make_tuple(c.hmm, c.cpd_rank, c.residual);
  }, py::arg("model"), py::arg("rank") = kAutoRank);

  m.def("tv_distance", [](py::array_t<double> a, py::array_t<double> b) {
    if (a.size() != b.size()) throw DimensionError("distributions differ in size");
    double s = 0.0;
    for (py::ssize_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
    return s / 2.0;
  });
}
