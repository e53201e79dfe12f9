#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "labseq/pipeline.hpp"

namespace py = pybind11;
using namespace labseq;

namespace {

PyObject* error_type = nullptr;

ScoredSet scored(std::vector<double> scores, std::vector<int> labels) {
  ScoredSet s;
  s.scores = std::move(scores);
  s.labels = std::move(labels);
  return s;
}

py::dict cell(long n, const CellCi& ci) {
  py::dict d;
  d["count"] = n;
  d["ci"] = py::make_tuple(ci.lo, ci.hi);
  return d;
}

}  // namespace

PYBIND11_MODULE(_labseq, m) {
  m.doc() = "Creatinine-abnormality sequence pipeline: cohort rules, GRU, evaluation and t-SNE.";

  error_type = PyErr_NewException("labseq._labseq.LabseqError", PyExc_RuntimeError, nullptr);
  m.attr("LabseqError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StageError& e) {
      py::object exc = py::handle(error_type)(e.what());
      exc.attr("code") = e.code();
      exc.attr("stage") = e.stage();
      PyErr_SetObject(error_type, exc.ptr());
    } catch (const Error& e) {
      py::object exc = py::handle(error_type)(e.what());
      exc.attr("code") = e.code();
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  // --- configuration and stages
  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("from_text", [](const std::string& text) { return config_from_text(text); })
      .def_static("load", &load_config)
      .def("to_text", &config_to_text)
      .def("validate", &RunConfig::validate)
      .def_readwrite("seed", &RunConfig::seed)
      .def_property(
          "out", [](const RunConfig& c) { return c.out.string(); },
          [](RunConfig& c, const std::string& v) { c.out = v; });

  m.def("stage_names", &stage_names);
  m.def("stage_seed", &stage_seed, py::arg("master"), py::arg("stage"));
  m.def("run_stage", &run_stage, py::arg("config"), py::arg("stage"), py::call_guard<py::gil_scoped_release>());
  m.def("run_all", &run_all, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  // --- cohort
  m.def("largest_remainder_counts", &largest_remainder_counts, py::arg("n"),
        py::arg("fractions") = kDefaultSplit);

  // --- evaluation
  m.def("auc", [](std::vector<double> s, std::vector<int> y) { return auc_trapezoid(scored(s, y)); },
        py::arg("scores"), py::arg("labels"));
  m.def("auc_pairwise", [](std::vector<double> s, std::vector<int> y) { return auc_pairwise(scored(s, y)); },
        py::arg("scores"), py::arg("labels"));
  m.def(
      "bootstrap_auc_ci",
      [](std::vector<double> s, std::vector<int> y, int resamples, std::uint64_t seed) {
        const auto ci = bootstrap_auc_ci(scored(s, y), resamples, seed);
        py::dict d;
        d["lo"] = ci.lo;
        d["hi"] = ci.hi;
        d["drawn"] = ci.drawn;
        d["skipped"] = ci.skipped;
        return d;
      },
      py::arg("scores"), py::arg("labels"), py::arg("resamples") = kBootstrapResamples, py::arg("seed") = 0);
  m.def(
      "confusion_at",
      [](std::vector<double> s, std::vector<int> y, double threshold, int resamples, std::uint64_t seed) {
        const auto c = confusion_at(scored(s, y), threshold, resamples, seed);
        py::dict d;
        d["tp"] = cell(c.tp, c.tp_ci);
        d["fp"] = cell(c.fp, c.fp_ci);
        d["tn"] = cell(c.tn, c.tn_ci);
        d["fn"] = cell(c.fn, c.fn_ci);
        d["threshold"] = c.threshold;
        return d;
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = kDecisionThreshold,
      py::arg("resamples") = kBootstrapResamples, py::arg("seed") = 0);
  m.def(
      "roc_points",
      [](std::vector<double> s, std::vector<int> y) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& p : roc_points(scored(s, y))) out.emplace_back(p.threshold, p.fpr, p.tpr);
        return out;
      },
      py::arg("scores"), py::arg("labels"));

  // --- GRU
  py::class_<ModelParams>(m, "ModelParams")
      .def_static("zeros", &ModelParams::zeros, py::arg("hidden_dim"), py::arg("input_dim"),
                  py::arg("static_dim") = kStaticDim)
      .def_property_readonly("hidden_dim", &ModelParams::hidden_dim)
      .def_property_readonly("input_dim", &ModelParams::input_dim)
      .def_property_readonly("size", &ModelParams::size)
      .def("pack", &ModelParams::pack)
      .def("unpack", &ModelParams::unpack);
  m.def("init_params", &init_params, py::arg("hidden_dim"), py::arg("input_dim"), py::arg("seed"),
        py::arg("static_dim") = kStaticDim);
  m.def(
      "forward_logit",
      [](const ModelParams& p, const Eigen::MatrixXd& x, std::vector<double> statics) {
        return forward(x, statics, p).logit;
      },
      py::arg("params"), py::arg("inputs"), py::arg("statics"));
  m.def(
      "embedding",
      [](const ModelParams& p, const Eigen::MatrixXd& x, std::vector<double> statics) {
        return forward(x, statics, p).embedding();
      },
      py::arg("params"), py::arg("inputs"), py::arg("statics"));
  m.def(
      "gradient",
      [](const ModelParams& p, const Eigen::MatrixXd& x, std::vector<double> statics, int label) {
        return backward(forward(x, statics, p), label, p).pack();
      },
      py::arg("params"), py::arg("inputs"), py::arg("statics"), py::arg("label"));
  m.def("bce_loss", &bce_loss, py::arg("logit"), py::arg("label"));
  m.def("predict_proba", &predict_proba, py::arg("logit"));
  m.def(
      "load_checkpoint", [](const std::string& path) { return load_checkpoint(path).params; }, py::arg("path"));

  // --- t-SNE
  m.def(
      "tsne",
      [](const Eigen::MatrixXd& X, double perplexity, int iterations, std::uint64_t seed) {
        TsneConfig cfg;
        cfg.perplexity = perplexity;
        cfg.iterations = iterations;
        cfg.seed = seed;
        TsneResult r;
        {
          py::gil_scoped_release release;
          r = run_tsne(X, cfg);
        }
        std::vector<std::pair<int, double>> trace;
        for (const auto& k : r.kl_trace) trace.emplace_back(k.iteration, k.kl);
        return py::make_tuple(r.embedding, trace);
      },
      py::arg("X"), py::arg("perplexity") = 0.0, py::arg("iterations") = 1000, py::arg("seed") = 0);
  m.def("nearest_neighbor_purity", &nearest_neighbor_purity, py::arg("Y"), py::arg("groups"));
}
