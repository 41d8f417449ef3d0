// Python bindings for the core operations: histogram projections, losses,
// networks, training runs and the gradient-check oracle.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "hlreg/harness.hpp"
#include "hlreg/run_io.hpp"

namespace py = pybind11;
using namespace hlreg;
using nlohmann::json;

namespace {

Dataset dataset_from_arrays(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                            const std::string& name) {
  if (features.rows() != targets.size()) {
    throw std::invalid_argument("features and targets disagree on the sample count");
  }
  Dataset ds;
  ds.features = features;
  ds.targets = targets;
  ds.name = name;
  ds.provenance = "in-memory";
  return ds;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["objective"] = m.objective;
  d["mae"] = m.mae;
  d["rmse"] = m.rmse;
  return d;
}

py::dict run_result_dict(const RunConfig& cfg, const RunResult& result) {
  py::dict d;
  d["final_train"] = metrics_dict(result.final_train);
  d["final_test"] = metrics_dict(result.final_test);
  d["history_csv"] = history_csv(result.history);
  d["summary_json"] = run_summary_json(cfg, result).dump();
  d["checkpoint"] = checkpoint_to_string(result.model.net);
  const std::size_t epochs = result.history.records.size();
  Eigen::VectorXd train_mae(epochs), test_mae(epochs), head_norm(epochs);
  for (std::size_t i = 0; i < epochs; ++i) {
    train_mae[static_cast<Eigen::Index>(i)] = result.history.records[i].train.mae;
    test_mae[static_cast<Eigen::Index>(i)] = result.history.records[i].test.mae;
    head_norm[static_cast<Eigen::Index>(i)] = result.history.records[i].head_grad_norm;
  }
  d["train_mae"] = train_mae;
  d["test_mae"] = test_mae;
  d["head_grad_norm"] = head_norm;
  return d;
}

RunConfig config_from_json_str(const std::string& config_json) {
  return run_config_from_json(json::parse(config_json));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "histogram-loss regression toolkit";

  py::class_<BinGrid>(m, "BinGrid")
      .def_readonly("lo", &BinGrid::lo)
      .def_readonly("hi", &BinGrid::hi)
      .def_readonly("bins", &BinGrid::bins)
      .def_readonly("width", &BinGrid::width)
      .def_readonly("edges", &BinGrid::edges)
      .def_readonly("centers", &BinGrid::centers)
      .def("__repr__", [](const BinGrid& g) {
        return "BinGrid(lo=" + std::to_string(g.lo) + ", hi=" + std::to_string(g.hi) +
               ", bins=" + std::to_string(g.bins) + ")";
      });

  m.def("make_bin_grid", &make_bin_grid, py::arg("lo"), py::arg("hi"), py::arg("bins"));
  m.def("locate_bin", &locate_bin, py::arg("grid"), py::arg("y"));
  m.def("project_gaussian", &project_gaussian, py::arg("grid"), py::arg("y"), py::arg("sigma"));
  m.def("project_onebin", &project_onebin, py::arg("grid"), py::arg("y"));
  m.def("project_uniform_mix", &project_uniform_mix, py::arg("grid"), py::arg("y"),
        py::arg("epsilon"));
  m.def("expected_value", &expected_value, py::arg("grid"), py::arg("f"));
  m.def("erf", &hlreg::erf, py::arg("x"));

  m.def("softmax", py::overload_cast<const Eigen::VectorXd&>(&softmax), py::arg("logits"));
  m.def("hl_loss", &hl_loss, py::arg("p"), py::arg("f"));
  m.def("hl_grad_logits", &hl_grad_logits, py::arg("p"), py::arg("f"));
  m.def("l2_loss", &l2_loss, py::arg("yhat"), py::arg("y"));
  m.def("l1_loss", &l1_loss, py::arg("yhat"), py::arg("y"));
  m.def(
      "l2_softmax_loss",
      [](const ProbVector& f, const BinGrid& grid, double y) {
        return l2_softmax_loss(f, grid, y);
      },
      py::arg("f"), py::arg("grid"), py::arg("y"));
  m.def("hl_grad_norm_bound", &hl_grad_norm_bound, py::arg("p"), py::arg("f"), py::arg("phi"),
        py::arg("per_logit_bound"));

  m.def(
      "gradient_check",
      [](int trials, uint64_t seed) {
        const GradcheckReport r = gradcheck_suite(trials, seed);
        py::dict d;
        d["trials"] = r.trials;
        d["parameters_checked"] = r.parameters_checked;
        d["failures"] = r.failures;
        d["max_rel_error"] = r.max_rel_error;
        d["max_abs_error_small"] = r.max_abs_error_small;
        d["worst_case"] = r.worst_case;
        d["pass"] = r.pass;
        return d;
      },
      py::arg("trials") = 100, py::arg("seed") = 1);

  m.def(
      "train_run",
      [](const std::string& config_json, const Eigen::MatrixXd& features,
         const Eigen::VectorXd& targets) {
        const RunConfig cfg = config_from_json_str(config_json);
        const Dataset ds = dataset_from_arrays(features, targets, cfg.dataset.name);
        return run_result_dict(cfg, train_run(cfg, ds));
      },
      py::arg("config_json"), py::arg("features"), py::arg("targets"),
      "Full training run on in-memory arrays; returns final metrics, history "
      "arrays and the checkpoint text.");

  m.def(
      "ols_baseline",
      [](const std::string& config_json, const Eigen::MatrixXd& features,
         const Eigen::VectorXd& targets) {
        const RunConfig cfg = config_from_json_str(config_json);
        const OlsResult r = ols_run(cfg, dataset_from_arrays(features, targets, "ols"));
        py::dict d;
        d["train"] = metrics_dict(r.train);
        d["test"] = metrics_dict(r.test);
        d["weights"] = r.weights;
        return d;
      },
      py::arg("config_json"), py::arg("features"), py::arg("targets"));

  m.def("median_normalize", &median_normalize, py::arg("series"));
  m.def("interquartile_range", &interquartile_range, py::arg("values"));
}
