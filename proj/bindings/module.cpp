#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stmgnn/baselines.hpp"
#include "stmgnn/count_distributions.hpp"
#include "stmgnn/data_ingest.hpp"
#include "stmgnn/graph_spatial.hpp"
#include "stmgnn/metrics.hpp"
#include "stmgnn/model.hpp"
#include "stmgnn/rng.hpp"
#include "stmgnn/training.hpp"

namespace py = pybind11;
using namespace stmgnn;

namespace {

DTensor3 tensor_from_array(const py::array_t<double, py::array::c_style |
                                                         py::array::forcecast>& arr) {
  if (arr.ndim() != 3) throw py::value_error("expected a 3-d array (N, T, C)");
  DTensor3 t(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
             static_cast<int>(arr.shape(2)));
  std::copy(arr.data(), arr.data() + arr.size(), t.data());
  return t;
}

py::array_t<double> array_from_tensor(const DTensor3& t) {
  py::array_t<double> arr({t.dim0(), t.dim1(), t.dim2()});
  std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
  return arr;
}

CountTensor count_tensor_from_array(const py::array_t<std::int64_t>& arr, int rows,
                                    int cols) {
  if (arr.ndim() != 3) throw py::value_error("expected a 3-d array (N, T, C)");
  if (rows * cols != arr.shape(0)) {
    throw py::value_error("rows*cols must equal the region axis length");
  }
  CountTensor t;
  t.counts = ITensor3(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                      static_cast<int>(arr.shape(2)));
  auto r = arr.unchecked<3>();
  for (int n = 0; n < t.n_regions(); ++n)
    for (int d = 0; d < t.days(); ++d)
      for (int c = 0; c < t.n_categories(); ++c) t.counts(n, d, c) = r(n, d, c);
  t.grid = GridSpec{rows, cols};
  for (int c = 0; c < t.n_categories(); ++c) {
    t.categories.push_back("cat" + std::to_string(c));
  }
  return t;
}

py::dict head_output_to_dict(const HeadOutput& out, HeadKind kind) {
  const DistributionHead& head = head_family(kind);
  py::dict d;
  for (int k = 0; k < head.param_count(); ++k) {
    d[head.param_name(k)] = array_from_tensor(out.params[k]);
  }
  return d;
}

ModelConfig model_config_from_kwargs(int n_regions, int window, int horizon,
                                     int categories, const std::string& head,
                                     const std::vector<int>& dgcn_hidden,
                                     bool dgcn_bias,
                                     const std::vector<int>& mtcn_hidden_widths,
                                     bool gate) {
  ModelConfig cfg;
  cfg.n_regions = n_regions;
  cfg.window = window;
  cfg.horizon = horizon;
  cfg.categories = categories;
  cfg.head = head_kind_from_string(head);
  cfg.dgcn_hidden = dgcn_hidden;
  cfg.dgcn_bias = dgcn_bias;
  cfg.mtcn_hidden_widths = mtcn_hidden_widths;
  cfg.gate = gate;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Probabilistic forecasting for sparse spatial-temporal count data";

  // Distribution heads.
  m.def(
      "zinb_pmf",
      [](long long y, double pi, double p, double r) {
        return zinb_pmf(y, {pi, p, r});
      },
      py::arg("y"), py::arg("pi"), py::arg("p"), py::arg("r"));
  m.def(
      "zinb_nll",
      [](double y, double pi, double p, double r) {
        return zinb_nll(y, ZinbParams{pi, p, r});
      },
      py::arg("y"), py::arg("pi"), py::arg("p"), py::arg("r"));
  m.def(
      "zinb_nll_grad",
      [](double y, double pi, double p, double r) {
        const ZinbGrad g = zinb_nll_grad(y, {pi, p, r});
        return py::make_tuple(g.d_pi, g.d_p, g.d_r);
      },
      py::arg("y"), py::arg("pi"), py::arg("p"), py::arg("r"));
  m.def(
      "zinb_mean",
      [](double pi, double p, double r) { return zinb_mean({pi, p, r}); },
      py::arg("pi"), py::arg("p"), py::arg("r"));
  m.def(
      "zinb_quantile",
      [](double pi, double p, double r, double tau) {
        return zinb_quantile({pi, p, r}, tau);
      },
      py::arg("pi"), py::arg("p"), py::arg("r"), py::arg("tau"));
  m.def(
      "zinb_sample",
      [](double pi, double p, double r, std::uint64_t seed, int count) {
        RngStream rng(seed, "synth");
        std::vector<long long> draws(count);
        for (auto& d : draws) d = zinb_sample({pi, p, r}, rng);
        return draws;
      },
      py::arg("pi"), py::arg("p"), py::arg("r"), py::arg("seed"),
      py::arg("count") = 1);

  m.def(
      "head_nll",
      [](const std::string& head, double y, const std::vector<double>& theta) {
        return head_family(head_kind_from_string(head)).nll(y, theta);
      },
      py::arg("head"), py::arg("y"), py::arg("theta"));
  m.def(
      "head_mean",
      [](const std::string& head, const std::vector<double>& theta) {
        return head_family(head_kind_from_string(head)).mean(theta);
      },
      py::arg("head"), py::arg("theta"));
  m.def(
      "head_quantile",
      [](const std::string& head, const std::vector<double>& theta, double tau) {
        return head_family(head_kind_from_string(head)).quantile(theta, tau);
      },
      py::arg("head"), py::arg("theta"), py::arg("tau"));
  m.def(
      "head_param_names",
      [](const std::string& head) {
        const DistributionHead& h = head_family(head_kind_from_string(head));
        std::vector<std::string> names;
        for (int k = 0; k < h.param_count(); ++k) names.push_back(h.param_name(k));
        return names;
      },
      py::arg("head"));

  // Graph operations.
  m.def(
      "build_grid_adjacency",
      [](int rows, int cols, const std::string& scheme, bool self_loops) {
        return build_grid_adjacency({rows, cols},
                                    adjacency_scheme_from_string(scheme), self_loops)
            .adjacency;
      },
      py::arg("rows"), py::arg("cols"), py::arg("scheme") = "queen8",
      py::arg("self_loops") = true);
  m.def(
      "transition_matrix",
      [](const Eigen::MatrixXd& adjacency) {
        return transition_matrix(GraphSpec::from_adjacency(adjacency));
      },
      py::arg("adjacency"));
  m.def(
      "dgcn_layer_forward",
      [](const Eigen::MatrixXd& h, const Eigen::MatrixXd& adjacency,
         const Eigen::MatrixXd& w, const Eigen::MatrixXd& b_self,
         const std::string& activation) {
        return dgcn_layer_forward(h, GraphSpec::from_adjacency(adjacency), w, b_self,
                                  activation_from_string(activation));
      },
      py::arg("h"), py::arg("adjacency"), py::arg("w"), py::arg("b_self"),
      py::arg("activation") = "identity");
  m.def(
      "merge_time_category",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        return Eigen::MatrixXd(merge_time_category(tensor_from_array(x)));
      },
      py::arg("x"));

  // Metrics.
  m.def("mae", &mae, py::arg("pred_mean"), py::arg("actual"));
  m.def("picp", &picp, py::arg("lower"), py::arg("upper"), py::arg("actual"));
  m.def("mpiw", &mpiw, py::arg("lower"), py::arg("upper"));
  m.def(
      "discrete_scores",
      [](const std::vector<double>& pred, const std::vector<double>& actual) {
        const DiscreteScores s = discrete_scores(pred, actual);
        py::dict d;
        d["true_zero_rate"] =
            s.true_zero_rate ? py::cast(*s.true_zero_rate) : py::none();
        d["f1"] = s.f1;
        return d;
      },
      py::arg("pred_mean"), py::arg("actual"));
  m.def(
      "kl_divergence_point",
      [](const std::vector<double>& actual, const std::vector<double>& pred,
         long long y_star) { return kl_divergence_point(actual, pred, y_star); },
      py::arg("actual"), py::arg("pred"), py::arg("y_star"));

  // Synthesis, model, training.
  m.def(
      "synthesize",
      [](int rows, int cols, int days, int categories, std::uint64_t seed) {
        SynthConfig cfg;
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.days = days;
        cfg.categories = categories;
        const SynthResult res = synthesize(cfg, seed);
        py::dict d;
        py::array_t<std::int64_t> counts({res.tensor.n_regions(), res.tensor.days(),
                                          res.tensor.n_categories()});
        auto w = counts.mutable_unchecked<3>();
        for (int n = 0; n < res.tensor.n_regions(); ++n)
          for (int t = 0; t < res.tensor.days(); ++t)
            for (int c = 0; c < res.tensor.n_categories(); ++c)
              w(n, t, c) = res.tensor.counts(n, t, c);
        d["counts"] = counts;
        d["pi_true"] = res.pi_true;
        d["p_true"] = res.p_true;
        d["r_true"] = res.r_true;
        return d;
      },
      py::arg("rows") = 8, py::arg("cols") = 8, py::arg("days") = 1000,
      py::arg("categories") = 2, py::arg("seed") = 42);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init(&model_config_from_kwargs), py::arg("n_regions"),
           py::arg("window"), py::arg("horizon"), py::arg("categories"),
           py::arg("head") = "zinb", py::arg("dgcn_hidden") = std::vector<int>{64},
           py::arg("dgcn_bias") = false,
           py::arg("mtcn_hidden_widths") = std::vector<int>{8},
           py::arg("gate") = true)
      .def_readonly("n_regions", &ModelConfig::n_regions)
      .def_readonly("window", &ModelConfig::window)
      .def_readonly("horizon", &ModelConfig::horizon)
      .def_readonly("categories", &ModelConfig::categories);

  py::class_<ModelWeights>(m, "ModelWeights");

  m.def("init_weights", &init_weights, py::arg("config"), py::arg("seed"));
  m.def(
      "forward",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const Eigen::MatrixXd& transition, const ModelWeights& weights,
         const ModelConfig& cfg) {
        return head_output_to_dict(forward(tensor_from_array(x), transition, weights,
                                           cfg),
                                   cfg.head);
      },
      py::arg("x"), py::arg("transition"), py::arg("weights"), py::arg("config"));
  m.def(
      "train",
      [](const py::array_t<std::int64_t>& counts, int rows, int cols,
         const ModelConfig& mcfg, double learning_rate, int epochs, int batch_size,
         int patience, std::uint64_t seed) {
        const CountTensor tensor = count_tensor_from_array(counts, rows, cols);
        const SplitSpec split =
            chrono_split(tensor.days(), mcfg.window, mcfg.horizon);
        const GraphSpec graph =
            build_grid_adjacency({rows, cols}, AdjacencyScheme::Queen8, true);
        TrainConfig tcfg;
        tcfg.learning_rate = learning_rate;
        tcfg.epochs = epochs;
        tcfg.batch_size = batch_size;
        tcfg.patience = patience > 0 ? std::min(patience, epochs) : epochs;
        tcfg.seed = seed;
        TrainResult res = train(tensor, split, graph, mcfg, tcfg);
        py::dict history;
        std::vector<double> train_nll, val_nll;
        for (const EpochRecord& e : res.history.epochs) {
          train_nll.push_back(e.train_nll);
          val_nll.push_back(e.val_nll);
        }
        history["train_nll"] = train_nll;
        history["val_nll"] = val_nll;
        history["best_epoch"] = res.history.best_epoch;
        history["early_stopped"] = res.history.early_stopped;
        history["diverged"] = res.history.diverged;
        return py::make_tuple(std::move(res.weights), history);
      },
      py::arg("counts"), py::arg("rows"), py::arg("cols"), py::arg("config"),
      py::arg("learning_rate") = 1e-3, py::arg("epochs") = 10,
      py::arg("batch_size") = 32, py::arg("patience") = 0, py::arg("seed") = 42);
  m.def(
      "historical_value",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& window,
         int horizon) {
        return array_from_tensor(historical_value(tensor_from_array(window), horizon));
      },
      py::arg("window"), py::arg("horizon") = 1);
}
