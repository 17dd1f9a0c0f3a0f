#include "stmgnn/cli_commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "stmgnn/baselines.hpp"
#include "stmgnn/errors.hpp"
#include "stmgnn/serialize.hpp"
#include "stmgnn/text_format.hpp"

namespace stmgnn {

namespace fs = std::filesystem;

namespace {

std::string prepare_out_dir(const std::string& out_dir, const RunConfig& cfg) {
  if (out_dir.empty()) throw UsageError("an output directory is required");
  fs::create_directories(out_dir);
  save_config_echo((fs::path(out_dir) / "config_echo.cfg").string(), cfg);
  return out_dir;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
  return (fs::path(out_dir) / name).string();
}

GraphSpec graph_for(const RunConfig& cfg, const GridSpec& grid) {
  return build_grid_adjacency(grid, cfg.adjacency(), cfg.self_loops());
}

struct EvalData {
  CountTensor tensor;
  SplitSpec split;
  ModelConfig mcfg;
  std::vector<WindowIndex> test_windows;
};

EvalData load_eval_data(const RunConfig& cfg, const std::string& tensor_path) {
  EvalData d;
  d.tensor = load_count_tensor_file(tensor_path);
  d.mcfg = cfg.model(d.tensor.n_regions(), d.tensor.n_categories());
  d.split = chrono_split(d.tensor.days(), d.mcfg.window, d.mcfg.horizon,
                         cfg.val_days());
  d.test_windows = windows_for_split(d.split, d.mcfg.window, d.mcfg.horizon,
                                     SplitPart::Test);
  if (d.test_windows.empty()) throw DataError("the test split holds no windows");
  return d;
}

void fill_split_metadata(MetricsReport& report, const RunConfig& cfg,
                         const SplitSpec& split, std::size_t windows) {
  report.metadata["config_hash"] = cfg.content_hash();
  report.metadata["seed"] = std::to_string(cfg.seed());
  report.metadata["train_days"] = std::to_string(split.train_end);
  report.metadata["val_begin"] = std::to_string(split.val_begin);
  report.metadata["test_begin"] = std::to_string(split.test_begin);
  report.metadata["test_days"] = std::to_string(split.test_days());
  report.metadata["test_windows"] = std::to_string(windows);
}

}  // namespace

void cmd_ingest(const RunConfig& cfg, const std::string& events_path,
                const std::string& out_dir) {
  const IngestSchema schema = cfg.ingest();
  const IngestResult ingest = load_events_file(events_path, schema);
  const GridSpec grid = cfg.grid();
  const RasterizeResult raster =
      rasterize(ingest.events, grid, schema.span_start, schema.span_days(),
                schema.effective_vocabulary());

  prepare_out_dir(out_dir, cfg);
  save_count_tensor_file(out_path(out_dir, "counts.txt"), raster.tensor);
  const DatasetStats stats = dataset_stats(raster.tensor);
  {
    auto os = std::ofstream(out_path(out_dir, "stats.txt"));
    write_stats_block(os, stats);
    os << "events " << ingest.events.size() << "\n";
    os << "malformed_rows " << ingest.malformed_rows << "\n";
    os << "out_of_span " << ingest.out_of_span << "\n";
    os << "out_of_bounds " << raster.out_of_bounds << "\n";
  }
  write_stats_block(std::cout, stats);
  std::cout << "events " << ingest.events.size() << "\n"
            << "malformed_rows " << ingest.malformed_rows << "\n"
            << "out_of_span " << ingest.out_of_span << "\n"
            << "out_of_bounds " << raster.out_of_bounds << "\n";
}

void cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  const SynthConfig scfg = cfg.synth();
  const SynthResult synth = synthesize(scfg, cfg.seed());
  prepare_out_dir(out_dir, cfg);
  save_count_tensor_file(out_path(out_dir, "counts.txt"), synth.tensor);
  save_field_file(out_path(out_dir, "truth_pi.txt"), synth.tensor.grid,
                  synth.pi_true, synth.tensor.categories);
  save_field_file(out_path(out_dir, "truth_p.txt"), synth.tensor.grid,
                  synth.p_true, synth.tensor.categories);
  save_field_file(out_path(out_dir, "truth_r.txt"), synth.tensor.grid,
                  synth.r_true, synth.tensor.categories);
  std::cout << "synthesized " << synth.tensor.n_regions() << " regions x "
            << synth.tensor.days() << " days x " << synth.tensor.n_categories()
            << " categories\n";
}

bool cmd_train(const RunConfig& cfg, const std::string& tensor_path,
               const std::string& out_dir) {
  const CountTensor tensor = load_count_tensor_file(tensor_path);
  const ModelConfig mcfg = cfg.model(tensor.n_regions(), tensor.n_categories());
  const TrainConfig tcfg = cfg.train();
  const SplitSpec split =
      chrono_split(tensor.days(), mcfg.window, mcfg.horizon, cfg.val_days());
  const GraphSpec graph = graph_for(cfg, tensor.grid);

  const TrainResult result = train(tensor, split, graph, mcfg, tcfg);

  prepare_out_dir(out_dir, cfg);
  const std::string weights_path = out_path(out_dir, "weights.bin");
  save_weights_file(weights_path, result.weights, mcfg, cfg);
  save_history_file(out_path(out_dir, "history.txt"), result.history);

  if (result.history.diverged) {
    std::cout << "training diverged (" << result.history.divergence_message
              << "); last finite checkpoint: " << weights_path << "\n";
    return false;
  }
  std::cout << "trained " << result.history.epochs.size() << " epochs; best epoch "
            << result.history.best_epoch << " (val_nll "
            << format_double(result.history.best_val_nll) << ")\n";
  return true;
}

namespace {

struct ModelEvaluation {
  std::vector<std::pair<int, std::vector<PredictionRow>>> blocks;
  MetricsReport report;
};

ModelEvaluation evaluate_model_on_test(const EvalData& d, const RunConfig& cfg,
                                       const ModelWeights& weights) {
  const Eigen::MatrixXd transition =
      transition_matrix(graph_for(cfg, d.tensor.grid));
  const DistributionHead& head = head_family(d.mcfg.head);

  ModelEvaluation ev;
  std::vector<double> pred_mean, lower, upper, actual;
  std::vector<std::vector<double>> cell_params;
  for (const WindowIndex& w : d.test_windows) {
    const Sample s = materialize_window(d.tensor, w, d.mcfg.window, d.mcfg.horizon);
    const auto rows = predict_distribution(s.input, transition, weights, d.mcfg);
    for (const PredictionRow& row : rows) {
      pred_mean.push_back(row.mean);
      lower.push_back(row.q10);
      upper.push_back(row.q90);
      actual.push_back(s.target(row.region, row.step, row.category));
      cell_params.push_back(row.params);
    }
    ev.blocks.emplace_back(w.target_begin, rows);
  }

  MetricsReport& report = ev.report;
  report.cells = static_cast<long long>(actual.size());
  report.mae = mae(pred_mean, actual);
  report.picp = picp(lower, upper, actual);
  report.mpiw = mpiw(lower, upper);
  long long y_star = 1;
  for (double a : actual) y_star = std::max(y_star, static_cast<long long>(a));
  report.kl_divergence = kl_divergence(
      actual,
      [&](std::size_t i, long long y) { return head.count_prob(y, cell_params[i]); },
      y_star);
  const DiscreteScores ds = discrete_scores(pred_mean, actual);
  report.true_zero_rate = ds.true_zero_rate;
  report.f1 = ds.f1;
  fill_split_metadata(report, cfg, d.split, d.test_windows.size());
  return ev;
}

ModelEvaluation evaluate_baseline_on_test(const EvalData& d, const RunConfig& cfg,
                                          bool weekday_variant) {
  ModelEvaluation ev;
  std::vector<double> pred_mean, actual;
  for (const WindowIndex& w : d.test_windows) {
    const Sample s = materialize_window(d.tensor, w, d.mcfg.window, d.mcfg.horizon);
    DTensor3 pred;
    if (weekday_variant) {
      const int start_weekday = weekday_of(d.tensor.start, w.input_begin);
      pred = weekday_mean_value(s.input, d.mcfg.horizon, start_weekday);
    } else {
      pred = historical_value(s.input, d.mcfg.horizon);
    }
    std::vector<PredictionRow> rows;
    for (int n = 0; n < pred.dim0(); ++n)
      for (int q = 0; q < pred.dim1(); ++q)
        for (int c = 0; c < pred.dim2(); ++c) {
          PredictionRow row;
          row.region = n;
          row.step = q;
          row.category = c;
          row.mean = pred(n, q, c);
          rows.push_back(row);
          pred_mean.push_back(pred(n, q, c));
          actual.push_back(s.target(n, q, c));
        }
    ev.blocks.emplace_back(w.target_begin, rows);
  }
  ev.report = evaluate_point_model(pred_mean, actual);
  fill_split_metadata(ev.report, cfg, d.split, d.test_windows.size());
  ev.report.metadata["baseline"] = weekday_variant ? "hv_weekday" : "hv";
  return ev;
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg, const std::string& tensor_path,
                  const std::string& weights_path, const std::string& out_dir) {
  const EvalData d = load_eval_data(cfg, tensor_path);
  const std::string& baseline = cfg.baseline();
  if (weights_path.empty() && baseline == "none") {
    throw UsageError("evaluate needs --weights or a baseline selection");
  }
  prepare_out_dir(out_dir, cfg);

  if (!weights_path.empty()) {
    const ModelWeights weights = load_weights_file(weights_path, d.mcfg, cfg);
    const ModelEvaluation ev = evaluate_model_on_test(d, cfg, weights);
    save_metrics_report_file(out_path(out_dir, "metrics.txt"), ev.report);
    save_predictions_file(out_path(out_dir, "predictions.csv"), ev.blocks,
                          d.mcfg.head);
    save_metrics_report(std::cout, ev.report);
  }
  if (baseline != "none") {
    const ModelEvaluation ev =
        evaluate_baseline_on_test(d, cfg, baseline == "hv_weekday");
    const bool standalone = weights_path.empty();
    save_metrics_report_file(
        out_path(out_dir, standalone ? "metrics.txt" : "metrics_hv.txt"), ev.report);
    save_point_predictions_file(
        out_path(out_dir, standalone ? "predictions.csv" : "predictions_hv.csv"),
        ev.blocks);
    if (standalone) save_metrics_report(std::cout, ev.report);
  }
}

void cmd_predict(const RunConfig& cfg, const std::string& tensor_path,
                 const std::string& weights_path, const std::string& out_dir) {
  const CountTensor tensor = load_count_tensor_file(tensor_path);
  const ModelConfig mcfg = cfg.model(tensor.n_regions(), tensor.n_categories());
  if (tensor.days() < mcfg.window) {
    throw DataError("tensor is shorter than the model window");
  }
  const ModelWeights weights = load_weights_file(weights_path, mcfg, cfg);
  const Eigen::MatrixXd transition = transition_matrix(graph_for(cfg, tensor.grid));

  // Predict from the most recent complete window.
  WindowIndex w;
  w.input_begin = tensor.days() - mcfg.window;
  w.target_begin = tensor.days();
  DTensor3 input(tensor.n_regions(), mcfg.window, tensor.n_categories());
  for (int n = 0; n < tensor.n_regions(); ++n)
    for (int t = 0; t < mcfg.window; ++t)
      for (int c = 0; c < tensor.n_categories(); ++c)
        input(n, t, c) = static_cast<double>(tensor.counts(n, w.input_begin + t, c));

  const auto rows = predict_distribution(input, transition, weights, mcfg);
  prepare_out_dir(out_dir, cfg);
  save_predictions_file(out_path(out_dir, "predictions.csv"),
                        {{w.target_begin, rows}}, mcfg.head);
  std::cout << "wrote " << rows.size() << " prediction rows\n";
}

void cmd_export_pi(const RunConfig& cfg, const std::string& tensor_path,
                   const std::string& weights_path, const std::string& out_dir) {
  const CountTensor tensor = load_count_tensor_file(tensor_path);
  const ModelConfig mcfg = cfg.model(tensor.n_regions(), tensor.n_categories());
  if (mcfg.head != HeadKind::Zinb) {
    throw UsageError("export-pi requires the zinb head; '" +
                     std::string(to_string(mcfg.head)) + "' has no pi parameter");
  }
  if (tensor.days() < mcfg.window) {
    throw DataError("tensor is shorter than the model window");
  }
  const ModelWeights weights = load_weights_file(weights_path, mcfg, cfg);
  const Eigen::MatrixXd transition = transition_matrix(graph_for(cfg, tensor.grid));

  // pi averaged over every complete window, horizon step and (for the
  // combined surface) category.
  const int n = tensor.n_regions();
  const int c_count = tensor.n_categories();
  Eigen::MatrixXd per_category = Eigen::MatrixXd::Zero(n, c_count);
  int window_count = 0;
  for (int end = mcfg.window; end <= tensor.days(); ++end) {
    DTensor3 input(n, mcfg.window, c_count);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < mcfg.window; ++t)
        for (int c = 0; c < c_count; ++c)
          input(i, t, c) =
              static_cast<double>(tensor.counts(i, end - mcfg.window + t, c));
    const HeadOutput out = forward(input, transition, weights, mcfg);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < mcfg.horizon; ++q)
        for (int c = 0; c < c_count; ++c) per_category(i, c) += out.params[0](i, q, c);
    ++window_count;
  }
  per_category /= static_cast<double>(window_count) * mcfg.horizon;

  prepare_out_dir(out_dir, cfg);
  // The combined surface is the category mean, elementwise by construction.
  Eigen::VectorXd combined = per_category.rowwise().mean();
  save_surface_file(out_path(out_dir, "pi_mean.txt"), tensor.grid, combined);
  for (int c = 0; c < c_count; ++c) {
    save_surface_file(out_path(out_dir, "pi_" + tensor.categories[c] + ".txt"),
                      tensor.grid, per_category.col(c));
  }
  std::cout << "exported pi over " << window_count << " windows\n";
}

void cmd_stats(const std::string& tensor_path, const std::string& out_dir) {
  const CountTensor tensor = load_count_tensor_file(tensor_path);
  const DatasetStats stats = dataset_stats(tensor);
  write_stats_block(std::cout, stats);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto os = std::ofstream(out_path(out_dir, "stats.txt"));
    if (!os) throw DataError("cannot open stats output");
    write_stats_block(os, stats);
  }
}

}  // namespace stmgnn
