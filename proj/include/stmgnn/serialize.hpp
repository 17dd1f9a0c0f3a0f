#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stmgnn/config.hpp"
#include "stmgnn/data_ingest.hpp"
#include "stmgnn/metrics.hpp"
#include "stmgnn/model.hpp"
#include "stmgnn/training.hpp"

namespace stmgnn {

// Count tensor: text header, then one line of category counts per
// (region, day), day lines grouped per region with a blank separator.
// Round-trips bit-exactly.
void save_count_tensor(std::ostream& os, const CountTensor& tensor);
CountTensor load_count_tensor(std::istream& is);
void save_count_tensor_file(const std::string& path, const CountTensor& tensor);
CountTensor load_count_tensor_file(const std::string& path);

// Weights: text manifest (seed, config echo, per-head activations, array
// shapes) followed by the arrays as little-endian 64-bit floats in manifest
// order, each written logically row-major. Loading validates the stored
// config echo byte-for-byte against the current one and every array shape
// against the model config.
void save_weights_file(const std::string& path, const ModelWeights& weights,
                       const ModelConfig& mcfg, const RunConfig& cfg);
ModelWeights load_weights_file(const std::string& path, const ModelConfig& mcfg,
                               const RunConfig& cfg);

// Training history table: epoch, train_nll, val_nll, seconds. The seconds
// column is wall clock and therefore the one non-reproducible field.
void save_history_file(const std::string& path, const TrainHistory& history);

// Metrics report: the metric keys at 6 significant digits, metadata as
// comment lines.
void save_metrics_report(std::ostream& os, const MetricsReport& report);
void save_metrics_report_file(const std::string& path, const MetricsReport& report);

// Prediction table: CSV with columns region, step, category, the head's
// parameter names, mean, q10, q90; one block per window separated by
// `# window <target_day>` comment lines.
void save_predictions_file(const std::string& path,
                           const std::vector<std::pair<int, std::vector<PredictionRow>>>& blocks,
                           HeadKind head);

// Point predictions (baselines): region, step, category, mean.
void save_point_predictions_file(
    const std::string& path,
    const std::vector<std::pair<int, std::vector<PredictionRow>>>& blocks);

// rows x cols surface of one value per region.
void save_surface_file(const std::string& path, const GridSpec& grid,
                       const Eigen::VectorXd& values);
Eigen::VectorXd load_surface_file(const std::string& path, int* rows = nullptr,
                                  int* cols = nullptr);

// Per-(region, category) ground-truth field as per-category surface blocks.
void save_field_file(const std::string& path, const GridSpec& grid,
                     const Eigen::MatrixXd& field,
                     const std::vector<std::string>& categories);

// Table-1-style statistics block.
void write_stats_block(std::ostream& os, const DatasetStats& stats);

// Resolved config echo with its content hash, written into every run's
// output directory.
void save_config_echo(const std::string& path, const RunConfig& cfg);

}  // namespace stmgnn
