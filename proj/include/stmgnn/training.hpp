#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stmgnn/data_ingest.hpp"
#include "stmgnn/model.hpp"

namespace stmgnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  int patience = 10;
  double clip_norm = 5.0;
  enum class Optimizer { Sgd, Adam };
  Optimizer optimizer = Optimizer::Adam;
  /// Mean-over-cells reduction by default; the flag restores the strict
  /// sum form of the loss.
  bool sum_reduction = false;
  std::uint64_t seed = 0;

  void validate() const;
};

TrainConfig::Optimizer optimizer_from_string(const std::string& s);
const char* to_string(TrainConfig::Optimizer o);

struct EpochRecord {
  int epoch = 0;       // 1-based
  double train_nll = 0.0;  // per-cell mean
  double val_nll = 0.0;    // per-cell mean
  double seconds = 0.0;    // wall clock, diagnostics only
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based; 0 means no finite epoch completed
  double best_val_nll = 0.0;
  bool early_stopped = false;
  bool diverged = false;
  std::string divergence_message;
};

/// Sliding-window sample: input days [input_begin, input_begin + T),
/// target days [target_begin, target_begin + Q).
struct WindowIndex {
  int input_begin = 0;
  int target_begin = 0;
};

/// Every window over a span: count = t_total - window - horizon + 1.
std::vector<WindowIndex> make_windows(int t_total, int window, int horizon);

enum class SplitPart { Train, Validation, Test };

/// Windows restricted to a split. Training windows target days before the
/// validation tail; validation windows target the tail (their inputs may
/// reach back into earlier train days); test windows sit entirely inside
/// the test range so nothing reads across the train/test boundary.
std::vector<WindowIndex> windows_for_split(const SplitSpec& split, int window,
                                           int horizon, SplitPart part);

struct Sample {
  DTensor3 input;   // N x T x C
  DTensor3 target;  // N x Q x C
};

Sample materialize_window(const CountTensor& data, const WindowIndex& w,
                          int window, int horizon);

/// Eq.-style negative log-likelihood of a batch: mean over all batch cells
/// (sum when sum_reduction). Finite on all-zero targets; throws
/// NumericError naming the offending cell otherwise.
double loss(const std::vector<DTensor3>& targets,
            const std::vector<HeadOutput>& outputs, HeadKind head,
            bool sum_reduction = false);

struct TrainResult {
  ModelWeights weights;  // checkpoint of the best validation epoch
  TrainHistory history;
};

/// Deterministic training loop: fixed shuffle stream, fixed reduction
/// order, gradient clipping by global norm, validation-based early
/// stopping. On divergence it stops and returns the last finite
/// checkpoint with history.diverged set.
TrainResult train(const CountTensor& data, const SplitSpec& split,
                  const GraphSpec& graph, const ModelConfig& mcfg,
                  const TrainConfig& tcfg);

}  // namespace stmgnn
