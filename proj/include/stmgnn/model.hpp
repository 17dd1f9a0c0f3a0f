#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "stmgnn/count_distributions.hpp"
#include "stmgnn/graph_spatial.hpp"
#include "stmgnn/multivariate_temporal.hpp"
#include "stmgnn/tensor.hpp"

namespace stmgnn {

/// Whole-model hyperparameters. The two branches read the same merged
/// N x (T*C) input; the spatial branch diffuses over the region graph, the
/// temporal branch convolves the merged time-category axis, and their raw
/// outputs are fused by Hadamard product before the head activations.
struct ModelConfig {
  int n_regions = 1;
  int window = 30;
  int horizon = 1;
  int categories = 1;
  HeadKind head = HeadKind::Zinb;

  std::vector<int> dgcn_hidden{64};
  Activation dgcn_activation = Activation::Tanh;
  bool dgcn_bias = false;

  std::vector<int> mtcn_hidden_widths{8};
  bool gate = true;

  double prob_clamp = kProbClamp;
  double pos_floor = kPosFloor;

  int head_param_count() const { return head_family(head).param_count(); }
  /// Output feature count per region: horizon * categories * param count.
  int output_dim() const { return horizon * categories * head_param_count(); }
  /// Full width schedule [window, hidden..., horizon].
  std::vector<int> width_schedule() const;
  void validate() const;
};

struct DgcnLayerWeights {
  Eigen::MatrixXd w;
  Eigen::MatrixXd b_self;
  Eigen::VectorXd bias;  // present only when dgcn_bias is on
};

struct ModelWeights {
  std::vector<DgcnLayerWeights> spatial;
  std::vector<MtcnLayerWeights> temporal;
};

/// Flat view of one learnable array, in deterministic manifest order.
struct ArrayRef {
  std::string name;
  std::string role;
  double* data = nullptr;
  int rows = 0;
  int cols = 0;
  int fan_in = 0;
  int fan_out = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

std::vector<ArrayRef> enumerate_arrays(ModelWeights& w, const ModelConfig& cfg);

/// One parameter field per head channel, each (region, step, category).
struct HeadOutput {
  std::vector<DTensor3> params;
};

/// Xavier-uniform weight matrices, uniform +-1/sqrt(fan_in) bias vectors,
/// drawn in manifest order from the "init" stream of the seed.
ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed);

/// Weight structure with every array present and zeroed; gradient buffer.
ModelWeights zero_weights(const ModelConfig& cfg);

struct ForwardCache {
  Eigen::MatrixXd merged;
  std::vector<DgcnCache> spatial;
  std::vector<MtcnCache> temporal;
  Eigen::MatrixXd spatial_out;
  Eigen::MatrixXd temporal_out;
  Eigen::MatrixXd fused_raw;
};

HeadOutput forward(const DTensor3& x, const Eigen::MatrixXd& transition,
                   const ModelWeights& weights, const ModelConfig& cfg);

HeadOutput forward_with_cache(const DTensor3& x, const Eigen::MatrixXd& transition,
                              const ModelWeights& weights, const ModelConfig& cfg,
                              ForwardCache& cache);

/// Accumulates (+=) gradients for every weight into `grads`, which must be
/// zero_weights-shaped. `d_params` holds dLoss/dParameter per head channel.
void backward(const ForwardCache& cache, const std::vector<DTensor3>& d_params,
              const Eigen::MatrixXd& transition, const ModelWeights& weights,
              const ModelConfig& cfg, ModelWeights& grads);

/// Fuse two raw branch outputs and apply the head activations; exposed so
/// the fusion rule is testable on frozen branch outputs.
HeadOutput fuse_and_activate(const Eigen::MatrixXd& spatial_raw,
                             const Eigen::MatrixXd& temporal_raw,
                             const ModelConfig& cfg);

struct PredictionRow {
  int region = 0;
  int step = 0;
  int category = 0;
  std::vector<double> params;
  double mean = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

/// Parameters plus mean and 10%/90% quantiles for every cell; N*Q*C rows.
std::vector<PredictionRow> predict_distribution(const DTensor3& x,
                                                const Eigen::MatrixXd& transition,
                                                const ModelWeights& weights,
                                                const ModelConfig& cfg);

}  // namespace stmgnn
