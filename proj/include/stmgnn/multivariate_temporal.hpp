#pragma once

#include <Eigen/Dense>
#include <vector>

#include "stmgnn/activations.hpp"
#include "stmgnn/tensor.hpp"

namespace stmgnn {

/// One layer of the merged time-by-category convolution. The filter acts on
/// the merged axis as a dense (w_out * channels_out) x (w_in * channels_in)
/// matrix; with no padding the width must shrink. channels_out normally
/// equals channels_in; the head layer widens it to C * K so each horizon
/// step carries one channel per distribution parameter.
struct MtcnLayerSpec {
  int w_in = 0;
  int w_out = 0;
  int channels_in = 0;
  int channels_out = 0;
  bool gate = true;

  int in_dim() const { return w_in * channels_in; }
  int out_dim() const { return w_out * channels_out; }
  void validate() const;
};

/// Value path plus optional gate path (gated-linear-unit form).
struct MtcnLayerWeights {
  Eigen::MatrixXd gamma;   // out_dim x in_dim
  Eigen::VectorXd b;       // out_dim
  Eigen::MatrixXd gamma_g; // gate path, empty when gate is off
  Eigen::VectorXd b_g;
};

/// Merge (region, time, category) into (region, time*category) with time
/// outer and category inner: column = t * C + c.
Eigen::MatrixXd merge_time_category(const DTensor3& x);

/// Exact inverse of merge_time_category.
DTensor3 split_time_category(const Eigen::MatrixXd& m, int t, int c);

/// Shared convolution applied per region row. Gate off: f(h Gamma^T + b).
/// Gate on: (h Gamma^T + b) ⊙ sigmoid(h Gamma_g^T + b_g); f is ignored.
Eigen::MatrixXd mtcn_layer_forward(const Eigen::MatrixXd& h,
                                   const MtcnLayerSpec& spec,
                                   const MtcnLayerWeights& weights,
                                   Activation f = Activation::Tanh);

/// Batched form over B independent (region x merged) blocks.
std::vector<Eigen::MatrixXd> mtcn_layer_forward(
    const std::vector<Eigen::MatrixXd>& batch, const MtcnLayerSpec& spec,
    const MtcnLayerWeights& weights, Activation f = Activation::Tanh);

/// Merge then apply the stack; widths must strictly decrease.
Eigen::MatrixXd mtcn_stack_forward(const DTensor3& x,
                                   const std::vector<MtcnLayerSpec>& specs,
                                   const std::vector<MtcnLayerWeights>& weights,
                                   Activation f = Activation::Tanh);

struct MtcnCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd pre;      // value-path pre-activation
  Eigen::MatrixXd pre_gate; // empty when gate is off
};

Eigen::MatrixXd mtcn_layer_forward_cached(const Eigen::MatrixXd& h,
                                          const MtcnLayerSpec& spec,
                                          const MtcnLayerWeights& weights,
                                          Activation f, MtcnCache& cache);

struct MtcnGrads {
  Eigen::MatrixXd d_input;
  Eigen::MatrixXd d_gamma;
  Eigen::VectorXd d_b;
  Eigen::MatrixXd d_gamma_g;
  Eigen::VectorXd d_b_g;
};

MtcnGrads mtcn_layer_backward(const Eigen::MatrixXd& upstream,
                              const MtcnCache& cache,
                              const MtcnLayerSpec& spec,
                              const MtcnLayerWeights& weights, Activation f);

/// Hidden-layer width schedule validation for a whole stack:
/// [window, hidden..., horizon] strictly decreasing.
void validate_width_schedule(const std::vector<int>& widths);

}  // namespace stmgnn
