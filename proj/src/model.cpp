#include "stmgnn/model.hpp"

#include <cmath>
#include <sstream>

#include "stmgnn/errors.hpp"
#include "stmgnn/rng.hpp"

namespace stmgnn {

std::vector<int> ModelConfig::width_schedule() const {
  std::vector<int> widths{window};
  widths.insert(widths.end(), mtcn_hidden_widths.begin(), mtcn_hidden_widths.end());
  widths.push_back(horizon);
  return widths;
}

void ModelConfig::validate() const {
  if (n_regions <= 0 || window <= 0 || horizon <= 0 || categories <= 0) {
    throw UsageError("model config: dimensions must be positive");
  }
  for (int hdim : dgcn_hidden) {
    if (hdim <= 0) throw UsageError("model config: dgcn hidden sizes must be positive");
  }
  validate_width_schedule(width_schedule());
  if (!(prob_clamp > 0.0 && prob_clamp < 0.5)) {
    throw UsageError("model config: prob_clamp must lie in (0, 0.5)");
  }
  if (!(pos_floor > 0.0)) throw UsageError("model config: pos_floor must be positive");
}

namespace {

/// Spatial branch feature sizes: T*C -> hidden... -> Q*C*K.
std::vector<int> spatial_dims(const ModelConfig& cfg) {
  std::vector<int> dims{cfg.window * cfg.categories};
  dims.insert(dims.end(), cfg.dgcn_hidden.begin(), cfg.dgcn_hidden.end());
  dims.push_back(cfg.output_dim());
  return dims;
}

std::vector<MtcnLayerSpec> temporal_specs(const ModelConfig& cfg) {
  const std::vector<int> widths = cfg.width_schedule();
  std::vector<MtcnLayerSpec> specs;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    MtcnLayerSpec s;
    s.w_in = widths[l - 1];
    s.w_out = widths[l];
    s.channels_in = cfg.categories;
    s.channels_out = cfg.categories;
    s.gate = cfg.gate;
    if (l + 1 == widths.size()) {
      // Head layer carries one channel per distribution parameter.
      s.channels_out = cfg.categories * cfg.head_param_count();
    }
    specs.push_back(s);
  }
  // Channels flow through unchanged between layers except into the head.
  for (std::size_t l = 1; l < specs.size(); ++l) {
    specs[l].channels_in = specs[l - 1].channels_out;
  }
  return specs;
}

ModelWeights make_weights_shell(const ModelConfig& cfg) {
  ModelWeights w;
  const std::vector<int> dims = spatial_dims(cfg);
  for (std::size_t l = 1; l < dims.size(); ++l) {
    DgcnLayerWeights lw;
    lw.w = Eigen::MatrixXd::Zero(dims[l - 1], dims[l]);
    lw.b_self = Eigen::MatrixXd::Zero(dims[l - 1], dims[l]);
    if (cfg.dgcn_bias) lw.bias = Eigen::VectorXd::Zero(dims[l]);
    w.spatial.push_back(std::move(lw));
  }
  for (const MtcnLayerSpec& s : temporal_specs(cfg)) {
    MtcnLayerWeights lw;
    lw.gamma = Eigen::MatrixXd::Zero(s.out_dim(), s.in_dim());
    lw.b = Eigen::VectorXd::Zero(s.out_dim());
    if (cfg.gate) {
      lw.gamma_g = Eigen::MatrixXd::Zero(s.out_dim(), s.in_dim());
      lw.b_g = Eigen::VectorXd::Zero(s.out_dim());
    }
    w.temporal.push_back(std::move(lw));
  }
  return w;
}

}  // namespace

std::vector<ArrayRef> enumerate_arrays(ModelWeights& w, const ModelConfig& cfg) {
  std::vector<ArrayRef> refs;
  auto add_matrix = [&](const std::string& name, const std::string& role,
                        Eigen::MatrixXd& m, int fan_in, int fan_out) {
    refs.push_back({name, role, m.data(), static_cast<int>(m.rows()),
                    static_cast<int>(m.cols()), fan_in, fan_out});
  };
  auto add_vector = [&](const std::string& name, const std::string& role,
                        Eigen::VectorXd& v, int fan_in) {
    refs.push_back({name, role, v.data(), static_cast<int>(v.size()), 1, fan_in,
                    static_cast<int>(v.size())});
  };

  for (std::size_t l = 0; l < w.spatial.size(); ++l) {
    const std::string prefix = "spatial." + std::to_string(l);
    DgcnLayerWeights& lw = w.spatial[l];
    const int fin = static_cast<int>(lw.w.rows());
    const int fout = static_cast<int>(lw.w.cols());
    add_matrix(prefix + ".w", "dgcn diffusion weight", lw.w, fin, fout);
    add_matrix(prefix + ".b_self", "dgcn self projection", lw.b_self, fin, fout);
    if (cfg.dgcn_bias) add_vector(prefix + ".bias", "dgcn bias", lw.bias, fin);
  }
  for (std::size_t l = 0; l < w.temporal.size(); ++l) {
    const std::string prefix = "temporal." + std::to_string(l);
    MtcnLayerWeights& lw = w.temporal[l];
    const int fin = static_cast<int>(lw.gamma.cols());
    const int fout = static_cast<int>(lw.gamma.rows());
    add_matrix(prefix + ".gamma", "mtcn filter", lw.gamma, fin, fout);
    add_vector(prefix + ".b", "mtcn bias", lw.b, fin);
    if (cfg.gate) {
      add_matrix(prefix + ".gamma_gate", "mtcn gate filter", lw.gamma_g, fin, fout);
      add_vector(prefix + ".b_gate", "mtcn gate bias", lw.b_g, fin);
    }
  }
  return refs;
}

ModelWeights zero_weights(const ModelConfig& cfg) {
  cfg.validate();
  return make_weights_shell(cfg);
}

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelWeights w = make_weights_shell(cfg);
  RngStream rng(seed, "init");
  for (ArrayRef& ref : enumerate_arrays(w, cfg)) {
    // Bias vectors use the +-1/sqrt(fan_in) convention rather than zero:
    // with all-zero inputs a zero-bias network collapses both branches to
    // exactly zero, and the Hadamard fusion then has an exact saddle that
    // no optimizer step can leave.
    const bool is_bias = ref.cols == 1 && ref.rows == ref.fan_out;
    const double bound = is_bias
                             ? 1.0 / std::sqrt(static_cast<double>(ref.fan_in))
                             : std::sqrt(6.0 / (ref.fan_in + ref.fan_out));
    // Row-major fill keeps the draw order independent of storage layout.
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>> m(
        ref.data, ref.rows, ref.cols);
    for (int i = 0; i < ref.rows; ++i) {
      for (int j = 0; j < ref.cols; ++j) {
        m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
      }
    }
  }
  return w;
}

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* branch, std::size_t layer) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << branch << " branch produced non-finite values at layer " << layer;
    throw NumericError(os.str());
  }
}

Eigen::MatrixXd spatial_branch(const Eigen::MatrixXd& merged,
                               const Eigen::MatrixXd& transition,
                               const ModelWeights& weights, const ModelConfig& cfg,
                               std::vector<DgcnCache>& caches) {
  Eigen::MatrixXd h = merged;
  for (std::size_t l = 0; l < weights.spatial.size(); ++l) {
    const DgcnLayerWeights& lw = weights.spatial[l];
    const Activation act = l + 1 == weights.spatial.size() ? Activation::Identity
                                                           : cfg.dgcn_activation;
    const Eigen::VectorXd* bias = cfg.dgcn_bias ? &lw.bias : nullptr;
    h = dgcn_layer_forward_cached(h, transition, lw.w, lw.b_self, act, bias,
                                  caches[l]);
    // Saturating activations can mask an inf, so inspect pre-activations.
    check_finite(caches[l].pre, "spatial", l);
  }
  return h;
}

Eigen::MatrixXd temporal_branch(const Eigen::MatrixXd& merged,
                                const ModelWeights& weights,
                                const std::vector<MtcnLayerSpec>& specs,
                                std::vector<MtcnCache>& caches) {
  Eigen::MatrixXd h = merged;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const Activation act = l + 1 == specs.size() ? Activation::Identity
                                                 : Activation::Tanh;
    h = mtcn_layer_forward_cached(h, specs[l], weights.temporal[l], act, caches[l]);
    check_finite(caches[l].pre, "temporal", l);
    if (specs[l].gate) check_finite(caches[l].pre_gate, "temporal", l);
  }
  return h;
}

double activate_param(ParamKind kind, double raw, const ModelConfig& cfg) {
  switch (kind) {
    case ParamKind::Probability:
      return std::clamp(sigmoid(raw), cfg.prob_clamp, 1.0 - cfg.prob_clamp);
    case ParamKind::Positive:
      return std::max(softplus(raw), cfg.pos_floor);
    case ParamKind::Real:
      return raw;
  }
  return raw;
}

double activate_param_deriv(ParamKind kind, double raw, const ModelConfig& cfg) {
  switch (kind) {
    case ParamKind::Probability: {
      const double s = sigmoid(raw);
      if (s <= cfg.prob_clamp || s >= 1.0 - cfg.prob_clamp) return 0.0;
      return sigmoid_deriv_from_value(s);
    }
    case ParamKind::Positive:
      if (softplus(raw) <= cfg.pos_floor) return 0.0;
      return sigmoid(raw);
    case ParamKind::Real:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

HeadOutput fuse_and_activate(const Eigen::MatrixXd& spatial_raw,
                             const Eigen::MatrixXd& temporal_raw,
                             const ModelConfig& cfg) {
  const DistributionHead& head = head_family(cfg.head);
  const int k_count = head.param_count();
  const Eigen::MatrixXd fused = spatial_raw.cwiseProduct(temporal_raw);
  HeadOutput out;
  out.params.assign(k_count, DTensor3(cfg.n_regions, cfg.horizon, cfg.categories));
  for (int n = 0; n < cfg.n_regions; ++n) {
    for (int q = 0; q < cfg.horizon; ++q) {
      for (int c = 0; c < cfg.categories; ++c) {
        for (int k = 0; k < k_count; ++k) {
          const int col = (q * cfg.categories + c) * k_count + k;
          out.params[k](n, q, c) =
              activate_param(head.param_kind(k), fused(n, col), cfg);
        }
      }
    }
  }
  return out;
}

HeadOutput forward_with_cache(const DTensor3& x, const Eigen::MatrixXd& transition,
                              const ModelWeights& weights, const ModelConfig& cfg,
                              ForwardCache& cache) {
  cfg.validate();
  if (x.dim0() != cfg.n_regions || x.dim1() != cfg.window ||
      x.dim2() != cfg.categories) {
    std::ostringstream os;
    os << "forward: input shape (" << x.dim0() << "," << x.dim1() << ","
       << x.dim2() << ") does not match config (" << cfg.n_regions << ","
       << cfg.window << "," << cfg.categories << ")";
    throw NumericError(os.str());
  }
  const std::vector<MtcnLayerSpec> specs = temporal_specs(cfg);
  cache.merged = merge_time_category(x);
  cache.spatial.resize(weights.spatial.size());
  cache.temporal.resize(specs.size());
  cache.spatial_out =
      spatial_branch(cache.merged, transition, weights, cfg, cache.spatial);
  cache.temporal_out = temporal_branch(cache.merged, weights, specs,
                                       cache.temporal);
  cache.fused_raw = cache.spatial_out.cwiseProduct(cache.temporal_out);
  return fuse_and_activate(cache.spatial_out, cache.temporal_out, cfg);
}

HeadOutput forward(const DTensor3& x, const Eigen::MatrixXd& transition,
                   const ModelWeights& weights, const ModelConfig& cfg) {
  ForwardCache cache;
  return forward_with_cache(x, transition, weights, cfg, cache);
}

void backward(const ForwardCache& cache, const std::vector<DTensor3>& d_params,
              const Eigen::MatrixXd& transition, const ModelWeights& weights,
              const ModelConfig& cfg, ModelWeights& grads) {
  const DistributionHead& head = head_family(cfg.head);
  const int k_count = head.param_count();
  if (static_cast<int>(d_params.size()) != k_count) {
    throw NumericError("backward: d_params channel count does not match head");
  }
  if (cache.fused_raw.size() == 0) throw NumericError("backward: missing forward cache");

  // Through the head activations into the fused raw embedding.
  Eigen::MatrixXd d_fused(cfg.n_regions, cfg.output_dim());
  for (int n = 0; n < cfg.n_regions; ++n) {
    for (int q = 0; q < cfg.horizon; ++q) {
      for (int c = 0; c < cfg.categories; ++c) {
        for (int k = 0; k < k_count; ++k) {
          const int col = (q * cfg.categories + c) * k_count + k;
          d_fused(n, col) =
              d_params[k](n, q, c) *
              activate_param_deriv(head.param_kind(k), cache.fused_raw(n, col), cfg);
        }
      }
    }
  }

  // Hadamard rule.
  Eigen::MatrixXd d_spatial = d_fused.cwiseProduct(cache.temporal_out);
  Eigen::MatrixXd d_temporal = d_fused.cwiseProduct(cache.spatial_out);

  // Spatial chain.
  for (int l = static_cast<int>(weights.spatial.size()) - 1; l >= 0; --l) {
    const DgcnLayerWeights& lw = weights.spatial[l];
    const Activation act = l + 1 == static_cast<int>(weights.spatial.size())
                               ? Activation::Identity
                               : cfg.dgcn_activation;
    const DgcnGrads g = dgcn_layer_backward(d_spatial, cache.spatial[l], transition,
                                            lw.w, lw.b_self, act, cfg.dgcn_bias);
    grads.spatial[l].w += g.d_w;
    grads.spatial[l].b_self += g.d_b_self;
    if (cfg.dgcn_bias) grads.spatial[l].bias += g.d_bias;
    d_spatial = g.d_input;
  }

  // Temporal chain.
  const std::vector<MtcnLayerSpec> specs = temporal_specs(cfg);
  for (int l = static_cast<int>(specs.size()) - 1; l >= 0; --l) {
    const Activation act = l + 1 == static_cast<int>(specs.size())
                               ? Activation::Identity
                               : Activation::Tanh;
    const MtcnGrads g = mtcn_layer_backward(d_temporal, cache.temporal[l], specs[l],
                                            weights.temporal[l], act);
    grads.temporal[l].gamma += g.d_gamma;
    grads.temporal[l].b += g.d_b;
    if (cfg.gate) {
      grads.temporal[l].gamma_g += g.d_gamma_g;
      grads.temporal[l].b_g += g.d_b_g;
    }
    d_temporal = g.d_input;
  }
}

std::vector<PredictionRow> predict_distribution(const DTensor3& x,
                                                const Eigen::MatrixXd& transition,
                                                const ModelWeights& weights,
                                                const ModelConfig& cfg) {
  const HeadOutput out = forward(x, transition, weights, cfg);
  const DistributionHead& head = head_family(cfg.head);
  const int k_count = head.param_count();
  std::vector<PredictionRow> rows;
  rows.reserve(static_cast<std::size_t>(cfg.n_regions) * cfg.horizon *
               cfg.categories);
  std::vector<double> theta(k_count);
  for (int n = 0; n < cfg.n_regions; ++n) {
    for (int q = 0; q < cfg.horizon; ++q) {
      for (int c = 0; c < cfg.categories; ++c) {
        for (int k = 0; k < k_count; ++k) theta[k] = out.params[k](n, q, c);
        PredictionRow row;
        row.region = n;
        row.step = q;
        row.category = c;
        row.params = theta;
        row.mean = head.mean(theta);
        row.q10 = head.quantile(theta, 0.10);
        row.q90 = head.quantile(theta, 0.90);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace stmgnn
