#include "stmgnn/multivariate_temporal.hpp"

#include <sstream>

#include "stmgnn/errors.hpp"

namespace stmgnn {

void MtcnLayerSpec::validate() const {
  if (w_in <= 0 || w_out <= 0 || channels_in <= 0 || channels_out <= 0) {
    throw UsageError("mtcn layer: dimensions must be positive");
  }
  if (w_out >= w_in) {
    std::ostringstream os;
    os << "mtcn layer: width must shrink without padding (w_in=" << w_in
       << ", w_out=" << w_out << ")";
    throw UsageError(os.str());
  }
}

void validate_width_schedule(const std::vector<int>& widths) {
  if (widths.size() < 2) throw UsageError("width schedule needs at least two entries");
  for (std::size_t i = 1; i < widths.size(); ++i) {
    if (widths[i] <= 0 || widths[i] >= widths[i - 1]) {
      std::ostringstream os;
      os << "width schedule must strictly decrease, got " << widths[i - 1]
         << " -> " << widths[i];
      throw UsageError(os.str());
    }
  }
}

Eigen::MatrixXd merge_time_category(const DTensor3& x) {
  const int n = x.dim0(), t = x.dim1(), c = x.dim2();
  Eigen::MatrixXd m(n, t * c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j)
      for (int k = 0; k < c; ++k) m(i, j * c + k) = x(i, j, k);
  return m;
}

DTensor3 split_time_category(const Eigen::MatrixXd& m, int t, int c) {
  if (m.cols() != static_cast<long>(t) * c) {
    throw NumericError("split_time_category: column count is not t*c");
  }
  DTensor3 x(static_cast<int>(m.rows()), t, c);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < t; ++j)
      for (int k = 0; k < c; ++k) x(i, j, k) = m(i, j * c + k);
  return x;
}

namespace {

void check_mtcn_shapes(const Eigen::MatrixXd& h, const MtcnLayerSpec& spec,
                       const MtcnLayerWeights& w) {
  if (h.cols() != spec.in_dim()) {
    std::ostringstream os;
    os << "mtcn: input has " << h.cols() << " columns, spec expects "
       << spec.in_dim();
    throw NumericError(os.str());
  }
  if (w.gamma.rows() != spec.out_dim() || w.gamma.cols() != spec.in_dim() ||
      w.b.size() != spec.out_dim()) {
    throw NumericError("mtcn: value-path weight shapes do not match spec");
  }
  if (spec.gate && (w.gamma_g.rows() != spec.out_dim() ||
                    w.gamma_g.cols() != spec.in_dim() ||
                    w.b_g.size() != spec.out_dim())) {
    throw NumericError("mtcn: gate-path weight shapes do not match spec");
  }
}

}  // namespace

Eigen::MatrixXd mtcn_layer_forward_cached(const Eigen::MatrixXd& h,
                                          const MtcnLayerSpec& spec,
                                          const MtcnLayerWeights& weights,
                                          Activation f, MtcnCache& cache) {
  check_mtcn_shapes(h, spec, weights);
  cache.input = h;
  cache.pre = h * weights.gamma.transpose();
  cache.pre.rowwise() += weights.b.transpose();
  if (spec.gate) {
    cache.pre_gate = h * weights.gamma_g.transpose();
    cache.pre_gate.rowwise() += weights.b_g.transpose();
    return cache.pre.cwiseProduct(
        cache.pre_gate.unaryExpr([](double v) { return sigmoid(v); }));
  }
  cache.pre_gate.resize(0, 0);
  return cache.pre.unaryExpr([f](double v) { return apply_activation(f, v); });
}

Eigen::MatrixXd mtcn_layer_forward(const Eigen::MatrixXd& h,
                                   const MtcnLayerSpec& spec,
                                   const MtcnLayerWeights& weights,
                                   Activation f) {
  MtcnCache cache;
  return mtcn_layer_forward_cached(h, spec, weights, f, cache);
}

std::vector<Eigen::MatrixXd> mtcn_layer_forward(
    const std::vector<Eigen::MatrixXd>& batch, const MtcnLayerSpec& spec,
    const MtcnLayerWeights& weights, Activation f) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(batch.size());
  for (const auto& h : batch) out.push_back(mtcn_layer_forward(h, spec, weights, f));
  return out;
}

Eigen::MatrixXd mtcn_stack_forward(const DTensor3& x,
                                   const std::vector<MtcnLayerSpec>& specs,
                                   const std::vector<MtcnLayerWeights>& weights,
                                   Activation f) {
  if (specs.size() != weights.size()) {
    throw NumericError("mtcn stack: specs and weights differ in length");
  }
  std::vector<int> widths{x.dim1()};
  for (const auto& s : specs) widths.push_back(s.w_out);
  validate_width_schedule(widths);
  Eigen::MatrixXd h = merge_time_category(x);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    h = mtcn_layer_forward(h, specs[l], weights[l], f);
  }
  return h;
}

MtcnGrads mtcn_layer_backward(const Eigen::MatrixXd& upstream,
                              const MtcnCache& cache,
                              const MtcnLayerSpec& spec,
                              const MtcnLayerWeights& weights, Activation f) {
  MtcnGrads g;
  if (spec.gate) {
    const Eigen::MatrixXd gate =
        cache.pre_gate.unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::MatrixXd d_pre = upstream.cwiseProduct(gate);
    const Eigen::MatrixXd d_pre_gate =
        upstream.cwiseProduct(cache.pre)
            .cwiseProduct(gate.unaryExpr(
                [](double s) { return sigmoid_deriv_from_value(s); }));
    g.d_gamma = d_pre.transpose() * cache.input;
    g.d_b = d_pre.colwise().sum().transpose();
    g.d_gamma_g = d_pre_gate.transpose() * cache.input;
    g.d_b_g = d_pre_gate.colwise().sum().transpose();
    g.d_input = d_pre * weights.gamma + d_pre_gate * weights.gamma_g;
  } else {
    const Eigen::MatrixXd d_pre = upstream.cwiseProduct(cache.pre.unaryExpr(
        [f](double v) { return activation_deriv(f, v); }));
    g.d_gamma = d_pre.transpose() * cache.input;
    g.d_b = d_pre.colwise().sum().transpose();
    g.d_input = d_pre * weights.gamma;
  }
  return g;
}

}  // namespace stmgnn
