#include "stmgnn/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "stmgnn/errors.hpp"
#include "stmgnn/rng.hpp"

namespace stmgnn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw UsageError("learning rate must be non-negative");
  if (epochs <= 0) throw UsageError("epochs must be positive");
  if (batch_size <= 0) throw UsageError("batch size must be positive");
  if (patience <= 0 || patience > epochs) {
    throw UsageError("patience must lie in [1, epochs]");
  }
  if (!(clip_norm > 0.0)) throw UsageError("clip norm must be positive");
}

TrainConfig::Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return TrainConfig::Optimizer::Sgd;
  if (s == "adam") return TrainConfig::Optimizer::Adam;
  throw UsageError("unknown optimizer: " + s);
}

const char* to_string(TrainConfig::Optimizer o) {
  return o == TrainConfig::Optimizer::Sgd ? "sgd" : "adam";
}

std::vector<WindowIndex> make_windows(int t_total, int window, int horizon) {
  if (t_total < window + horizon) {
    std::ostringstream os;
    os << "span of " << t_total << " days cannot hold a " << window << "+"
       << horizon << " window";
    throw DataError(os.str());
  }
  std::vector<WindowIndex> out;
  for (int t = window; t + horizon <= t_total; ++t) {
    out.push_back({t - window, t});
  }
  return out;
}

std::vector<WindowIndex> windows_for_split(const SplitSpec& split, int window,
                                           int horizon, SplitPart part) {
  std::vector<WindowIndex> out;
  int first_target = 0, last_target_end = 0, min_input = 0;
  switch (part) {
    case SplitPart::Train:
      first_target = window;
      last_target_end = split.val_begin;
      min_input = 0;
      break;
    case SplitPart::Validation:
      first_target = split.val_begin;
      last_target_end = split.train_end;
      min_input = 0;
      break;
    case SplitPart::Test:
      first_target = split.test_begin + window;
      last_target_end = split.t_total;
      min_input = split.test_begin;
      break;
  }
  for (int t = first_target; t + horizon <= last_target_end; ++t) {
    if (t - window < min_input) continue;
    out.push_back({t - window, t});
  }
  return out;
}

Sample materialize_window(const CountTensor& data, const WindowIndex& w,
                          int window, int horizon) {
  if (w.input_begin < 0 || w.target_begin + horizon > data.days()) {
    throw DataError("window indices outside the tensor span");
  }
  Sample s;
  s.input = DTensor3(data.n_regions(), window, data.n_categories());
  s.target = DTensor3(data.n_regions(), horizon, data.n_categories());
  for (int n = 0; n < data.n_regions(); ++n) {
    for (int t = 0; t < window; ++t)
      for (int c = 0; c < data.n_categories(); ++c)
        s.input(n, t, c) = static_cast<double>(data.counts(n, w.input_begin + t, c));
    for (int q = 0; q < horizon; ++q)
      for (int c = 0; c < data.n_categories(); ++c)
        s.target(n, q, c) =
            static_cast<double>(data.counts(n, w.target_begin + q, c));
  }
  return s;
}

namespace {

/// Per-sample NLL sum plus (optionally) parameter gradients.
double sample_nll(const DTensor3& target, const HeadOutput& out,
                  const DistributionHead& head,
                  std::vector<DTensor3>* d_params) {
  const int kc = head.param_count();
  const int n_regions = target.dim0(), horizon = target.dim1(),
            categories = target.dim2();
  if (d_params != nullptr) {
    d_params->assign(kc, DTensor3(n_regions, horizon, categories));
  }
  std::vector<double> theta(kc), grad(kc);
  double total = 0.0;
  for (int n = 0; n < n_regions; ++n)
    for (int q = 0; q < horizon; ++q)
      for (int c = 0; c < categories; ++c) {
        for (int k = 0; k < kc; ++k) theta[k] = out.params[k](n, q, c);
        const double nll = head.nll(target(n, q, c), theta);
        if (!std::isfinite(nll)) {
          std::ostringstream os;
          os << "non-finite likelihood at cell (region=" << n << ", step=" << q
             << ", category=" << c << ")";
          throw NumericError(os.str());
        }
        total += nll;
        if (d_params != nullptr) {
          head.nll_grad(target(n, q, c), theta, grad);
          for (int k = 0; k < kc; ++k) (*d_params)[k](n, q, c) = grad[k];
        }
      }
  return total;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const std::vector<ArrayRef>& shapes)
      : cfg_(cfg) {
    if (cfg.optimizer == TrainConfig::Optimizer::Adam) {
      for (const ArrayRef& ref : shapes) {
        m_.emplace_back(Eigen::VectorXd::Zero(ref.size()));
        v_.emplace_back(Eigen::VectorXd::Zero(ref.size()));
      }
    }
  }

  void step(const std::vector<ArrayRef>& weights,
            const std::vector<ArrayRef>& grads) {
    ++t_;
    if (cfg_.optimizer == TrainConfig::Optimizer::Sgd) {
      for (std::size_t a = 0; a < weights.size(); ++a) {
        for (std::size_t i = 0; i < weights[a].size(); ++i) {
          weights[a].data[i] -= cfg_.learning_rate * grads[a].data[i];
        }
      }
      return;
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, t_);
    const double bc2 = 1.0 - std::pow(b2, t_);
    for (std::size_t a = 0; a < weights.size(); ++a) {
      for (std::size_t i = 0; i < weights[a].size(); ++i) {
        const double g = grads[a].data[i];
        m_[a](i) = b1 * m_[a](i) + (1.0 - b1) * g;
        v_[a](i) = b2 * v_[a](i) + (1.0 - b2) * g * g;
        const double mh = m_[a](i) / bc1;
        const double vh = v_[a](i) / bc2;
        weights[a].data[i] -= cfg_.learning_rate * mh / (std::sqrt(vh) + eps);
      }
    }
  }

 private:
  TrainConfig cfg_;
  long t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

void scale_grads(const std::vector<ArrayRef>& grads, double factor) {
  for (const ArrayRef& ref : grads) {
    for (std::size_t i = 0; i < ref.size(); ++i) ref.data[i] *= factor;
  }
}

double grad_global_norm(const std::vector<ArrayRef>& grads) {
  double sq = 0.0;
  for (const ArrayRef& ref : grads) {
    for (std::size_t i = 0; i < ref.size(); ++i) sq += ref.data[i] * ref.data[i];
  }
  return std::sqrt(sq);
}

void zero_grads(const std::vector<ArrayRef>& grads) {
  for (const ArrayRef& ref : grads) {
    for (std::size_t i = 0; i < ref.size(); ++i) ref.data[i] = 0.0;
  }
}

}  // namespace

double loss(const std::vector<DTensor3>& targets,
            const std::vector<HeadOutput>& outputs, HeadKind head_kind,
            bool sum_reduction) {
  if (targets.size() != outputs.size() || targets.empty()) {
    throw UsageError("loss: batch targets and outputs must align and be non-empty");
  }
  const DistributionHead& head = head_family(head_kind);
  double total = 0.0;
  long long cells = 0;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    total += sample_nll(targets[b], outputs[b], head, nullptr);
    cells += static_cast<long long>(targets[b].size());
  }
  return sum_reduction ? total : total / static_cast<double>(cells);
}

TrainResult train(const CountTensor& data, const SplitSpec& split,
                  const GraphSpec& graph, const ModelConfig& mcfg,
                  const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  const DistributionHead& head = head_family(mcfg.head);
  const Eigen::MatrixXd transition = transition_matrix(graph);

  const auto train_w =
      windows_for_split(split, mcfg.window, mcfg.horizon, SplitPart::Train);
  const auto val_w =
      windows_for_split(split, mcfg.window, mcfg.horizon, SplitPart::Validation);
  if (train_w.empty() || val_w.empty()) {
    throw DataError("split produced no training or validation windows");
  }

  TrainResult result;
  result.weights = init_weights(mcfg, tcfg.seed);
  ModelWeights grads = zero_weights(mcfg);
  const std::vector<ArrayRef> w_refs = enumerate_arrays(result.weights, mcfg);
  const std::vector<ArrayRef> g_refs = enumerate_arrays(grads, mcfg);
  Optimizer opt(tcfg, w_refs);
  RngStream shuffle_rng(tcfg.seed, "shuffle");

  ModelWeights best = result.weights;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_best = 0;

  std::vector<std::size_t> order(train_w.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto eval_mean_nll = [&](const std::vector<WindowIndex>& windows) {
    double total = 0.0;
    long long cells = 0;
    for (const WindowIndex& w : windows) {
      const Sample s = materialize_window(data, w, mcfg.window, mcfg.horizon);
      const HeadOutput out = forward(s.input, transition, result.weights, mcfg);
      total += sample_nll(s.target, out, head, nullptr);
      cells += static_cast<long long>(s.target.size());
    }
    return total / static_cast<double>(cells);
  };

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates on the window order, driven by the shuffle stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_nll = 0.0;
    long long epoch_cells = 0;
    bool finite = true;
    std::string failure;

    for (std::size_t start = 0; start < order.size() && finite;
         start += tcfg.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      zero_grads(g_refs);
      double batch_nll = 0.0;
      long long batch_cells = 0;
      try {
        for (std::size_t bi = start; bi < stop; ++bi) {
          const Sample s =
              materialize_window(data, train_w[order[bi]], mcfg.window, mcfg.horizon);
          ForwardCache cache;
          const HeadOutput out =
              forward_with_cache(s.input, transition, result.weights, mcfg, cache);
          std::vector<DTensor3> d_params;
          batch_nll += sample_nll(s.target, out, head, &d_params);
          backward(cache, d_params, transition, result.weights, mcfg, grads);
          batch_cells += static_cast<long long>(s.target.size());
        }
      } catch (const NumericError& e) {
        finite = false;
        failure = e.what();
        break;
      }
      if (!std::isfinite(batch_nll)) {
        finite = false;
        failure = "non-finite batch loss";
        break;
      }
      if (!tcfg.sum_reduction) {
        scale_grads(g_refs, 1.0 / static_cast<double>(batch_cells));
      }
      const double norm = grad_global_norm(g_refs);
      if (!std::isfinite(norm)) {
        finite = false;
        failure = "non-finite gradient norm";
        break;
      }
      if (norm > tcfg.clip_norm) {
        scale_grads(g_refs, tcfg.clip_norm / norm);
      }
      opt.step(w_refs, g_refs);
      epoch_nll += batch_nll;
      epoch_cells += batch_cells;
    }

    if (!finite) {
      result.history.diverged = true;
      result.history.divergence_message = failure;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = epoch_nll / static_cast<double>(epoch_cells);
    rec.val_nll = eval_mean_nll(val_w);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.history.epochs.push_back(rec);

    if (!std::isfinite(rec.val_nll)) {
      result.history.diverged = true;
      result.history.divergence_message = "non-finite validation loss";
      break;
    }
    if (rec.val_nll < best_val) {
      best_val = rec.val_nll;
      best = result.weights;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      result.history.early_stopped = true;
      break;
    }
  }

  result.history.best_epoch = best_epoch;
  result.history.best_val_nll = best_val;
  result.weights = std::move(best);
  return result;
}

}  // namespace stmgnn
