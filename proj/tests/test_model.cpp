#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "stmgnn/errors.hpp"
#include "stmgnn/model.hpp"
#include "support/oracles.hpp"

using namespace stmgnn;
using Eigen::MatrixXd;

namespace {

ModelConfig miniature_config() {
  ModelConfig cfg;
  cfg.n_regions = 4;
  cfg.window = 6;
  cfg.horizon = 1;
  cfg.categories = 2;
  cfg.head = HeadKind::Zinb;
  cfg.dgcn_hidden = {8};
  cfg.dgcn_bias = true;
  cfg.mtcn_hidden_widths = {3};
  cfg.gate = true;
  return cfg;
}

DTensor3 random_counts(std::mt19937& gen, int n, int t, int c, int max_count = 4) {
  DTensor3 x(n, t, c);
  std::uniform_int_distribution<int> u(0, max_count);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j)
      for (int k = 0; k < c; ++k) x(i, j, k) = u(gen);
  return x;
}

MatrixXd grid_transition(int rows, int cols) {
  const GraphSpec g =
      build_grid_adjacency({rows, cols}, AdjacencyScheme::Queen8, true);
  return transition_matrix(g);
}

// Total NLL of a target tensor under the model output, plus the parameter
// gradients, computed cell by cell straight from the head.
double total_nll(const HeadOutput& out, const DTensor3& target,
                 const ModelConfig& cfg, std::vector<DTensor3>* d_params) {
  const DistributionHead& head = head_family(cfg.head);
  const int kc = head.param_count();
  if (d_params != nullptr) {
    d_params->assign(kc, DTensor3(cfg.n_regions, cfg.horizon, cfg.categories));
  }
  std::vector<double> theta(kc), grad(kc);
  double loss = 0.0;
  for (int n = 0; n < cfg.n_regions; ++n)
    for (int q = 0; q < cfg.horizon; ++q)
      for (int c = 0; c < cfg.categories; ++c) {
        for (int k = 0; k < kc; ++k) theta[k] = out.params[k](n, q, c);
        loss += head.nll(target(n, q, c), theta);
        if (d_params != nullptr) {
          head.nll_grad(target(n, q, c), theta, grad);
          for (int k = 0; k < kc; ++k) (*d_params)[k](n, q, c) = grad[k];
        }
      }
  return loss;
}

}  // namespace

TEST_CASE("init_weights is seed-deterministic and respects bounds") {
  const ModelConfig cfg = miniature_config();
  ModelWeights a = init_weights(cfg, 123);
  ModelWeights b = init_weights(cfg, 123);
  ModelWeights c = init_weights(cfg, 124);

  const auto refs_a = enumerate_arrays(a, cfg);
  const auto refs_b = enumerate_arrays(b, cfg);
  const auto refs_c = enumerate_arrays(c, cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < refs_a.size(); ++i) {
    for (std::size_t j = 0; j < refs_a[i].size(); ++j) {
      CHECK(refs_a[i].data[j] == refs_b[i].data[j]);
      if (refs_a[i].data[j] != refs_c[i].data[j]) any_diff = true;
    }
    const bool is_bias = refs_a[i].cols == 1;
    const double bound =
        is_bias ? 1.0 / std::sqrt(static_cast<double>(refs_a[i].fan_in))
                : std::sqrt(6.0 / (refs_a[i].fan_in + refs_a[i].fan_out));
    for (std::size_t j = 0; j < refs_a[i].size(); ++j) {
      CHECK(std::abs(refs_a[i].data[j]) <= bound);
    }
  }
  CHECK(any_diff);
}

TEST_CASE("forward with zero weights gives the zero-activation parameters") {
  const ModelConfig cfg = miniature_config();
  const ModelWeights w = zero_weights(cfg);
  const MatrixXd tr = grid_transition(2, 2);
  std::mt19937 gen(1);
  const DTensor3 x = random_counts(gen, 4, 6, 2);
  const HeadOutput out = forward(x, tr, w, cfg);
  for (int n = 0; n < 4; ++n)
    for (int c = 0; c < 2; ++c) {
      CHECK(out.params[0](n, 0, c) == 0.5);
      CHECK(out.params[1](n, 0, c) == 0.5);
      CHECK(out.params[2](n, 0, c) ==
            doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("single region, single category, single step shapes") {
  ModelConfig cfg;
  cfg.n_regions = 1;
  cfg.window = 4;
  cfg.horizon = 1;
  cfg.categories = 1;
  cfg.dgcn_hidden = {3};
  cfg.mtcn_hidden_widths = {2};
  const ModelWeights w = init_weights(cfg, 7);
  const MatrixXd tr = grid_transition(1, 1);
  std::mt19937 gen(2);
  const DTensor3 x = random_counts(gen, 1, 4, 1);
  const HeadOutput out = forward(x, tr, w, cfg);
  CHECK(out.params.size() == 3);
  for (const auto& p : out.params) {
    CHECK(p.dim0() == 1);
    CHECK(p.dim1() == 1);
    CHECK(p.dim2() == 1);
  }
}

TEST_CASE("output validity across 100 random weight draws, all heads") {
  std::mt19937 gen(3);
  for (HeadKind kind : {HeadKind::Zinb, HeadKind::Nb, HeadKind::Gaussian,
                        HeadKind::TruncNormal}) {
    ModelConfig cfg = miniature_config();
    cfg.head = kind;
    const MatrixXd tr = grid_transition(2, 2);
    const DistributionHead& head = head_family(kind);
    for (int draw = 0; draw < 25; ++draw) {
      const ModelWeights w = init_weights(cfg, 1000 + draw);
      const DTensor3 x = random_counts(gen, 4, 6, 2);
      const HeadOutput out = forward(x, tr, w, cfg);
      CHECK(static_cast<int>(out.params.size()) == head.param_count());
      for (int k = 0; k < head.param_count(); ++k) {
        for (int n = 0; n < 4; ++n)
          for (int c = 0; c < 2; ++c) {
            const double v = out.params[k](n, 0, c);
            switch (head.param_kind(k)) {
              case ParamKind::Probability:
                CHECK(v >= cfg.prob_clamp);
                CHECK(v <= 1.0 - cfg.prob_clamp);
                break;
              case ParamKind::Positive:
                CHECK(v >= cfg.pos_floor);
                break;
              case ParamKind::Real:
                CHECK(std::isfinite(v));
                break;
            }
          }
      }
    }
  }
}

TEST_CASE("fusion is symmetric in the two branches") {
  ModelConfig cfg = miniature_config();
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  MatrixXd a(cfg.n_regions, cfg.output_dim());
  MatrixXd b(cfg.n_regions, cfg.output_dim());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      a(i, j) = u(gen);
      b(i, j) = u(gen);
    }
  const HeadOutput ab = fuse_and_activate(a, b, cfg);
  const HeadOutput ba = fuse_and_activate(b, a, cfg);
  for (std::size_t k = 0; k < ab.params.size(); ++k) {
    CHECK(ab.params[k] == ba.params[k]);
  }
}

TEST_CASE("forward is deterministic") {
  const ModelConfig cfg = miniature_config();
  const ModelWeights w = init_weights(cfg, 9);
  const MatrixXd tr = grid_transition(2, 2);
  std::mt19937 gen(6);
  const DTensor3 x = random_counts(gen, 4, 6, 2);
  const HeadOutput a = forward(x, tr, w, cfg);
  const HeadOutput b = forward(x, tr, w, cfg);
  for (std::size_t k = 0; k < a.params.size(); ++k) CHECK(a.params[k] == b.params[k]);
}

TEST_CASE("head swap changes only the channel count") {
  for (HeadKind kind : {HeadKind::Zinb, HeadKind::Nb, HeadKind::Gaussian,
                        HeadKind::TruncNormal}) {
    ModelConfig cfg = miniature_config();
    cfg.head = kind;
    const ModelWeights w = init_weights(cfg, 11);
    const MatrixXd tr = grid_transition(2, 2);
    std::mt19937 gen(7);
    const DTensor3 x = random_counts(gen, 4, 6, 2);
    const HeadOutput out = forward(x, tr, w, cfg);
    CHECK(static_cast<int>(out.params.size()) ==
          head_family(kind).param_count());
    for (const auto& p : out.params) {
      CHECK(p.dim0() == 4);
      CHECK(p.dim1() == 1);
      CHECK(p.dim2() == 2);
    }
  }
}

TEST_CASE("non-finite branch values are reported with branch and layer") {
  ModelConfig cfg = miniature_config();
  ModelWeights w = init_weights(cfg, 13);
  w.spatial[0].w(0, 0) = std::numeric_limits<double>::infinity();
  const MatrixXd tr = grid_transition(2, 2);
  std::mt19937 gen(8);
  const DTensor3 x = random_counts(gen, 4, 6, 2);
  try {
    forward(x, tr, w, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("spatial") != std::string::npos);
    CHECK(msg.find("layer 0") != std::string::npos);
  }
}

TEST_CASE("backward: zero upstream gives zero weight gradients") {
  const ModelConfig cfg = miniature_config();
  const ModelWeights w = init_weights(cfg, 17);
  const MatrixXd tr = grid_transition(2, 2);
  std::mt19937 gen(9);
  const DTensor3 x = random_counts(gen, 4, 6, 2);
  ForwardCache cache;
  forward_with_cache(x, tr, w, cfg, cache);

  std::vector<DTensor3> d_params(3, DTensor3(4, 1, 2));
  ModelWeights grads = zero_weights(cfg);
  backward(cache, d_params, tr, w, cfg, grads);
  for (const ArrayRef& ref : enumerate_arrays(grads, cfg)) {
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(ref.data[i] == 0.0);
  }
}

TEST_CASE("backward: Hadamard rule routes each branch through the other") {
  const ModelConfig cfg = miniature_config();
  const ModelWeights w = init_weights(cfg, 19);
  const MatrixXd tr = grid_transition(2, 2);
  std::mt19937 gen(10);
  const DTensor3 x = random_counts(gen, 4, 6, 2);
  ForwardCache cache;
  forward_with_cache(x, tr, w, cfg, cache);
  CHECK(cache.fused_raw == cache.spatial_out.cwiseProduct(cache.temporal_out).eval());
}

TEST_CASE("full-model gradient matches finite differences on the miniature config") {
  for (HeadKind kind : {HeadKind::Zinb, HeadKind::Gaussian}) {
    ModelConfig cfg = miniature_config();
    cfg.head = kind;
    ModelWeights w = init_weights(cfg, 21);
    const MatrixXd tr = grid_transition(2, 2);
    std::mt19937 gen(11);
    const DTensor3 x = random_counts(gen, 4, 6, 2);
    const DTensor3 target = random_counts(gen, 4, 1, 2, 3);

    ForwardCache cache;
    const HeadOutput out = forward_with_cache(x, tr, w, cfg, cache);
    std::vector<DTensor3> d_params;
    total_nll(out, target, cfg, &d_params);
    ModelWeights grads = zero_weights(cfg);
    backward(cache, d_params, tr, w, cfg, grads);

    const auto w_refs = enumerate_arrays(w, cfg);
    const auto g_refs = enumerate_arrays(grads, cfg);
    const double h = 1e-5;
    for (std::size_t a = 0; a < w_refs.size(); ++a) {
      for (std::size_t i = 0; i < w_refs[a].size(); ++i) {
        const double keep = w_refs[a].data[i];
        w_refs[a].data[i] = keep + h;
        const double up = total_nll(forward(x, tr, w, cfg), target, cfg, nullptr);
        w_refs[a].data[i] = keep - h;
        const double dn = total_nll(forward(x, tr, w, cfg), target, cfg, nullptr);
        w_refs[a].data[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        INFO("head=", to_string(kind), " array=", w_refs[a].name, " i=", i);
        CHECK(oracles::grad_rel_err(g_refs[a].data[i], fd) < 1e-3);
      }
    }
  }
}

TEST_CASE("predict_distribution summary rows") {
  const ModelConfig cfg = miniature_config();
  const ModelWeights w = init_weights(cfg, 23);
  const MatrixXd tr = grid_transition(2, 2);
  std::mt19937 gen(12);
  const DTensor3 x = random_counts(gen, 4, 6, 2);
  const auto rows = predict_distribution(x, tr, w, cfg);
  CHECK(rows.size() == 4u * 1u * 2u);
  const DistributionHead& head = head_family(cfg.head);
  for (const auto& row : rows) {
    CHECK(row.params.size() == 3);
    const double median = head.quantile(row.params, 0.5);
    CHECK(row.q10 <= median);
    CHECK(median <= row.q90);
  }
}
