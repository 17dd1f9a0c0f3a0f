#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stmgnn/errors.hpp"
#include "stmgnn/training.hpp"
#include "support/oracles.hpp"

using namespace stmgnn;

namespace {

SynthConfig small_synth() {
  SynthConfig s;
  s.rows = 4;
  s.cols = 4;
  s.days = 200;
  s.categories = 2;
  return s;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.n_regions = 16;
  cfg.window = 10;
  cfg.horizon = 1;
  cfg.categories = 2;
  cfg.dgcn_hidden = {16};
  cfg.dgcn_bias = true;
  cfg.mtcn_hidden_widths = {4};
  return cfg;
}

GraphSpec small_graph() {
  return build_grid_adjacency({4, 4}, AdjacencyScheme::Queen8, true);
}

}  // namespace

TEST_CASE("make_windows counts and reassembly") {
  CHECK(make_windows(5, 3, 1).size() == 2);
  CHECK_THROWS_AS(make_windows(3, 3, 1), DataError);

  const auto windows = make_windows(40, 7, 2);
  CHECK(windows.size() == 40 - 7 - 2 + 1);
  for (const auto& w : windows) {
    // Targets never overlap inputs.
    CHECK(w.target_begin == w.input_begin + 7);
  }

  // With Q=1 the concatenated targets reconstruct X[T:].
  const SynthResult synth = synthesize(small_synth(), 31);
  const auto ws = make_windows(synth.tensor.days(), 10, 1);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const Sample s = materialize_window(synth.tensor, ws[i], 10, 1);
    for (int n = 0; n < 16; ++n)
      for (int c = 0; c < 2; ++c) {
        CHECK(s.target(n, 0, c) ==
              static_cast<double>(synth.tensor.counts(n, 10 + static_cast<int>(i), c)));
        CHECK(s.input(n, 9, c) ==
              static_cast<double>(synth.tensor.counts(n, 9 + static_cast<int>(i), c)));
      }
  }
}

TEST_CASE("windows_for_split never cross the split boundaries") {
  const SplitSpec split = chrono_split(800, 30, 1);
  CHECK(split.test_begin == 700);
  CHECK(split.val_begin == 670);

  const auto train_w = windows_for_split(split, 30, 1, SplitPart::Train);
  const auto val_w = windows_for_split(split, 30, 1, SplitPart::Validation);
  const auto test_w = windows_for_split(split, 30, 1, SplitPart::Test);

  CHECK(train_w.size() == 640);  // targets 30..669
  CHECK(val_w.size() == 30);     // targets 670..699
  CHECK(test_w.size() == 70);    // targets 730..799

  for (const auto& w : train_w) {
    CHECK(w.input_begin >= 0);
    CHECK(w.target_begin + 1 <= split.val_begin);
  }
  for (const auto& w : val_w) {
    CHECK(w.target_begin >= split.val_begin);
    CHECK(w.target_begin + 1 <= split.train_end);
  }
  for (const auto& w : test_w) {
    CHECK(w.input_begin >= split.test_begin);
    CHECK(w.target_begin + 1 <= split.t_total);
  }
}

TEST_CASE("loss: zero targets, reduction, and the brute-force oracle") {
  ModelConfig cfg = small_model();
  const DistributionHead& head = head_family(HeadKind::Zinb);

  // All-zero targets with pi clamped near one: loss near zero.
  HeadOutput sure_zero;
  sure_zero.params.assign(3, DTensor3(16, 1, 2));
  for (int n = 0; n < 16; ++n)
    for (int c = 0; c < 2; ++c) {
      sure_zero.params[0](n, 0, c) = 1.0 - kProbClamp;
      sure_zero.params[1](n, 0, c) = 0.5;
      sure_zero.params[2](n, 0, c) = 1.0;
    }
  const DTensor3 zeros(16, 1, 2);
  CHECK(loss({zeros}, {sure_zero}, HeadKind::Zinb) < 1e-5);

  // A single-cell batch reduces to the scalar NLL.
  HeadOutput one;
  one.params.assign(3, DTensor3(1, 1, 1));
  one.params[0](0, 0, 0) = 0.3;
  one.params[1](0, 0, 0) = 0.6;
  one.params[2](0, 0, 0) = 2.0;
  DTensor3 y(1, 1, 1);
  y(0, 0, 0) = 3.0;
  CHECK(loss({y}, {one}, HeadKind::Zinb) ==
        doctest::Approx(zinb_nll(3.0, {0.3, 0.6, 2.0})).epsilon(1e-14));

  // Random batch matches the brute-force per-cell mean.
  std::mt19937 gen(55);
  std::uniform_real_distribution<double> up(0.1, 0.9);
  std::uniform_real_distribution<double> ur(0.5, 4.0);
  std::uniform_int_distribution<int> uy(0, 6);
  std::vector<DTensor3> targets;
  std::vector<HeadOutput> outputs;
  double brute = 0.0;
  int cells = 0;
  for (int b = 0; b < 3; ++b) {
    DTensor3 t(2, 1, 2);
    HeadOutput o;
    o.params.assign(3, DTensor3(2, 1, 2));
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 2; ++c) {
        t(n, 0, c) = uy(gen);
        o.params[0](n, 0, c) = up(gen);
        o.params[1](n, 0, c) = up(gen);
        o.params[2](n, 0, c) = ur(gen);
        brute += -std::log(oracles::zinb_term(
            static_cast<long long>(t(n, 0, c)), o.params[0](n, 0, c),
            o.params[1](n, 0, c), o.params[2](n, 0, c)));
        ++cells;
      }
    targets.push_back(t);
    outputs.push_back(o);
  }
  CHECK(loss(targets, outputs, HeadKind::Zinb) ==
        doctest::Approx(brute / cells).epsilon(1e-12));
  CHECK(loss(targets, outputs, HeadKind::Zinb, true) ==
        doctest::Approx(brute).epsilon(1e-12));

  // Non-finite likelihood names the offending cell.
  outputs[1].params[2](1, 0, 1) = 1e308;  // lgamma overflow
  try {
    loss(targets, outputs, HeadKind::Zinb);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("region=1") != std::string::npos);
    CHECK(msg.find("category=1") != std::string::npos);
  }
}

TEST_CASE("zero learning rate leaves the weights untouched") {
  const SynthResult synth = synthesize(small_synth(), 71);
  const SplitSpec split = chrono_split(200, 10, 1);
  ModelConfig mcfg = small_model();
  TrainConfig tcfg;
  tcfg.learning_rate = 0.0;
  tcfg.epochs = 3;
  tcfg.patience = 3;
  tcfg.seed = 5;
  const TrainResult res = train(synth.tensor, split, small_graph(), mcfg, tcfg);

  ModelWeights init = init_weights(mcfg, tcfg.seed);
  ModelWeights got = res.weights;
  const auto a = enumerate_arrays(init, mcfg);
  const auto b = enumerate_arrays(got, mcfg);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      CHECK(a[i].data[j] == b[i].data[j]);

  CHECK(res.history.epochs.size() == 3);
  for (const auto& e : res.history.epochs) {
    // The shuffle reorders the per-sample summation, so the flat train
    // curve is flat only up to last-ulp reassociation noise.
    CHECK(e.train_nll ==
          doctest::Approx(res.history.epochs[0].train_nll).epsilon(1e-12));
    CHECK(e.val_nll == res.history.epochs[0].val_nll);
  }
}

TEST_CASE("training on synthetic data reduces the NLL and is reproducible") {
  const SynthResult synth = synthesize(small_synth(), 72);
  const SplitSpec split = chrono_split(200, 10, 1);
  ModelConfig mcfg = small_model();
  TrainConfig tcfg;
  tcfg.learning_rate = 5e-3;
  tcfg.epochs = 8;
  tcfg.patience = 8;
  tcfg.batch_size = 32;
  tcfg.seed = 6;

  const TrainResult a = train(synth.tensor, split, small_graph(), mcfg, tcfg);
  CHECK(a.history.epochs.size() >= 2);
  CHECK(a.history.epochs.back().train_nll < a.history.epochs.front().train_nll);
  for (const auto& e : a.history.epochs) {
    CHECK(std::isfinite(e.train_nll));
    CHECK(std::isfinite(e.val_nll));
  }
  CHECK_FALSE(a.history.diverged);

  // Best epoch attains the minimum of the recorded validation curve, and
  // the best value is never above the final one.
  double min_val = a.history.epochs.front().val_nll;
  int argmin = 1;
  for (const auto& e : a.history.epochs) {
    if (e.val_nll < min_val) {
      min_val = e.val_nll;
      argmin = e.epoch;
    }
  }
  CHECK(a.history.best_epoch == argmin);
  CHECK(a.history.best_val_nll == min_val);
  CHECK(a.history.best_val_nll <= a.history.epochs.back().val_nll);

  const TrainResult b = train(synth.tensor, split, small_graph(), mcfg, tcfg);
  CHECK(b.history.epochs.size() == a.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].train_nll == b.history.epochs[i].train_nll);
    CHECK(a.history.epochs[i].val_nll == b.history.epochs[i].val_nll);
  }
  ModelWeights wa = a.weights, wb = b.weights;
  const auto ra = enumerate_arrays(wa, mcfg);
  const auto rb = enumerate_arrays(wb, mcfg);
  for (std::size_t i = 0; i < ra.size(); ++i)
    for (std::size_t j = 0; j < ra[i].size(); ++j)
      CHECK(ra[i].data[j] == rb[i].data[j]);
}

TEST_CASE("early stopping fires after patience epochs without improvement") {
  const SynthResult synth = synthesize(small_synth(), 73);
  const SplitSpec split = chrono_split(200, 10, 1);
  ModelConfig mcfg = small_model();
  TrainConfig tcfg;
  tcfg.learning_rate = 0.0;  // flat validation curve: first epoch is best
  tcfg.epochs = 30;
  tcfg.patience = 2;
  tcfg.seed = 7;
  const TrainResult res = train(synth.tensor, split, small_graph(), mcfg, tcfg);
  CHECK(res.history.early_stopped);
  CHECK(res.history.epochs.size() == 3);  // best at 1, then patience 2
  CHECK(res.history.best_epoch == 1);
}

TEST_CASE("single-step descent on a frozen miniature batch") {
  const SynthResult synth = synthesize(small_synth(), 74);
  ModelConfig mcfg = small_model();
  const GraphSpec graph = small_graph();
  const Eigen::MatrixXd transition = transition_matrix(graph);
  const DistributionHead& head = head_family(mcfg.head);

  const auto windows = make_windows(synth.tensor.days(), mcfg.window, mcfg.horizon);
  std::vector<Sample> batch;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(
        materialize_window(synth.tensor, windows[i * 7], mcfg.window, mcfg.horizon));
  }

  int violations = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ModelWeights w = init_weights(mcfg, seed);
    ModelWeights grads = zero_weights(mcfg);
    const auto w_refs = enumerate_arrays(w, mcfg);
    const auto g_refs = enumerate_arrays(grads, mcfg);

    auto batch_loss = [&]() {
      std::vector<DTensor3> targets;
      std::vector<HeadOutput> outputs;
      for (const Sample& s : batch) {
        targets.push_back(s.target);
        outputs.push_back(forward(s.input, transition, w, mcfg));
      }
      return loss(targets, outputs, mcfg.head);
    };

    const double before = batch_loss();
    long long cells = 0;
    for (const Sample& s : batch) {
      ForwardCache cache;
      const HeadOutput out = forward_with_cache(s.input, transition, w, mcfg, cache);
      std::vector<DTensor3> d_params;
      const int kc = head.param_count();
      d_params.assign(kc, DTensor3(16, 1, 2));
      std::vector<double> theta(kc), grad(kc);
      for (int n = 0; n < 16; ++n)
        for (int c = 0; c < 2; ++c) {
          for (int k = 0; k < kc; ++k) theta[k] = out.params[k](n, 0, c);
          head.nll_grad(s.target(n, 0, c), theta, grad);
          for (int k = 0; k < kc; ++k) d_params[k](n, 0, c) = grad[k];
        }
      backward(cache, d_params, transition, w, mcfg, grads);
      cells += 32;
    }
    for (std::size_t a = 0; a < g_refs.size(); ++a)
      for (std::size_t i = 0; i < g_refs[a].size(); ++i)
        w_refs[a].data[i] -= 1e-3 * g_refs[a].data[i] / static_cast<double>(cells);

    if (batch_loss() > before) ++violations;
  }
  CHECK(violations <= 1);
}
