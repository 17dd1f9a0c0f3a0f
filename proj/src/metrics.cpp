#include "stmgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stmgnn/errors.hpp"

namespace stmgnn {

namespace {
constexpr double kModelFloor = 1e-12;

void check_same_nonempty(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw UsageError(std::string(what) + ": size mismatch");
  if (a == 0) throw UsageError(std::string(what) + ": empty input");
}
}  // namespace

double mae(const std::vector<double>& pred_mean, const std::vector<double>& actual) {
  check_same_nonempty(pred_mean.size(), actual.size(), "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    total += std::abs(pred_mean[i] - actual[i]);
  }
  return total / static_cast<double>(actual.size());
}

std::pair<std::vector<double>, std::vector<double>> interval(
    const std::vector<std::vector<double>>& cell_params, HeadKind head_kind,
    double lo, double hi) {
  if (!(lo < hi)) throw UsageError("interval: lo must be below hi");
  const DistributionHead& head = head_family(head_kind);
  std::vector<double> lower, upper;
  lower.reserve(cell_params.size());
  upper.reserve(cell_params.size());
  for (const std::vector<double>& theta : cell_params) {
    lower.push_back(head.quantile(theta, lo));
    upper.push_back(head.quantile(theta, hi));
  }
  return {std::move(lower), std::move(upper)};
}

double picp(const std::vector<double>& lower, const std::vector<double>& upper,
            const std::vector<double>& actual) {
  check_same_nonempty(lower.size(), actual.size(), "picp");
  check_same_nonempty(upper.size(), actual.size(), "picp");
  long long covered = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (lower[i] <= actual[i] && actual[i] <= upper[i]) ++covered;
  }
  return covered / static_cast<double>(actual.size());
}

double mpiw(const std::vector<double>& lower, const std::vector<double>& upper) {
  check_same_nonempty(lower.size(), upper.size(), "mpiw");
  double total = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (upper[i] < lower[i]) throw UsageError("mpiw: upper bound below lower");
    total += upper[i] - lower[i];
  }
  return total / static_cast<double>(lower.size());
}

namespace {

std::vector<double> empirical_histogram(const std::vector<double>& actual,
                                        long long y_star) {
  std::vector<double> hist(y_star + 1, 0.0);
  for (double a : actual) {
    const long long y = static_cast<long long>(a);
    if (y < 0 || y > y_star) {
      throw UsageError("kl_divergence: actual count outside [0, y_star]");
    }
    hist[y] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(actual.size());
  return hist;
}

double kl_from_histograms(const std::vector<double>& emp,
                          const std::vector<double>& model) {
  double kl = 0.0;
  for (std::size_t y = 0; y < emp.size(); ++y) {
    if (emp[y] == 0.0) continue;  // 0 log(0/x) == 0
    kl += emp[y] * std::log(emp[y] / std::max(model[y], kModelFloor));
  }
  return kl;
}

}  // namespace

double kl_divergence(const std::vector<double>& actual,
                     const std::function<double(std::size_t, long long)>& cell_prob,
                     long long y_star) {
  if (actual.empty()) throw UsageError("kl_divergence: empty input");
  const std::vector<double> emp = empirical_histogram(actual, y_star);
  std::vector<double> model(y_star + 1, 0.0);
  for (long long y = 0; y <= y_star; ++y) {
    double avg = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) avg += cell_prob(i, y);
    model[y] = avg / static_cast<double>(actual.size());
  }
  return kl_from_histograms(emp, model);
}

double kl_divergence_point(const std::vector<double>& actual,
                           const std::vector<double>& pred, long long y_star) {
  check_same_nonempty(pred.size(), actual.size(), "kl_divergence_point");
  const std::vector<double> emp = empirical_histogram(actual, y_star);
  std::vector<double> model(y_star + 1, 0.0);
  for (double p : pred) {
    const long long y = std::clamp<long long>(round_half_up(p), 0, y_star);
    model[y] += 1.0;
  }
  for (double& m : model) m /= static_cast<double>(pred.size());
  return kl_from_histograms(emp, model);
}

long long round_half_up(double v) {
  return static_cast<long long>(std::floor(v + 0.5));
}

DiscreteScores discrete_scores(const std::vector<double>& pred_mean,
                               const std::vector<double>& actual) {
  check_same_nonempty(pred_mean.size(), actual.size(), "discrete_scores");
  long long zero_cells = 0, zero_hits = 0;
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const bool actual_pos = actual[i] > 0.0;
    const bool pred_pos = round_half_up(pred_mean[i]) > 0;
    if (!actual_pos) {
      ++zero_cells;
      if (!pred_pos) ++zero_hits;
    }
    if (pred_pos && actual_pos) ++tp;
    if (pred_pos && !actual_pos) ++fp;
    if (!pred_pos && actual_pos) ++fn;
  }
  DiscreteScores scores;
  if (zero_cells > 0) {
    scores.true_zero_rate = zero_hits / static_cast<double>(zero_cells);
  }
  if (tp > 0) {
    const double precision = tp / static_cast<double>(tp + fp);
    const double recall = tp / static_cast<double>(tp + fn);
    scores.f1 = 2.0 * precision * recall / (precision + recall);
  }
  return scores;
}

}  // namespace stmgnn
