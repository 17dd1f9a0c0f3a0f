#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stmgnn/count_distributions.hpp"

namespace stmgnn {

/// The six-score evaluation record. Interval scores are absent for point
/// models; the true-zero rate is absent when no zero cells exist.
struct MetricsReport {
  double mae = 0.0;
  double kl_divergence = 0.0;
  std::optional<double> picp;
  std::optional<double> mpiw;
  double f1 = 0.0;
  std::optional<double> true_zero_rate;
  long long cells = 0;
  /// Split boundaries, seed, config hash and the like; emitted as comment
  /// lines, never as metric keys.
  std::map<std::string, std::string> metadata;
};

/// Mean absolute error; throws UsageError on empty input.
double mae(const std::vector<double>& pred_mean, const std::vector<double>& actual);

/// Elementwise head quantiles at the interval endpoints; each entry of
/// `cell_params` is one cell's parameter vector in head order.
std::pair<std::vector<double>, std::vector<double>> interval(
    const std::vector<std::vector<double>>& cell_params, HeadKind head,
    double lo = 0.10, double hi = 0.90);

/// Fraction of cells with lower <= actual <= upper (inclusive endpoints).
double picp(const std::vector<double>& lower, const std::vector<double>& upper,
            const std::vector<double>& actual);

/// Mean interval width.
double mpiw(const std::vector<double>& lower, const std::vector<double>& upper);

/// Pooled-histogram KL divergence on the support {0..y_star}: empirical
/// frequencies of the actual counts against the averaged model PMF, with
/// 0 log 0 == 0 and model probabilities floored at 1e-12. `cell_prob(i, y)`
/// returns the model's probability of count y in cell i.
double kl_divergence(const std::vector<double>& actual,
                     const std::function<double(std::size_t, long long)>& cell_prob,
                     long long y_star);

/// Point-model variant: the model histogram is the frequency histogram of
/// the rounded predictions.
double kl_divergence_point(const std::vector<double>& actual,
                           const std::vector<double>& pred, long long y_star);

/// Half-up rounding used by the discrete scores.
long long round_half_up(double v);

struct DiscreteScores {
  std::optional<double> true_zero_rate;  // absent when no actual zeros exist
  double f1 = 0.0;
};

/// Rounds predictions half-up; true-zero rate is recall on zero cells, F1
/// scores the binary event "rounded > 0" against "actual > 0".
DiscreteScores discrete_scores(const std::vector<double>& pred_mean,
                               const std::vector<double>& actual);

}  // namespace stmgnn
