#include "stmgnn/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "stmgnn/errors.hpp"

namespace stmgnn {

DTensor3 historical_value(const DTensor3& window, int horizon) {
  if (window.dim1() < 1) throw UsageError("historical_value: empty window");
  DTensor3 pred(window.dim0(), horizon, window.dim2());
  const int last = window.dim1() - 1;
  for (int n = 0; n < window.dim0(); ++n)
    for (int q = 0; q < horizon; ++q)
      for (int c = 0; c < window.dim2(); ++c) pred(n, q, c) = window(n, last, c);
  return pred;
}

DTensor3 weekday_mean_value(const DTensor3& window, int horizon,
                            int window_start_weekday) {
  if (window.dim1() < 1) throw UsageError("weekday_mean_value: empty window");
  DTensor3 pred(window.dim0(), horizon, window.dim2());
  for (int q = 0; q < horizon; ++q) {
    const int target_weekday = (window_start_weekday + window.dim1() + q) % 7;
    for (int n = 0; n < window.dim0(); ++n)
      for (int c = 0; c < window.dim2(); ++c) {
        double sum = 0.0;
        int hits = 0;
        for (int t = 0; t < window.dim1(); ++t) {
          if ((window_start_weekday + t) % 7 == target_weekday) {
            sum += window(n, t, c);
            ++hits;
          }
        }
        // Fall back to persistence when the window is shorter than a week.
        pred(n, q, c) = hits > 0 ? sum / hits : window(n, window.dim1() - 1, c);
      }
  }
  return pred;
}

MetricsReport evaluate_point_model(const std::vector<double>& pred,
                                   const std::vector<double>& actual) {
  MetricsReport report;
  report.cells = static_cast<long long>(actual.size());
  report.mae = mae(pred, actual);
  long long y_star = 1;
  for (double a : actual) y_star = std::max(y_star, static_cast<long long>(a));
  report.kl_divergence = kl_divergence_point(actual, pred, y_star);
  const DiscreteScores ds = discrete_scores(pred, actual);
  report.true_zero_rate = ds.true_zero_rate;
  report.f1 = ds.f1;
  return report;
}

}  // namespace stmgnn
