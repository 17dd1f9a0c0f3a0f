#pragma once

#include "stmgnn/metrics.hpp"
#include "stmgnn/tensor.hpp"

namespace stmgnn {

enum class BaselineKind { HistoricalValue, WeekdayMean };

/// Persistence: every future step repeats the last observed day.
DTensor3 historical_value(const DTensor3& window, int horizon);

/// Sensitivity variant: each future step predicts the mean of the window
/// days sharing its weekday. `window_start_weekday` is the weekday (0-6)
/// of the first window day.
DTensor3 weekday_mean_value(const DTensor3& window, int horizon,
                            int window_start_weekday);

/// Point-model evaluation: MAE, pooled-histogram KL of rounded predictions,
/// true-zero rate and F1. Interval scores stay absent.
MetricsReport evaluate_point_model(const std::vector<double>& pred,
                                   const std::vector<double>& actual);

}  // namespace stmgnn
