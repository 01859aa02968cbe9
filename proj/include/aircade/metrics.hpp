#pragma once

#include "aircade/tensor.hpp"

namespace aircade {

/// Evaluation metrics in raw (denormalized) units. Event metrics count
/// threshold exceedances pointwise: a hit needs both prediction and truth
/// above the threshold. Zero-denominator metrics report 0 with a flag set.
struct MetricsReport {
    double mae = 0.0;
    double rmse = 0.0;
    double mape_percent = 0.0;
    double csi_percent = 0.0;
    double pod_percent = 0.0;
    double far_percent = 0.0;
    double event_threshold = 75.0;
    int64_t sample_count = 0;
    int64_t hits = 0, misses = 0, false_alarms = 0;
    bool no_events = false;            // hits+misses(+false alarms) empty
    bool no_predicted_events = false;  // hits+false alarms empty
    bool no_mape_points = false;       // every truth value below 1 in magnitude
};

/// pred/truth share an arbitrary equal shape with samples on the first axis.
/// MAPE skips points with |truth| < 1.
MetricsReport compute_metrics(const Tensor& pred, const Tensor& truth, double threshold = 75.0);

}  // namespace aircade
