#include "aircade/metrics.hpp"

#include <cmath>

namespace aircade {

MetricsReport compute_metrics(const Tensor& pred, const Tensor& truth, double threshold) {
    if (pred.shape != truth.shape) {
        throw ShapeError("compute_metrics: prediction shape " + shape_str(pred.shape) +
                         " != truth shape " + shape_str(truth.shape));
    }
    if (threshold <= 0) throw ConfigError("event threshold must be positive");

    MetricsReport r;
    r.event_threshold = threshold;
    r.sample_count = pred.shape[0];

    double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
    int64_t ape_count = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        double p = pred.data[i], t = truth.data[i];
        double d = p - t;
        abs_sum += std::abs(d);
        sq_sum += d * d;
        if (std::abs(t) >= 1.0) {
            ape_sum += std::abs(d) / std::abs(t);
            ++ape_count;
        }
        bool pred_event = p > threshold, truth_event = t > threshold;
        if (pred_event && truth_event) ++r.hits;
        else if (truth_event) ++r.misses;
        else if (pred_event) ++r.false_alarms;
    }
    double n = static_cast<double>(pred.data.size());
    r.mae = abs_sum / n;
    r.rmse = std::sqrt(sq_sum / n);
    if (ape_count > 0) {
        r.mape_percent = 100.0 * ape_sum / static_cast<double>(ape_count);
    } else {
        r.no_mape_points = true;
    }

    int64_t csi_den = r.hits + r.misses + r.false_alarms;
    int64_t pod_den = r.hits + r.misses;
    int64_t far_den = r.hits + r.false_alarms;
    if (csi_den > 0) r.csi_percent = 100.0 * static_cast<double>(r.hits) / static_cast<double>(csi_den);
    if (pod_den > 0) r.pod_percent = 100.0 * static_cast<double>(r.hits) / static_cast<double>(pod_den);
    else r.no_events = true;
    if (far_den > 0) r.far_percent = 100.0 * static_cast<double>(r.false_alarms) / static_cast<double>(far_den);
    else r.no_predicted_events = true;
    return r;
}

}  // namespace aircade
