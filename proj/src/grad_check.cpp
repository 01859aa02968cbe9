#include "aircade/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace aircade {

double GradCheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
}

GradCheckReport grad_check(const std::function<double(bool)>& f,
                           std::span<Parameter* const> params, double eps) {
    GradCheckReport report;
    if (params.empty()) return report;

    double l0 = f(false);
    double l1 = f(false);
    if (l0 != l1) {
        throw NumericError("grad_check: function is not deterministic (" + std::to_string(l0) +
                           " vs " + std::to_string(l1) + ")");
    }

    for (Parameter* p : params) p->zero_grad();
    f(true);

    for (Parameter* p : params) {
        GradCheckEntry entry;
        entry.name = p->name;
        for (int64_t i = 0; i < p->numel(); ++i) {
            double saved = p->value.data[static_cast<size_t>(i)];
            p->value.data[static_cast<size_t>(i)] = saved + eps;
            double lp = f(false);
            p->value.data[static_cast<size_t>(i)] = saved - eps;
            double lm = f(false);
            p->value.data[static_cast<size_t>(i)] = saved;

            double numeric = (lp - lm) / (2.0 * eps);
            double analytic = p->grad.data[static_cast<size_t>(i)];
            double rel = std::abs(analytic - numeric) /
                         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            if (rel > entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.analytic_at_worst = analytic;
                entry.numeric_at_worst = numeric;
            }
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace aircade
