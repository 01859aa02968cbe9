#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aircade/tape.hpp"

namespace aircade {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    int64_t worst_index = -1;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error() const;
    bool all_below(double tol) const { return max_rel_error() < tol; }
};

/// Compares analytic gradients against central finite differences.
///
/// `f(with_grad)` evaluates the scalar objective; when `with_grad` is true it
/// must additionally accumulate gradients into the given parameters (build a
/// tape, call backward). `f` must be deterministic: two identical evaluations
/// are compared up front and a mismatch is an error.
///
/// Relative error per coordinate: |a - n| / max(1e-8, |a| + |n|).
GradCheckReport grad_check(const std::function<double(bool)>& f,
                           std::span<Parameter* const> params, double eps = 1e-5);

}  // namespace aircade
