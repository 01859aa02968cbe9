#pragma once

#include <optional>
#include <span>

#include "aircade/data.hpp"
#include "aircade/model.hpp"

namespace aircade {

/// K fixed intervention environments, each a (temporal, spatial) mask pair.
/// Sampled once at construction; entries are 1 with probability keep_prob and
/// every row keeps at least one 1 (all-zero rows get their diagonal set).
struct MaskBank {
    int64_t env_count = 0;
    double keep_prob = 1.0;
    uint64_t seed = 0;
    std::vector<MaskPair> environments;

    static MaskBank create(int64_t env_count, int64_t pred_window, int64_t stations,
                           double keep_prob, uint64_t seed);
};

/// MAE of one sample, on normalized values, as a differentiable scalar.
Var sample_mae(ComputeTape& tape, const AirCadeModel& model, const WindowSample& sample,
               const MaskPair* masks);

/// Forward the batch under environment env_index; returns the per-sample
/// MAE losses as a plain [B] tensor.
Tensor per_sample_losses(const AirCadeModel& model, std::span<const WindowSample> batch,
                         int64_t env_index, const MaskBank& bank);

/// argmax_k of the population variance of per-sample losses; ties take the
/// smallest index.
int64_t select_environment(std::span<const Tensor> losses_per_env);

double population_variance(const Tensor& values);

struct InterventionDiagnostics {
    int64_t selected_env = -1;      // -1 when running unmasked
    bool degenerate_variance = false;  // batch of one: variance term forced to 0
};

/// The variance-regularized objective Var{losses} + beta * Mean{losses}
/// under the loss-variance-maximizing environment. Environment selection is
/// a hard choice: gradients flow only through the selected environment.
/// A null bank runs the unmasked path with the same objective shape.
/// forced_env skips selection (used to freeze the choice in gradient checks).
Var intervention_objective(ComputeTape& tape, const AirCadeModel& model,
                           std::span<const WindowSample> batch, const MaskBank* bank, double beta,
                           std::optional<int64_t> forced_env = {},
                           InterventionDiagnostics* diag = nullptr);

/// Value-only convenience wrapper.
double intervention_loss_value(const AirCadeModel& model, std::span<const WindowSample> batch,
                               const MaskBank* bank, double beta,
                               std::optional<int64_t> forced_env = {},
                               InterventionDiagnostics* diag = nullptr);

}  // namespace aircade
