#include "aircade/intervention.hpp"

#include <random>

namespace aircade {

namespace {

AttentionMask sample_mask(int64_t size, double keep_prob, std::mt19937_64& rng) {
    Tensor values({size, size});
    std::bernoulli_distribution keep(keep_prob);
    for (double& v : values.data) v = keep(rng) ? 1.0 : 0.0;
    // repair all-zero rows so no query is fully severed
    for (int64_t r = 0; r < size; ++r) {
        double sum = 0.0;
        for (int64_t c = 0; c < size; ++c) sum += values.data[static_cast<size_t>(r * size + c)];
        if (sum == 0.0) values.data[static_cast<size_t>(r * size + r)] = 1.0;
    }
    return AttentionMask::from_tensor(std::move(values));
}

}  // namespace

MaskBank MaskBank::create(int64_t env_count, int64_t pred_window, int64_t stations,
                          double keep_prob, uint64_t seed) {
    if (env_count < 1) throw ConfigError("mask bank needs at least one environment");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
        throw ConfigError("keep_prob must be in (0, 1], got " + std::to_string(keep_prob));
    }
    MaskBank bank;
    bank.env_count = env_count;
    bank.keep_prob = keep_prob;
    bank.seed = seed;
    std::mt19937_64 rng(seed);
    for (int64_t k = 0; k < env_count; ++k) {
        MaskPair pair;
        if (keep_prob < 1.0) {
            pair.temporal = sample_mask(pred_window, keep_prob, rng);
            pair.spatial = sample_mask(stations, keep_prob, rng);
        }
        bank.environments.push_back(std::move(pair));
    }
    return bank;
}

Var sample_mae(ComputeTape& tape, const AirCadeModel& model, const WindowSample& sample,
               const MaskPair* masks) {
    Var pred = model.forward(tape, sample.aqi_past, sample.met_past, sample.met_future,
                             sample.start_slot, masks);
    Var err = tape.abs_fn(tape.sub(pred, tape.constant(sample.aqi_future)));
    return tape.mean_all(err);
}

Tensor per_sample_losses(const AirCadeModel& model, std::span<const WindowSample> batch,
                         int64_t env_index, const MaskBank& bank) {
    if (env_index < 0 || env_index >= bank.env_count) {
        throw ConfigError("environment index " + std::to_string(env_index) + " out of range [0, " +
                          std::to_string(bank.env_count) + ")");
    }
    Tensor losses({std::max<int64_t>(1, static_cast<int64_t>(batch.size()))});
    ComputeTape tape;
    for (size_t i = 0; i < batch.size(); ++i) {
        Var l = sample_mae(tape, model, batch[i], &bank.environments[static_cast<size_t>(env_index)]);
        losses.data[i] = tape.val(l).data[0];
    }
    if (batch.empty()) throw ConfigError("per_sample_losses: empty batch");
    return losses;
}

double population_variance(const Tensor& values) {
    int64_t n = values.numel();
    double mean = 0.0;
    for (double v : values.data) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values.data) var += (v - mean) * (v - mean);
    return var / static_cast<double>(n);
}

int64_t select_environment(std::span<const Tensor> losses_per_env) {
    if (losses_per_env.empty()) throw ConfigError("select_environment: no environments");
    int64_t best = 0;
    double best_var = population_variance(losses_per_env[0]);
    for (size_t k = 1; k < losses_per_env.size(); ++k) {
        double v = population_variance(losses_per_env[k]);
        if (v > best_var) {
            best_var = v;
            best = static_cast<int64_t>(k);
        }
    }
    return best;
}

Var intervention_objective(ComputeTape& tape, const AirCadeModel& model,
                           std::span<const WindowSample> batch, const MaskBank* bank, double beta,
                           std::optional<int64_t> forced_env, InterventionDiagnostics* diag) {
    if (batch.empty()) throw ConfigError("intervention objective needs a non-empty batch");
    if (beta < 0) throw ConfigError("beta must be >= 0");

    InterventionDiagnostics local;
    std::vector<Var> selected_losses;

    if (bank == nullptr) {
        selected_losses.reserve(batch.size());
        for (const WindowSample& s : batch) {
            selected_losses.push_back(sample_mae(tape, model, s, nullptr));
        }
        local.selected_env = -1;
    } else if (forced_env) {
        // frozen choice: only the selected environment affects the objective,
        // so the other banks need no forward passes
        int64_t chosen = *forced_env;
        if (chosen < 0 || chosen >= bank->env_count) {
            throw ConfigError("forced environment index out of range");
        }
        for (const WindowSample& s : batch) {
            selected_losses.push_back(
                sample_mae(tape, model, s, &bank->environments[static_cast<size_t>(chosen)]));
        }
        local.selected_env = chosen;
    } else {
        // evaluate every environment on the shared tape; gradients later flow
        // only through the chosen one because backward skips untouched nodes
        std::vector<std::vector<Var>> env_losses(static_cast<size_t>(bank->env_count));
        std::vector<Tensor> env_values;
        env_values.reserve(static_cast<size_t>(bank->env_count));
        for (int64_t k = 0; k < bank->env_count; ++k) {
            std::vector<Var>& vars = env_losses[static_cast<size_t>(k)];
            Tensor values({static_cast<int64_t>(batch.size())});
            for (size_t i = 0; i < batch.size(); ++i) {
                Var l = sample_mae(tape, model, batch[i], &bank->environments[static_cast<size_t>(k)]);
                vars.push_back(l);
                values.data[i] = tape.val(l).data[0];
            }
            env_values.push_back(std::move(values));
        }
        int64_t chosen = select_environment(env_values);
        selected_losses = env_losses[static_cast<size_t>(chosen)];
        local.selected_env = chosen;
    }

    Var stacked = tape.stack_scalars(selected_losses);
    Var mean = tape.mean_all(stacked);
    Var objective;
    if (batch.size() >= 2) {
        Var centered = tape.sub(stacked, mean);
        Var variance = tape.mean_all(tape.hadamard(centered, centered));
        objective = tape.add(variance, tape.scale(mean, beta));
    } else {
        local.degenerate_variance = true;  // singleton batch: Var{.} == 0
        objective = tape.scale(mean, beta);
    }
    if (diag) *diag = local;
    return objective;
}

double intervention_loss_value(const AirCadeModel& model, std::span<const WindowSample> batch,
                               const MaskBank* bank, double beta,
                               std::optional<int64_t> forced_env, InterventionDiagnostics* diag) {
    ComputeTape tape;
    Var obj = intervention_objective(tape, model, batch, bank, beta, forced_env, diag);
    return tape.val(obj).data[0];
}

}  // namespace aircade
