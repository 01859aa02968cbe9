#pragma once

#include <span>
#include <string>
#include <vector>

#include "aircade/data.hpp"
#include "aircade/intervention.hpp"
#include "aircade/metrics.hpp"
#include "aircade/model.hpp"

namespace aircade {

struct TrainConfig {
    double learning_rate = 5e-4;
    double rmsprop_decay = 0.99;
    double rmsprop_eps = 1e-8;
    int64_t batch_size = 8;
    int64_t max_epochs = 30;
    int64_t early_stop_patience = 5;
    double beta = 1.0;       // trade-off between loss variance and mean
    int64_t env_count = 3;   // intervention environments
    double keep_prob = 0.9;
    double noise_sigma = 1.0;
    uint64_t seed = 1;
    bool no_intv = false;    // unmasked objective, no environment bank
    int64_t stride = 1;
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    double event_threshold = 75.0;

    void validate() const;
};

struct TrainLogRow {
    int64_t epoch = 0;
    int64_t step = 0;
    int64_t env = -1;          // selected environment, -1 when unmasked
    double train_loss = 0.0;
    double val_mae = 0.0;      // raw units, constant within an epoch
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    double best_val_mae = 0.0;
    int64_t best_epoch = -1;
    int64_t steps_run = 0;
};

/// Full training loop: shuffled batches, the intervention objective (or its
/// unmasked form), RMSprop updates, per-epoch validation MAE, early stopping
/// on validation, and restoration of the best-validation parameters.
/// Training-sample future noise is redrawn every epoch; a non-finite loss
/// aborts with epoch/step diagnostics.
TrainResult train_model(AirCadeModel& model, const SplitWindows& splits, const NormStats& stats,
                        const TrainConfig& cfg);

/// Mean absolute error over a window set, in raw units.
double split_mae_raw(const AirCadeModel& model, std::span<const WindowSample> samples,
                     const NormStats& stats);

/// Stacked denormalized predictions and truths -> metrics.
MetricsReport evaluate_model(const AirCadeModel& model, std::span<const WindowSample> samples,
                             const NormStats& stats, double threshold);

void write_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace aircade
