#include "aircade/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "aircade/optimizer.hpp"

namespace aircade {

void TrainConfig::validate() const {
    if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (beta < 0) throw ConfigError("beta must be >= 0");
    if (env_count < 1) throw ConfigError("env_count must be >= 1");
    if (!(keep_prob > 0 && keep_prob <= 1)) throw ConfigError("keep_prob must be in (0, 1]");
    if (noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xbf58476d1ce4e5b9ull);
    x ^= x >> 30;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

std::vector<Tensor> snapshot_values(std::span<Parameter* const> params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const Parameter* p : params) out.push_back(p->value);
    return out;
}

void restore_values(std::span<Parameter* const> params, const std::vector<Tensor>& snap) {
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace

double split_mae_raw(const AirCadeModel& model, std::span<const WindowSample> samples,
                     const NormStats& stats) {
    double abs_sum = 0.0;
    int64_t count = 0;
    for (const WindowSample& s : samples) {
        Tensor pred = model.predict(s.aqi_past, s.met_past, s.met_future, s.start_slot);
        Tensor pred_raw = denormalize_channels(pred, stats.aqi_mean, stats.aqi_std);
        Tensor truth_raw = denormalize_channels(s.aqi_future, stats.aqi_mean, stats.aqi_std);
        for (size_t i = 0; i < pred_raw.data.size(); ++i) {
            abs_sum += std::abs(pred_raw.data[i] - truth_raw.data[i]);
        }
        count += pred_raw.numel();
    }
    if (count == 0) throw ConfigError("split_mae_raw: no samples");
    return abs_sum / static_cast<double>(count);
}

MetricsReport evaluate_model(const AirCadeModel& model, std::span<const WindowSample> samples,
                             const NormStats& stats, double threshold) {
    if (samples.empty()) throw ConfigError("evaluate: no samples");
    const ModelConfig& cfg = model.config;
    Shape stacked{static_cast<int64_t>(samples.size()), cfg.pred_window, cfg.stations,
                  cfg.aqi_channels};
    Tensor pred(stacked), truth(stacked);
    int64_t per = cfg.pred_window * cfg.stations * cfg.aqi_channels;
    for (size_t i = 0; i < samples.size(); ++i) {
        const WindowSample& s = samples[i];
        Tensor p = model.predict(s.aqi_past, s.met_past, s.met_future, s.start_slot);
        Tensor p_raw = denormalize_channels(p, stats.aqi_mean, stats.aqi_std);
        Tensor t_raw = denormalize_channels(s.aqi_future, stats.aqi_mean, stats.aqi_std);
        std::copy(p_raw.data.begin(), p_raw.data.end(),
                  pred.data.begin() + static_cast<int64_t>(i) * per);
        std::copy(t_raw.data.begin(), t_raw.data.end(),
                  truth.data.begin() + static_cast<int64_t>(i) * per);
    }
    return compute_metrics(pred, truth, threshold);
}

TrainResult train_model(AirCadeModel& model, const SplitWindows& splits, const NormStats& stats,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (splits.train.empty()) throw ConfigError("training split is empty");
    const std::vector<WindowSample>& val_set = splits.val.empty() ? splits.train : splits.val;

    std::optional<MaskBank> bank;
    if (!cfg.no_intv) {
        bank = MaskBank::create(cfg.env_count, model.config.pred_window, model.config.stations,
                                cfg.keep_prob, cfg.seed);
    }

    std::vector<Parameter*> params = model.parameters();
    RmspropOptimizer opt(params, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_eps);

    TrainResult result;
    result.best_val_mae = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_snapshot = snapshot_values(params);

    std::vector<size_t> order(splits.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0, 17));

    int64_t global_step = 0;
    int64_t epochs_since_best = 0;
    for (int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        std::vector<TrainLogRow> epoch_rows;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<WindowSample> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                // fresh future noise for training samples every epoch
                batch.push_back(inject_future_noise(
                    splits.train[order[i]], cfg.noise_sigma,
                    mix_seed(cfg.seed, static_cast<uint64_t>(epoch) + 1, order[i])));
            }

            model.zero_grads();
            InterventionDiagnostics diag;
            double loss_value;
            try {
                ComputeTape tape;
                Var objective = intervention_objective(tape, model, batch,
                                                       bank ? &*bank : nullptr, cfg.beta, {}, &diag);
                loss_value = tape.val(objective).data[0];
                if (!std::isfinite(loss_value)) {
                    throw NumericError("non-finite loss " + std::to_string(loss_value));
                }
                tape.backward(objective);
            } catch (const NumericError& e) {
                throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(global_step) + ": " + e.what());
            }
            opt.step();

            TrainLogRow row;
            row.epoch = epoch;
            row.step = global_step++;
            row.env = diag.selected_env;
            row.train_loss = loss_value;
            epoch_rows.push_back(row);
        }

        double val_mae = split_mae_raw(model, val_set, stats);
        for (TrainLogRow& row : epoch_rows) row.val_mae = val_mae;
        result.log.insert(result.log.end(), epoch_rows.begin(), epoch_rows.end());

        if (val_mae < result.best_val_mae) {
            result.best_val_mae = val_mae;
            result.best_epoch = epoch;
            best_snapshot = snapshot_values(params);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best > cfg.early_stop_patience) break;
        }
    }

    restore_values(params, best_snapshot);
    result.steps_run = global_step;
    return result;
}

void write_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFormatError(DataFormatError::Kind::io, "cannot open for write: " + path);
    out << "epoch,step,env,train_loss,val_mae\n";
    char buf[64];
    for (const TrainLogRow& row : log) {
        out << row.epoch << ',' << row.step << ',' << row.env << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.train_loss);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.val_mae);
        out << buf << '\n';
    }
}

}  // namespace aircade
