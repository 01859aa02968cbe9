#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aircade/tensor.hpp"

namespace aircade {

/// A continuous multi-station series: AQI readings plus meteorological
/// covariates on a fixed sampling grid.
struct AirSeries {
    Tensor aqi;  // [T_total, N, c]
    Tensor met;  // [T_total, N, f]
    int64_t step_seconds = 10800;
    int64_t start_epoch_seconds = 0;
    std::vector<std::string> station_ids;

    int64_t total_steps() const { return aqi.shape[0]; }
    int64_t stations() const { return aqi.shape[1]; }
    int64_t aqi_channels() const { return aqi.shape[2]; }
    int64_t met_channels() const { return met.shape[2]; }
    /// Daily sampling frequency; errors when a day is not a whole number of steps.
    int64_t slots_per_day() const;
    /// Time-of-day slot of step 0.
    int64_t first_slot() const;

    void validate() const;
};

// AQDS container (little-endian): magic 'AQDS', version u32, T_total/N/c/f
// u64, step_seconds u64, start_epoch_seconds i64, station ids as u32
// length-prefixed UTF-8, then the aqi and met blocks as raw f64 arrays in
// [time, station, channel] order.
void write_series(const std::string& path, const AirSeries& series);
AirSeries load_series(const std::string& path);

struct SyntheticSpec {
    int64_t stations = 5;
    int64_t total_steps = 256;
    int64_t aqi_channels = 1;
    int64_t met_channels = 3;
    uint64_t seed = 1;
    int64_t step_seconds = 10800;
    int64_t start_epoch_seconds = 0;
};

/// Seeded synthetic series: per-station daily sinusoid, a smooth spatial
/// offset, a linear response to two met channels, and small noise; met
/// channels evolve as smooth random walks.
AirSeries generate_synthetic(const SyntheticSpec& spec);

/// Per-channel z-score statistics fitted on the training prefix only.
struct NormStats {
    Tensor aqi_mean, aqi_std;  // [c]
    Tensor met_mean, met_std;  // [f]
    bool had_zero_variance = false;
};

NormStats fit_normalizer(const AirSeries& series, double train_fraction);
Tensor normalize_channels(const Tensor& x, const Tensor& mean, const Tensor& stdev);
Tensor denormalize_channels(const Tensor& x, const Tensor& mean, const Tensor& stdev);
AirSeries normalize_series(const AirSeries& series, const NormStats& stats);

/// One training instance sliced from a series (values in whatever units the
/// source series carries; the pipeline windows normalized series).
struct WindowSample {
    Tensor aqi_past;    // [T, N, c]
    Tensor met_past;    // [T, N, f]
    Tensor met_future;  // [T_P, N, f]
    Tensor aqi_future;  // [T_P, N, c]
    int64_t start_slot = 0;
    int64_t start_index = 0;  // offset of the window in the source series
};

std::vector<WindowSample> make_windows(const AirSeries& series, int64_t input_window,
                                       int64_t pred_window, int64_t stride);

/// Adds seeded Gaussian noise (stddev sigma) to the future meteorological
/// block only.
WindowSample inject_future_noise(const WindowSample& sample, double sigma, uint64_t seed);

struct SplitWindows {
    std::vector<WindowSample> train, val, test;
};

/// Chronological split: windows are assigned to the segment that fully
/// contains them, so no window straddles a boundary.
SplitWindows split_windows(const std::vector<WindowSample>& windows, int64_t total_steps,
                           int64_t input_window, int64_t pred_window, double train_fraction,
                           double val_fraction);

/// Everything evaluate/train needs: normalized split windows with fixed noise
/// already applied to the val/test future blocks.
struct PreparedData {
    SplitWindows splits;
    NormStats stats;
};

PreparedData prepare_dataset(const AirSeries& raw, int64_t input_window, int64_t pred_window,
                             int64_t stride, double train_fraction, double val_fraction,
                             double noise_sigma, uint64_t seed);

}  // namespace aircade
