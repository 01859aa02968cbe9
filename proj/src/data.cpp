#include "aircade/data.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "binary_io.hpp"

namespace aircade {

using io::Reader;
using io::Writer;

namespace {

constexpr char kMagic[4] = {'A', 'Q', 'D', 'S'};
constexpr uint32_t kVersion = 1;

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

}  // namespace

int64_t AirSeries::slots_per_day() const {
    if (step_seconds <= 0) throw ConfigError("step_seconds must be positive");
    if (86400 % step_seconds != 0) {
        throw ConfigError("step_seconds " + std::to_string(step_seconds) +
                          " does not divide a day");
    }
    return 86400 / step_seconds;
}

int64_t AirSeries::first_slot() const {
    return floor_mod(floor_div(start_epoch_seconds, step_seconds), slots_per_day());
}

void AirSeries::validate() const {
    if (aqi.rank() != 3 || met.rank() != 3) throw ShapeError("series tensors must be rank 3");
    if (aqi.shape[0] != met.shape[0] || aqi.shape[1] != met.shape[1]) {
        throw ShapeError("aqi and met disagree on steps/stations: " + shape_str(aqi.shape) +
                         " vs " + shape_str(met.shape));
    }
    if (station_ids.size() != static_cast<size_t>(stations())) {
        throw ShapeError("station id count does not match station dimension");
    }
    if (step_seconds <= 0) throw ConfigError("step_seconds must be positive");
}

void write_series(const std::string& path, const AirSeries& series) {
    series.validate();
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u64(static_cast<uint64_t>(series.total_steps()));
    w.u64(static_cast<uint64_t>(series.stations()));
    w.u64(static_cast<uint64_t>(series.aqi_channels()));
    w.u64(static_cast<uint64_t>(series.met_channels()));
    w.u64(static_cast<uint64_t>(series.step_seconds));
    w.i64(series.start_epoch_seconds);
    for (const std::string& id : series.station_ids) {
        w.u32(static_cast<uint32_t>(id.size()));
        w.bytes(id.data(), id.size());
    }
    w.f64_block(series.aqi.data);
    w.f64_block(series.met.data);
    if (!w.out) throw DataFormatError(DataFormatError::Kind::io, "write failed: " + path);
}

AirSeries load_series(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw DataFormatError(DataFormatError::Kind::bad_magic,
                              path + ": not an AQDS file (bad magic)");
    }
    uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw DataFormatError(DataFormatError::Kind::bad_version,
                              path + ": unsupported AQDS version " + std::to_string(version));
    }
    int64_t steps = static_cast<int64_t>(r.u64("total_steps"));
    int64_t stations = static_cast<int64_t>(r.u64("stations"));
    int64_t c = static_cast<int64_t>(r.u64("aqi_channels"));
    int64_t f = static_cast<int64_t>(r.u64("met_channels"));
    AirSeries series;
    series.step_seconds = static_cast<int64_t>(r.u64("step_seconds"));
    series.start_epoch_seconds = r.i64("start_epoch_seconds");
    if (steps < 1 || stations < 1 || c < 1 || f < 1) {
        throw DataFormatError(DataFormatError::Kind::io, path + ": degenerate header dimensions");
    }
    series.station_ids.resize(static_cast<size_t>(stations));
    for (auto& id : series.station_ids) {
        uint32_t len = r.u32("station id length");
        id.resize(len);
        if (len) r.bytes(id.data(), len, "station id");
    }
    series.aqi = Tensor({steps, stations, c});
    series.met = Tensor({steps, stations, f});
    r.bytes(series.aqi.data.data(), series.aqi.data.size() * 8, "aqi block");
    r.bytes(series.met.data.data(), series.met.data.size() * 8, "met block");
    if (!series.aqi.all_finite() || !series.met.all_finite()) {
        throw DataFormatError(DataFormatError::Kind::non_finite,
                              path + ": payload contains non-finite values");
    }
    return series;
}

AirSeries generate_synthetic(const SyntheticSpec& spec) {
    if (spec.stations < 1 || spec.total_steps < 1 || spec.aqi_channels < 1 ||
        spec.met_channels < 1) {
        throw ConfigError("synthetic dimensions must be >= 1");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

    AirSeries s;
    s.step_seconds = spec.step_seconds;
    s.start_epoch_seconds = spec.start_epoch_seconds;
    s.met = Tensor({spec.total_steps, spec.stations, spec.met_channels});
    s.aqi = Tensor({spec.total_steps, spec.stations, spec.aqi_channels});
    s.station_ids.reserve(static_cast<size_t>(spec.stations));
    for (int64_t n = 0; n < spec.stations; ++n) s.station_ids.push_back("st" + std::to_string(n));

    // met channels: near-unit-variance smooth walks
    for (int64_t n = 0; n < spec.stations; ++n) {
        for (int64_t ch = 0; ch < spec.met_channels; ++ch) {
            double v = gauss(rng);
            for (int64_t t = 0; t < spec.total_steps; ++t) {
                s.met.at({t, n, ch}) = v;
                v = 0.95 * v + 0.31 * gauss(rng);
            }
        }
    }

    int64_t slots = s.slots_per_day();
    int64_t slot0 = s.first_slot();
    for (int64_t k = 0; k < spec.aqi_channels; ++k) {
        int64_t drive_a = k % spec.met_channels;
        int64_t drive_b = (k + 1) % spec.met_channels;
        double field_phase = phase(rng);
        std::vector<double> daily_phase(static_cast<size_t>(spec.stations));
        for (auto& p : daily_phase) p = phase(rng);
        for (int64_t n = 0; n < spec.stations; ++n) {
            double field = 12.0 * std::sin(2.0 * M_PI * static_cast<double>(n) /
                                               static_cast<double>(spec.stations) +
                                           field_phase);
            for (int64_t t = 0; t < spec.total_steps; ++t) {
                double slot_frac =
                    static_cast<double>(floor_mod(slot0 + t, slots)) / static_cast<double>(slots);
                double value = 60.0 +
                               25.0 * std::sin(2.0 * M_PI * slot_frac + daily_phase[static_cast<size_t>(n)]) +
                               field + 18.0 * s.met.at({t, n, drive_a}) +
                               9.0 * s.met.at({t, n, drive_b}) + 3.0 * gauss(rng);
                s.aqi.at({t, n, k}) = value;
            }
        }
    }
    return s;
}

namespace {

// population mean/std per trailing channel over the leading prefix
void channel_stats(const Tensor& x, int64_t prefix_steps, Tensor& mean, Tensor& stdev,
                   bool& zero_var) {
    int64_t channels = x.shape[2];
    int64_t per_step = x.shape[1] * channels;
    mean = Tensor({channels});
    stdev = Tensor({channels});
    int64_t count = prefix_steps * x.shape[1];
    for (int64_t t = 0; t < prefix_steps; ++t)
        for (int64_t n = 0; n < x.shape[1]; ++n)
            for (int64_t ch = 0; ch < channels; ++ch)
                mean.data[static_cast<size_t>(ch)] += x.data[static_cast<size_t>(t * per_step + n * channels + ch)];
    for (int64_t ch = 0; ch < channels; ++ch) mean.data[static_cast<size_t>(ch)] /= static_cast<double>(count);
    for (int64_t t = 0; t < prefix_steps; ++t)
        for (int64_t n = 0; n < x.shape[1]; ++n)
            for (int64_t ch = 0; ch < channels; ++ch) {
                double d = x.data[static_cast<size_t>(t * per_step + n * channels + ch)] -
                           mean.data[static_cast<size_t>(ch)];
                stdev.data[static_cast<size_t>(ch)] += d * d;
            }
    for (int64_t ch = 0; ch < channels; ++ch) {
        double v = std::sqrt(stdev.data[static_cast<size_t>(ch)] / static_cast<double>(count));
        if (v <= 0.0) {
            v = 1.0;  // constant channel: pass through centered values
            zero_var = true;
        }
        stdev.data[static_cast<size_t>(ch)] = v;
    }
}

}  // namespace

NormStats fit_normalizer(const AirSeries& series, double train_fraction) {
    if (train_fraction <= 0.0 || train_fraction > 1.0) {
        throw ConfigError("train_fraction must be in (0, 1]");
    }
    int64_t prefix = std::max<int64_t>(1, static_cast<int64_t>(
                                              std::floor(static_cast<double>(series.total_steps()) *
                                                         train_fraction)));
    NormStats stats;
    channel_stats(series.aqi, prefix, stats.aqi_mean, stats.aqi_std, stats.had_zero_variance);
    channel_stats(series.met, prefix, stats.met_mean, stats.met_std, stats.had_zero_variance);
    return stats;
}

Tensor normalize_channels(const Tensor& x, const Tensor& mean, const Tensor& stdev) {
    int64_t channels = x.shape.back();
    if (mean.numel() != channels || stdev.numel() != channels) {
        throw ShapeError("normalize: stats width does not match channels");
    }
    Tensor out = x;
    int64_t rows = x.numel() / channels;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t ch = 0; ch < channels; ++ch) {
            size_t i = static_cast<size_t>(r * channels + ch);
            out.data[i] = (out.data[i] - mean.data[static_cast<size_t>(ch)]) / stdev.data[static_cast<size_t>(ch)];
        }
    return out;
}

Tensor denormalize_channels(const Tensor& x, const Tensor& mean, const Tensor& stdev) {
    int64_t channels = x.shape.back();
    if (mean.numel() != channels || stdev.numel() != channels) {
        throw ShapeError("denormalize: stats width does not match channels");
    }
    Tensor out = x;
    int64_t rows = x.numel() / channels;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t ch = 0; ch < channels; ++ch) {
            size_t i = static_cast<size_t>(r * channels + ch);
            out.data[i] = out.data[i] * stdev.data[static_cast<size_t>(ch)] + mean.data[static_cast<size_t>(ch)];
        }
    return out;
}

AirSeries normalize_series(const AirSeries& series, const NormStats& stats) {
    AirSeries out = series;
    out.aqi = normalize_channels(series.aqi, stats.aqi_mean, stats.aqi_std);
    out.met = normalize_channels(series.met, stats.met_mean, stats.met_std);
    return out;
}

std::vector<WindowSample> make_windows(const AirSeries& series, int64_t input_window,
                                       int64_t pred_window, int64_t stride) {
    series.validate();
    if (stride < 1) throw ConfigError("stride must be >= 1");
    int64_t span = input_window + pred_window;
    if (series.total_steps() < span) {
        throw ConfigError("series too short: " + std::to_string(series.total_steps()) +
                          " steps < window span " + std::to_string(span));
    }
    int64_t slots = series.slots_per_day();
    int64_t slot0 = series.first_slot();
    int64_t stations = series.stations();
    int64_t c = series.aqi_channels(), f = series.met_channels();

    auto slice = [&](const Tensor& src, int64_t t0, int64_t len, int64_t ch) {
        Tensor out({len, stations, ch});
        std::memcpy(out.data.data(), src.data.data() + t0 * stations * ch,
                    static_cast<size_t>(len * stations * ch) * sizeof(double));
        return out;
    };

    std::vector<WindowSample> windows;
    for (int64_t t0 = 0; t0 + span <= series.total_steps(); t0 += stride) {
        WindowSample w;
        w.aqi_past = slice(series.aqi, t0, input_window, c);
        w.met_past = slice(series.met, t0, input_window, f);
        w.met_future = slice(series.met, t0 + input_window, pred_window, f);
        w.aqi_future = slice(series.aqi, t0 + input_window, pred_window, c);
        w.start_slot = floor_mod(slot0 + t0, slots);
        w.start_index = t0;
        windows.push_back(std::move(w));
    }
    return windows;
}

WindowSample inject_future_noise(const WindowSample& sample, double sigma, uint64_t seed) {
    if (sigma < 0) throw ConfigError("noise sigma must be >= 0");
    WindowSample out = sample;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& v : out.met_future.data) v += gauss(rng);
    return out;
}

SplitWindows split_windows(const std::vector<WindowSample>& windows, int64_t total_steps,
                           int64_t input_window, int64_t pred_window, double train_fraction,
                           double val_fraction) {
    if (train_fraction <= 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0) {
        throw ConfigError("invalid split fractions");
    }
    int64_t train_end = static_cast<int64_t>(std::floor(static_cast<double>(total_steps) * train_fraction));
    int64_t val_end = static_cast<int64_t>(
        std::floor(static_cast<double>(total_steps) * (train_fraction + val_fraction)));
    int64_t span = input_window + pred_window;
    SplitWindows out;
    for (const WindowSample& w : windows) {
        int64_t end = w.start_index + span;
        if (end <= train_end) {
            out.train.push_back(w);
        } else if (w.start_index >= train_end && end <= val_end) {
            out.val.push_back(w);
        } else if (w.start_index >= val_end && end <= total_steps) {
            out.test.push_back(w);
        }
        // windows straddling a boundary are dropped to keep splits leak-free
    }
    return out;
}

PreparedData prepare_dataset(const AirSeries& raw, int64_t input_window, int64_t pred_window,
                             int64_t stride, double train_fraction, double val_fraction,
                             double noise_sigma, uint64_t seed) {
    PreparedData out;
    out.stats = fit_normalizer(raw, train_fraction);
    AirSeries normalized = normalize_series(raw, out.stats);
    std::vector<WindowSample> windows = make_windows(normalized, input_window, pred_window, stride);
    out.splits = split_windows(windows, raw.total_steps(), input_window, pred_window,
                               train_fraction, val_fraction);
    // evaluation noise is fixed per sample; training noise is drawn per epoch
    // by the train loop
    for (size_t i = 0; i < out.splits.val.size(); ++i) {
        out.splits.val[i] =
            inject_future_noise(out.splits.val[i], noise_sigma, seed ^ (0x5aull << 32) ^ i);
    }
    for (size_t i = 0; i < out.splits.test.size(); ++i) {
        out.splits.test[i] =
            inject_future_noise(out.splits.test[i], noise_sigma, seed ^ (0x7eull << 32) ^ i);
    }
    return out;
}

}  // namespace aircade
