#pragma once

#include <optional>
#include <random>
#include <vector>

#include "aircade/model_config.hpp"
#include "aircade/nn.hpp"
#include "aircade/tape.hpp"

namespace aircade {

/// Time-of-day slot indices for a window: [start, start+1, ...] modulo the
/// daily sampling frequency.
std::vector<int64_t> time_slot_index(int64_t start_slot, int64_t horizon, int64_t slots_per_day);

/// The six learnable prompt tables. Past and future horizons carry separate
/// sets; the past tables are shared by the AQI and past-weather streams.
struct PromptEmbeddings {
    Parameter time_past;        // [slots_per_day, prompt_width]
    Parameter time_future;      // [slots_per_day, prompt_width]
    Parameter station_past;     // [stations, prompt_width]
    Parameter station_future;   // [stations, prompt_width]
    Parameter position_past;    // [input_window, stations, state_width]
    Parameter position_future;  // [pred_window, stations, state_width]

    PromptEmbeddings() = default;
    PromptEmbeddings(const ModelConfig& cfg, std::mt19937_64& rng);
    void collect(std::vector<Parameter*>& out);
};

/// Per-stream feature encoders mapping raw channels to state_width.
/// Encoders for streams removed by ablations are absent.
struct InputEncoders {
    std::optional<TwoLayerMlp> aqi;         // c -> state_width
    std::optional<TwoLayerMlp> met_past;    // f -> state_width, absent under no_cade
    std::optional<TwoLayerMlp> met_future;  // f -> state_width, absent under no_es

    InputEncoders() = default;
    InputEncoders(const ModelConfig& cfg, std::mt19937_64& rng);
    void collect(std::vector<Parameter*>& out);
};

enum class Horizon { past, future };

/// Encodes one raw stream and concatenates its prompt blocks:
/// [encoder(x) + position | time-of-day rows | station rows].
/// With embeddings absent (prompt ablation) the prompt block is zeros, so
/// the fused width stays state_width + 2 * prompt_width.
Var fuse_stream(ComputeTape& tape, const TwoLayerMlp& encoder, const PromptEmbeddings* emb,
                Horizon horizon, const Tensor& raw, int64_t start_slot, const ModelConfig& cfg);

struct FusedStreams {
    Var aqi;         // [T, N, d_m]
    Var met_past;    // [T, N, d_m]
    Var met_future;  // [T_P, N, d_m]
};

/// Builds all three fused representations. Future time-of-day slots continue
/// the calendar: start_slot + input_window onward, modulo slots_per_day.
FusedStreams fuse_inputs(ComputeTape& tape, const PromptEmbeddings* emb, const InputEncoders& enc,
                         const Tensor& aqi_window, const Tensor& met_past_window,
                         const Tensor& met_future_window, int64_t start_slot,
                         const ModelConfig& cfg);

struct Projection2D {
    Tensor coords;           // [n, 2]
    bool degenerate = false; // all rows identical; coords are zeros
};

/// PCA onto the top-2 eigenvectors of the row covariance. Deterministic sign
/// convention: the largest-magnitude coordinate of each eigenvector is made
/// positive.
Projection2D project_embeddings_2d(const Tensor& table);

}  // namespace aircade
