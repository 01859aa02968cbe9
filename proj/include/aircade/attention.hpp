#pragma once

#include <optional>
#include <random>
#include <vector>

#include "aircade/model_config.hpp"
#include "aircade/nn.hpp"
#include "aircade/tape.hpp"

namespace aircade {

enum class Axis { temporal, spatial };

/// Binary coefficient mask. The default-constructed mask is the distinguished
/// ALL_ONES value, which attention applies as a literal no-op so masked and
/// unmasked paths are bit-identical.
struct AttentionMask {
    std::optional<Tensor> values;  // [S, S], entries exactly 0 or 1

    static AttentionMask all_ones() { return {}; }
    static AttentionMask from_tensor(Tensor t);

    bool is_all_ones() const { return !values.has_value(); }
    int64_t size() const { return values ? values->shape[0] : -1; }
};

/// Which of the four attention paths participate. Dropped paths are
/// compensated by cycling the remaining ones so the output width is stable.
struct AttentionPaths {
    bool diffusion = true;    // dot-product paths
    bool adaptive = true;     // learned-table paths
    bool aggregating = true;  // transposed variants

    static AttentionPaths from_config(const ModelConfig& cfg) {
        return {!cfg.no_diff, !cfg.no_adp, !cfg.no_agg};
    }
};

struct DiffusionAttentionOptions {
    double scale = 1.0;
    AttentionPaths paths;
    bool renormalize = false;  // rescale masked rows to sum to 1
};

/// Post-softmax, pre-mask coefficients for tests and inspection. The
/// transposed paths are stored in their final orientation, i.e. columns of
/// coefficient 3/4 are the softmax-normalized vectors.
struct DiffusionAttentionCoefficients {
    std::vector<Tensor> path;  // up to 4 entries in path order 1..4
};

/// Four-path diffusion attention for one head. q/k/v are [B, S, d_h]; the
/// adaptive tables are [S, rank]. Output is [B, S, 4*d_h].
Var diffusion_attention(ComputeTape& tape, Var q, Var k, Var v, Var adaptive_query,
                        Var adaptive_key, const AttentionMask& mask,
                        const DiffusionAttentionOptions& opt,
                        DiffusionAttentionCoefficients* coeffs_out = nullptr);

/// One DK-MSA layer: per-head projections, diffusion attention, gated
/// (temporal) or linear (spatial) head transforms, and the final head merge.
struct DiffusionAttentionLayer {
    struct Head {
        std::optional<Parameter> query_proj;  // [d_m, d_h], absent without dot paths
        std::optional<Parameter> key_proj;
        Parameter value_proj;                   // [d_m, d_h]
        std::optional<Parameter> gate_value;    // temporal: tanh branch [d_m, d_m]
        std::optional<Parameter> gate_filter;   // temporal: sigmoid branch [d_m, d_m]
        std::optional<Parameter> out_proj;      // spatial: [d_m, d_m]
    };

    Axis axis = Axis::temporal;
    int64_t seq_len = 0;
    int64_t width = 0;       // d_m
    int64_t head_width = 0;  // d_m / 4
    double scale = 1.0;
    AttentionPaths paths;
    bool renormalize = false;

    std::vector<Head> head_params;
    std::optional<Parameter> adaptive_query;  // [S, rank], absent without adaptive paths
    std::optional<Parameter> adaptive_key;
    Parameter head_merge;  // [heads * d_m, d_m]

    DiffusionAttentionLayer() = default;
    DiffusionAttentionLayer(const std::string& name, Axis axis, int64_t seq_len,
                            const ModelConfig& cfg, std::mt19937_64& rng);

    /// DK-MSA forward; all inputs are [B, seq_len, width].
    Var forward(ComputeTape& tape, Var q_in, Var k_in, Var v_in, const AttentionMask& mask) const;

    void collect(std::vector<Parameter*>& out);
    int64_t parameter_count() const;
};

/// Folds a [T, N, d] tensor into attention batches: sequences run along time
/// for the temporal axis (B=N) and along stations for the spatial axis (B=T).
Var to_axis_view(ComputeTape& tape, Var x, Axis axis);
/// Inverse of to_axis_view; restores [T, N, d] bit-exactly.
Var from_axis_view(ComputeTape& tape, Var x, Axis axis);

}  // namespace aircade
