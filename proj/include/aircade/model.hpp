#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aircade/attention.hpp"
#include "aircade/embedding.hpp"

namespace aircade {

/// One intervention environment: a temporal and a spatial coefficient mask
/// applied to every DK-MSA of the matching axis.
struct MaskPair {
    AttentionMask temporal;
    AttentionMask spatial;

    static MaskPair all_ones() { return {}; }
    const AttentionMask& for_axis(Axis a) const {
        return a == Axis::temporal ? temporal : spatial;
    }
};

/// One transformer component: a Cade encoder sublayer driven by past
/// meteorology and a Cadi decoder sublayer driven by future meteorology.
/// Ablations may drop either sublayer.
struct CadeCadiComponent {
    Axis axis = Axis::temporal;

    std::optional<DiffusionAttentionLayer> cade_attn;
    std::optional<TwoLayerMlp> cade_mlp;
    std::optional<LayerNormParams> cade_norm_attn, cade_norm_mlp;

    std::optional<DiffusionAttentionLayer> cadi_attn;
    std::optional<TwoLayerMlp> cadi_mlp;
    std::optional<LayerNormParams> cadi_norm_attn, cadi_norm_mlp;

    CadeCadiComponent() = default;
    CadeCadiComponent(const std::string& name, Axis axis, const ModelConfig& cfg,
                      std::mt19937_64& rng);

    /// Encoder step: attention keyed by past meteorology over the value
    /// stream, then an MLP, each behind a residual + layer norm.
    Var cade_forward(ComputeTape& tape, Var met_past_view, Var value_view,
                     const AttentionMask& mask) const;
    /// Decoder step: attention keyed by future meteorology over the encoded
    /// stream, same residual structure.
    Var cadi_forward(ComputeTape& tape, Var met_future_view, Var encoded_view,
                     const AttentionMask& mask) const;

    void collect(std::vector<Parameter*>& out);
};

/// Full forecasting model: prompt embeddings, input encoders, temporal then
/// spatial Cade/Cadi components, and a linear prediction head.
class AirCadeModel {
public:
    ModelConfig config;
    uint64_t seed = 0;

    std::optional<PromptEmbeddings> embeddings;  // absent under no_prompt
    InputEncoders encoders;
    std::vector<CadeCadiComponent> components;   // temporal block then spatial block
    Parameter predictor_weight;                  // [d_m, c]
    Parameter predictor_bias;                    // [c]

    AirCadeModel(ModelConfig cfg, uint64_t seed);

    /// Differentiable forward pass. Inputs are raw tensors of shapes
    /// [T,N,c], [T,N,f], [T_P,N,f]; null masks mean ALL_ONES everywhere.
    Var forward(ComputeTape& tape, const Tensor& aqi_past, const Tensor& met_past,
                const Tensor& met_future, int64_t start_slot,
                const MaskPair* masks = nullptr) const;

    /// Convenience evaluation without gradient bookkeeping kept around.
    Tensor predict(const Tensor& aqi_past, const Tensor& met_past, const Tensor& met_future,
                   int64_t start_slot, const MaskPair* masks = nullptr) const;

    /// All parameters in a fixed construction order.
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    int64_t count_parameters() const;
    void zero_grads();
};

}  // namespace aircade
