#include "aircade/model.hpp"

namespace aircade {

CadeCadiComponent::CadeCadiComponent(const std::string& name, Axis ax, const ModelConfig& cfg,
                                     std::mt19937_64& rng)
    : axis(ax) {
    int64_t seq = ax == Axis::temporal ? cfg.input_window : cfg.stations;
    int64_t width = cfg.model_width();
    if (!cfg.no_cade) {
        cade_attn.emplace(name + ".cade.attn", ax, seq, cfg, rng);
        cade_mlp.emplace(name + ".cade.mlp", width, width, width, rng);
        cade_norm_attn.emplace(name + ".cade.norm_attn", width);
        cade_norm_mlp.emplace(name + ".cade.norm_mlp", width);
    }
    if (!cfg.no_es) {
        cadi_attn.emplace(name + ".cadi.attn", ax, seq, cfg, rng);
        cadi_mlp.emplace(name + ".cadi.mlp", width, width, width, rng);
        cadi_norm_attn.emplace(name + ".cadi.norm_attn", width);
        cadi_norm_mlp.emplace(name + ".cadi.norm_mlp", width);
    }
}

Var CadeCadiComponent::cade_forward(ComputeTape& tape, Var met_past_view, Var value_view,
                                    const AttentionMask& mask) const {
    Var attn = cade_attn->forward(tape, met_past_view, met_past_view, value_view, mask);
    Var normed = cade_norm_attn->apply(tape, tape.add(attn, value_view));
    Var refined = cade_mlp->apply(tape, normed);
    return cade_norm_mlp->apply(tape, tape.add(refined, normed));
}

Var CadeCadiComponent::cadi_forward(ComputeTape& tape, Var met_future_view, Var encoded_view,
                                    const AttentionMask& mask) const {
    Var attn = cadi_attn->forward(tape, met_future_view, met_future_view, encoded_view, mask);
    Var normed = cadi_norm_attn->apply(tape, tape.add(attn, encoded_view));
    Var refined = cadi_mlp->apply(tape, normed);
    return cadi_norm_mlp->apply(tape, tape.add(refined, normed));
}

void CadeCadiComponent::collect(std::vector<Parameter*>& out) {
    if (cade_attn) {
        cade_attn->collect(out);
        cade_mlp->collect(out);
        cade_norm_attn->collect(out);
        cade_norm_mlp->collect(out);
    }
    if (cadi_attn) {
        cadi_attn->collect(out);
        cadi_mlp->collect(out);
        cadi_norm_attn->collect(out);
        cadi_norm_mlp->collect(out);
    }
}

AirCadeModel::AirCadeModel(ModelConfig cfg, uint64_t model_seed)
    : config(cfg), seed(model_seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    if (!config.no_prompt) embeddings.emplace(config, rng);
    encoders = InputEncoders(config, rng);
    for (int64_t l = 0; l < config.temporal_layers; ++l) {
        components.emplace_back("comp" + std::to_string(l), Axis::temporal, config, rng);
    }
    for (int64_t l = 0; l < config.spatial_layers; ++l) {
        components.emplace_back("comp" + std::to_string(config.temporal_layers + l),
                                Axis::spatial, config, rng);
    }
    predictor_weight =
        make_weight("predictor.weight", config.model_width(), config.aqi_channels, rng);
    predictor_bias = make_bias("predictor.bias", config.aqi_channels);
}

namespace {

void check_input(const Tensor& t, int64_t steps, int64_t stations, int64_t channels,
                 const char* what) {
    Shape want{steps, stations, channels};
    if (t.shape != want) {
        throw ShapeError(std::string(what) + ": expected " + shape_str(want) + ", got " +
                         shape_str(t.shape));
    }
}

}  // namespace

Var AirCadeModel::forward(ComputeTape& tape, const Tensor& aqi_past, const Tensor& met_past,
                          const Tensor& met_future, int64_t start_slot,
                          const MaskPair* masks) const {
    const ModelConfig& cfg = config;
    check_input(aqi_past, cfg.input_window, cfg.stations, cfg.aqi_channels, "aqi_past");
    check_input(met_past, cfg.input_window, cfg.stations, cfg.met_channels, "met_past");
    check_input(met_future, cfg.pred_window, cfg.stations, cfg.met_channels, "met_future");

    const PromptEmbeddings* emb = embeddings ? &*embeddings : nullptr;
    Var stream = fuse_stream(tape, *encoders.aqi, emb, Horizon::past, aqi_past, start_slot, cfg);
    Var met_past_fused, met_future_fused;
    if (encoders.met_past) {
        met_past_fused =
            fuse_stream(tape, *encoders.met_past, emb, Horizon::past, met_past, start_slot, cfg);
    }
    if (encoders.met_future) {
        met_future_fused = fuse_stream(tape, *encoders.met_future, emb, Horizon::future,
                                       met_future, start_slot, cfg);
    }

    // the meteorological streams are fixed Q/K inputs for every component;
    // view them once per axis
    std::optional<Var> past_view[2], future_view[2];
    auto met_view = [&](Var fused, Axis axis, std::optional<Var>* cache) {
        size_t i = axis == Axis::temporal ? 0 : 1;
        if (!cache[i]) cache[i] = to_axis_view(tape, fused, axis);
        return *cache[i];
    };

    MaskPair none = MaskPair::all_ones();
    const MaskPair& mask_pair = masks ? *masks : none;

    for (size_t ci = 0; ci < components.size(); ++ci) {
        const CadeCadiComponent& comp = components[ci];
        const AttentionMask& mask = mask_pair.for_axis(comp.axis);
        try {
            Var value_view = to_axis_view(tape, stream, comp.axis);
            Var encoded = value_view;
            if (comp.cade_attn) {
                encoded = comp.cade_forward(
                    tape, met_view(met_past_fused, comp.axis, past_view), value_view, mask);
            }
            if (comp.cadi_attn) {
                encoded = comp.cadi_forward(
                    tape, met_view(met_future_fused, comp.axis, future_view), encoded, mask);
            }
            stream = from_axis_view(tape, encoded, comp.axis);
        } catch (const ShapeError& e) {
            throw ShapeError("component " + std::to_string(ci) + ": " + e.what());
        }
    }

    return tape.add(tape.matmul(stream, lease(tape, predictor_weight)),
                    lease(tape, predictor_bias));
}

Tensor AirCadeModel::predict(const Tensor& aqi_past, const Tensor& met_past,
                             const Tensor& met_future, int64_t start_slot,
                             const MaskPair* masks) const {
    ComputeTape tape;
    Var out = forward(tape, aqi_past, met_past, met_future, start_slot, masks);
    return tape.val(out);
}

std::vector<Parameter*> AirCadeModel::parameters() {
    std::vector<Parameter*> out;
    if (embeddings) embeddings->collect(out);
    encoders.collect(out);
    for (CadeCadiComponent& c : components) c.collect(out);
    out.push_back(&predictor_weight);
    out.push_back(&predictor_bias);
    return out;
}

std::vector<const Parameter*> AirCadeModel::parameters() const {
    auto mutable_params = const_cast<AirCadeModel*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

int64_t AirCadeModel::count_parameters() const {
    int64_t total = 0;
    for (const Parameter* p : parameters()) total += p->numel();
    return total;
}

void AirCadeModel::zero_grads() {
    for (Parameter* p : parameters()) p->zero_grad();
}

}  // namespace aircade
