#include "aircade/model_config.hpp"

#include <cmath>

#include "aircade/tensor.hpp"

namespace aircade {

ScaleMode scale_mode_from_string(const std::string& s) {
    if (s == "divide") return ScaleMode::divide;
    if (s == "multiply") return ScaleMode::multiply;
    throw ConfigError("attention_scale_mode must be 'divide' or 'multiply', got '" + s + "'");
}

std::string to_string(ScaleMode m) {
    return m == ScaleMode::divide ? "divide" : "multiply";
}

double ModelConfig::attention_scale() const {
    double root = std::sqrt(static_cast<double>(model_width()));
    return scale_mode == ScaleMode::divide ? 1.0 / root : root;
}

void ModelConfig::validate() const {
    auto positive = [](int64_t v, const char* what) {
        if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
    };
    positive(input_window, "input_window");
    positive(pred_window, "pred_window");
    positive(stations, "stations");
    positive(aqi_channels, "aqi_channels");
    positive(met_channels, "met_channels");
    positive(state_width, "state_width");
    positive(prompt_width, "prompt_width");
    positive(adaptive_rank, "adaptive_rank");
    positive(heads, "heads");
    positive(slots_per_day, "slots_per_day");
    if (temporal_layers < 0 || spatial_layers < 0) {
        throw ConfigError("layer counts must be >= 0");
    }
    if (temporal_layers + spatial_layers < 1) {
        throw ConfigError("model needs at least one transformer component");
    }
    if (model_width() % 4 != 0) {
        throw ConfigError("model width " + std::to_string(model_width()) +
                          " must be divisible by 4 (four attention paths)");
    }
    // The decoder reuses the encoded stream of length input_window as values
    // against pred_window-long queries, so the windows must agree.
    if (input_window != pred_window) {
        throw ConfigError("input_window (" + std::to_string(input_window) +
                          ") must equal pred_window (" + std::to_string(pred_window) + ")");
    }
    if (no_adp && no_diff) {
        throw ConfigError("ablations no_adp and no_diff together remove every attention path");
    }
    if (no_cade && no_es) {
        throw ConfigError("ablations no_cade and no_es together remove every sublayer");
    }
}

}  // namespace aircade
