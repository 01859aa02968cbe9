#pragma once

#include <cstdint>
#include <string>

namespace aircade {

enum class ScaleMode { divide, multiply };

ScaleMode scale_mode_from_string(const std::string& s);
std::string to_string(ScaleMode m);

/// Static shape and architecture description of one model instance.
struct ModelConfig {
    int64_t input_window = 24;   // past steps fed to the encoder
    int64_t pred_window = 24;    // future steps predicted
    int64_t stations = 184;
    int64_t aqi_channels = 1;
    int64_t met_channels = 13;
    int64_t state_width = 32;    // width of the encoded feature block
    int64_t prompt_width = 16;   // width of each prompt table entry
    int64_t adaptive_rank = 10;  // columns of the adaptive attention tables
    int64_t heads = 8;
    int64_t temporal_layers = 3;
    int64_t spatial_layers = 3;
    int64_t slots_per_day = 8;   // daily sampling frequency

    ScaleMode scale_mode = ScaleMode::divide;
    bool renormalize_masked = false;

    // architecture ablations
    bool no_prompt = false;
    bool no_adp = false;
    bool no_agg = false;
    bool no_diff = false;
    bool no_cade = false;
    bool no_es = false;

    /// Fused representation width: encoded block plus two prompt blocks.
    int64_t model_width() const { return state_width + 2 * prompt_width; }
    int64_t head_width() const { return model_width() / 4; }
    double attention_scale() const;

    void validate() const;
};

}  // namespace aircade
