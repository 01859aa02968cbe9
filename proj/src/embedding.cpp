#include "aircade/embedding.hpp"

namespace aircade {

std::vector<int64_t> time_slot_index(int64_t start_slot, int64_t horizon, int64_t slots_per_day) {
    if (slots_per_day <= 0) throw ConfigError("slots_per_day must be positive");
    if (start_slot < 0 || start_slot >= slots_per_day) {
        throw ConfigError("start_slot " + std::to_string(start_slot) + " outside [0, " +
                          std::to_string(slots_per_day) + ")");
    }
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    std::vector<int64_t> slots(static_cast<size_t>(horizon));
    for (int64_t i = 0; i < horizon; ++i) slots[static_cast<size_t>(i)] = (start_slot + i) % slots_per_day;
    return slots;
}

PromptEmbeddings::PromptEmbeddings(const ModelConfig& cfg, std::mt19937_64& rng)
    : time_past(make_table("emb.time_past", {cfg.slots_per_day, cfg.prompt_width}, rng)),
      time_future(make_table("emb.time_future", {cfg.slots_per_day, cfg.prompt_width}, rng)),
      station_past(make_table("emb.station_past", {cfg.stations, cfg.prompt_width}, rng)),
      station_future(make_table("emb.station_future", {cfg.stations, cfg.prompt_width}, rng)),
      position_past(make_table("emb.position_past",
                               {cfg.input_window, cfg.stations, cfg.state_width}, rng)),
      position_future(make_table("emb.position_future",
                                 {cfg.pred_window, cfg.stations, cfg.state_width}, rng)) {}

void PromptEmbeddings::collect(std::vector<Parameter*>& out) {
    out.push_back(&time_past);
    out.push_back(&time_future);
    out.push_back(&station_past);
    out.push_back(&station_future);
    out.push_back(&position_past);
    out.push_back(&position_future);
}

InputEncoders::InputEncoders(const ModelConfig& cfg, std::mt19937_64& rng) {
    aqi.emplace("enc.aqi", cfg.aqi_channels, cfg.state_width, cfg.state_width, rng);
    if (!cfg.no_cade) {
        met_past.emplace("enc.met_past", cfg.met_channels, cfg.state_width, cfg.state_width, rng);
    }
    if (!cfg.no_es) {
        met_future.emplace("enc.met_future", cfg.met_channels, cfg.state_width, cfg.state_width,
                           rng);
    }
}

void InputEncoders::collect(std::vector<Parameter*>& out) {
    if (aqi) aqi->collect(out);
    if (met_past) met_past->collect(out);
    if (met_future) met_future->collect(out);
}

Var fuse_stream(ComputeTape& tape, const TwoLayerMlp& encoder, const PromptEmbeddings* emb,
                Horizon horizon, const Tensor& raw, int64_t start_slot, const ModelConfig& cfg) {
    int64_t window = horizon == Horizon::past ? cfg.input_window : cfg.pred_window;
    if (raw.rank() != 3 || raw.shape[0] != window || raw.shape[1] != cfg.stations) {
        throw ShapeError("fuse_stream: input shape " + shape_str(raw.shape) +
                         " does not match window " + std::to_string(window) + " x stations " +
                         std::to_string(cfg.stations));
    }
    Var encoded = encoder.apply(tape, tape.constant(raw));  // [W, N, d_s]

    if (emb == nullptr) {
        Tensor zeros({window, cfg.stations, 2 * cfg.prompt_width});
        std::vector<Var> parts{encoded, tape.constant(std::move(zeros))};
        return tape.concat_lastdim(parts);
    }

    const Parameter& position = horizon == Horizon::past ? emb->position_past : emb->position_future;
    const Parameter& time_table = horizon == Horizon::past ? emb->time_past : emb->time_future;
    const Parameter& station_table =
        horizon == Horizon::past ? emb->station_past : emb->station_future;

    Var with_position = tape.add(encoded, lease(tape, position));

    // future windows continue the calendar after the input window
    int64_t slot0 = horizon == Horizon::past
                        ? start_slot
                        : (start_slot + cfg.input_window) % cfg.slots_per_day;
    std::vector<int64_t> slots = time_slot_index(slot0, window, cfg.slots_per_day);
    Var time_rows = tape.gather_rows(lease(tape, time_table), slots);  // [W, d_P]
    Var time_block = tape.expand_axis(time_rows, 1, cfg.stations);     // [W, N, d_P]

    Var station_block = tape.expand_axis(lease(tape, station_table), 0, window);  // [W, N, d_P]

    std::vector<Var> parts{with_position, time_block, station_block};
    return tape.concat_lastdim(parts);
}

FusedStreams fuse_inputs(ComputeTape& tape, const PromptEmbeddings* emb, const InputEncoders& enc,
                         const Tensor& aqi_window, const Tensor& met_past_window,
                         const Tensor& met_future_window, int64_t start_slot,
                         const ModelConfig& cfg) {
    if (!enc.aqi || !enc.met_past || !enc.met_future) {
        throw ConfigError("fuse_inputs requires all three stream encoders");
    }
    FusedStreams out;
    out.aqi = fuse_stream(tape, *enc.aqi, emb, Horizon::past, aqi_window, start_slot, cfg);
    out.met_past =
        fuse_stream(tape, *enc.met_past, emb, Horizon::past, met_past_window, start_slot, cfg);
    out.met_future = fuse_stream(tape, *enc.met_future, emb, Horizon::future, met_future_window,
                                 start_slot, cfg);
    return out;
}

}  // namespace aircade
