#include <doctest.h>

#include <cmath>
#include <random>

#include "aircade/embedding.hpp"
#include "support/test_util.hpp"

using namespace aircade;
using testutil::random_tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.input_window = 4;
    cfg.pred_window = 4;
    cfg.stations = 5;
    cfg.aqi_channels = 1;
    cfg.met_channels = 3;
    cfg.state_width = 4;
    cfg.prompt_width = 2;
    cfg.adaptive_rank = 3;
    cfg.heads = 2;
    cfg.temporal_layers = 1;
    cfg.spatial_layers = 1;
    cfg.slots_per_day = 8;
    return cfg;
}

void zero_all(std::vector<Parameter*> params) {
    for (Parameter* p : params) {
        std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    }
}

}  // namespace

TEST_CASE("time_slot_index basics and wraparound") {
    CHECK(time_slot_index(0, 3, 8) == std::vector<int64_t>{0, 1, 2});
    CHECK(time_slot_index(7, 3, 8) == std::vector<int64_t>{7, 0, 1});

    // modular arithmetic oracle over a full day of 3-hour slots
    auto slots = time_slot_index(2, 24, 8);
    REQUIRE(slots.size() == 24);
    for (int64_t i = 0; i < 24; ++i) CHECK(slots[static_cast<size_t>(i)] == (2 + i) % 8);

    CHECK_THROWS_AS(time_slot_index(0, 1, 0), ConfigError);
    CHECK_THROWS_AS(time_slot_index(8, 1, 8), ConfigError);
    CHECK_THROWS_AS(time_slot_index(0, 0, 8), ConfigError);
}

TEST_CASE("time_slot_index stays in range") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int64_t> day(1, 48), hor(1, 100);
    for (int rep = 0; rep < 50; ++rep) {
        int64_t n_t = day(rng);
        int64_t start = std::uniform_int_distribution<int64_t>(0, n_t - 1)(rng);
        for (int64_t s : time_slot_index(start, hor(rng), n_t)) {
            CHECK(s >= 0);
            CHECK(s < n_t);
        }
    }
}

TEST_CASE("fuse_inputs zero collapse and width") {
    ModelConfig cfg = tiny_config();
    std::mt19937_64 rng(5);
    PromptEmbeddings emb(cfg, rng);
    InputEncoders enc(cfg, rng);
    std::vector<Parameter*> params;
    emb.collect(params);
    enc.collect(params);
    zero_all(params);

    Tensor x({cfg.input_window, cfg.stations, cfg.aqi_channels});
    Tensor zp({cfg.input_window, cfg.stations, cfg.met_channels});
    Tensor zf({cfg.pred_window, cfg.stations, cfg.met_channels});

    ComputeTape tape;
    FusedStreams fused = fuse_inputs(tape, &emb, enc, x, zp, zf, 0, cfg);
    const Tensor& hv = tape.val(fused.aqi);
    CHECK(hv.shape == Shape{cfg.input_window, cfg.stations, 8});  // d_s + 2*d_P
    for (double v : hv.data) CHECK(v == 0.0);
    CHECK(tape.val(fused.met_past).shape == Shape{cfg.input_window, cfg.stations, 8});
    CHECK(tape.val(fused.met_future).shape == Shape{cfg.pred_window, cfg.stations, 8});
}

TEST_CASE("station embedding row only touches its station") {
    ModelConfig cfg = tiny_config();
    std::mt19937_64 rng(6);
    PromptEmbeddings emb(cfg, rng);
    InputEncoders enc(cfg, rng);
    Tensor x = random_tensor({cfg.input_window, cfg.stations, cfg.aqi_channels}, rng);

    auto fuse_aqi = [&]() {
        ComputeTape tape;
        Var h = fuse_stream(tape, *enc.aqi, &emb, Horizon::past, x, 1, cfg);
        return tape.val(h);
    };
    Tensor before = fuse_aqi();
    const int64_t station = 3;
    for (int64_t j = 0; j < cfg.prompt_width; ++j) emb.station_past.value.at({station, j}) += 0.5;
    Tensor after = fuse_aqi();

    for (int64_t t = 0; t < cfg.input_window; ++t) {
        for (int64_t n = 0; n < cfg.stations; ++n) {
            bool changed = false;
            for (int64_t d = 0; d < 8; ++d) {
                if (before.at({t, n, d}) != after.at({t, n, d})) changed = true;
            }
            CHECK(changed == (n == station));
        }
    }
}

TEST_CASE("past fusion never reads future tables") {
    ModelConfig cfg = tiny_config();
    std::mt19937_64 rng(7);
    PromptEmbeddings emb(cfg, rng);
    InputEncoders enc(cfg, rng);
    Tensor x = random_tensor({cfg.input_window, cfg.stations, cfg.aqi_channels}, rng);
    Tensor zp = random_tensor({cfg.input_window, cfg.stations, cfg.met_channels}, rng);

    std::vector<Parameter*> all;
    emb.collect(all);
    for (Parameter* p : all) p->zero_grad();

    ComputeTape tape;
    Var hv = fuse_stream(tape, *enc.aqi, &emb, Horizon::past, x, 2, cfg);
    Var hz = fuse_stream(tape, *enc.met_past, &emb, Horizon::past, zp, 2, cfg);
    tape.backward(tape.sum_all(tape.add(hv, hz)));

    auto grad_norm = [](const Parameter& p) {
        double s = 0;
        for (double g : p.grad.data) s += std::abs(g);
        return s;
    };
    CHECK(grad_norm(emb.time_future) == 0.0);
    CHECK(grad_norm(emb.station_future) == 0.0);
    CHECK(grad_norm(emb.position_future) == 0.0);
    CHECK(grad_norm(emb.time_past) > 0.0);
    CHECK(grad_norm(emb.station_past) > 0.0);
    CHECK(grad_norm(emb.position_past) > 0.0);
}

TEST_CASE("future fusion offsets slots by the input window") {
    ModelConfig cfg = tiny_config();
    cfg.slots_per_day = 8;
    std::mt19937_64 rng(8);
    PromptEmbeddings emb(cfg, rng);
    InputEncoders enc(cfg, rng);
    Tensor zf({cfg.pred_window, cfg.stations, cfg.met_channels});

    // zero encoder so only tables remain; time rows land in columns [d_s, d_s+d_P)
    std::vector<Parameter*> params;
    enc.collect(params);
    zero_all(params);
    std::fill(emb.position_future.value.data.begin(), emb.position_future.value.data.end(), 0.0);

    int64_t start_slot = 6;
    ComputeTape tape;
    Var h = fuse_stream(tape, *enc.met_future, &emb, Horizon::future, zf, start_slot, cfg);
    for (int64_t t = 0; t < cfg.pred_window; ++t) {
        int64_t slot = (start_slot + cfg.input_window + t) % cfg.slots_per_day;
        for (int64_t j = 0; j < cfg.prompt_width; ++j) {
            CHECK(tape.val(h).at({t, 0, cfg.state_width + j}) ==
                  emb.time_future.value.at({slot, j}));
        }
    }
}

TEST_CASE("prompt ablation keeps width with zero blocks") {
    ModelConfig cfg = tiny_config();
    cfg.no_prompt = true;
    std::mt19937_64 rng(9);
    InputEncoders enc(cfg, rng);
    Tensor x = random_tensor({cfg.input_window, cfg.stations, cfg.aqi_channels}, rng);
    ComputeTape tape;
    Var h = fuse_stream(tape, *enc.aqi, nullptr, Horizon::past, x, 0, cfg);
    CHECK(tape.val(h).shape == Shape{cfg.input_window, cfg.stations, 8});
    for (int64_t t = 0; t < cfg.input_window; ++t)
        for (int64_t n = 0; n < cfg.stations; ++n)
            for (int64_t d = cfg.state_width; d < 8; ++d) CHECK(tape.val(h).at({t, n, d}) == 0.0);
}

TEST_CASE("pca: centered 2-D tables project isometrically") {
    std::mt19937_64 rng(10);
    Tensor table = random_tensor({5, 2}, rng);
    // center the rows
    for (int64_t j = 0; j < 2; ++j) {
        double mean = 0;
        for (int64_t i = 0; i < 5; ++i) mean += table.at({i, j});
        mean /= 5;
        for (int64_t i = 0; i < 5; ++i) table.at({i, j}) -= mean;
    }
    Projection2D proj = project_embeddings_2d(table);
    CHECK_FALSE(proj.degenerate);
    for (int64_t a = 0; a < 5; ++a)
        for (int64_t b = 0; b < 5; ++b) {
            double din = std::hypot(table.at({a, 0}) - table.at({b, 0}),
                                    table.at({a, 1}) - table.at({b, 1}));
            double dout = std::hypot(proj.coords.at({a, 0}) - proj.coords.at({b, 0}),
                                     proj.coords.at({a, 1}) - proj.coords.at({b, 1}));
            CHECK(std::abs(din - dout) < 1e-9);
        }
}

TEST_CASE("pca: identical rows are degenerate") {
    Tensor table({4, 3});
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 3; ++j) table.at({i, j}) = 2.5;
    Projection2D proj = project_embeddings_2d(table);
    CHECK(proj.degenerate);
    for (double v : proj.coords.data) CHECK(v == 0.0);
}

TEST_CASE("pca matches eigendecomposition oracle on rank-2 error") {
    std::mt19937_64 rng(11);
    Tensor table = random_tensor({10, 6}, rng);
    Projection2D proj = project_embeddings_2d(table);

    // oracle: scatter matrix trace and top-2 eigenvalues via power iteration
    int64_t n = 10, d = 6;
    std::vector<double> centered(static_cast<size_t>(n * d));
    for (int64_t j = 0; j < d; ++j) {
        double mean = 0;
        for (int64_t i = 0; i < n; ++i) mean += table.at({i, j});
        mean /= static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i) centered[static_cast<size_t>(i * d + j)] = table.at({i, j}) - mean;
    }
    std::vector<double> scat(static_cast<size_t>(d * d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t p = 0; p < d; ++p)
            for (int64_t q = 0; q < d; ++q)
                scat[static_cast<size_t>(p * d + q)] +=
                    centered[static_cast<size_t>(i * d + p)] * centered[static_cast<size_t>(i * d + q)];
    double trace = 0;
    for (int64_t j = 0; j < d; ++j) trace += scat[static_cast<size_t>(j * d + j)];

    auto top_eig = [&](std::vector<double>& m) {
        std::vector<double> v(static_cast<size_t>(d), 1.0 / std::sqrt(static_cast<double>(d)));
        double lambda = 0;
        for (int it = 0; it < 5000; ++it) {
            std::vector<double> w(static_cast<size_t>(d), 0.0);
            for (int64_t p = 0; p < d; ++p)
                for (int64_t q = 0; q < d; ++q) w[static_cast<size_t>(p)] += m[static_cast<size_t>(p * d + q)] * v[static_cast<size_t>(q)];
            double norm = 0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            for (int64_t p = 0; p < d; ++p) v[static_cast<size_t>(p)] = w[static_cast<size_t>(p)] / norm;
            lambda = norm;  // ||Sv|| converges to the dominant eigenvalue (PSD)
        }
        // deflate
        for (int64_t p = 0; p < d; ++p)
            for (int64_t q = 0; q < d; ++q) m[static_cast<size_t>(p * d + q)] -= lambda * v[static_cast<size_t>(p)] * v[static_cast<size_t>(q)];
        return lambda;
    };

    std::vector<double> work = scat;
    double l1 = top_eig(work);
    double l2 = top_eig(work);
    double best_rank2_error = trace - l1 - l2;

    double captured = 0;
    for (double v : proj.coords.data) captured += v * v;
    double total = 0;
    for (double v : centered) total += v * v;
    CHECK(std::abs((total - captured) - best_rank2_error) < 1e-9);
}

TEST_CASE("pca is invariant to constant row offsets") {
    std::mt19937_64 rng(12);
    Tensor table = random_tensor({8, 4}, rng);
    Tensor shifted = table;
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 4; ++j) shifted.at({i, j}) += 3.0 + static_cast<double>(j);
    Projection2D a = project_embeddings_2d(table);
    Projection2D b = project_embeddings_2d(shifted);
    CHECK(max_abs_diff(a.coords, b.coords) < 1e-9);
}
