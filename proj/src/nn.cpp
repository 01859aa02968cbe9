#include "aircade/nn.hpp"

#include <cmath>

namespace aircade {

Tensor uniform_init(Shape shape, double lo, double hi, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
    return t;
}

Parameter make_weight(std::string name, int64_t fan_in, int64_t fan_out, std::mt19937_64& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Parameter(std::move(name), uniform_init({fan_in, fan_out}, -bound, bound, rng));
}

Parameter make_bias(std::string name, int64_t width) {
    return Parameter(std::move(name), Tensor::zeros({width}));
}

Parameter make_table(std::string name, Shape shape, std::mt19937_64& rng, double range) {
    return Parameter(std::move(name), uniform_init(std::move(shape), -range, range, rng));
}

TwoLayerMlp::TwoLayerMlp(const std::string& name, int64_t in, int64_t hidden, int64_t out,
                         std::mt19937_64& rng)
    : w1(make_weight(name + ".w1", in, hidden, rng)),
      b1(make_bias(name + ".b1", hidden)),
      w2(make_weight(name + ".w2", hidden, out, rng)),
      b2(make_bias(name + ".b2", out)) {}

Var TwoLayerMlp::apply(ComputeTape& tape, Var x) const {
    Var h = tape.relu(tape.linear(x, lease(tape, w1), lease(tape, b1)));
    return tape.linear(h, lease(tape, w2), lease(tape, b2));
}

void TwoLayerMlp::collect(std::vector<Parameter*>& out) {
    out.push_back(&w1);
    out.push_back(&b1);
    out.push_back(&w2);
    out.push_back(&b2);
}

LayerNormParams::LayerNormParams(const std::string& name, int64_t width)
    : gain(name + ".gain", Tensor::full({width}, 1.0)), bias(name + ".bias", Tensor::zeros({width})) {}

Var LayerNormParams::apply(ComputeTape& tape, Var x) const {
    return tape.layer_norm(x, lease(tape, gain), lease(tape, bias));
}

void LayerNormParams::collect(std::vector<Parameter*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
}

}  // namespace aircade
