#pragma once

#include <random>
#include <string>
#include <vector>

#include "aircade/tape.hpp"

namespace aircade {

/// Leases a parameter of a logically-const module onto a tape. Forward
/// evaluation never mutates values; backward() writes the grad buffer.
inline Var lease(ComputeTape& tape, const Parameter& p) {
    return tape.param(const_cast<Parameter&>(p));
}

// Weight matrices are uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; biases
// start at zero; embedding-style tables use a small symmetric range.
Tensor uniform_init(Shape shape, double lo, double hi, std::mt19937_64& rng);
Parameter make_weight(std::string name, int64_t fan_in, int64_t fan_out, std::mt19937_64& rng);
Parameter make_bias(std::string name, int64_t width);
Parameter make_table(std::string name, Shape shape, std::mt19937_64& rng, double range = 0.05);

/// linear -> relu -> linear.
struct TwoLayerMlp {
    Parameter w1, b1, w2, b2;

    TwoLayerMlp() = default;
    TwoLayerMlp(const std::string& name, int64_t in, int64_t hidden, int64_t out,
                std::mt19937_64& rng);

    Var apply(ComputeTape& tape, Var x) const;
    void collect(std::vector<Parameter*>& out);
};

struct LayerNormParams {
    Parameter gain, bias;

    LayerNormParams() = default;
    LayerNormParams(const std::string& name, int64_t width);

    Var apply(ComputeTape& tape, Var x) const;
    void collect(std::vector<Parameter*>& out);
};

}  // namespace aircade
