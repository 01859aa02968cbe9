#include "aircade/optimizer.hpp"

#include <cmath>

namespace aircade {

RmspropOptimizer::RmspropOptimizer(std::span<Parameter* const> params, double learning_rate,
                                   double decay, double eps)
    : params_(params.begin(), params.end()), lr_(learning_rate), decay_(decay), eps_(eps) {
    if (lr_ < 0) throw ConfigError("learning rate must be >= 0");
    if (decay_ < 0 || decay_ >= 1.0) throw ConfigError("rmsprop decay must be in [0, 1)");
    if (eps_ <= 0) throw ConfigError("rmsprop eps must be positive");
    accum_.reserve(params_.size());
    for (Parameter* p : params_) accum_.push_back(Tensor::zeros(p->value.shape));
}

void RmspropOptimizer::step() {
    for (size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        Tensor& s = accum_[i];
        if (p.grad.shape != s.shape) {
            throw ShapeError("rmsprop: gradient shape changed for " + p.name);
        }
        for (size_t j = 0; j < s.data.size(); ++j) {
            double g = p.grad.data[j];
            s.data[j] = decay_ * s.data[j] + (1.0 - decay_) * g * g;
            p.value.data[j] -= lr_ * g / (std::sqrt(s.data[j]) + eps_);
        }
    }
}

}  // namespace aircade
