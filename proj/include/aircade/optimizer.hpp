#pragma once

#include <span>
#include <vector>

#include "aircade/tape.hpp"

namespace aircade {

/// Plain RMSprop: s <- decay*s + (1-decay)*g^2; theta <- theta - lr*g/(sqrt(s)+eps).
/// No momentum, not centered. Accumulators start at zero and stay bound to the
/// parameter list given at construction.
class RmspropOptimizer {
public:
    RmspropOptimizer(std::span<Parameter* const> params, double learning_rate,
                     double decay = 0.99, double eps = 1e-8);

    void step();

    double learning_rate() const { return lr_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> accum_;
    double lr_, decay_, eps_;
};

}  // namespace aircade
