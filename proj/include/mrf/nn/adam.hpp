#pragma once

#include "mrf/nn/layers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mrf::nn {

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// Bias-corrected Adam update of every parameter from its gradient.
/// Moments are created on the first call.
void adam_step(std::span<const ParamRef> params, AdamState &state);

} // namespace mrf::nn
