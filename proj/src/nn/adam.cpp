#include "mrf/nn/adam.hpp"
#include "mrf/error.hpp"

#include <cmath>

namespace mrf::nn {

void adam_step(std::span<const ParamRef> params, AdamState &state) {
    if (state.first_moment.empty() && state.second_moment.empty()) {
        for (const auto &p : params) {
            state.first_moment.emplace_back(p.value->size(), 0.0);
            state.second_moment.emplace_back(p.value->size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw DomainError("adam_step: optimizer state does not match the parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto &p = params[i];
        if (p.grad->size() != p.value->size() || state.first_moment[i].size() != p.value->size() ||
            state.second_moment[i].size() != p.value->size()) {
            throw DomainError("adam_step: shape mismatch for " + p.name);
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto &value = *params[i].value;
        const auto &grad = *params[i].grad;
        auto &m = state.first_moment[i];
        auto &v = state.second_moment[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            value[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

} // namespace mrf::nn
