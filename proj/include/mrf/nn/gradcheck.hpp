#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace mrf::nn {

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0; ///< at worst_index
    double numeric = 0.0;  ///< at worst_index
    std::size_t checked = 0;
    bool passed = true;
};

/// Central-difference check of `analytic` = d loss / d x.
///
/// `loss` must read its input through `x`, which is perturbed in place and
/// restored. Per-coordinate error is |a - n| / max(|a|, |n|, floor). With an
/// empty `coords` every coordinate is checked.
GradCheckReport grad_check(const std::function<double()> &loss, std::span<double> x,
                           std::span<const double> analytic, double h, double tolerance,
                           std::span<const std::size_t> coords = {}, double floor = 1e-3);

} // namespace mrf::nn
