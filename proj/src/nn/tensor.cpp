#include "mrf/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace mrf::nn {

bool Tensor4::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

} // namespace mrf::nn
