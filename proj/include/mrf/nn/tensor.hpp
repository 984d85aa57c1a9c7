#pragma once

#include <cstddef>
#include <vector>

namespace mrf::nn {

/// Dense NCHW tensor of doubles; element (n, c, y, x) lives at ((n*C + c)*H + y)*W + x.
struct Tensor4 {
    std::size_t n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : n(n), c(c), h(h), w(w), data(n * c * h * w, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return h * w; }
    std::size_t index(std::size_t in, std::size_t ic, std::size_t y, std::size_t x) const {
        return ((in * c + ic) * h + y) * w + x;
    }
    double &at(std::size_t in, std::size_t ic, std::size_t y, std::size_t x) { return data[index(in, ic, y, x)]; }
    double at(std::size_t in, std::size_t ic, std::size_t y, std::size_t x) const {
        return data[index(in, ic, y, x)];
    }
    double *plane_ptr(std::size_t in, std::size_t ic) { return data.data() + (in * c + ic) * h * w; }
    const double *plane_ptr(std::size_t in, std::size_t ic) const { return data.data() + (in * c + ic) * h * w; }

    bool same_shape(const Tensor4 &o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool all_finite() const;

    bool operator==(const Tensor4 &) const = default;
};

} // namespace mrf::nn
