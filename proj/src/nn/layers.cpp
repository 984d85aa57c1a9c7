#include "mrf/nn/layers.hpp"
#include "mrf/error.hpp"
#include "mrf/random.hpp"
#include "mrf/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <numeric>

namespace mrf::nn {

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

/// Column chunk for pointwise GEMMs; fixed so the summation order never
/// depends on the number of threads.
constexpr std::size_t kPixelChunk = 2048;

} // namespace

std::size_t ParamRef::count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------- depthwise

DepthwiseConv3x3::DepthwiseConv3x3(std::size_t channels)
    : channels(channels), weight(channels * 9, 0.0), bias(channels, 0.0), grad_weight(channels * 9, 0.0),
      grad_bias(channels, 0.0) {}

Tensor4 DepthwiseConv3x3::forward(const Tensor4 &in) const {
    if (in.c != channels) {
        throw DomainError("depthwise_conv3x3: input channels do not match kernel count");
    }
    Tensor4 out(in.n, in.c, in.h, in.w);
    const auto h = static_cast<std::ptrdiff_t>(in.h);
    const auto w = static_cast<std::ptrdiff_t>(in.w);
    const auto planes = static_cast<std::ptrdiff_t>(in.n * in.c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < planes; ++p) {
        const std::size_t ch = static_cast<std::size_t>(p) % channels;
        const double *x = in.data.data() + p * h * w;
        double *y = out.data.data() + p * h * w;
        std::fill(y, y + h * w, bias[ch]);
        const double *k = weight.data() + ch * 9;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
            const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -dy), i1 = std::min(h, h - dy);
            for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                const double kv = k[(dy + 1) * 3 + (dx + 1)];
                const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dx), j1 = std::min(w, w - dx);
                for (std::ptrdiff_t i = i0; i < i1; ++i) {
                    double *yr = y + i * w;
                    const double *xr = x + (i + dy) * w + dx;
                    for (std::ptrdiff_t j = j0; j < j1; ++j) {
                        yr[j] += kv * xr[j];
                    }
                }
            }
        }
    }
    return out;
}

Tensor4 DepthwiseConv3x3::backward(const Tensor4 &in, const Tensor4 &gout) {
    if (in.c != channels || !in.same_shape(gout)) {
        throw DomainError("depthwise_conv3x3 backward: shape mismatch");
    }
    Tensor4 gin(in.n, in.c, in.h, in.w);
    const auto h = static_cast<std::ptrdiff_t>(in.h);
    const auto w = static_cast<std::ptrdiff_t>(in.w);
    const auto nc = static_cast<std::ptrdiff_t>(channels);
    // Parallel over channels; the batch loop inside keeps accumulation order fixed.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ch = 0; ch < nc; ++ch) {
        const double *k = weight.data() + ch * 9;
        double *gk = grad_weight.data() + ch * 9;
        for (std::size_t n = 0; n < in.n; ++n) {
            const double *x = in.plane_ptr(n, static_cast<std::size_t>(ch));
            const double *g = gout.plane_ptr(n, static_cast<std::size_t>(ch));
            double *gx = gin.plane_ptr(n, static_cast<std::size_t>(ch));
            double gb = 0.0;
            for (std::ptrdiff_t q = 0; q < h * w; ++q) {
                gb += g[q];
            }
            grad_bias[static_cast<std::size_t>(ch)] += gb;
            for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
                const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -dy), i1 = std::min(h, h - dy);
                for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                    const double kv = k[(dy + 1) * 3 + (dx + 1)];
                    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dx), j1 = std::min(w, w - dx);
                    double acc = 0.0;
                    for (std::ptrdiff_t i = i0; i < i1; ++i) {
                        const double *gr = g + i * w;
                        const double *xr = x + (i + dy) * w + dx;
                        double *gxr = gx + (i + dy) * w + dx;
                        for (std::ptrdiff_t j = j0; j < j1; ++j) {
                            acc += gr[j] * xr[j];
                            gxr[j] += kv * gr[j];
                        }
                    }
                    gk[(dy + 1) * 3 + (dx + 1)] += acc;
                }
            }
        }
    }
    return gin;
}

void DepthwiseConv3x3::zero_grad() {
    std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

void DepthwiseConv3x3::append_params(std::vector<ParamRef> &out, const std::string &prefix) {
    out.push_back({prefix + ".weight", {channels, 3, 3}, &weight, &grad_weight});
    out.push_back({prefix + ".bias", {channels}, &bias, &grad_bias});
}

// ---------------------------------------------------------------- pointwise

PointwiseConv::PointwiseConv(std::size_t in_channels, std::size_t out_channels)
    : in_channels(in_channels), out_channels(out_channels), weight(in_channels * out_channels, 0.0),
      bias(out_channels, 0.0), grad_weight(in_channels * out_channels, 0.0), grad_bias(out_channels, 0.0) {}

Tensor4 PointwiseConv::forward(const Tensor4 &in) const {
    if (in.c != in_channels) {
        throw DomainError("pointwise_conv: input channels do not match in_channels");
    }
    Tensor4 out(in.n, out_channels, in.h, in.w);
    const auto ci = static_cast<Eigen::Index>(in_channels);
    const auto co = static_cast<Eigen::Index>(out_channels);
    const std::size_t px = in.plane();
    const std::size_t chunks = (px + kPixelChunk - 1) / kPixelChunk;
    ConstMap wmat(weight.data(), co, ci);
    Eigen::Map<const Eigen::VectorXd> b(bias.data(), co);
    const auto jobs = static_cast<std::ptrdiff_t>(in.n * chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t job = 0; job < jobs; ++job) {
        const std::size_t n = static_cast<std::size_t>(job) / chunks;
        const std::size_t p0 = (static_cast<std::size_t>(job) % chunks) * kPixelChunk;
        const auto len = static_cast<Eigen::Index>(std::min(kPixelChunk, px - p0));
        const auto stride = static_cast<Eigen::Index>(px);
        Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>> x(in.plane_ptr(n, 0) + p0, ci, len,
                                                              Eigen::OuterStride<>(stride));
        Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>> y(out.plane_ptr(n, 0) + p0, co, len,
                                                        Eigen::OuterStride<>(stride));
        y.noalias() = wmat * x;
        y.colwise() += b;
    }
    return out;
}

Tensor4 PointwiseConv::backward(const Tensor4 &in, const Tensor4 &gout) {
    if (in.c != in_channels || gout.c != out_channels || in.n != gout.n || in.h != gout.h || in.w != gout.w) {
        throw DomainError("pointwise_conv backward: shape mismatch");
    }
    Tensor4 gin(in.n, in_channels, in.h, in.w);
    const auto ci = static_cast<Eigen::Index>(in_channels);
    const auto co = static_cast<Eigen::Index>(out_channels);
    const auto px = static_cast<Eigen::Index>(in.plane());
    ConstMap wmat(weight.data(), co, ci);
    Map gw(grad_weight.data(), co, ci);
    Eigen::Map<Eigen::VectorXd> gb(grad_bias.data(), co);
    for (std::size_t n = 0; n < in.n; ++n) {
        ConstMap x(in.plane_ptr(n, 0), ci, px);
        ConstMap g(gout.plane_ptr(n, 0), co, px);
        Map gx(gin.plane_ptr(n, 0), ci, px);
        gw.noalias() += g * x.transpose();
        for (Eigen::Index o = 0; o < co; ++o) {
            const double *row = gout.plane_ptr(n, static_cast<std::size_t>(o));
            gb[o] += std::accumulate(row, row + px, 0.0);
        }
        gx.noalias() = wmat.transpose() * g;
    }
    return gin;
}

void PointwiseConv::zero_grad() {
    std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

void PointwiseConv::append_params(std::vector<ParamRef> &out, const std::string &prefix) {
    out.push_back({prefix + ".weight", {out_channels, in_channels}, &weight, &grad_weight});
    out.push_back({prefix + ".bias", {out_channels}, &bias, &grad_bias});
}

// ---------------------------------------------------------------- relu

Tensor4 relu(const Tensor4 &in) {
    Tensor4 out = in;
    for (auto &v : out.data) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Tensor4 relu_backward(const Tensor4 &reference, const Tensor4 &gout) {
    if (!reference.same_shape(gout)) {
        throw DomainError("relu backward: shape mismatch");
    }
    Tensor4 gin = gout;
    for (std::size_t i = 0; i < gin.data.size(); ++i) {
        if (!(reference.data[i] > 0.0)) {
            gin.data[i] = 0.0;
        }
    }
    return gin;
}

// ---------------------------------------------------------------- dropout

Dropout::Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw DomainError("dropout: rate must lie in [0, 1)");
    }
}

Tensor4 Dropout::forward(const Tensor4 &in, Mode mode, std::uint64_t seed) {
    last_mode_ = mode;
    if (mode == Mode::Eval || rate_ == 0.0) {
        keep_.clear();
        return in;
    }
    Rng rng(seed);
    const double scale = 1.0 / (1.0 - rate_);
    keep_.resize(in.size());
    Tensor4 out = in;
    for (std::size_t i = 0; i < in.size(); ++i) {
        keep_[i] = rng.uniform() >= rate_ ? 1 : 0;
        out.data[i] = keep_[i] ? in.data[i] * scale : 0.0;
    }
    return out;
}

Tensor4 Dropout::backward(const Tensor4 &gout) const {
    if (keep_.empty()) {
        return gout;
    }
    if (keep_.size() != gout.size()) {
        throw DomainError("dropout backward: gradient does not match the last forward");
    }
    const double scale = 1.0 / (1.0 - rate_);
    Tensor4 gin = gout;
    for (std::size_t i = 0; i < gin.size(); ++i) {
        gin.data[i] = keep_[i] ? gout.data[i] * scale : 0.0;
    }
    return gin;
}

// ---------------------------------------------------------------- loss

LossResult mse_loss(const Tensor4 &pred, const Tensor4 &target, const std::vector<std::uint8_t> &mask) {
    if (!pred.same_shape(target) || mask.size() != pred.size()) {
        throw DomainError("mse_loss: prediction, target and mask shapes differ");
    }
    const auto count = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
    if (count == 0) {
        throw DomainError("mse_loss: empty mask");
    }
    LossResult r;
    r.grad = Tensor4(pred.n, pred.c, pred.h, pred.w);
    const double inv = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (mask[i]) {
            const double d = pred.data[i] - target.data[i];
            sum += d * d;
            r.grad.data[i] = 2.0 * d * inv;
        }
    }
    r.loss = sum * inv;
    return r;
}

} // namespace mrf::nn
