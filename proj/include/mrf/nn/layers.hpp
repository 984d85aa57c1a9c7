#pragma once

// Layer set for the fully convolutional network. Every layer keeps its own
// parameter gradients; backward() accumulates into them.

#include "mrf/nn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrf::nn {

/// Non-owning view of one trainable array and its gradient.
struct ParamRef {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> *value = nullptr;
    std::vector<double> *grad = nullptr;

    std::size_t count() const;
};

enum class Mode { Train, Eval };

/// Per-channel 3x3 convolution with one pixel of zero padding.
struct DepthwiseConv3x3 {
    std::size_t channels = 0;
    std::vector<double> weight; ///< channels x 3 x 3
    std::vector<double> bias;   ///< channels
    std::vector<double> grad_weight;
    std::vector<double> grad_bias;

    DepthwiseConv3x3() = default;
    explicit DepthwiseConv3x3(std::size_t channels);

    Tensor4 forward(const Tensor4 &input) const;
    /// Returns d loss / d input; adds parameter gradients.
    Tensor4 backward(const Tensor4 &input, const Tensor4 &grad_output);
    void zero_grad();
    void append_params(std::vector<ParamRef> &out, const std::string &prefix);
};

/// 1x1 convolution: a per-pixel affine map from in_channels to out_channels.
struct PointwiseConv {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> weight; ///< out x in, row-major
    std::vector<double> bias;   ///< out
    std::vector<double> grad_weight;
    std::vector<double> grad_bias;

    PointwiseConv() = default;
    PointwiseConv(std::size_t in_channels, std::size_t out_channels);

    Tensor4 forward(const Tensor4 &input) const;
    Tensor4 backward(const Tensor4 &input, const Tensor4 &grad_output);
    void zero_grad();
    void append_params(std::vector<ParamRef> &out, const std::string &prefix);
};

Tensor4 relu(const Tensor4 &input);
/// Subgradient 0 at 0. `reference` may be the ReLU input or its output.
Tensor4 relu_backward(const Tensor4 &reference, const Tensor4 &grad_output);

/// Inverted dropout. The mask drawn in forward() is reused by backward().
class Dropout {
public:
    explicit Dropout(double rate = 0.0);

    double rate() const { return rate_; }
    Tensor4 forward(const Tensor4 &input, Mode mode, std::uint64_t seed);
    Tensor4 backward(const Tensor4 &grad_output) const;

private:
    double rate_;
    Mode last_mode_ = Mode::Eval;
    std::vector<std::uint8_t> keep_;
};

struct LossResult {
    double loss = 0.0;
    Tensor4 grad; ///< d loss / d pred
};

/// Mean squared error over entries where mask != 0.
LossResult mse_loss(const Tensor4 &pred, const Tensor4 &target, const std::vector<std::uint8_t> &mask);

} // namespace mrf::nn
