#pragma once

// The fully convolutional network: separable 3x3 blocks with shrinking
// widths, then two 1x1 heads. Input is the subspace-coefficient image, output
// is (T1, T2, PD) normalized to [0, 1] by ModelConfig's constants.

#include "mrf/acquisition.hpp"
#include "mrf/maps.hpp"
#include "mrf/nn/adam.hpp"
#include "mrf/nn/layers.hpp"
#include "mrf/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace mrf {

struct ModelConfig {
    std::size_t input_channels = 10;
    std::vector<std::size_t> block_channels{256, 128, 64, 32};
    std::vector<std::size_t> head_channels{3, 3};
    double dropout = 0.1;
    double t1_max_ms = 4000.0;
    double t2_max_ms = 600.0;
    double pd_max = 2.0;

    /// (input, block outputs..., head outputs...)
    std::vector<std::size_t> channel_trace() const;
    void validate() const;

    bool operator==(const ModelConfig &) const = default;
};

struct SeparableBlock {
    nn::DepthwiseConv3x3 depthwise;
    nn::PointwiseConv pointwise;
    nn::Dropout dropout;
};

class Model {
public:
    Model() = default;
    /// He-style fan-in initialization drawn from `seed`.
    Model(const ModelConfig &config, std::uint64_t seed);

    const ModelConfig &config() const { return config_; }
    const std::vector<SeparableBlock> &blocks() const { return blocks_; }
    const std::vector<nn::PointwiseConv> &heads() const { return heads_; }

    /// Forward pass that records activations for backward().
    nn::Tensor4 forward(const nn::Tensor4 &input, nn::Mode mode, std::uint64_t dropout_seed);
    /// Eval-mode forward without caching.
    nn::Tensor4 infer(const nn::Tensor4 &input) const;
    /// Gradient w.r.t. the last forward() input; accumulates parameter gradients.
    nn::Tensor4 backward(const nn::Tensor4 &grad_output);

    void zero_grad();
    std::vector<nn::ParamRef> params();
    std::size_t parameter_count() const;

private:
    struct BlockCache {
        nn::Tensor4 input, depthwise_out, activated;
    };

    ModelConfig config_;
    std::vector<SeparableBlock> blocks_;
    std::vector<nn::PointwiseConv> heads_;
    std::vector<BlockCache> block_cache_;
    std::vector<nn::Tensor4> head_inputs_;
    std::vector<nn::Tensor4> head_outputs_;
};

Model build_model(const ModelConfig &config, std::uint64_t seed);

/// Coefficient images (compressed TSMIs of equal size) -> N x C x H x W.
nn::Tensor4 to_input_tensor(std::span<const Tsmi *const> coeffs);
nn::Tensor4 to_input_tensor(const Tsmi &coeffs);

struct Targets {
    nn::Tensor4 values;             ///< N x 3 x H x W, normalized
    std::vector<std::uint8_t> mask; ///< same size as values
};
Targets to_targets(std::span<const ParametricMaps *const> maps, const ModelConfig &config);

/// Denormalized network output; unconstrained, no mask.
struct MapPrediction {
    std::size_t height = 0, width = 0;
    std::vector<double> t1_ms, t2_ms, pd;
};
MapPrediction predict(const Model &model, const Tsmi &coeffs);

struct TrainOptions {
    std::size_t epochs = 150;
    std::size_t batch_size = 4;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool augment = true;
    AugmentRanges augmentation;
    /// Stop after this many optimizer steps (0 = run all epochs).
    std::size_t max_steps = 0;
};

struct TrainingHistory {
    std::vector<double> step_loss;
    std::vector<double> epoch_train_loss;
    std::vector<double> epoch_val_loss; ///< empty entries skipped when no validation set
};

struct Checkpoint {
    Model model;
    SubspaceBasis basis;
    nn::AdamState optimizer;
    TrainingHistory history;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    /// Epoch (0-based) whose parameters were kept: lowest validation loss, or the last epoch.
    std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Masked MSE on normalized targets with Adam. The basis is copied into the
/// checkpoint unchanged; samples must already be compressed with it. With a
/// validation set the returned model holds the parameters of the epoch with
/// the lowest validation loss; the optimizer state is that of the final step.
Checkpoint train(Model model, const SubspaceBasis &basis, std::span<const Sample> train_set,
                 std::span<const Sample> validation_set, const TrainOptions &options, std::uint64_t seed,
                 const EpochCallback &on_epoch = {});

/// Mean eval-mode loss over a sample set.
double evaluate_loss(const Model &model, std::span<const Sample> samples);

struct ReconResult {
    ParametricMaps maps;
    double seconds = 0.0; ///< projection + inference wall clock
};

/// Project, infer, denormalize. Voxels whose coefficient norm is at most
/// mask_threshold times the image maximum are masked out; outputs are clamped
/// to physical values (t1 >= 1 ms, 1 ms <= t2 <= t1, pd >= 0).
ReconResult reconstruct(const Tsmi &raw, const Checkpoint &checkpoint, double mask_threshold = 0.05);

void save_checkpoint(const std::filesystem::path &dir, const Checkpoint &checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path &dir);

} // namespace mrf
