#include "mrf/fcnn.hpp"
#include "mrf/error.hpp"
#include "mrf/io.hpp"
#include "mrf/mrfa.hpp"
#include "mrf/random.hpp"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace mrf {

using nn::Mode;
using nn::Tensor4;

// ---------------------------------------------------------------- config

std::vector<std::size_t> ModelConfig::channel_trace() const {
    std::vector<std::size_t> t{input_channels};
    t.insert(t.end(), block_channels.begin(), block_channels.end());
    t.insert(t.end(), head_channels.begin(), head_channels.end());
    return t;
}

void ModelConfig::validate() const {
    if (input_channels == 0) {
        throw DomainError("model: input_channels must be positive");
    }
    if (head_channels.empty() || head_channels.back() != 3) {
        throw DomainError("model: the last head layer must have 3 output channels");
    }
    for (auto c : channel_trace()) {
        if (c == 0) {
            throw DomainError("model: channel counts must be positive");
        }
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw DomainError("model: dropout must lie in [0, 1)");
    }
    if (!(t1_max_ms > 0.0 && t2_max_ms > 0.0 && pd_max > 0.0)) {
        throw DomainError("model: normalization constants must be positive");
    }
}

// ---------------------------------------------------------------- model

constexpr double kHeadBiasInit = 0.1;

Model::Model(const ModelConfig &config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    std::size_t in = config_.input_channels;
    for (auto out : config_.block_channels) {
        SeparableBlock b{nn::DepthwiseConv3x3(in), nn::PointwiseConv(in, out), nn::Dropout(config_.dropout)};
        // depthwise output feeds a linear map, pointwise output feeds a ReLU
        const double dw_std = std::sqrt(1.0 / 9.0);
        for (auto &w : b.depthwise.weight) {
            w = dw_std * rng.normal();
        }
        const double pw_std = std::sqrt(2.0 / static_cast<double>(in));
        for (auto &w : b.pointwise.weight) {
            w = pw_std * rng.normal();
        }
        blocks_.push_back(std::move(b));
        in = out;
    }
    for (auto out : config_.head_channels) {
        nn::PointwiseConv h(in, out);
        const double std = std::sqrt(2.0 / static_cast<double>(in));
        for (auto &w : h.weight) {
            w = std * rng.normal();
        }
        if (heads_.size() + 1 < config_.head_channels.size()) {
            std::fill(h.bias.begin(), h.bias.end(), kHeadBiasInit);
        } else {
            // zero output layer: the 3-wide ReLU bottleneck otherwise dies early in training
            std::fill(h.weight.begin(), h.weight.end(), 0.0);
        }
        heads_.push_back(std::move(h));
        in = out;
    }
}

Model build_model(const ModelConfig &config, std::uint64_t seed) { return Model(config, seed); }

Tensor4 Model::forward(const Tensor4 &input, Mode mode, std::uint64_t dropout_seed) {
    if (input.c != config_.input_channels) {
        throw DomainError("model forward: input channels do not match the model");
    }
    block_cache_.assign(blocks_.size(), {});
    head_inputs_.assign(heads_.size(), {});
    head_outputs_.assign(heads_.size(), {});
    Tensor4 x = input;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        auto &blk = blocks_[b];
        auto &cache = block_cache_[b];
        cache.input = std::move(x);
        cache.depthwise_out = blk.depthwise.forward(cache.input);
        cache.activated = nn::relu(blk.pointwise.forward(cache.depthwise_out));
        x = blk.dropout.forward(cache.activated, mode, derive_seed(dropout_seed, b));
    }
    for (std::size_t j = 0; j < heads_.size(); ++j) {
        head_inputs_[j] = std::move(x);
        x = heads_[j].forward(head_inputs_[j]);
        if (j + 1 < heads_.size()) {
            x = nn::relu(x);
            head_outputs_[j] = x;
        }
    }
    return x;
}

Tensor4 Model::infer(const Tensor4 &input) const {
    if (input.c != config_.input_channels) {
        throw DomainError("model forward: input channels do not match the model");
    }
    Tensor4 x = input;
    for (const auto &blk : blocks_) {
        x = nn::relu(blk.pointwise.forward(blk.depthwise.forward(x)));
    }
    for (std::size_t j = 0; j < heads_.size(); ++j) {
        x = heads_[j].forward(x);
        if (j + 1 < heads_.size()) {
            x = nn::relu(x);
        }
    }
    return x;
}

Tensor4 Model::backward(const Tensor4 &grad_output) {
    if (block_cache_.size() != blocks_.size() || head_inputs_.size() != heads_.size()) {
        throw DomainError("model backward: no forward pass recorded");
    }
    Tensor4 g = grad_output;
    for (std::size_t j = heads_.size(); j-- > 0;) {
        if (j + 1 < heads_.size()) {
            g = nn::relu_backward(head_outputs_[j], g);
        }
        g = heads_[j].backward(head_inputs_[j], g);
    }
    for (std::size_t b = blocks_.size(); b-- > 0;) {
        auto &blk = blocks_[b];
        const auto &cache = block_cache_[b];
        g = blk.dropout.backward(g);
        g = nn::relu_backward(cache.activated, g);
        g = blk.pointwise.backward(cache.depthwise_out, g);
        g = blk.depthwise.backward(cache.input, g);
    }
    return g;
}

void Model::zero_grad() {
    for (auto &b : blocks_) {
        b.depthwise.zero_grad();
        b.pointwise.zero_grad();
    }
    for (auto &h : heads_) {
        h.zero_grad();
    }
}

std::vector<nn::ParamRef> Model::params() {
    std::vector<nn::ParamRef> out;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto prefix = "block" + std::to_string(b);
        blocks_[b].depthwise.append_params(out, prefix + ".depthwise");
        blocks_[b].pointwise.append_params(out, prefix + ".pointwise");
    }
    for (std::size_t j = 0; j < heads_.size(); ++j) {
        heads_[j].append_params(out, "head" + std::to_string(j));
    }
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto &b : blocks_) {
        n += b.depthwise.weight.size() + b.depthwise.bias.size() + b.pointwise.weight.size() +
             b.pointwise.bias.size();
    }
    for (const auto &h : heads_) {
        n += h.weight.size() + h.bias.size();
    }
    return n;
}

// ---------------------------------------------------------------- tensors

Tensor4 to_input_tensor(std::span<const Tsmi *const> coeffs) {
    if (coeffs.empty()) {
        throw DomainError("to_input_tensor: no images");
    }
    const auto &first = *coeffs.front();
    Tensor4 t(coeffs.size(), first.frames, first.height, first.width);
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
        const auto &img = *coeffs[n];
        if (img.height != first.height || img.width != first.width || img.frames != first.frames) {
            throw DomainError("to_input_tensor: images differ in shape");
        }
        const std::size_t px = img.voxels();
        for (std::size_t p = 0; p < px; ++p) {
            for (std::size_t c = 0; c < img.frames; ++c) {
                t.data[(n * img.frames + c) * px + p] = img.data[p * img.frames + c];
            }
        }
    }
    return t;
}

Tensor4 to_input_tensor(const Tsmi &coeffs) {
    const Tsmi *one[] = {&coeffs};
    return to_input_tensor(std::span<const Tsmi *const>(one));
}

Targets to_targets(std::span<const ParametricMaps *const> maps, const ModelConfig &config) {
    if (maps.empty()) {
        throw DomainError("to_targets: no maps");
    }
    const auto &first = *maps.front();
    Targets t{Tensor4(maps.size(), 3, first.height, first.width), {}};
    t.mask.assign(t.values.size(), 0);
    const double scale[3] = {1.0 / config.t1_max_ms, 1.0 / config.t2_max_ms, 1.0 / config.pd_max};
    for (std::size_t n = 0; n < maps.size(); ++n) {
        const auto &m = *maps[n];
        if (m.height != first.height || m.width != first.width) {
            throw DomainError("to_targets: maps differ in shape");
        }
        for (int c = 0; c < 3; ++c) {
            const auto &ch = m.channel(c);
            for (std::size_t p = 0; p < m.voxels(); ++p) {
                const auto idx = (n * 3 + static_cast<std::size_t>(c)) * m.voxels() + p;
                t.values.data[idx] = ch[p] * scale[c];
                t.mask[idx] = m.mask[p];
            }
        }
    }
    return t;
}

MapPrediction predict(const Model &model, const Tsmi &coeffs) {
    const auto out = model.infer(to_input_tensor(coeffs));
    const auto &cfg = model.config();
    MapPrediction p;
    p.height = coeffs.height;
    p.width = coeffs.width;
    const std::size_t px = coeffs.voxels();
    p.t1_ms.resize(px);
    p.t2_ms.resize(px);
    p.pd.resize(px);
    for (std::size_t q = 0; q < px; ++q) {
        p.t1_ms[q] = out.data[q] * cfg.t1_max_ms;
        p.t2_ms[q] = out.data[px + q] * cfg.t2_max_ms;
        p.pd[q] = out.data[2 * px + q] * cfg.pd_max;
    }
    return p;
}

// ---------------------------------------------------------------- training

namespace {

void check_samples(std::span<const Sample> samples, const SubspaceBasis &basis, const Model &model) {
    for (const auto &s : samples) {
        if (s.tsmi.kind != TsmiKind::Compressed || static_cast<Eigen::Index>(s.tsmi.frames) != basis.d1()) {
            throw DomainError("train: samples must be compressed with the checkpoint basis");
        }
        if (s.tsmi.height != s.maps.height || s.tsmi.width != s.maps.width) {
            throw DomainError("train: TSMI and maps differ in size");
        }
    }
    if (static_cast<Eigen::Index>(model.config().input_channels) != basis.d1()) {
        throw DomainError("train: model input channels do not match basis d1");
    }
}

double batch_loss(const Model &model, std::span<const Sample> samples) {
    std::vector<const Tsmi *> in;
    std::vector<const ParametricMaps *> gt;
    for (const auto &s : samples) {
        in.push_back(&s.tsmi);
        gt.push_back(&s.maps);
    }
    const auto out = model.infer(to_input_tensor(in));
    const auto targets = to_targets(gt, model.config());
    return nn::mse_loss(out, targets.values, targets.mask).loss;
}

} // namespace

double evaluate_loss(const Model &model, std::span<const Sample> samples) {
    if (samples.empty()) {
        throw DomainError("evaluate_loss: empty sample set");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        sum += batch_loss(model, samples.subspan(i, 1));
    }
    return sum / static_cast<double>(samples.size());
}

Checkpoint train(Model model, const SubspaceBasis &basis, std::span<const Sample> train_set,
                 std::span<const Sample> validation_set, const TrainOptions &options, std::uint64_t seed,
                 const EpochCallback &on_epoch) {
    if (train_set.empty()) {
        throw DomainError("train: empty dataset");
    }
    if (options.batch_size == 0) {
        throw DomainError("train: batch_size must be positive");
    }
    check_samples(train_set, basis, model);
    check_samples(validation_set, basis, model);

    Checkpoint ckpt;
    ckpt.basis = basis;
    ckpt.seed = seed;
    ckpt.optimizer.learning_rate = options.learning_rate;
    ckpt.optimizer.beta1 = options.beta1;
    ckpt.optimizer.beta2 = options.beta2;
    ckpt.optimizer.epsilon = options.epsilon;

    auto params = model.params();
    Rng order_rng(derive_seed(seed, 0x5eed));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::uint64_t step = 0;
    bool done = false;
    double best_val = std::numeric_limits<double>::infinity();
    std::optional<Model> best_model;

    for (std::size_t epoch = 0; epoch < options.epochs && !done; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_sum = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            std::vector<Sample> augmented;
            std::vector<const Tsmi *> in;
            std::vector<const ParametricMaps *> gt;
            augmented.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const Sample &s = train_set[order[k]];
                if (options.augment) {
                    Rng arng(derive_seed(seed, 0x10000 + step * 4096 + (k - start)));
                    const auto p = draw_augment_params(options.augmentation, arng);
                    augmented.push_back(augment(s, p, arng.next()));
                } else {
                    augmented.push_back(s);
                }
            }
            for (const auto &s : augmented) {
                in.push_back(&s.tsmi);
                gt.push_back(&s.maps);
            }
            const auto x = to_input_tensor(in);
            const auto targets = to_targets(gt, model.config());
            if (std::none_of(targets.mask.begin(), targets.mask.end(), [](auto m) { return m != 0; })) {
                continue;
            }
            model.zero_grad();
            const auto out = model.forward(x, Mode::Train, derive_seed(seed, 0x20000000 + step));
            const auto loss = nn::mse_loss(out, targets.values, targets.mask);
            model.backward(loss.grad);
            nn::adam_step(params, ckpt.optimizer);
            ckpt.history.step_loss.push_back(loss.loss);
            epoch_sum += loss.loss;
            ++epoch_batches;
            ++step;
            if (options.max_steps > 0 && step >= options.max_steps) {
                done = true;
                break;
            }
        }
        const double train_loss = epoch_batches ? epoch_sum / static_cast<double>(epoch_batches) : 0.0;
        ckpt.history.epoch_train_loss.push_back(train_loss);
        double val_loss = std::nan("");
        if (!validation_set.empty()) {
            val_loss = evaluate_loss(model, validation_set);
            ckpt.history.epoch_val_loss.push_back(val_loss);
            if (val_loss < best_val) {
                best_val = val_loss;
                best_model = model;
                ckpt.best_epoch = epoch;
            }
        } else {
            ckpt.best_epoch = epoch;
        }
        ckpt.epochs = epoch + 1;
        if (on_epoch) {
            on_epoch(epoch, train_loss, val_loss);
        }
    }
    ckpt.model = best_model ? std::move(*best_model) : std::move(model);
    return ckpt;
}

// ---------------------------------------------------------------- inference

ReconResult reconstruct(const Tsmi &raw, const Checkpoint &checkpoint, double mask_threshold) {
    if (raw.kind != TsmiKind::Raw || static_cast<Eigen::Index>(raw.frames) != checkpoint.basis.d0()) {
        throw DomainError("reconstruct: TSMI frames do not match the checkpoint basis d0");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const Tsmi coeffs = compress_tsmi(raw, checkpoint.basis);
    const MapPrediction pred = predict(checkpoint.model, coeffs);
    const auto t1 = std::chrono::steady_clock::now();

    ReconResult r;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.maps = ParametricMaps::zeros(raw.height, raw.width);
    const Eigen::VectorXd energy = coeffs.matrix().rowwise().norm();
    const double peak = energy.size() ? energy.maxCoeff() : 0.0;
    if (!(peak > 0.0)) {
        return r;
    }
    for (std::size_t v = 0; v < raw.voxels(); ++v) {
        if (!(energy[static_cast<Eigen::Index>(v)] > mask_threshold * peak)) {
            continue;
        }
        const double t1v = std::max(pred.t1_ms[v], 1.0);
        r.maps.t1_ms[v] = t1v;
        r.maps.t2_ms[v] = std::clamp(pred.t2_ms[v], 1.0, t1v);
        r.maps.pd[v] = std::max(pred.pd[v], 0.0);
        r.maps.mask[v] = 1;
    }
    return r;
}

// ---------------------------------------------------------------- checkpoint I/O

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::size_t> &v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? std::string(1, sep) : std::string()) + std::to_string(v[i]);
    }
    return s;
}

std::vector<std::size_t> split_sizes(const std::string &s, char sep) {
    std::vector<std::size_t> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) {
            v.push_back(static_cast<std::size_t>(std::stoull(item)));
        }
    }
    return v;
}

std::uint32_t crc_of(const std::vector<double> &v, std::uint32_t crc = 0) {
    return static_cast<std::uint32_t>(::crc32(crc, reinterpret_cast<const Bytef *>(v.data()),
                                              static_cast<uInt>(v.size() * sizeof(double))));
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

void write_text(const fs::path &p, const std::string &s) {
    write_file_bytes(p, std::span(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
}

std::map<std::string, std::string> read_key_values(const fs::path &p) {
    std::ifstream in(p);
    if (!in) {
        throw IoError("cannot open " + p.string());
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

const std::string &require(const std::map<std::string, std::string> &kv, const std::string &key,
                           const fs::path &file) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw FormatError(file.string() + ": missing field '" + key + "'");
    }
    return it->second;
}

} // namespace

void save_checkpoint(const fs::path &dir, const Checkpoint &ckpt) {
    fs::create_directories(dir / "params");
    fs::create_directories(dir / "optimizer");
    Model model = ckpt.model; // params() needs a mutable model
    const auto params = model.params();

    std::ostringstream manifest;
    manifest << "mrf-checkpoint 1\n";
    std::uint32_t total_crc = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto &p = params[i];
        std::vector<std::uint64_t> dims(p.shape.begin(), p.shape.end());
        write_mrfa(dir / "params" / (p.name + ".mrfa"), MrfaArray::real(dims, *p.value));
        const auto crc = crc_of(*p.value);
        total_crc = crc_of(*p.value, total_crc);
        manifest << "param " << p.name << " " << join(p.shape, 'x') << " crc32=" << hex32(crc) << "\n";
        if (i < ckpt.optimizer.first_moment.size()) {
            write_mrfa(dir / "optimizer" / (p.name + ".m.mrfa"), MrfaArray::real(dims, ckpt.optimizer.first_moment[i]));
            write_mrfa(dir / "optimizer" / (p.name + ".v.mrfa"),
                       MrfaArray::real(dims, ckpt.optimizer.second_moment[i]));
        }
    }
    manifest << "total_parameters " << model.parameter_count() << "\n";
    manifest << "checksum " << hex32(total_crc) << "\n";
    write_text(dir / "manifest.txt", manifest.str());

    const auto &c = model.config();
    std::ostringstream mc;
    mc << "model.input_channels = " << c.input_channels << "\n";
    mc << "model.block_channels = " << join(c.block_channels, ',') << "\n";
    mc << "model.head_channels = " << join(c.head_channels, ',') << "\n";
    mc << "model.dropout = " << fmt(c.dropout) << "\n";
    mc << "model.t1_max_ms = " << fmt(c.t1_max_ms) << "\n";
    mc << "model.t2_max_ms = " << fmt(c.t2_max_ms) << "\n";
    mc << "model.pd_max = " << fmt(c.pd_max) << "\n";
    write_text(dir / "model.txt", mc.str());

    std::ostringstream opt;
    opt << "learning_rate = " << fmt(ckpt.optimizer.learning_rate) << "\n";
    opt << "beta1 = " << fmt(ckpt.optimizer.beta1) << "\n";
    opt << "beta2 = " << fmt(ckpt.optimizer.beta2) << "\n";
    opt << "epsilon = " << fmt(ckpt.optimizer.epsilon) << "\n";
    opt << "step = " << ckpt.optimizer.step << "\n";
    opt << "has_moments = " << (ckpt.optimizer.first_moment.empty() ? 0 : 1) << "\n";
    write_text(dir / "optimizer" / "adam.txt", opt.str());

    std::ostringstream meta;
    meta << "seed = " << ckpt.seed << "\n";
    meta << "epochs = " << ckpt.epochs << "\n";
    meta << "steps = " << ckpt.history.step_loss.size() << "\n";
    meta << "best_epoch = " << ckpt.best_epoch << "\n";
    write_text(dir / "meta.txt", meta.str());

    std::ostringstream loss;
    loss << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < ckpt.history.epoch_train_loss.size(); ++e) {
        loss << e << "," << fmt(ckpt.history.epoch_train_loss[e]) << ",";
        if (e < ckpt.history.epoch_val_loss.size()) {
            loss << fmt(ckpt.history.epoch_val_loss[e]);
        }
        loss << "\n";
    }
    write_text(dir / "loss.csv", loss.str());

    std::ostringstream steps;
    steps << "step,loss\n";
    for (std::size_t i = 0; i < ckpt.history.step_loss.size(); ++i) {
        steps << i << "," << fmt(ckpt.history.step_loss[i]) << "\n";
    }
    write_text(dir / "steps.csv", steps.str());

    save_basis(dir / "basis", ckpt.basis);
}

Checkpoint load_checkpoint(const fs::path &dir) {
    const auto mfile = dir / "model.txt";
    const auto kv = read_key_values(mfile);
    ModelConfig c;
    try {
        c.input_channels = std::stoull(require(kv, "model.input_channels", mfile));
        c.block_channels = split_sizes(require(kv, "model.block_channels", mfile), ',');
        c.head_channels = split_sizes(require(kv, "model.head_channels", mfile), ',');
        c.dropout = std::stod(require(kv, "model.dropout", mfile));
        c.t1_max_ms = std::stod(require(kv, "model.t1_max_ms", mfile));
        c.t2_max_ms = std::stod(require(kv, "model.t2_max_ms", mfile));
        c.pd_max = std::stod(require(kv, "model.pd_max", mfile));
    } catch (const std::invalid_argument &) {
        throw FormatError(mfile.string() + ": malformed number");
    }

    Checkpoint ckpt;
    ckpt.model = Model(c, 0);
    auto params = ckpt.model.params();

    std::ifstream man(dir / "manifest.txt");
    if (!man) {
        throw IoError("cannot open " + (dir / "manifest.txt").string());
    }
    std::string line;
    std::getline(man, line);
    if (line != "mrf-checkpoint 1") {
        throw FormatError((dir / "manifest.txt").string() + ": bad header line");
    }
    std::map<std::string, std::pair<std::string, std::string>> listed;
    std::string checksum;
    while (std::getline(man, line)) {
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "param") {
            std::string name, shape, crc;
            ls >> name >> shape >> crc;
            listed[name] = {shape, crc};
        } else if (kind == "checksum") {
            ls >> checksum;
        }
    }

    std::uint32_t total_crc = 0;
    const bool has_moments =
        std::stoi(require(read_key_values(dir / "optimizer" / "adam.txt"), "has_moments", dir / "optimizer" / "adam.txt")) != 0;
    for (auto &p : params) {
        auto it = listed.find(p.name);
        if (it == listed.end()) {
            throw FormatError("checkpoint manifest: missing parameter " + p.name);
        }
        if (it->second.first != join(p.shape, 'x')) {
            throw FormatError("checkpoint manifest: shape mismatch for " + p.name);
        }
        auto arr = read_mrfa_real(dir / "params" / (p.name + ".mrfa"), p.shape.size());
        if (arr.reals.size() != p.value->size()) {
            throw FormatError("checkpoint: parameter size mismatch for " + p.name);
        }
        *p.value = std::move(arr.reals);
        if ("crc32=" + hex32(crc_of(*p.value)) != it->second.second) {
            throw FormatError("checkpoint: checksum mismatch for " + p.name);
        }
        total_crc = crc_of(*p.value, total_crc);
        if (has_moments) {
            ckpt.optimizer.first_moment.push_back(
                read_mrfa_real(dir / "optimizer" / (p.name + ".m.mrfa"), p.shape.size()).reals);
            ckpt.optimizer.second_moment.push_back(
                read_mrfa_real(dir / "optimizer" / (p.name + ".v.mrfa"), p.shape.size()).reals);
        }
    }
    if (checksum != hex32(total_crc)) {
        throw FormatError("checkpoint: content checksum mismatch");
    }

    const auto ofile = dir / "optimizer" / "adam.txt";
    const auto okv = read_key_values(ofile);
    ckpt.optimizer.learning_rate = std::stod(require(okv, "learning_rate", ofile));
    ckpt.optimizer.beta1 = std::stod(require(okv, "beta1", ofile));
    ckpt.optimizer.beta2 = std::stod(require(okv, "beta2", ofile));
    ckpt.optimizer.epsilon = std::stod(require(okv, "epsilon", ofile));
    ckpt.optimizer.step = std::stoull(require(okv, "step", ofile));

    const auto metafile = dir / "meta.txt";
    const auto meta = read_key_values(metafile);
    ckpt.seed = std::stoull(require(meta, "seed", metafile));
    ckpt.epochs = std::stoull(require(meta, "epochs", metafile));
    ckpt.best_epoch = std::stoull(require(meta, "best_epoch", metafile));

    std::ifstream loss(dir / "loss.csv");
    std::getline(loss, line);
    while (std::getline(loss, line)) {
        std::stringstream ls(line);
        std::string e, tr, va;
        std::getline(ls, e, ',');
        std::getline(ls, tr, ',');
        std::getline(ls, va, ',');
        if (!tr.empty()) {
            ckpt.history.epoch_train_loss.push_back(std::stod(tr));
        }
        if (!va.empty()) {
            ckpt.history.epoch_val_loss.push_back(std::stod(va));
        }
    }

    std::ifstream steps(dir / "steps.csv");
    std::getline(steps, line);
    while (std::getline(steps, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw FormatError((dir / "steps.csv").string() + ": malformed line");
        }
        ckpt.history.step_loss.push_back(std::stod(line.substr(comma + 1)));
    }

    ckpt.basis = load_basis(dir / "basis");
    if (static_cast<Eigen::Index>(c.input_channels) != ckpt.basis.d1()) {
        throw FormatError("checkpoint: basis d1 does not match model input channels");
    }
    return ckpt;
}

} // namespace mrf
