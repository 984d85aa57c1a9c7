#include "mrf/cli.hpp"
#include "mrf/error.hpp"
#include "mrf/fcnn.hpp"
#include "mrf/mrfa.hpp"
#include "mrf/nn/adam.hpp"
#include "mrf/nn/gradcheck.hpp"
#include "kinks.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace mrf;
namespace fs = std::filesystem;

namespace {

const SubspaceBasis &coarse_basis() {
    static const SubspaceBasis b = fit_subspace(
        build_dictionary(make_fisp_schedule(200), ParameterGrid::from_ranges(100, 4000, 100, 20, 600, 20), true), 10);
    return b;
}

RunConfig small_config(std::size_t side) {
    RunConfig c;
    c.phantom.height = c.phantom.width = side;
    return c;
}

nn::Tensor4 random_input(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::uint32_t seed) {
    nn::Tensor4 t(n, c, h, w);
    t.data = testing_support::random_vector(t.size(), seed);
    return t;
}

// The output layer starts at zero, which would make every upstream gradient vanish.
void randomize_output_layer(Model &m, std::uint32_t seed) {
    auto params = m.params();
    auto &w = *params[params.size() - 2].value;
    w = testing_support::random_vector(w.size(), seed);
}

std::vector<std::vector<double>> snapshot(Model &m) {
    std::vector<std::vector<double>> out;
    for (const auto &p : m.params()) {
        out.push_back(*p.value);
    }
    return out;
}

} // namespace

TEST(Model, DefaultChannelTrace) {
    const ModelConfig c;
    EXPECT_EQ(c.channel_trace(), (std::vector<std::size_t>{10, 256, 128, 64, 32, 3, 3}));
    const Model m(c, 1);
    ASSERT_EQ(m.blocks().size(), 4u);
    ASSERT_EQ(m.heads().size(), 2u);
    EXPECT_EQ(m.blocks()[0].depthwise.weight.size(), 10u * 9);
    EXPECT_EQ(m.heads()[1].in_channels, 3u);
    EXPECT_EQ(m.heads()[1].out_channels, 3u);
}

TEST(Model, InvalidConfigsThrow) {
    ModelConfig c;
    c.head_channels = {3, 2};
    EXPECT_THROW(build_model(c, 1), DomainError);
    c = {};
    c.block_channels = {64, 0};
    EXPECT_THROW(build_model(c, 1), DomainError);
    c = {};
    c.dropout = 1.0;
    EXPECT_THROW(build_model(c, 1), DomainError);
    c = {};
    c.t2_max_ms = 0.0;
    EXPECT_THROW(build_model(c, 1), DomainError);
}

TEST(Model, ParameterCountClosedFormAndEnumeration) {
    const ModelConfig c;
    std::size_t closed = 0, cin = c.input_channels;
    for (auto cout : c.block_channels) {
        closed += 9 * cin + cin + cin * cout + cout;
        cin = cout;
    }
    for (auto cout : c.head_channels) {
        closed += cin * cout + cout;
        cin = cout;
    }
    EXPECT_EQ(closed, 50739u);
    Model m(c, 3);
    EXPECT_EQ(m.parameter_count(), closed);

    Checkpoint ck;
    ck.model = m;
    ck.basis = coarse_basis();
    const auto dir = testing_support::scratch_dir("fcnn_count");
    save_checkpoint(dir, ck);
    std::size_t enumerated = 0, arrays = 0;
    for (const auto &e : fs::directory_iterator(dir / "params")) {
        enumerated += read_mrfa(e.path()).count();
        ++arrays;
    }
    EXPECT_EQ(enumerated, closed);
    EXPECT_EQ(arrays, 4u * 4 + 2 * 2);
}

TEST(Model, SeedDeterminesInitialization) {
    Model a(ModelConfig{}, 5), b(ModelConfig{}, 5), c(ModelConfig{}, 6);
    EXPECT_EQ(snapshot(a), snapshot(b));
    EXPECT_NE(snapshot(a), snapshot(c));
}

TEST(Model, FullResolutionOutput) {
    const Model m(ModelConfig{}, 2);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {17, 17}, {64, 64}, {8, 23}}) {
        const auto y = m.infer(random_input(1, 10, h, w, 1));
        EXPECT_EQ(y.n, 1u);
        EXPECT_EQ(y.c, 3u);
        EXPECT_EQ(y.h, h);
        EXPECT_EQ(y.w, w);
        EXPECT_TRUE(y.all_finite());
    }
    EXPECT_THROW(m.infer(random_input(1, 9, 8, 8, 1)), DomainError);
}

TEST(Model, ZeroWeightsGiveZeroMaps) {
    Model m(ModelConfig{}, 2);
    for (auto &p : m.params()) {
        std::fill(p.value->begin(), p.value->end(), 0.0);
    }
    Tsmi coeffs = Tsmi::zeros(9, 8, 10, TsmiKind::Compressed);
    coeffs.data = testing_support::random_vector(coeffs.data.size(), 3);
    const auto p = predict(m, coeffs);
    for (std::size_t v = 0; v < 72; ++v) {
        EXPECT_EQ(p.t1_ms[v], 0.0);
        EXPECT_EQ(p.t2_ms[v], 0.0);
        EXPECT_EQ(p.pd[v], 0.0);
    }
}

TEST(Model, EvalIdempotentAndMatchesForward) {
    Model m(ModelConfig{}, 4);
    randomize_output_layer(m, 5);
    const auto x = random_input(2, 10, 9, 11, 2);
    const auto a = m.infer(x);
    EXPECT_EQ(a, m.infer(x));
    EXPECT_EQ(a, m.forward(x, nn::Mode::Eval, 0));
    EXPECT_NE(a, m.forward(x, nn::Mode::Train, 1));
}

TEST(Model, OutputLayerStartsAtZero) {
    Model m(ModelConfig{}, 3);
    const auto y = m.infer(random_input(1, 10, 8, 8, 4));
    for (double v : y.data) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Model, GoldenOutput) {
    Model m(ModelConfig{}, 7);
    nn::Tensor4 x(1, 10, 8, 8);
    Rng rng(11);
    for (auto &v : x.data) {
        v = rng.uniform(-1.0, 1.0);
    }
    // five fixed Adam steps toward a constant target so that every layer contributes
    nn::Tensor4 target(1, 3, 8, 8);
    std::fill(target.data.begin(), target.data.end(), 0.5);
    const std::vector<std::uint8_t> mask(target.size(), 1);
    nn::AdamState adam;
    adam.learning_rate = 0.01;
    for (int step = 0; step < 5; ++step) {
        m.zero_grad();
        m.backward(nn::mse_loss(m.forward(x, nn::Mode::Eval, 0), target, mask).grad);
        nn::adam_step(m.params(), adam);
    }
    const auto y = m.infer(x);
    // Recorded from the first verified build.
    const std::vector<std::pair<std::size_t, double>> golden = {
        {0, 0.26017829875101434},  {1, 0.4191868321421755},  {63, 0.3254630360687325},
        {64, 0.26017829875101434}, {100, 0.61284960488334939}, {128, 0.26017829875101434},
        {150, 0.71827491647853703}, {191, 0.3254630360687325},
    };
    for (const auto &[i, v] : golden) {
        EXPECT_NEAR(y.data[i], v, 1e-10) << i;
    }
}

TEST(Model, EndToEndGradientSpotChecks) {
    for (std::uint32_t seed = 1; seed <= 3; ++seed) {
        ModelConfig c;
        c.block_channels = {16, 12, 8, 6};
        Model m(c, seed);
        randomize_output_layer(m, seed + 30);
        const auto x = random_input(2, 10, 8, 8, seed + 10);
        const auto target = random_input(2, 3, 8, 8, seed + 20);
        std::vector<std::uint8_t> mask(target.size(), 1);
        m.zero_grad();
        const auto out = m.forward(x, nn::Mode::Train, 99);
        m.backward(nn::mse_loss(out, target, mask).grad);
        auto params = m.params();
        auto &w = *params[0].value;
        const auto analytic = *params[0].grad;
        Rng rng(seed);
        const auto spots = testing_support::kink_free_coords(m, 0, x, nn::Mode::Train, 99, 1e-5, 5, rng);
        ASSERT_EQ(spots.coords.size(), 5u);
        const auto &coords = spots.coords;
        auto loss = [&] { return nn::mse_loss(m.forward(x, nn::Mode::Train, 99), target, mask).loss; };
        const auto rep = nn::grad_check(loss, w, analytic, 1e-5, 1e-4, coords);
        EXPECT_LT(rep.max_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(Train, OverfitsSingleSample) {
    auto cfg = small_config(32);
    cfg.model.dropout = 0.0;
    const auto samples = make_samples(cfg, &coarse_basis(), 21, 0, 1);
    TrainOptions o;
    o.epochs = 2000;
    o.batch_size = 1;
    o.augment = false;
    const auto ck = train(build_model(cfg.model, 1), coarse_basis(), samples, {}, o, 3);
    ASSERT_EQ(ck.history.step_loss.size(), 2000u);
    EXPECT_LE(ck.history.step_loss.back(), ck.history.step_loss.front() / 100.0)
        << ck.history.step_loss.front() << " -> " << ck.history.step_loss.back();
}

TEST(Train, ZeroLearningRateKeepsParameters) {
    const auto cfg = small_config(16);
    const auto samples = make_samples(cfg, &coarse_basis(), 4, 0, 2);
    TrainOptions o;
    o.epochs = 3;
    o.learning_rate = 0.0;
    Model m = build_model(cfg.model, 8);
    const auto before = snapshot(m);
    auto ck = train(m, coarse_basis(), samples, {}, o, 3);
    EXPECT_EQ(snapshot(ck.model), before);
    EXPECT_EQ(ck.optimizer.step, o.epochs * ((2 + o.batch_size - 1) / o.batch_size));
}

TEST(Train, KeepsLowestValidationEpoch) {
    const auto cfg = small_config(16);
    const auto samples = make_samples(cfg, &coarse_basis(), 6, 0, 3);
    const auto val = make_samples(cfg, &coarse_basis(), 6, 3, 2);
    TrainOptions o;
    o.epochs = 6;
    o.batch_size = 1;
    o.learning_rate = 0.01;
    const auto ck = train(build_model(cfg.model, 2), coarse_basis(), samples, val, o, 4);
    const auto &v = ck.history.epoch_val_loss;
    ASSERT_EQ(v.size(), 6u);
    const auto best = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    EXPECT_EQ(ck.best_epoch, best);
    EXPECT_EQ(evaluate_loss(ck.model, val), v[best]);
    const auto no_val = train(build_model(cfg.model, 2), coarse_basis(), samples, {}, o, 4);
    EXPECT_EQ(no_val.best_epoch, 5u);
}

TEST(Train, AugmentationChangesStepTwoLoss) {
    const auto cfg = small_config(16);
    const auto samples = make_samples(cfg, &coarse_basis(), 4, 0, 4);
    TrainOptions on;
    on.epochs = 1;
    on.batch_size = 2;
    on.max_steps = 2;
    TrainOptions off = on;
    off.augment = false;
    const auto a = train(build_model(cfg.model, 1), coarse_basis(), samples, {}, on, 9);
    const auto b = train(build_model(cfg.model, 1), coarse_basis(), samples, {}, off, 9);
    ASSERT_EQ(a.history.step_loss.size(), 2u);
    ASSERT_EQ(b.history.step_loss.size(), 2u);
    EXPECT_NE(a.history.step_loss[1], b.history.step_loss[1]);
}

TEST(Train, DeterministicAndBasisUntouched) {
    const auto cfg = small_config(16);
    const auto samples = make_samples(cfg, &coarse_basis(), 5, 0, 3);
    const auto val = make_samples(cfg, &coarse_basis(), 5, 3, 1);
    TrainOptions o;
    o.epochs = 2;
    o.batch_size = 2;
    const SubspaceBasis basis = coarse_basis();
    auto a = train(build_model(cfg.model, 1), basis, samples, val, o, 9);
    auto b = train(build_model(cfg.model, 1), basis, samples, val, o, 9);
    EXPECT_EQ(snapshot(a.model), snapshot(b.model));
    EXPECT_EQ(a.history.step_loss, b.history.step_loss);
    EXPECT_EQ(a.history.epoch_val_loss.size(), 2u);
    EXPECT_EQ(a.basis.basis, coarse_basis().basis);
    EXPECT_EQ(basis.basis, coarse_basis().basis);
}

TEST(Train, RejectsBadInputs) {
    const auto cfg = small_config(16);
    const auto samples = make_samples(cfg, &coarse_basis(), 5, 0, 1);
    TrainOptions o;
    o.epochs = 1;
    EXPECT_THROW(train(build_model(cfg.model, 1), coarse_basis(), {}, {}, o, 1), DomainError);
    auto raw = samples;
    raw[0].tsmi.kind = TsmiKind::Raw;
    EXPECT_THROW(train(build_model(cfg.model, 1), coarse_basis(), raw, {}, o, 1), DomainError);
    const auto other = fit_subspace(
        build_dictionary(make_fisp_schedule(200), ParameterGrid::from_ranges(100, 4000, 400, 20, 600, 40), true), 8);
    EXPECT_THROW(train(build_model(cfg.model, 1), other, samples, {}, o, 1), DomainError);
}

TEST(Reconstruct, ZeroTsmiFullyMaskedAndDeterministic) {
    Checkpoint ck;
    ck.model = build_model(ModelConfig{}, 3);
    ck.basis = coarse_basis();
    const auto zero = reconstruct(Tsmi::zeros(12, 12, 200, TsmiKind::Raw), ck);
    for (auto m : zero.maps.mask) {
        EXPECT_FALSE(m);
    }
    const auto cfg = small_config(24);
    const auto maps = make_phantom(cfg, 4);
    const auto raw = acquire_sample(maps, cfg.make_schedule(), cfg.make_scheme(24, 24), 0.005, 2, nullptr);
    const auto a = reconstruct(raw.tsmi, ck), b = reconstruct(raw.tsmi, ck);
    EXPECT_EQ(a.maps, b.maps);
    EXPECT_NO_THROW(a.maps.validate());
    EXPECT_GE(a.seconds, 0.0);
    EXPECT_THROW(reconstruct(Tsmi::zeros(4, 4, 150, TsmiKind::Raw), ck), DomainError);
}

TEST(Checkpoint, RoundTripAndChecksum) {
    const auto cfg = small_config(16);
    const auto samples = make_samples(cfg, &coarse_basis(), 6, 0, 2);
    TrainOptions o;
    o.epochs = 2;
    auto ck = train(build_model(cfg.model, 2), coarse_basis(), samples, samples, o, 4);
    const auto dir = testing_support::scratch_dir("fcnn_ckpt");
    save_checkpoint(dir, ck);
    auto back = load_checkpoint(dir);
    EXPECT_EQ(snapshot(back.model), snapshot(ck.model));
    EXPECT_EQ(back.model.config(), ck.model.config());
    EXPECT_EQ(back.basis.basis, ck.basis.basis);
    EXPECT_EQ(back.optimizer.step, ck.optimizer.step);
    EXPECT_EQ(back.optimizer.first_moment, ck.optimizer.first_moment);
    EXPECT_EQ(back.history.step_loss, ck.history.step_loss);
    EXPECT_EQ(back.seed, ck.seed);
    EXPECT_EQ(back.epochs, ck.epochs);
    EXPECT_EQ(back.best_epoch, ck.best_epoch);
    EXPECT_TRUE(fs::exists(dir / "loss.csv"));

    // Flip one stored weight and the checksum must catch it.
    const auto p = dir / "params" / "head1.bias.mrfa";
    auto arr = read_mrfa(p);
    arr.reals[0] += 1.0;
    write_mrfa(p, arr);
    EXPECT_THROW(load_checkpoint(dir), FormatError);
}
