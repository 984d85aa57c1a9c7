// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every selected criterion passes.
//
//   mrf_acceptance [--work DIR] [--only 1,2,...]

#include "mrf/cli.hpp"
#include "mrf/config.hpp"
#include "mrf/evaluate.hpp"
#include "mrf/fcnn.hpp"
#include "mrf/io.hpp"
#include "mrf/matching.hpp"
#include "mrf/mrfa.hpp"
#include "mrf/nn/gradcheck.hpp"
#include "mrf/nn/layers.hpp"
#include "kinks.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace mrf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_work = "acceptance_work";

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void log(const std::string &msg) { std::cout << "  .. " << msg << std::endl; }

// Dictionary with at least 1e5 atoms for the matching and timing criteria.
const Dictionary &bench_dictionary() {
    static const Dictionary d =
        build_dictionary(make_fisp_schedule(), ParameterGrid::from_ranges(100, 4000, 10, 20, 600, 2), true);
    return d;
}

// ------------------------------------------------------------------ 1

Outcome architecture() {
    const ModelConfig cfg;
    const Model m = build_model(cfg, 1);
    std::vector<std::size_t> trace{m.blocks().front().depthwise.channels};
    bool kernels_ok = true;
    for (const auto &b : m.blocks()) {
        kernels_ok &= b.depthwise.weight.size() == 9 * b.depthwise.channels;
        kernels_ok &= b.pointwise.in_channels == b.depthwise.channels;
        trace.push_back(b.pointwise.out_channels);
    }
    for (const auto &h : m.heads()) {
        kernels_ok &= h.weight.size() == h.in_channels * h.out_channels;
        trace.push_back(h.out_channels);
    }
    const bool trace_ok = trace == std::vector<std::size_t>{10, 256, 128, 64, 32, 3, 3} && m.blocks().size() == 4 &&
                          m.heads().size() == 2;
    bool dims_ok = true;
    for (std::size_t h : {8, 17, 64, 256}) {
        for (std::size_t w : {8, 17, 64, 256}) {
            nn::Tensor4 x(1, 10, h, w);
            x.data = testing_support::random_vector(x.size(), static_cast<std::uint32_t>(h * 1000 + w));
            const auto y = m.infer(x);
            dims_ok &= y.c == 3 && y.h == h && y.w == w && y.all_finite();
        }
    }
    std::ostringstream trace_s;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        trace_s << (i ? "," : "") << trace[i];
    }
    return {trace_ok && kernels_ok && dims_ok,
            "trace (" + trace_s.str() + "), 3x3 depthwise + 1x1 heads " + (kernels_ok ? "ok" : "BAD") +
                ", 16 HxW sizes " + (dims_ok ? "preserved" : "NOT preserved")};
}

// ------------------------------------------------------------------ 2

double dot(const nn::Tensor4 &a, const nn::Tensor4 &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a.data[i] * b.data[i];
    }
    return s;
}

nn::Tensor4 rand_t(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::uint32_t seed) {
    nn::Tensor4 t(n, c, h, w);
    t.data = testing_support::random_vector(t.size(), seed);
    return t;
}

Outcome gradients() {
    using nn::grad_check;
    double worst_layer = 0.0, worst_model = 0.0;
    std::size_t checked = 0, rejected = 0;
    const double h = 1e-5;
    for (std::uint32_t seed = 1; seed <= 20; ++seed) {
        const std::uint32_t s = seed * 101;
        {
            nn::DepthwiseConv3x3 conv(3);
            conv.weight = testing_support::random_vector(27, s);
            conv.bias = testing_support::random_vector(3, s + 1);
            auto x = rand_t(2, 3, 5, 6, s + 2);
            const auto r = rand_t(2, 3, 5, 6, s + 3);
            conv.zero_grad();
            const auto gx = conv.backward(x, r);
            auto loss = [&] { return dot(conv.forward(x), r); };
            for (auto rep : {grad_check(loss, x.data, gx.data, h, 1e-6),
                             grad_check(loss, conv.weight, conv.grad_weight, h, 1e-6),
                             grad_check(loss, conv.bias, conv.grad_bias, h, 1e-6)}) {
                worst_layer = std::max(worst_layer, rep.max_relative_error);
            }
        }
        {
            nn::PointwiseConv conv(4, 5);
            conv.weight = testing_support::random_vector(20, s);
            conv.bias = testing_support::random_vector(5, s + 1);
            auto x = rand_t(2, 4, 4, 3, s + 2);
            const auto r = rand_t(2, 5, 4, 3, s + 3);
            conv.zero_grad();
            const auto gx = conv.backward(x, r);
            auto loss = [&] { return dot(conv.forward(x), r); };
            for (auto rep : {grad_check(loss, x.data, gx.data, h, 1e-6),
                             grad_check(loss, conv.weight, conv.grad_weight, h, 1e-6),
                             grad_check(loss, conv.bias, conv.grad_bias, h, 1e-6)}) {
                worst_layer = std::max(worst_layer, rep.max_relative_error);
            }
        }
        {
            auto x = rand_t(1, 3, 4, 4, s);
            for (auto &v : x.data) {
                v += v >= 0 ? 0.05 : -0.05;
            }
            const auto r = rand_t(1, 3, 4, 4, s + 1);
            const auto g = nn::relu_backward(x, r);
            auto loss = [&] { return dot(nn::relu(x), r); };
            worst_layer = std::max(worst_layer, grad_check(loss, x.data, g.data, h, 1e-6).max_relative_error);
        }
        {
            nn::Dropout d(0.3);
            auto x = rand_t(1, 2, 5, 5, s);
            const auto r = rand_t(1, 2, 5, 5, s + 1);
            d.forward(x, nn::Mode::Train, s);
            const auto g = d.backward(r);
            nn::Dropout probe(0.3);
            auto loss = [&] { return dot(probe.forward(x, nn::Mode::Train, s), r); };
            worst_layer = std::max(worst_layer, grad_check(loss, x.data, g.data, h, 1e-6).max_relative_error);
        }
        {
            auto p = rand_t(1, 3, 4, 4, s);
            const auto t = rand_t(1, 3, 4, 4, s + 1);
            const auto mv = testing_support::random_vector(p.size(), s + 2);
            std::vector<std::uint8_t> mask(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                mask[i] = mv[i] > -0.5;
            }
            const auto res = nn::mse_loss(p, t, mask);
            auto loss = [&] { return nn::mse_loss(p, t, mask).loss; };
            worst_layer = std::max(worst_layer, grad_check(loss, p.data, res.grad.data, h, 1e-6).max_relative_error);
        }
        {
            // Full default architecture, train mode with a fixed dropout mask.
            Model m(ModelConfig{}, seed);
            {
                // the output layer starts at zero; give upstream layers a nonzero gradient
                auto ps = m.params();
                auto &w = *ps[ps.size() - 2].value;
                w = testing_support::random_vector(w.size(), s + 9);
            }
            const auto x = rand_t(2, 10, 8, 8, s + 7);
            const auto target = rand_t(2, 3, 8, 8, s + 8);
            std::vector<std::uint8_t> mask(target.size(), 1);
            m.zero_grad();
            m.backward(nn::mse_loss(m.forward(x, nn::Mode::Train, s), target, mask).grad);
            auto params = m.params();
            auto &w = *params[0].value;
            const auto analytic = *params[0].grad;
            Rng rng(s);
            const auto spots = testing_support::kink_free_coords(m, 0, x, nn::Mode::Train, s, h, 5, rng);
            rejected += spots.rejected;
            checked += spots.coords.size();
            auto loss = [&] { return nn::mse_loss(m.forward(x, nn::Mode::Train, s), target, mask).loss; };
            const auto rep = grad_check(loss, w, analytic, h, 1e-4, spots.coords);
            worst_model = std::max(worst_model, rep.max_relative_error);
        }
    }
    return {worst_layer < 1e-6 && worst_model < 1e-4 && checked == 100,
            "20 seeds; worst layer rel err " + fmt("%.2e", worst_layer) + " (< 1e-6), worst end-to-end " +
                fmt("%.2e", worst_model) + " (< 1e-4) on " + std::to_string(checked) +
                " first-layer weights (" + std::to_string(rejected) + " draws straddled a ReLU kink)"};
}

// ------------------------------------------------------------------ 3

Outcome epg_vs_isochromat() {
    const auto s = make_fisp_schedule();
    Rng rng(2024);
    double worst = 0.0;
    const int pairs = 24;
    for (int i = 0; i < pairs; ++i) {
        const double t1 = rng.uniform(100.0, 4000.0);
        const double t2 = rng.uniform(20.0, std::min(600.0, t1));
        const auto f = simulate_fingerprint(s, {t1, t2, 1.0});
        const auto ref = testing_support::isochromat_fingerprint(s.flip_angles_deg, s.tr_ms, s.te_ms,
                                                                 s.inversion_delay_ms, t1, t2, 2048);
        for (std::size_t k = 0; k < ref.size(); ++k) {
            worst = std::max(worst, std::abs(f[static_cast<Eigen::Index>(k)] - ref[k]));
        }
    }
    return {worst <= 1e-3, std::to_string(pairs) + " random (T1,T2), 200 pulses, 2048 spins; max abs diff " +
                               fmt("%.2e", worst) + " (<= 1e-3)"};
}

// ------------------------------------------------------------------ 4

Outcome subspace_fidelity() {
    RunConfig cfg;
    const auto d = build_dictionary(cfg.make_schedule(), cfg.make_grid(), true);
    const auto b = fit_subspace(d, 10);
    const RowMatrix rec = reconstruct(project(d.atoms, b), b);
    const double rel = (d.atoms - rec).norm() / d.atoms.norm();
    // Oracle: eigen-decomposition of the Gram matrix gives the full spectrum.
    const Eigen::MatrixXd gram = d.atoms.transpose() * d.atoms;
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().reverse();
    const double oracle = ev.head(10).sum() / ev.sum();
    const double diff = std::abs(b.captured_energy_fraction() - oracle);
    return {rel <= 1e-2 && diff <= 1e-10,
            std::to_string(d.size()) + " atoms; relative error " + fmt("%.3e", rel) + " (<= 1e-2); energy fraction " +
                fmt("%.12f", b.captured_energy_fraction()) + ", oracle diff " + fmt("%.1e", diff) + " (<= 1e-10)"};
}

// ------------------------------------------------------------------ 5

Outcome matching_exactness() {
    const auto &d = bench_dictionary();
    log("bench dictionary: " + std::to_string(d.size()) + " atoms");
    const auto full = match_full(d.atoms, d);
    std::size_t exact = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        exact += full[i].t1_ms == d.lut[i].t1_ms && full[i].t2_ms == d.lut[i].t2_ms;
    }
    const auto b = fit_subspace(d, 10);
    const auto comp = match_compressed(project(d.atoms, b), d, b);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        agree += comp[i].index == full[i].index;
    }
    const double frac = static_cast<double>(agree) / static_cast<double>(d.size());
    return {d.size() >= 100000 && exact == d.size() && frac >= 0.99,
            std::to_string(d.size()) + " atoms; full DM exact " + std::to_string(exact) + "/" +
                std::to_string(d.size()) + "; compressed agrees on " + fmt("%.4f", 100 * frac) + "% (>= 99%)"};
}

// ------------------------------------------------------------------ 6

struct TrainedRun {
    Checkpoint checkpoint;
    bool ready = false;
};
TrainedRun g_trained;

Outcome end_to_end() {
    RunConfig cfg; // 64x64 phantoms, fraction 1/16, sigma 0.005, augmentation on, 50 + 5 samples
    const std::uint64_t seed = 20241019;
    const auto d = build_dictionary(cfg.make_schedule(), cfg.make_grid(), true);
    const auto basis = fit_subspace(d, static_cast<Eigen::Index>(cfg.d1));
    const auto train_set = make_samples(cfg, &basis, seed, 0, cfg.training.train_samples);
    const auto val_set = make_samples(cfg, &basis, seed, cfg.training.train_samples, cfg.training.val_samples);
    const std::size_t first_test = cfg.training.train_samples + cfg.training.val_samples;
    const auto test_set = make_samples(cfg, nullptr, seed, first_test, cfg.evaluation.test_samples);
    log("training on " + std::to_string(train_set.size()) + " phantoms for " +
        std::to_string(cfg.training.options.epochs) + " epochs");
    const auto t0 = Clock::now();
    auto ck = train(build_model(cfg.model, derive_seed(seed, 1)), basis, train_set, val_set, cfg.training.options,
                    derive_seed(seed, 2), [&](std::size_t epoch, double tl, double vl) {
                        if (epoch % 10 == 9) {
                            log("epoch " + std::to_string(epoch + 1) + " train " + fmt("%.5f", tl) + " val " +
                                fmt("%.5f", vl) + " (" + fmt("%.0f", elapsed(t0)) + " s)");
                        }
                    });
    log("kept parameters of epoch " + std::to_string(ck.best_epoch + 1) + " (lowest validation loss)");
    save_checkpoint(g_work / "c6_checkpoint", ck);

    const MetricRanges ranges{cfg.model.t1_max_ms, cfg.model.t2_max_ms, cfg.model.pd_max};
    std::vector<ParametricMaps> gt, net, dm;
    for (const auto &s : test_set) {
        auto n = reconstruct(s.tsmi, ck, cfg.evaluation.mask_threshold).maps;
        auto m = match_maps(s.tsmi, d, &basis, cfg.match_options());
        // Both methods are scored on the same voxels.
        auto g = s.maps;
        for (std::size_t v = 0; v < g.voxels(); ++v) {
            g.mask[v] = g.mask[v] && n.mask[v] && m.mask[v];
        }
        gt.push_back(std::move(g));
        net.push_back(std::move(n));
        dm.push_back(std::move(m));
    }
    const auto rn = evaluate(net, gt, ranges, "network");
    const auto rd = evaluate(dm, gt, ranges, "dm_compressed");
    {
        std::ofstream f(g_work / "c6_report.csv");
        f << report_csv_header() << "\n" << report_csv_row(rn) << "\n" << report_csv_row(rd) << "\n";
    }
    const double n1 = rn.normalized_mae(0, ranges), n2 = rn.normalized_mae(1, ranges);
    const double d1 = rd.normalized_mae(0, ranges), d2 = rd.normalized_mae(1, ranges);
    g_trained = {std::move(ck), true};
    return {n1 <= 0.10 && n2 <= 0.10 && rn.mae[0] < rd.mae[0] && rn.mae[1] < rd.mae[1],
            std::to_string(test_set.size()) + " held-out phantoms, " + std::to_string(rn.voxels) +
                " voxels; network nMAE T1 " + fmt("%.4f", n1) + " T2 " + fmt("%.4f", n2) +
                " (<= 0.10); compressed DM nMAE T1 " + fmt("%.4f", d1) + " T2 " + fmt("%.4f", d2)};
}

// ------------------------------------------------------------------ 7

Outcome timing() {
    RunConfig cfg;
    const auto &d = bench_dictionary();
    Checkpoint ck;
    if (g_trained.ready) {
        ck = g_trained.checkpoint;
    } else {
        ck.model = build_model(cfg.model, 1);
        ck.basis = fit_subspace(build_dictionary(cfg.make_schedule(), cfg.make_grid(), true), 10);
    }
    const std::size_t n = 256;
    const auto maps = make_phantom(cfg, 77, nullptr, n, n);
    const auto s = acquire_sample(maps, cfg.make_schedule(), cfg.make_scheme(n, n), cfg.undersampling.noise_sigma,
                                  78, nullptr);
    const auto r = reconstruct(s.tsmi, ck, cfg.evaluation.mask_threshold);
    const auto t0 = Clock::now();
    const auto m = match_maps(s.tsmi, d, nullptr, cfg.match_options());
    const double dm_secs = elapsed(t0);
    const auto csv = g_work / "bench.csv";
    append_bench_row(csv, {"network", n, n, d.d0(), static_cast<std::size_t>(ck.basis.d1()), d.size(), r.seconds});
    append_bench_row(csv, {"dm_full", n, n, d.d0(), d.d0(), d.size(), dm_secs});
    const double ratio = dm_secs / r.seconds;
    return {d.size() >= 100000 && ratio >= 10.0,
            "256x256, " + std::to_string(d.size()) + " atoms; network " + fmt("%.3f", r.seconds) + " s, full DM " +
                fmt("%.1f", dm_secs) + " s, speedup " + fmt("%.0f", ratio) + "x (>= 10x)"};
}

// ------------------------------------------------------------------ 8

std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const fs::path &root) {
    std::map<std::string, std::vector<std::uint8_t>> m;
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            m[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
        }
    }
    return m;
}

// bench.csv keeps everything but the trailing seconds column.
std::string bench_without_timing(const fs::path &p) {
    std::ifstream f(p);
    std::string line, out;
    while (std::getline(f, line)) {
        out += line.substr(0, line.rfind(',')) + "\n";
    }
    return out;
}

Outcome reproducibility() {
    const fs::path root = g_work / "c8";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto cfg_path = root / "run.cfg";
    {
        std::ofstream f(cfg_path);
        f << "training.train_samples = 4\ntraining.val_samples = 1\ntraining.epochs = 2\n";
    }
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"dict", "dict"},
        {"basis", "basis {run}/dict"},
        {"phantom", "phantom --grid-tissues"},
        {"acquire", "acquire {run}/phantom"},
        {"acquire_c", "acquire {run}/phantom --basis {run}/basis --compress"},
        {"match", "match {run}/acquire {run}/dict"},
        {"match_c", "match {run}/acquire_c {run}/dict --basis {run}/basis"},
        {"train", "train {run}/basis"},
        {"recon", "recon {run}/acquire {run}/train"},
        {"eval", "eval {run}/recon {run}/phantom --method network"},
        {"bench", "bench {run}/train {run}/dict --size 64 --compressed-dm"},
    };
    std::string failure;
    for (const char *run : {"run1", "run2"}) {
        const auto dir = root / run;
        for (const auto &[name, args] : commands) {
            std::string a = args;
            for (std::size_t pos; (pos = a.find("{run}")) != std::string::npos;) {
                a.replace(pos, 5, dir.string());
            }
            const std::string cmd = std::string(MRFCNN_EXE) + " " + a + " --config " + cfg_path.string() +
                                    " --seed 17 --out " + (dir / name).string() + " > " +
                                    (root / (std::string(run) + "_" + name + ".log")).string() + " 2>&1";
            if (std::system(cmd.c_str()) != 0) {
                failure = "command '" + name + "' failed";
            }
        }
    }
    if (!failure.empty()) {
        return {false, failure};
    }
    std::size_t compared = 0, differing = 0;
    std::string first_diff;
    for (const auto &[name, args] : commands) {
        const auto a = tree_bytes(root / "run1" / name), b = tree_bytes(root / "run2" / name);
        for (const auto &[file, bytes] : a) {
            ++compared;
            bool same;
            if (file == "bench.csv") {
                same = bench_without_timing(root / "run1" / name / file) ==
                       bench_without_timing(root / "run2" / name / file);
            } else {
                same = b.count(file) && b.at(file) == bytes;
            }
            if (!same) {
                ++differing;
                if (first_diff.empty()) {
                    first_diff = name + "/" + file;
                }
            }
        }
        differing += a.size() != b.size();
    }
    return {differing == 0 && compared > 0,
            std::to_string(commands.size()) + " commands x 2 runs; " + std::to_string(compared) + " artifacts, " +
                std::to_string(differing) + " differ" + (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

} // namespace

int main(int argc, char **argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work" && i + 1 < argc) {
            g_work = argv[++i];
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string item;
            while (std::getline(ss, item, ',')) {
                only.insert(std::stoi(item));
            }
        } else {
            std::cerr << "usage: mrf_acceptance [--work DIR] [--only 1,2,...]\n";
            return 2;
        }
    }
    fs::create_directories(g_work);
    fs::remove(g_work / "bench.csv");

    struct Criterion {
        int id;
        const char *name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "architecture conformance", 60, architecture},
        {2, "gradient suite", 300, gradients},
        {3, "EPG vs isochromat oracle", 120, epg_vs_isochromat},
        {4, "subspace fidelity", 120, subspace_fidelity},
        {5, "matching exactness", 300, matching_exactness},
        {6, "end-to-end desk-scale reconstruction", 3600, end_to_end},
        {7, "timing ordering", 600, timing},
        {8, "reproducibility", 300, reproducibility},
    };

    int failed = 0;
    std::vector<std::string> lines;
    for (const auto &c : criteria) {
        if (!only.empty() && !only.count(c.id)) {
            continue;
        }
        std::cout << "criterion " << c.id << ": " << c.name << " ..." << std::endl;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = elapsed(t0);
        const bool in_budget = secs <= c.budget_s;
        const bool pass = o.pass && in_budget;
        failed += !pass;
        std::ostringstream line;
        line << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << "; "
             << fmt("%.1f", secs) << " s of " << fmt("%.0f", c.budget_s) << " s budget"
             << (in_budget ? "" : " EXCEEDED");
        std::cout << line.str() << std::endl;
        lines.push_back(line.str());
    }
    std::cout << "\nsummary\n";
    for (const auto &l : lines) {
        std::cout << l << "\n";
    }
    std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : "all criteria passed") << std::endl;
    return failed ? 1 : 0;
}
