#include "mrf/cli.hpp"
#include "mrf/error.hpp"
#include "mrf/evaluate.hpp"
#include "mrf/fcnn.hpp"
#include "mrf/io.hpp"
#include "mrf/matching.hpp"
#include "mrf/mrfa.hpp"
#include "mrf/png_writer.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace mrf {

namespace fs = std::filesystem;

ParametricMaps make_phantom(const RunConfig &config, std::uint64_t seed, const ParameterGrid *snap,
                            std::size_t height, std::size_t width) {
    PhantomOptions options = config.phantom;
    if (height != 0 && width != 0) {
        options.height = height;
        options.width = width;
    }
    Rng rng(seed);
    PhantomSpec spec = random_phantom_spec(options, rng);
    if (snap != nullptr) {
        if (snap->entries.empty()) {
            throw DomainError("make_phantom: empty grid");
        }
        for (auto &region : spec.regions) {
            auto &t = region.tissue;
            const GridEntry *best = nullptr;
            double best_d = std::numeric_limits<double>::infinity();
            for (const auto &e : snap->entries) {
                const double d = std::abs(e.t1_ms - t.t1_ms) / t.t1_ms + std::abs(e.t2_ms - t.t2_ms) / t.t2_ms;
                if (d < best_d) {
                    best_d = d;
                    best = &e;
                }
            }
            t.t1_ms = best->t1_ms;
            t.t2_ms = best->t2_ms;
        }
    }
    return generate_phantom(spec);
}

std::vector<Sample> make_samples(const RunConfig &config, const SubspaceBasis *basis, std::uint64_t seed,
                                 std::size_t first_index, std::size_t count) {
    const auto schedule = config.make_schedule();
    const auto scheme = config.make_scheme(config.phantom.height, config.phantom.width);
    std::vector<Sample> samples;
    samples.reserve(count);
    for (std::size_t i = first_index; i < first_index + count; ++i) {
        const auto maps = make_phantom(config, derive_seed(seed, 2 * i));
        samples.push_back(acquire_sample(maps, schedule, scheme, config.undersampling.noise_sigma,
                                         derive_seed(seed, 2 * i + 1), basis));
    }
    return samples;
}

void append_bench_row(const fs::path &path, const BenchRow &row) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    std::ofstream f(path, std::ios::app);
    if (!f) {
        throw IoError("cannot append to " + path.string());
    }
    if (fresh) {
        f << "method,H,W,d0,d1,atoms,seconds\n";
    }
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.6f", row.seconds);
    f << row.method << ',' << row.height << ',' << row.width << ',' << row.d0 << ',' << row.d1 << ','
      << row.atoms << ',' << secs << '\n';
    if (!f) {
        throw IoError("failed writing " + path.string());
    }
}

namespace {

constexpr std::uint64_t kModelStream = 1'000'000;
constexpr std::uint64_t kTrainStream = 1'000'001;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Globals {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out = "out";
    int threads = 0;
};

void write_text(const fs::path &path, const std::string &text) {
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    write_file_bytes(path, bytes);
}

void write_snapshot(const fs::path &dir, const RunConfig &config) {
    write_text(dir / "config.txt", serialize_config(config));
}

void write_map_pngs(const fs::path &dir, const ParametricMaps &maps, const RunConfig &config) {
    write_map_png(maps, 0, 0.0, config.model.t1_max_ms, dir / "t1.png");
    write_map_png(maps, 1, 0.0, config.model.t2_max_ms, dir / "t2.png");
    write_map_png(maps, 2, 0.0, config.model.pd_max, dir / "pd.png");
}

MetricRanges ranges_of(const RunConfig &config) {
    return {config.model.t1_max_ms, config.model.t2_max_ms, config.model.pd_max};
}

void require_d0(std::size_t got, std::size_t want, const std::string &what) {
    if (got != want) {
        throw DomainError(what + ": d0 is " + std::to_string(got) + ", config expects " + std::to_string(want));
    }
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"MRF reconstruction: dictionary matching and a fully convolutional network", "mrfcnn"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Run configuration file (defaults when omitted)");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "OpenMP threads (0 = auto)")->check(CLI::NonNegativeNumber);

    auto *dict = app.add_subcommand("dict", "Simulate the normalized dictionary")->fallthrough();

    std::string dict_dir, basis_dir, sample_dir, maps_dir, ckpt_dir, pred_dir, gt_dir, bench_csv, method;
    bool snap = false, compress = false, compressed_dm = false;
    std::size_t size = 256;

    auto *basis = app.add_subcommand("basis", "Fit the truncated SVD basis of a dictionary")->fallthrough();
    basis->add_option("dictionary", dict_dir, "Dictionary directory")->required();

    auto *phantom = app.add_subcommand("phantom", "Generate a ground-truth phantom")->fallthrough();
    phantom->add_flag("--grid-tissues", snap, "Snap every tissue to the nearest dictionary grid entry");

    auto *acquire = app.add_subcommand("acquire", "Simulate an undersampled acquisition of a phantom")->fallthrough();
    acquire->add_option("maps", maps_dir, "Phantom directory")->required();
    acquire->add_option("--basis", basis_dir, "Store the compressed TSMI using this basis");
    acquire->add_flag("--compress", compress, "Store the compressed TSMI (requires --basis)");

    auto *match = app.add_subcommand("match", "Dictionary matching on a sample")->fallthrough();
    match->add_option("sample", sample_dir, "Sample directory")->required();
    match->add_option("dictionary", dict_dir, "Dictionary directory")->required();
    match->add_option("--basis", basis_dir, "Match in the compressed domain with this basis");
    match->add_option("--bench-csv", bench_csv, "Append the timing to this CSV");

    auto *train = app.add_subcommand("train", "Train the network on synthetic phantoms")->fallthrough();
    train->add_option("basis", basis_dir, "Basis directory")->required();

    auto *recon = app.add_subcommand("recon", "Network reconstruction of a raw sample")->fallthrough();
    recon->add_option("sample", sample_dir, "Sample directory")->required();
    recon->add_option("checkpoint", ckpt_dir, "Checkpoint directory")->required();
    recon->add_option("--bench-csv", bench_csv, "Append the timing to this CSV");

    auto *eval = app.add_subcommand("eval", "Compare predicted maps against ground truth")->fallthrough();
    eval->add_option("prediction", pred_dir, "Predicted maps directory")->required();
    eval->add_option("truth", gt_dir, "Ground-truth maps directory")->required();
    eval->add_option("--method", method, "Label for the report");

    auto *bench = app.add_subcommand("bench", "Time network and dictionary matching on one slice")->fallthrough();
    bench->add_option("checkpoint", ckpt_dir, "Checkpoint directory")->required();
    bench->add_option("dictionary", dict_dir, "Dictionary directory")->required();
    bench->add_option("--size", size, "Slice height and width")->check(CLI::PositiveNumber);
    bench->add_flag("--compressed-dm", compressed_dm, "Also time compressed-domain matching");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code;
    }

    try {
        if (g.threads > 0) {
            omp_set_num_threads(g.threads);
        }
        const RunConfig config = parse_config(g.config_path);
        const fs::path out_dir = g.out;
        fs::create_directories(out_dir);

        if (*dict) {
            const auto t0 = Clock::now();
            const auto d = build_dictionary(config.make_schedule(), config.make_grid(), true);
            save_dictionary(out_dir, d);
            write_snapshot(out_dir, config);
            out << "dictionary: " << d.size() << " atoms x " << d.d0() << " frames (" << seconds_since(t0)
                << " s)\n";
        } else if (*basis) {
            const auto d = load_dictionary(dict_dir);
            require_d0(d.d0(), config.schedule.d0, "dictionary");
            const auto b = fit_subspace(d, static_cast<Eigen::Index>(config.d1));
            save_basis(out_dir, b);
            write_snapshot(out_dir, config);
            out << "basis: d1 = " << b.d1() << ", captured energy " << b.captured_energy_fraction() << "\n";
        } else if (*phantom) {
            ParameterGrid grid;
            if (snap) {
                grid = config.make_grid();
            }
            const auto maps = make_phantom(config, g.seed, snap ? &grid : nullptr);
            save_maps(out_dir, maps);
            write_map_pngs(out_dir, maps, config);
            write_snapshot(out_dir, config);
            out << "phantom: " << maps.height << " x " << maps.width << "\n";
        } else if (*acquire) {
            if (compress && basis_dir.empty()) {
                throw ConfigError("acquire: --compress needs --basis");
            }
            const auto maps = load_maps(maps_dir);
            SubspaceBasis b;
            if (!basis_dir.empty()) {
                b = load_basis(basis_dir);
                require_d0(static_cast<std::size_t>(b.d0()), config.schedule.d0, "basis");
            }
            const auto scheme = config.make_scheme(maps.height, maps.width);
            const auto s = acquire_sample(maps, config.make_schedule(), scheme, config.undersampling.noise_sigma,
                                          g.seed, compress ? &b : nullptr);
            save_sample(out_dir, s);
            write_snapshot(out_dir, config);
            out << "acquire: " << s.tsmi.height << " x " << s.tsmi.width << " x " << s.tsmi.frames
                << (compress ? " (compressed)\n" : "\n");
        } else if (*match) {
            const auto s = load_sample(sample_dir);
            const auto d = load_dictionary(dict_dir);
            SubspaceBasis b;
            const bool use_basis = !basis_dir.empty();
            if (use_basis) {
                b = load_basis(basis_dir);
            } else if (s.tsmi.kind == TsmiKind::Compressed) {
                throw ConfigError("match: compressed sample needs --basis");
            }
            const auto t0 = Clock::now();
            const auto maps = match_maps(s.tsmi, d, use_basis ? &b : nullptr, config.match_options());
            const double secs = seconds_since(t0);
            save_maps(out_dir, maps);
            write_map_pngs(out_dir, maps, config);
            write_snapshot(out_dir, config);
            if (!bench_csv.empty()) {
                append_bench_row(bench_csv, {use_basis ? "dm_compressed" : "dm_full", maps.height, maps.width,
                                             d.d0(), use_basis ? static_cast<std::size_t>(b.d1()) : d.d0(),
                                             d.size(), secs});
            }
            out << "match: " << d.size() << " atoms, " << secs << " s\n";
        } else if (*train) {
            const auto b = load_basis(basis_dir);
            require_d0(static_cast<std::size_t>(b.d0()), config.schedule.d0, "basis");
            if (static_cast<std::size_t>(b.d1()) != config.d1) {
                throw DomainError("train: basis d1 differs from subspace.d1");
            }
            const auto train_set = make_samples(config, &b, g.seed, 0, config.training.train_samples);
            const auto val_set =
                make_samples(config, &b, g.seed, config.training.train_samples, config.training.val_samples);
            auto model = build_model(config.model, derive_seed(g.seed, kModelStream));
            const auto ckpt = mrf::train(std::move(model), b, train_set, val_set, config.training.options,
                                    derive_seed(g.seed, kTrainStream),
                                    [&](std::size_t epoch, double tl, double vl) {
                                        out << "epoch " << epoch << " train " << tl << " val " << vl << std::endl;
                                    });
            out << "kept parameters of epoch " << ckpt.best_epoch << std::endl;
            save_checkpoint(out_dir, ckpt);
            write_snapshot(out_dir, config);
        } else if (*recon) {
            const auto s = load_sample(sample_dir);
            if (s.tsmi.kind != TsmiKind::Raw) {
                throw DomainError("recon: sample must hold a raw TSMI");
            }
            const auto ckpt = load_checkpoint(ckpt_dir);
            const auto r = reconstruct(s.tsmi, ckpt, config.evaluation.mask_threshold);
            save_maps(out_dir, r.maps);
            write_map_pngs(out_dir, r.maps, config);
            write_snapshot(out_dir, config);
            if (!bench_csv.empty()) {
                append_bench_row(bench_csv, {"network", r.maps.height, r.maps.width,
                                             static_cast<std::size_t>(ckpt.basis.d0()),
                                             static_cast<std::size_t>(ckpt.basis.d1()), 0, r.seconds});
            }
            out << "recon: " << r.seconds << " s\n";
        } else if (*eval) {
            const auto rep = evaluate(load_maps(pred_dir), load_maps(gt_dir), ranges_of(config), method);
            write_text(out_dir / "report.csv", report_csv_header() + "\n" + report_csv_row(rep) + "\n");
            out << "voxels " << rep.voxels << "\n";
            const char *names[] = {"t1", "t2", "pd"};
            for (std::size_t c = 0; c < 3; ++c) {
                out << names[c] << " mae " << rep.mae[c] << " rmse " << rep.rmse[c] << " psnr " << rep.psnr[c]
                    << "\n";
            }
        } else if (*bench) {
            const auto ckpt = load_checkpoint(ckpt_dir);
            const auto d = load_dictionary(dict_dir);
            if (d.d0() != static_cast<std::size_t>(ckpt.basis.d0())) {
                throw DomainError("bench: dictionary and checkpoint disagree on d0");
            }
            const auto maps = make_phantom(config, g.seed, nullptr, size, size);
            const auto scheme = config.make_scheme(size, size);
            const auto s = acquire_sample(maps, config.make_schedule(), scheme, config.undersampling.noise_sigma,
                                          derive_seed(g.seed, 1), nullptr);
            const auto csv = out_dir / "bench.csv";
            const std::size_t d0 = d.d0(), d1 = static_cast<std::size_t>(ckpt.basis.d1());

            const auto r = reconstruct(s.tsmi, ckpt, config.evaluation.mask_threshold);
            append_bench_row(csv, {"network", size, size, d0, d1, d.size(), r.seconds});
            out << "network " << r.seconds << " s\n";

            auto t0 = Clock::now();
            const auto full = match_maps(s.tsmi, d, nullptr, config.match_options());
            const double full_secs = seconds_since(t0);
            append_bench_row(csv, {"dm_full", size, size, d0, d0, d.size(), full_secs});
            out << "dm_full " << full_secs << " s\n";

            if (compressed_dm) {
                t0 = Clock::now();
                const auto comp = match_maps(s.tsmi, d, &ckpt.basis, config.match_options());
                const double secs = seconds_since(t0);
                append_bench_row(csv, {"dm_compressed", size, size, d0, d1, d.size(), secs});
                out << "dm_compressed " << secs << " s\n";
            }
            out << "speedup " << full_secs / r.seconds << "x\n";
            write_snapshot(out_dir, config);
        }
    } catch (const std::exception &e) {
        err << "mrfcnn: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace mrf
