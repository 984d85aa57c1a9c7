#include "mrf/acquisition.hpp"
#include "mrf/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numbers>
#include <utility>

namespace mrf {

namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Exact cos/sin for multiples of 90 degrees.
std::pair<double, double> cos_sin_deg(double deg) {
    const double q = deg / 90.0;
    if (q == std::round(q)) {
        const auto k = static_cast<long long>(std::round(q));
        switch (((k % 4) + 4) % 4) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, 1.0};
        case 2: return {-1.0, 0.0};
        default: return {0.0, -1.0};
        }
    }
    return {std::cos(deg2rad(deg)), std::sin(deg2rad(deg))};
}

TissueParams random_tissue(const PhantomOptions &o, Rng &rng) {
    TissueParams t;
    t.t1_ms = rng.uniform(o.t1_min_ms, o.t1_max_ms);
    t.t2_ms = rng.uniform(o.t2_min_ms, std::min(o.t2_max_ms, t.t1_ms));
    t.pd = rng.uniform(o.pd_min, o.pd_max);
    return t;
}

struct FftwPlanDeleter {
    void operator()(fftw_plan_s *p) const { fftw_destroy_plan(p); }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

struct FftwFree {
    void operator()(fftw_complex *p) const { fftw_free(p); }
};

} // namespace

bool Ellipse::contains(double x, double y) const {
    const auto [c, s] = cos_sin_deg(rotation_deg);
    const double dx = x - center_x;
    const double dy = y - center_y;
    const double u = (dx * c + dy * s) / semi_axis_x;
    const double v = (-dx * s + dy * c) / semi_axis_y;
    return u * u + v * v <= 1.0;
}

ParametricMaps generate_phantom(const PhantomSpec &spec) {
    if (spec.height == 0 || spec.width == 0) {
        throw DomainError("generate_phantom: zero-area canvas");
    }
    for (const auto &r : spec.regions) {
        r.tissue.validate();
        if (!(r.semi_axis_x > 0.0 && r.semi_axis_y > 0.0)) {
            throw DomainError("generate_phantom: ellipse semi-axes must be positive");
        }
    }
    auto maps = ParametricMaps::zeros(spec.height, spec.width);
    for (const auto &r : spec.regions) {
        for (std::size_t i = 0; i < spec.height; ++i) {
            for (std::size_t j = 0; j < spec.width; ++j) {
                if (r.contains(static_cast<double>(j), static_cast<double>(i))) {
                    const auto v = i * spec.width + j;
                    maps.t1_ms[v] = r.tissue.t1_ms;
                    maps.t2_ms[v] = r.tissue.t2_ms;
                    maps.pd[v] = r.tissue.pd;
                    maps.mask[v] = 1;
                }
            }
        }
    }
    return maps;
}

PhantomSpec random_phantom_spec(const PhantomOptions &o, Rng &rng) {
    if (o.lesions_min < 0 || o.lesions_max < o.lesions_min) {
        throw DomainError("random_phantom_spec: bad lesion count range");
    }
    PhantomSpec spec;
    spec.height = o.height;
    spec.width = o.width;
    const double h = static_cast<double>(o.height);
    const double w = static_cast<double>(o.width);
    const double cx = (w - 1.0) / 2.0 + rng.uniform(-0.04, 0.04) * w;
    const double cy = (h - 1.0) / 2.0 + rng.uniform(-0.04, 0.04) * h;
    const double ax = rng.uniform(0.36, 0.45) * w;
    const double ay = rng.uniform(0.40, 0.47) * h;
    const double rot = rng.uniform(-15.0, 15.0);

    // outer shell, intermediate layer, core
    const double shells[3][2] = {{1.0, 1.0}, {rng.uniform(0.78, 0.9), 0.0}, {rng.uniform(0.45, 0.65), 0.0}};
    for (const auto &shell : shells) {
        Ellipse e;
        e.center_x = cx + (shell[0] < 1.0 ? rng.uniform(-0.02, 0.02) * w : 0.0);
        e.center_y = cy + (shell[0] < 1.0 ? rng.uniform(-0.02, 0.02) * h : 0.0);
        e.semi_axis_x = ax * shell[0];
        e.semi_axis_y = ay * shell[0] * rng.uniform(0.95, 1.05);
        e.rotation_deg = rot + rng.uniform(-5.0, 5.0);
        e.tissue = random_tissue(o, rng);
        spec.regions.push_back(e);
    }

    const auto lesions = rng.uniform_int(o.lesions_min, o.lesions_max);
    for (std::int64_t k = 0; k < lesions; ++k) {
        Ellipse e;
        const double r = 0.7 * std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        e.center_x = cx + r * ax * std::cos(phi);
        e.center_y = cy + r * ay * std::sin(phi);
        e.semi_axis_x = rng.uniform(0.04, 0.12) * w;
        e.semi_axis_y = rng.uniform(0.04, 0.12) * h;
        e.rotation_deg = rng.uniform(0.0, 180.0);
        e.tissue = random_tissue(o, rng);
        spec.regions.push_back(e);
    }
    return spec;
}

Tsmi forward_simulate(const ParametricMaps &maps, const SequenceSchedule &schedule) {
    maps.validate();
    schedule.validate();
    const std::size_t d0 = schedule.d0();
    auto out = Tsmi::zeros(maps.height, maps.width, d0, TsmiKind::Raw);
    std::map<std::pair<double, double>, Fingerprint> cache;
    for (std::size_t v = 0; v < maps.voxels(); ++v) {
        if (!maps.mask[v]) {
            continue;
        }
        const auto key = std::make_pair(maps.t1_ms[v], maps.t2_ms[v]);
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, simulate_fingerprint(schedule, {key.first, key.second, 1.0})).first;
        }
        const double pd = maps.pd[v];
        double *dst = out.data.data() + v * d0;
        for (std::size_t t = 0; t < d0; ++t) {
            dst[t] = pd * it->second[static_cast<Eigen::Index>(t)];
        }
    }
    return out;
}

double UndersamplingScheme::measured_fraction(std::size_t frame) const {
    const auto &m = frame_masks.at(frame);
    const auto on = std::count(m.begin(), m.end(), std::uint8_t{1});
    return static_cast<double>(on) / static_cast<double>(m.size());
}

UndersamplingScheme make_spiral_scheme(std::size_t height, std::size_t width, std::size_t frames,
                                       double sampling_fraction, double rotation_increment_deg) {
    if (height == 0 || width == 0 || frames == 0) {
        throw DomainError("make_spiral_scheme: empty grid or no frames");
    }
    if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0)) {
        throw DomainError("make_spiral_scheme: sampling_fraction must lie in (0, 1]");
    }
    UndersamplingScheme scheme;
    scheme.height = height;
    scheme.width = width;
    scheme.sampling_fraction = sampling_fraction;
    scheme.rotation_increment_deg = rotation_increment_deg;

    const std::size_t total = height * width;
    const auto target = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(sampling_fraction * static_cast<double>(total))));
    const double cy = static_cast<double>(height / 2);
    const double cx = static_cast<double>(width / 2);
    const double radius = std::hypot(static_cast<double>(height) / 2.0, static_cast<double>(width) / 2.0);

    for (std::size_t f = 0; f < frames; ++f) {
        std::vector<std::uint8_t> mask(total, 0);
        if (target >= total) {
            std::fill(mask.begin(), mask.end(), std::uint8_t{1});
            scheme.frame_masks.push_back(std::move(mask));
            continue;
        }
        const double rotation = deg2rad(rotation_increment_deg * static_cast<double>(f));
        double turns = std::max(0.5, static_cast<double>(target) / (std::numbers::pi * radius));
        std::vector<std::size_t> arc;
        for (int attempt = 0; attempt < 200; ++attempt) {
            arc.clear();
            std::vector<std::uint8_t> seen(total, 0);
            const double length = std::numbers::pi * turns * radius * 2.0;
            const auto steps = static_cast<std::size_t>(std::ceil(length * 4.0)) + 1;
            for (std::size_t s = 0; s <= steps; ++s) {
                const double u = static_cast<double>(s) / static_cast<double>(steps);
                const double r = radius * u;
                const double theta = 2.0 * std::numbers::pi * turns * u + rotation;
                const auto row = static_cast<long long>(std::llround(cy + r * std::sin(theta)));
                const auto col = static_cast<long long>(std::llround(cx + r * std::cos(theta)));
                if (row < 0 || col < 0 || row >= static_cast<long long>(height) ||
                    col >= static_cast<long long>(width)) {
                    continue;
                }
                const auto idx = static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col);
                if (!seen[idx]) {
                    seen[idx] = 1;
                    arc.push_back(idx);
                }
            }
            if (arc.size() >= target) {
                break;
            }
            turns *= 1.05;
        }
        // Even thinning along the arc; element 0 is the DC sample.
        const std::size_t keep = std::min(target, arc.size());
        for (std::size_t k = 0; k < keep; ++k) {
            mask[arc[k * arc.size() / keep]] = 1;
        }
        scheme.frame_masks.push_back(std::move(mask));
    }
    return scheme;
}

Tsmi undersample(const Tsmi &tsmi, const UndersamplingScheme &scheme, double noise_sigma, std::uint64_t seed) {
    if (tsmi.kind != TsmiKind::Raw) {
        throw DomainError("undersample: expects a raw TSMI");
    }
    if (scheme.height != tsmi.height || scheme.width != tsmi.width || scheme.frame_masks.size() != tsmi.frames) {
        throw DomainError("undersample: scheme dimensions do not match the TSMI");
    }
    if (!(noise_sigma >= 0.0)) {
        throw DomainError("undersample: noise_sigma must be >= 0");
    }
    const std::size_t h = tsmi.height, w = tsmi.width, n = h * w;
    for (const auto &m : scheme.frame_masks) {
        if (m.size() != n) {
            throw DomainError("undersample: mask size does not match the image");
        }
    }

    std::unique_ptr<fftw_complex, FftwFree> buf(fftw_alloc_complex(n));
    FftwPlan fwd(fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf.get(), buf.get(), FFTW_FORWARD,
                                  FFTW_ESTIMATE));
    FftwPlan inv(fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf.get(), buf.get(), FFTW_BACKWARD,
                                  FFTW_ESTIMATE));
    const double unitary = 1.0 / std::sqrt(static_cast<double>(n));
    const double component_sigma = noise_sigma / std::sqrt(2.0);

    // centered mask index -> FFT index
    std::vector<std::size_t> to_fft(n);
    for (std::size_t u = 0; u < h; ++u) {
        for (std::size_t v = 0; v < w; ++v) {
            const std::size_t ku = (u + h - h / 2) % h;
            const std::size_t kv = (v + w - w / 2) % w;
            to_fft[u * w + v] = ku * w + kv;
        }
    }

    auto out = Tsmi::zeros(h, w, tsmi.frames, TsmiKind::Raw);
    std::vector<std::uint8_t> keep(n);
    for (std::size_t t = 0; t < tsmi.frames; ++t) {
        fftw_complex *x = buf.get();
        for (std::size_t p = 0; p < n; ++p) {
            x[p][0] = tsmi.data[p * tsmi.frames + t];
            x[p][1] = 0.0;
        }
        fftw_execute(fwd.get());
        const auto &mask = scheme.frame_masks[t];
        for (std::size_t p = 0; p < n; ++p) {
            keep[to_fft[p]] = mask[p];
        }
        Rng rng(derive_seed(seed, t));
        for (std::size_t k = 0; k < n; ++k) {
            if (keep[k]) {
                x[k][0] *= unitary;
                x[k][1] *= unitary;
                if (noise_sigma > 0.0) {
                    x[k][0] += component_sigma * rng.normal();
                    x[k][1] += component_sigma * rng.normal();
                }
            } else {
                x[k][0] = 0.0;
                x[k][1] = 0.0;
            }
        }
        fftw_execute(inv.get());
        for (std::size_t p = 0; p < n; ++p) {
            out.data[p * tsmi.frames + t] = x[p][0] * unitary;
        }
    }
    return out;
}

AugmentParams draw_augment_params(const AugmentRanges &r, Rng &rng) {
    AugmentParams p;
    p.shift_rows = static_cast<int>(rng.uniform_int(-r.max_shift, r.max_shift));
    p.shift_cols = static_cast<int>(rng.uniform_int(-r.max_shift, r.max_shift));
    p.rotation_deg = rng.uniform(-r.max_rotation_deg, r.max_rotation_deg);
    p.scale = rng.uniform(r.scale_min, r.scale_max);
    p.noise_sigma = r.noise_sigma;
    return p;
}

Sample augment(const Sample &sample, const AugmentParams &params, std::uint64_t seed) {
    if (!(params.scale > 0.0)) {
        throw DomainError("augment: scale must be positive");
    }
    if (!(params.noise_sigma >= 0.0)) {
        throw DomainError("augment: noise_sigma must be >= 0");
    }
    const auto &in = sample.tsmi;
    if (in.height != sample.maps.height || in.width != sample.maps.width) {
        throw DomainError("augment: TSMI and maps differ in size");
    }
    const std::size_t h = in.height, w = in.width, frames = in.frames;
    const double cr = (static_cast<double>(h) - 1.0) / 2.0;
    const double cc = (static_cast<double>(w) - 1.0) / 2.0;
    const auto [c, s] = cos_sin_deg(params.rotation_deg);

    Sample out{Tsmi::zeros(h, w, frames, in.kind), ParametricMaps::zeros(h, w)};
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t q = 0; q < w; ++q) {
            const double y = static_cast<double>(r) - cr - params.shift_rows;
            const double x = static_cast<double>(q) - cc - params.shift_cols;
            const double xs = (x * c + y * s) / params.scale + cc;
            const double ys = (-x * s + y * c) / params.scale + cr;
            const auto sr = std::llround(ys);
            const auto sq = std::llround(xs);
            if (sr < 0 || sq < 0 || sr >= static_cast<long long>(h) || sq >= static_cast<long long>(w)) {
                continue;
            }
            const auto src = static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(sq);
            const auto dst = r * w + q;
            std::copy_n(in.data.begin() + static_cast<std::ptrdiff_t>(src * frames), frames,
                        out.tsmi.data.begin() + static_cast<std::ptrdiff_t>(dst * frames));
            out.maps.t1_ms[dst] = sample.maps.t1_ms[src];
            out.maps.t2_ms[dst] = sample.maps.t2_ms[src];
            out.maps.pd[dst] = sample.maps.pd[src];
            out.maps.mask[dst] = sample.maps.mask[src];
        }
    }
    if (params.noise_sigma > 0.0) {
        Rng rng(seed);
        for (auto &v : out.tsmi.data) {
            v += params.noise_sigma * rng.normal();
        }
    }
    return out;
}

Tsmi compress_tsmi(const Tsmi &raw, const SubspaceBasis &basis) {
    if (raw.kind != TsmiKind::Raw || static_cast<Eigen::Index>(raw.frames) != basis.d0()) {
        throw DomainError("compress_tsmi: raw TSMI frames do not match basis d0");
    }
    auto out = Tsmi::zeros(raw.height, raw.width, static_cast<std::size_t>(basis.d1()), TsmiKind::Compressed);
    out.matrix().noalias() = raw.matrix() * basis.basis;
    return out;
}

Sample acquire_sample(const ParametricMaps &maps, const SequenceSchedule &schedule,
                      const UndersamplingScheme &scheme, double noise_sigma, std::uint64_t seed,
                      const SubspaceBasis *basis) {
    Sample s;
    s.maps = maps;
    s.tsmi = undersample(forward_simulate(maps, schedule), scheme, noise_sigma, seed);
    if (basis != nullptr) {
        s.tsmi = compress_tsmi(s.tsmi, *basis);
    }
    return s;
}

} // namespace mrf
