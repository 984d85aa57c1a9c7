#pragma once

// Helpers and independent reference implementations shared by the tests.
// Nothing here calls into the library code it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("mrfcnn_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Bloch simulation of `spins` isochromats whose dephasing angles are spread
/// uniformly over one cycle. RF about y, spoiler = one full cycle of dephasing
/// per TR, signal = ensemble mean of the transverse x component at TE.
inline std::vector<double> isochromat_fingerprint(const std::vector<double> &flip_deg, const std::vector<double> &tr_ms,
                                                  double te_ms, double inversion_delay_ms, double t1, double t2,
                                                  std::size_t spins = 2048) {
    std::vector<double> mx(spins, 0.0), my(spins, 0.0), mz(spins, 1.0);
    auto relax = [&](double dt) {
        const double e1 = std::exp(-dt / t1), e2 = std::exp(-dt / t2);
        for (std::size_t k = 0; k < spins; ++k) {
            mx[k] *= e2;
            my[k] *= e2;
            mz[k] = 1.0 + (mz[k] - 1.0) * e1;
        }
    };
    if (inversion_delay_ms > 0.0) {
        for (auto &z : mz) {
            z = -z;
        }
        relax(inversion_delay_ms);
    }
    std::vector<double> signal;
    for (std::size_t n = 0; n < flip_deg.size(); ++n) {
        const double a = flip_deg[n] * std::numbers::pi / 180.0;
        const double ca = std::cos(a), sa = std::sin(a);
        for (std::size_t k = 0; k < spins; ++k) {
            const double x = mx[k], z = mz[k];
            mx[k] = ca * x + sa * z;
            mz[k] = -sa * x + ca * z;
        }
        relax(te_ms);
        double s = 0.0;
        for (double x : mx) {
            s += x;
        }
        signal.push_back(s / static_cast<double>(spins));
        relax(tr_ms[n] - te_ms);
        for (std::size_t k = 0; k < spins; ++k) {
            const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spins);
            const double c = std::cos(phi), s2 = std::sin(phi);
            const double x = mx[k], y = my[k];
            mx[k] = c * x - s2 * y;
            my[k] = s2 * x + c * y;
        }
    }
    return signal;
}

/// Plain Adam on a flat parameter vector.
struct ReferenceAdam {
    double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    int t = 0;

    void step(std::vector<double> &w, const std::vector<double> &g) {
        if (m.empty()) {
            m.assign(w.size(), 0.0);
            v.assign(w.size(), 0.0);
        }
        ++t;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(b1, t));
            const double vh = v[i] / (1 - std::pow(b2, t));
            w[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

inline std::vector<double> random_vector(std::size_t n, std::uint32_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto &x : v) {
        x = dist(gen);
    }
    return v;
}

} // namespace testing_support
