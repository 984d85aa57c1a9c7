#include "mrf/epg.hpp"
#include "mrf/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace mrf {

namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

} // namespace

void SequenceSchedule::validate() const {
    if (flip_angles_deg.empty()) {
        throw DomainError("schedule: d0 must be positive");
    }
    if (flip_angles_deg.size() != tr_ms.size()) {
        throw DomainError("schedule: flip angle and TR vectors differ in length");
    }
    if (!(te_ms >= 0.0)) {
        throw DomainError("schedule: te_ms must be >= 0");
    }
    if (!(inversion_delay_ms >= 0.0)) {
        throw DomainError("schedule: inversion_delay_ms must be >= 0");
    }
    for (std::size_t i = 0; i < flip_angles_deg.size(); ++i) {
        if (!(flip_angles_deg[i] >= 0.0 && flip_angles_deg[i] <= 180.0)) {
            throw DomainError("schedule: flip angle " + std::to_string(i) + " outside [0, 180]");
        }
        if (!(tr_ms[i] > te_ms)) {
            throw DomainError("schedule: tr_ms[" + std::to_string(i) + "] must exceed te_ms");
        }
    }
}

SequenceSchedule make_fisp_schedule(std::size_t d0, double max_flip_deg, double tr_ms, double te_ms,
                                    double inversion_delay_ms) {
    SequenceSchedule s;
    s.flip_angles_deg.resize(d0);
    s.tr_ms.assign(d0, tr_ms);
    s.te_ms = te_ms;
    s.inversion_delay_ms = inversion_delay_ms;
    for (std::size_t n = 0; n < d0; ++n) {
        s.flip_angles_deg[n] =
            max_flip_deg * std::sin(std::numbers::pi * static_cast<double>(n + 1) / static_cast<double>(d0 + 1));
    }
    s.validate();
    return s;
}

void TissueParams::validate() const {
    if (!(t1_ms > 0.0) || !(t2_ms > 0.0)) {
        throw DomainError("tissue: relaxation times must be positive");
    }
    if (t2_ms > t1_ms) {
        throw DomainError("tissue: t2_ms exceeds t1_ms");
    }
    if (!(pd >= 0.0)) {
        throw DomainError("tissue: pd must be >= 0");
    }
}

std::vector<double> inclusive_range(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) {
        throw DomainError("range: need step > 0 and hi >= lo");
    }
    std::vector<double> v;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    v.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        v.push_back(lo + step * static_cast<double>(i));
    }
    return v;
}

ParameterGrid ParameterGrid::from_axes(std::vector<double> t1_values_ms, std::vector<double> t2_values_ms) {
    ParameterGrid g;
    std::sort(t1_values_ms.begin(), t1_values_ms.end());
    t1_values_ms.erase(std::unique(t1_values_ms.begin(), t1_values_ms.end()), t1_values_ms.end());
    std::sort(t2_values_ms.begin(), t2_values_ms.end());
    t2_values_ms.erase(std::unique(t2_values_ms.begin(), t2_values_ms.end()), t2_values_ms.end());
    for (double t1 : t1_values_ms) {
        for (double t2 : t2_values_ms) {
            if (t1 > 0.0 && t2 > 0.0 && t2 <= t1) {
                g.entries.push_back({t1, t2});
            }
        }
    }
    g.t1_values_ms = std::move(t1_values_ms);
    g.t2_values_ms = std::move(t2_values_ms);
    return g;
}

ParameterGrid ParameterGrid::from_ranges(double t1_min, double t1_max, double t1_step, double t2_min,
                                         double t2_max, double t2_step) {
    return from_axes(inclusive_range(t1_min, t1_max, t1_step), inclusive_range(t2_min, t2_max, t2_step));
}

void Dictionary::validate() const {
    const auto n = static_cast<Eigen::Index>(lut.size());
    if (atoms.rows() != n || norms.size() != n) {
        throw DomainError("dictionary: atoms, lut and norms disagree in length");
    }
    if (normalized) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(atoms.row(i).norm() - 1.0) > 1e-10) {
                throw DomainError("dictionary: atom " + std::to_string(i) + " is not unit norm");
            }
        }
    }
}

Eigen::Matrix3cd rf_rotation(double alpha_deg) {
    if (!(alpha_deg >= 0.0 && alpha_deg <= 180.0)) {
        throw DomainError("rf_rotation: flip angle outside [0, 180] degrees");
    }
    using C = std::complex<double>;
    const double a = deg2rad(alpha_deg);
    const double phi = std::numbers::pi / 2.0;
    const double c2 = std::cos(a / 2) * std::cos(a / 2);
    const double s2 = std::sin(a / 2) * std::sin(a / 2);
    const double s = std::sin(a);
    const C i(0.0, 1.0);
    const C e1 = std::polar(1.0, phi);
    const C e2 = std::polar(1.0, 2.0 * phi);
    Eigen::Matrix3cd t;
    t << c2, e2 * s2, -i * e1 * s,
         std::conj(e2) * s2, c2, i * std::conj(e1) * s,
         -0.5 * i * std::conj(e1) * s, 0.5 * i * e1 * s, std::cos(a);
    // Remove the rounding residue of cos(pi/2) so the matrix is exactly real.
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            t(r, c) = C(t(r, c).real(), 0.0);
        }
    }
    return t;
}

namespace {

/// Real-valued EPG run with M0 = 1; writes d0 samples to out.
void run_epg(const SequenceSchedule &schedule, double t1, double t2, double *out) {
    const std::size_t d0 = schedule.d0();
    std::vector<double> fp(d0 + 2, 0.0), fm(d0 + 2, 0.0), z(d0 + 2, 0.0);
    z[0] = 1.0;

    auto relax = [&](double dt, std::size_t active) {
        const double e1 = std::exp(-dt / t1);
        const double e2 = std::exp(-dt / t2);
        for (std::size_t k = 0; k < active; ++k) {
            fp[k] *= e2;
            fm[k] *= e2;
            z[k] *= e1;
        }
        z[0] += 1.0 - e1;
    };

    if (schedule.inversion_delay_ms > 0.0) {
        z[0] = -z[0];
        relax(schedule.inversion_delay_ms, 1);
    }

    for (std::size_t n = 0; n < d0; ++n) {
        const std::size_t active = n + 1; // orders 0..n can be populated
        const double a = deg2rad(schedule.flip_angles_deg[n]);
        const double ch = std::cos(a / 2), sh = std::sin(a / 2);
        const double c2 = ch * ch, s2 = sh * sh, s = std::sin(a), c = std::cos(a);
        for (std::size_t k = 0; k < active; ++k) {
            const double p = fp[k], m = fm[k], l = z[k];
            fp[k] = c2 * p - s2 * m + s * l;
            fm[k] = -s2 * p + c2 * m + s * l;
            z[k] = -0.5 * s * (p + m) + c * l;
        }
        relax(schedule.te_ms, active);
        out[n] = fp[0];
        relax(schedule.tr_ms[n] - schedule.te_ms, active);
        // spoiler: F_k -> F_{k+1}
        for (std::size_t k = active; k >= 1; --k) {
            fp[k] = fp[k - 1];
        }
        for (std::size_t k = 0; k < active; ++k) {
            fm[k] = fm[k + 1];
        }
        fp[0] = fm[0];
    }
}

} // namespace

Fingerprint simulate_fingerprint(const SequenceSchedule &schedule, const TissueParams &tissue) {
    schedule.validate();
    tissue.validate();
    Fingerprint f(static_cast<Eigen::Index>(schedule.d0()));
    run_epg(schedule, tissue.t1_ms, tissue.t2_ms, f.data());
    if (tissue.pd != 1.0) {
        f *= tissue.pd;
    }
    return f;
}

Dictionary build_dictionary(const SequenceSchedule &schedule, const ParameterGrid &grid, bool normalize) {
    schedule.validate();
    if (grid.entries.empty()) {
        throw DomainError("build_dictionary: empty parameter grid");
    }
    for (const auto &e : grid.entries) {
        TissueParams{e.t1_ms, e.t2_ms, 1.0}.validate();
    }
    const auto n = static_cast<Eigen::Index>(grid.entries.size());
    Dictionary dict;
    dict.atoms.resize(n, static_cast<Eigen::Index>(schedule.d0()));
    dict.norms.resize(n);
    dict.lut = grid.entries;
    dict.normalized = normalize;

#pragma omp parallel for schedule(dynamic, 64)
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &e = grid.entries[static_cast<std::size_t>(i)];
        run_epg(schedule, e.t1_ms, e.t2_ms, dict.atoms.row(i).data());
        dict.norms[i] = dict.atoms.row(i).norm();
    }
    if (normalize) {
        if (!(dict.norms.minCoeff() > 0.0)) {
            throw DomainError("build_dictionary: zero atom cannot be normalized");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            dict.atoms.row(i) /= dict.norms[i];
        }
    }
    return dict;
}

} // namespace mrf
