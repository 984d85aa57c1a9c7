#pragma once

// FISP fingerprint simulation with the extended phase graph (EPG).
//
// Conventions: RF pulses rotate about the y axis (RF phase 90 deg), so every
// configuration state stays real and the sampled F0 is a real amplitude.
// Each TR is: instantaneous RF, relaxation to TE, sample F0, relaxation to TR,
// then an ideal unbalanced spoiler that shifts all F states by one order.

#include "mrf/types.hpp"

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace mrf {

struct SequenceSchedule {
    std::vector<double> flip_angles_deg;
    std::vector<double> tr_ms;
    double te_ms = 2.0;
    double inversion_delay_ms = 18.0; ///< 0 disables the initial inversion

    std::size_t d0() const { return flip_angles_deg.size(); }
    /// Throws DomainError if any invariant fails.
    void validate() const;
};

/// Sinusoidal flip-angle lobe rising from ~0 to max_flip_deg and back, constant TR.
SequenceSchedule make_fisp_schedule(std::size_t d0 = 200, double max_flip_deg = 70.0, double tr_ms = 12.0,
                                    double te_ms = 2.0, double inversion_delay_ms = 18.0);

struct TissueParams {
    double t1_ms = 1000.0;
    double t2_ms = 100.0;
    double pd = 1.0;

    void validate() const;
};

using Fingerprint = Eigen::VectorXd;

struct GridEntry {
    double t1_ms;
    double t2_ms;
    bool operator==(const GridEntry &) const = default;
};

struct ParameterGrid {
    std::vector<double> t1_values_ms;
    std::vector<double> t2_values_ms;
    std::vector<GridEntry> entries; ///< cross product with t2 > t1 removed

    /// Sorts and deduplicates the axes, then builds the filtered product.
    static ParameterGrid from_axes(std::vector<double> t1_values_ms, std::vector<double> t2_values_ms);
    /// Inclusive arithmetic ranges, e.g. {100, 120, ..., 4000}.
    static ParameterGrid from_ranges(double t1_min, double t1_max, double t1_step, double t2_min, double t2_max,
                                     double t2_step);
};

std::vector<double> inclusive_range(double lo, double hi, double step);

struct Dictionary {
    RowMatrix atoms;              ///< N x d0
    std::vector<GridEntry> lut;   ///< row i of atoms <-> lut[i]
    Eigen::VectorXd norms;        ///< norm of each atom before normalization
    bool normalized = false;

    std::size_t size() const { return lut.size(); }
    std::size_t d0() const { return static_cast<std::size_t>(atoms.cols()); }
    void validate() const;
};

/// EPG transition matrix over (F+, F-, Z) for an RF pulse about the y axis.
Eigen::Matrix3cd rf_rotation(double alpha_deg);

Fingerprint simulate_fingerprint(const SequenceSchedule &schedule, const TissueParams &tissue);

/// One atom per grid entry (pd = 1); parallel over entries.
Dictionary build_dictionary(const SequenceSchedule &schedule, const ParameterGrid &grid, bool normalize);

} // namespace mrf
