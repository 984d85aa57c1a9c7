#pragma once

// Synthetic ground truth and simulated MRF acquisitions: phantoms, per-voxel
// forward simulation, spiral-like k-space undersampling and augmentation.

#include "mrf/epg.hpp"
#include "mrf/maps.hpp"
#include "mrf/random.hpp"
#include "mrf/subspace.hpp"

#include <cstdint>
#include <vector>

namespace mrf {

/// Ellipse in pixel coordinates (x = column, y = row). Axes are semi-axes.
struct Ellipse {
    double center_x = 0.0;
    double center_y = 0.0;
    double semi_axis_x = 1.0;
    double semi_axis_y = 1.0;
    double rotation_deg = 0.0;
    TissueParams tissue;

    bool contains(double x, double y) const;
};

struct PhantomSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    std::vector<Ellipse> regions; ///< later regions overwrite earlier ones
};

ParametricMaps generate_phantom(const PhantomSpec &spec);

/// Ranges for the procedural brain-like phantom generator.
struct PhantomOptions {
    std::size_t height = 64;
    std::size_t width = 64;
    int lesions_min = 6;
    int lesions_max = 16;
    double t1_min_ms = 100.0;
    double t1_max_ms = 4000.0;
    double t2_min_ms = 20.0;
    double t2_max_ms = 600.0;
    double pd_min = 0.5;
    double pd_max = 1.0;

    bool operator==(const PhantomOptions &) const = default;
};

/// Three nested tissue ellipses plus a few lesions, tissues drawn uniformly.
PhantomSpec random_phantom_spec(const PhantomOptions &options, Rng &rng);

/// Voxel series = pd * fingerprint(t1, t2); one simulation per distinct (t1, t2).
Tsmi forward_simulate(const ParametricMaps &maps, const SequenceSchedule &schedule);

struct UndersamplingScheme {
    std::size_t height = 0;
    std::size_t width = 0;
    /// One k-space mask per frame, centered: DC at (height / 2, width / 2).
    std::vector<std::vector<std::uint8_t>> frame_masks;
    double sampling_fraction = 1.0;
    double rotation_increment_deg = 111.246;

    double measured_fraction(std::size_t frame) const;
};

constexpr double kGoldenAngleDeg = 111.246;

/// Archimedean spiral arm rasterized on the Cartesian grid, rotated by
/// rotation_increment_deg per frame and thinned to sampling_fraction.
UndersamplingScheme make_spiral_scheme(std::size_t height, std::size_t width, std::size_t frames,
                                       double sampling_fraction, double rotation_increment_deg = kGoldenAngleDeg);

/// Per frame: unitary 2-D DFT, mask, complex Gaussian noise of standard
/// deviation noise_sigma on retained samples, inverse DFT, real part.
Tsmi undersample(const Tsmi &tsmi, const UndersamplingScheme &scheme, double noise_sigma, std::uint64_t seed);

struct Sample {
    Tsmi tsmi;
    ParametricMaps maps;
};

struct AugmentParams {
    int shift_rows = 0;
    int shift_cols = 0;
    double rotation_deg = 0.0;
    double scale = 1.0;
    double noise_sigma = 0.0;
};

struct AugmentRanges {
    int max_shift = 4;
    double max_rotation_deg = 15.0;
    double scale_min = 0.9;
    double scale_max = 1.1;
    double noise_sigma = 0.005;

    bool operator==(const AugmentRanges &) const = default;
};

AugmentParams draw_augment_params(const AugmentRanges &ranges, Rng &rng);

/// Same geometric transform (nearest neighbour, zero fill) on TSMI and maps;
/// Gaussian noise on the TSMI only.
Sample augment(const Sample &sample, const AugmentParams &params, std::uint64_t seed);

/// Phantom -> forward simulation -> undersampling, optionally projected.
Sample acquire_sample(const ParametricMaps &maps, const SequenceSchedule &schedule,
                      const UndersamplingScheme &scheme, double noise_sigma, std::uint64_t seed,
                      const SubspaceBasis *basis);

/// Projects every voxel of a raw TSMI onto the basis.
Tsmi compress_tsmi(const Tsmi &raw, const SubspaceBasis &basis);

} // namespace mrf
