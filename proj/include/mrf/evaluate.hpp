#pragma once

#include "mrf/maps.hpp"

#include <array>
#include <string>

namespace mrf {

/// Per-channel dynamic ranges used for PSNR, in (T1, T2, PD) order.
struct MetricRanges {
    double t1_ms = 4000.0;
    double t2_ms = 600.0;
    double pd = 2.0;
    double operator[](std::size_t c) const { return c == 0 ? t1_ms : c == 1 ? t2_ms : pd; }
};

struct EvalReport {
    std::string method;
    std::size_t voxels = 0;
    std::array<double, 3> mae{};
    std::array<double, 3> rmse{};
    std::array<double, 3> psnr{}; ///< dB; +inf when rmse is zero
    double seconds = 0.0;

    /// MAE divided by the channel range.
    double normalized_mae(std::size_t channel, const MetricRanges &ranges) const;
};

/// Metrics over voxels where both masks are set.
EvalReport evaluate(const ParametricMaps &pred, const ParametricMaps &gt, const MetricRanges &ranges = {},
                    const std::string &method = "", double seconds = 0.0);

/// Pools several slices into one report (voxel-weighted).
EvalReport evaluate(const std::vector<ParametricMaps> &pred, const std::vector<ParametricMaps> &gt,
                    const MetricRanges &ranges = {}, const std::string &method = "", double seconds = 0.0);

/// `method,voxels,t1_mae,t1_rmse,t1_psnr,t2_...,pd_...,seconds`
std::string report_csv_header();
std::string report_csv_row(const EvalReport &report);

} // namespace mrf
