#include "mrf/evaluate.hpp"
#include "mrf/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace mrf {

double EvalReport::normalized_mae(std::size_t channel, const MetricRanges &ranges) const {
    return mae.at(channel) / ranges[channel];
}

namespace {

struct Accum {
    std::size_t n = 0;
    std::array<double, 3> abs{}, sq{};

    void add(const ParametricMaps &pred, const ParametricMaps &gt) {
        if (pred.height != gt.height || pred.width != gt.width) {
            throw DomainError("evaluate: map dimensions differ");
        }
        for (std::size_t i = 0; i < gt.voxels(); ++i) {
            if (!pred.mask[i] || !gt.mask[i]) {
                continue;
            }
            ++n;
            for (std::size_t c = 0; c < 3; ++c) {
                const double e = pred.channel(c)[i] - gt.channel(c)[i];
                abs[c] += std::abs(e);
                sq[c] += e * e;
            }
        }
    }

    EvalReport finish(const MetricRanges &ranges, const std::string &method, double seconds) const {
        if (n == 0) {
            throw DomainError("evaluate: mask intersection is empty");
        }
        EvalReport r;
        r.method = method;
        r.voxels = n;
        r.seconds = seconds;
        for (std::size_t c = 0; c < 3; ++c) {
            r.mae[c] = abs[c] / static_cast<double>(n);
            r.rmse[c] = std::sqrt(sq[c] / static_cast<double>(n));
            r.psnr[c] = r.rmse[c] > 0.0 ? 20.0 * std::log10(ranges[c] / r.rmse[c])
                                        : std::numeric_limits<double>::infinity();
        }
        return r;
    }
};

} // namespace

EvalReport evaluate(const ParametricMaps &pred, const ParametricMaps &gt, const MetricRanges &ranges,
                    const std::string &method, double seconds) {
    Accum a;
    a.add(pred, gt);
    return a.finish(ranges, method, seconds);
}

EvalReport evaluate(const std::vector<ParametricMaps> &pred, const std::vector<ParametricMaps> &gt,
                    const MetricRanges &ranges, const std::string &method, double seconds) {
    if (pred.size() != gt.size()) {
        throw DomainError("evaluate: slice counts differ");
    }
    Accum a;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        a.add(pred[i], gt[i]);
    }
    return a.finish(ranges, method, seconds);
}

std::string report_csv_header() {
    return "method,voxels,t1_mae,t1_rmse,t1_psnr,t2_mae,t2_rmse,t2_psnr,pd_mae,pd_rmse,pd_psnr,seconds";
}

std::string report_csv_row(const EvalReport &r) {
    std::string s = r.method + "," + std::to_string(r.voxels);
    char buf[64];
    for (std::size_t c = 0; c < 3; ++c) {
        for (double v : {r.mae[c], r.rmse[c], r.psnr[c]}) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            s += buf;
        }
    }
    std::snprintf(buf, sizeof buf, ",%.6f", r.seconds);
    return s + buf;
}

} // namespace mrf
