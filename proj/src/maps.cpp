#include "mrf/maps.hpp"
#include "mrf/error.hpp"

#include <cmath>
#include <string>

namespace mrf {

ParametricMaps ParametricMaps::zeros(std::size_t height, std::size_t width) {
    ParametricMaps m;
    m.height = height;
    m.width = width;
    m.t1_ms.assign(height * width, 0.0);
    m.t2_ms.assign(height * width, 0.0);
    m.pd.assign(height * width, 0.0);
    m.mask.assign(height * width, 0);
    return m;
}

const std::vector<double> &ParametricMaps::channel(int c) const {
    switch (c) {
    case 0: return t1_ms;
    case 1: return t2_ms;
    case 2: return pd;
    default: throw DomainError("maps: channel index must be 0, 1 or 2");
    }
}

std::vector<double> &ParametricMaps::channel(int c) {
    return const_cast<std::vector<double> &>(static_cast<const ParametricMaps &>(*this).channel(c));
}

void ParametricMaps::validate() const {
    const auto n = voxels();
    if (t1_ms.size() != n || t2_ms.size() != n || pd.size() != n || mask.size() != n) {
        throw DomainError("maps: channel sizes do not match height x width");
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (mask[v]) {
            if (!(t1_ms[v] > 0.0 && t2_ms[v] > 0.0 && t2_ms[v] <= t1_ms[v] && pd[v] >= 0.0)) {
                throw DomainError("maps: invalid tissue at voxel " + std::to_string(v));
            }
        } else if (t1_ms[v] != 0.0 || t2_ms[v] != 0.0 || pd[v] != 0.0) {
            throw DomainError("maps: masked voxel " + std::to_string(v) + " carries non-zero values");
        }
    }
}

Tsmi Tsmi::zeros(std::size_t height, std::size_t width, std::size_t frames, TsmiKind kind) {
    Tsmi t;
    t.height = height;
    t.width = width;
    t.frames = frames;
    t.kind = kind;
    t.data.assign(height * width * frames, 0.0);
    return t;
}

Eigen::Map<RowMatrix> Tsmi::matrix() {
    return {data.data(), static_cast<Eigen::Index>(voxels()), static_cast<Eigen::Index>(frames)};
}

Eigen::Map<const RowMatrix> Tsmi::matrix() const {
    return {data.data(), static_cast<Eigen::Index>(voxels()), static_cast<Eigen::Index>(frames)};
}

} // namespace mrf
