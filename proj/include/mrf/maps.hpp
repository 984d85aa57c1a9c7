#pragma once

#include "mrf/types.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mrf {

/// T1/T2/PD images with a validity mask (true = tissue present / estimate valid).
/// Invalid voxels carry zeros.
struct ParametricMaps {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> t1_ms;
    std::vector<double> t2_ms;
    std::vector<double> pd;
    std::vector<std::uint8_t> mask;

    static ParametricMaps zeros(std::size_t height, std::size_t width);

    std::size_t voxels() const { return height * width; }
    const std::vector<double> &channel(int c) const;
    std::vector<double> &channel(int c);
    /// Throws DomainError on any broken invariant.
    void validate() const;

    bool operator==(const ParametricMaps &) const = default;
};

enum class TsmiKind : std::uint8_t { Raw, Compressed };

/// Time-series of images, stored voxel-major: data[(row * width + col) * frames + t].
struct Tsmi {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t frames = 0;
    TsmiKind kind = TsmiKind::Raw;
    std::vector<double> data;

    static Tsmi zeros(std::size_t height, std::size_t width, std::size_t frames, TsmiKind kind);

    std::size_t voxels() const { return height * width; }
    double &at(std::size_t row, std::size_t col, std::size_t t) { return data[(row * width + col) * frames + t]; }
    double at(std::size_t row, std::size_t col, std::size_t t) const {
        return data[(row * width + col) * frames + t];
    }

    /// Voxels as rows of a (H*W) x T matrix.
    Eigen::Map<RowMatrix> matrix();
    Eigen::Map<const RowMatrix> matrix() const;

    bool operator==(const Tsmi &) const = default;
};

} // namespace mrf
