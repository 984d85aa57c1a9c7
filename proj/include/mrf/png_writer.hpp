#pragma once

#include "mrf/maps.hpp"

#include <filesystem>

namespace mrf {

/// Gray level for v in [min, max]: round-half-up of 255 * clamp((v - min) / (max - min), 0, 1).
std::uint8_t gray_level(double v, double min, double max);

/// 8-bit grayscale PNG of one channel (0 = T1, 1 = T2, 2 = PD) plus `<path>.range.csv`
/// holding the min/max used. Throws DomainError if min >= max, IoError if unwritable.
void write_map_png(const ParametricMaps &maps, int channel, double min, double max,
                   const std::filesystem::path &path);

} // namespace mrf
