#pragma once

// On-disk layout of every artifact, all built from MRFA arrays.

#include "mrf/acquisition.hpp"
#include "mrf/epg.hpp"
#include "mrf/maps.hpp"
#include "mrf/subspace.hpp"

#include <filesystem>

namespace mrf {

/// atoms.mrfa [N, d0], lut.mrfa [N, 2], norms.mrfa [N]
void save_dictionary(const std::filesystem::path &dir, const Dictionary &dictionary);
Dictionary load_dictionary(const std::filesystem::path &dir);

/// basis.mrfa [d0, d1] plus basis.txt (singular values, energies)
void save_basis(const std::filesystem::path &dir, const SubspaceBasis &basis);
SubspaceBasis load_basis(const std::filesystem::path &dir);

/// maps.mrfa [H, W, 3] (t1, t2, pd) and mask.mrfa [H, W]
void save_maps(const std::filesystem::path &dir, const ParametricMaps &maps);
ParametricMaps load_maps(const std::filesystem::path &dir);

/// [H, W, T]; the kind is not stored and must be supplied on load.
void save_tsmi(const std::filesystem::path &path, const Tsmi &tsmi);
Tsmi load_tsmi(const std::filesystem::path &path, TsmiKind kind);

/// Directory holding tsmi_raw.mrfa or tsmi_compressed.mrfa plus the maps.
void save_sample(const std::filesystem::path &dir, const Sample &sample);
Sample load_sample(const std::filesystem::path &dir);

} // namespace mrf
