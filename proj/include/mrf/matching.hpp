#pragma once

// Exhaustive dictionary matching, in the full time domain or in the
// compressed subspace.

#include "mrf/epg.hpp"
#include "mrf/maps.hpp"
#include "mrf/subspace.hpp"

#include <optional>
#include <vector>

namespace mrf {

struct MatchResult {
    double t1_ms = 0.0;
    double t2_ms = 0.0;
    double pd = 0.0;
    double score = 0.0;     ///< <x, atom> / |x|
    std::size_t index = 0;  ///< winning atom
    bool flagged = false;   ///< zero voxel or clamped (negative) PD
};

struct MatchOptions {
    Eigen::Index query_block = 256;
    Eigen::Index atom_block = 4096;
};

/// Projected dictionary, renormalized so correlation is taken against unit atoms.
struct CompressedDictionary {
    RowMatrix atoms;       ///< N x d1, unit rows
    Eigen::VectorXd gains; ///< |project(atom)| before renormalization
};

CompressedDictionary compress_dictionary(const Dictionary &dictionary, const SubspaceBasis &basis);

std::vector<MatchResult> match_full(const RowMatrix &voxels, const Dictionary &dictionary,
                                    const MatchOptions &options = {});

std::vector<MatchResult> match_compressed(const RowMatrix &coeffs, const Dictionary &dictionary,
                                          const CompressedDictionary &compressed,
                                          const MatchOptions &options = {});
std::vector<MatchResult> match_compressed(const RowMatrix &coeffs, const Dictionary &dictionary,
                                          const SubspaceBasis &basis, const MatchOptions &options = {});

/// Image-shaped matching. A raw TSMI is compressed first when a basis is given;
/// a compressed TSMI requires one. Map PD is the match scale divided by the
/// winning atom's pre-normalization norm, i.e. in the units of simulate(pd).
ParametricMaps match_maps(const Tsmi &tsmi, const Dictionary &dictionary, const SubspaceBasis *basis,
                          const MatchOptions &options = {});

} // namespace mrf
