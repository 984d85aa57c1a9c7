#include "mrf/matching.hpp"
#include "mrf/error.hpp"

#include <algorithm>

namespace mrf {

namespace {

struct Best {
    double abs_value = -1.0;
    double value = 0.0;
    Eigen::Index index = 0;
};

/// Blocked argmax of |<query, atom>| over unit-norm atoms. Atoms are scanned in
/// increasing index with a strict comparison, so ties go to the smallest index.
std::vector<Best> blocked_argmax(const RowMatrix &queries, const RowMatrix &atoms, const MatchOptions &options) {
    if (options.query_block < 1 || options.atom_block < 1) {
        throw DomainError("match: block sizes must be positive");
    }
    const Eigen::Index m = queries.rows();
    const Eigen::Index n = atoms.rows();
    const Eigen::Index qb = options.query_block;
    const Eigen::Index ab = options.atom_block;
    const Eigen::Index query_blocks = (m + qb - 1) / qb;
    std::vector<Best> best(static_cast<std::size_t>(m));

#pragma omp parallel
    {
        RowMatrix scores;
#pragma omp for schedule(dynamic, 1)
        for (Eigen::Index b = 0; b < query_blocks; ++b) {
            const Eigen::Index q0 = b * qb;
            const Eigen::Index qn = std::min(qb, m - q0);
            for (Eigen::Index a0 = 0; a0 < n; a0 += ab) {
                const Eigen::Index an = std::min(ab, n - a0);
                scores.resize(qn, an);
                scores.noalias() = queries.middleRows(q0, qn) * atoms.middleRows(a0, an).transpose();
                for (Eigen::Index r = 0; r < qn; ++r) {
                    Best &bst = best[static_cast<std::size_t>(q0 + r)];
                    const double *row = scores.row(r).data();
                    for (Eigen::Index c = 0; c < an; ++c) {
                        const double v = row[c];
                        const double av = v < 0.0 ? -v : v;
                        if (av > bst.abs_value) {
                            bst.abs_value = av;
                            bst.value = v;
                            bst.index = a0 + c;
                        }
                    }
                }
            }
        }
    }
    return best;
}

std::vector<MatchResult> finish(const RowMatrix &queries, const std::vector<Best> &best,
                                const Dictionary &dictionary, const Eigen::VectorXd *gains) {
    std::vector<MatchResult> out(best.size());
    for (std::size_t i = 0; i < best.size(); ++i) {
        MatchResult &r = out[i];
        const double qnorm = queries.row(static_cast<Eigen::Index>(i)).norm();
        const auto j = static_cast<std::size_t>(best[i].index);
        r.index = j;
        r.t1_ms = dictionary.lut[j].t1_ms;
        r.t2_ms = dictionary.lut[j].t2_ms;
        if (!(qnorm > 0.0)) {
            r.index = 0;
            r.t1_ms = dictionary.lut[0].t1_ms;
            r.t2_ms = dictionary.lut[0].t2_ms;
            r.flagged = true;
            continue;
        }
        const double inner = best[i].value;
        r.score = inner / qnorm;
        r.pd = gains ? inner / (*gains)[best[i].index] : inner;
        if (r.pd < 0.0) {
            r.pd = 0.0;
            r.flagged = true;
        }
    }
    return out;
}

void require_normalized(const Dictionary &dictionary) {
    if (!dictionary.normalized) {
        throw DomainError("match: dictionary must be normalized");
    }
    if (dictionary.size() == 0) {
        throw DomainError("match: empty dictionary");
    }
    if (dictionary.atoms.rows() != static_cast<Eigen::Index>(dictionary.size())) {
        throw DomainError("match: atoms and lut disagree in length");
    }
}

} // namespace

CompressedDictionary compress_dictionary(const Dictionary &dictionary, const SubspaceBasis &basis) {
    require_normalized(dictionary);
    CompressedDictionary c;
    c.atoms = project(dictionary.atoms, basis);
    c.gains = c.atoms.rowwise().norm();
    for (Eigen::Index i = 0; i < c.atoms.rows(); ++i) {
        if (!(c.gains[i] > 0.0)) {
            throw DomainError("compress_dictionary: atom " + std::to_string(i) + " vanishes in the subspace");
        }
        c.atoms.row(i) /= c.gains[i];
    }
    return c;
}

std::vector<MatchResult> match_full(const RowMatrix &voxels, const Dictionary &dictionary,
                                    const MatchOptions &options) {
    require_normalized(dictionary);
    if (voxels.cols() != dictionary.atoms.cols()) {
        throw DomainError("match_full: voxel length does not match dictionary d0");
    }
    return finish(voxels, blocked_argmax(voxels, dictionary.atoms, options), dictionary, nullptr);
}

std::vector<MatchResult> match_compressed(const RowMatrix &coeffs, const Dictionary &dictionary,
                                          const CompressedDictionary &compressed, const MatchOptions &options) {
    require_normalized(dictionary);
    if (compressed.atoms.rows() != dictionary.atoms.rows()) {
        throw DomainError("match_compressed: compressed dictionary does not match dictionary");
    }
    if (coeffs.cols() != compressed.atoms.cols()) {
        throw DomainError("match_compressed: coefficient length does not match basis d1");
    }
    return finish(coeffs, blocked_argmax(coeffs, compressed.atoms, options), dictionary, &compressed.gains);
}

std::vector<MatchResult> match_compressed(const RowMatrix &coeffs, const Dictionary &dictionary,
                                          const SubspaceBasis &basis, const MatchOptions &options) {
    if (basis.d0() != dictionary.atoms.cols()) {
        throw DomainError("match_compressed: basis d0 does not match dictionary");
    }
    return match_compressed(coeffs, dictionary, compress_dictionary(dictionary, basis), options);
}

ParametricMaps match_maps(const Tsmi &tsmi, const Dictionary &dictionary, const SubspaceBasis *basis,
                          const MatchOptions &options) {
    std::vector<MatchResult> results;
    const auto d0 = static_cast<std::size_t>(dictionary.atoms.cols());
    if (basis == nullptr) {
        if (tsmi.kind != TsmiKind::Raw || tsmi.frames != d0) {
            throw DomainError("match_maps: full matching needs a raw TSMI with d0 frames");
        }
        results = match_full(RowMatrix(tsmi.matrix()), dictionary, options);
    } else if (tsmi.kind == TsmiKind::Raw) {
        if (tsmi.frames != d0 || basis->d0() != static_cast<Eigen::Index>(d0)) {
            throw DomainError("match_maps: raw TSMI frames do not match dictionary d0");
        }
        results = match_compressed(project(RowMatrix(tsmi.matrix()), *basis), dictionary, *basis, options);
    } else {
        if (static_cast<Eigen::Index>(tsmi.frames) != basis->d1()) {
            throw DomainError("match_maps: compressed TSMI channels do not match basis d1");
        }
        results = match_compressed(RowMatrix(tsmi.matrix()), dictionary, *basis, options);
    }

    auto maps = ParametricMaps::zeros(tsmi.height, tsmi.width);
    for (std::size_t v = 0; v < results.size(); ++v) {
        const auto &r = results[v];
        if (r.flagged) {
            continue;
        }
        maps.t1_ms[v] = r.t1_ms;
        maps.t2_ms[v] = r.t2_ms;
        const double norm = dictionary.norms.size() ? dictionary.norms[static_cast<Eigen::Index>(r.index)] : 1.0;
        maps.pd[v] = norm > 0.0 ? r.pd / norm : r.pd;
        maps.mask[v] = 1;
    }
    return maps;
}

} // namespace mrf
