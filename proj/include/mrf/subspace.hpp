#pragma once

// Linear projector onto the dominant right-singular subspace of a
// dictionary ("PCA" without mean-centering, i.e. a truncated SVD).

#include "mrf/epg.hpp"
#include "mrf/types.hpp"

#include <Eigen/Core>

namespace mrf {

struct SubspaceBasis {
    Eigen::MatrixXd basis;           ///< d0 x d1, orthonormal columns
    Eigen::VectorXd singular_values; ///< top d1, descending
    double total_energy = 0.0;       ///< sum of all squared singular values

    Eigen::Index d0() const { return basis.rows(); }
    Eigen::Index d1() const { return basis.cols(); }
    double captured_energy_fraction() const;
};

/// SVD of the unit-norm atom matrix; each column's largest-magnitude entry is
/// made positive so the basis is reproducible.
SubspaceBasis fit_subspace(const Dictionary &dictionary, Eigen::Index d1);

RowMatrix project(const RowMatrix &signals, const SubspaceBasis &basis);
RowMatrix reconstruct(const RowMatrix &coeffs, const SubspaceBasis &basis);

} // namespace mrf
