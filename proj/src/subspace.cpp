#include "mrf/subspace.hpp"
#include "mrf/error.hpp"

#include <Eigen/SVD>

namespace mrf {

double SubspaceBasis::captured_energy_fraction() const {
    if (!(total_energy > 0.0)) {
        return 0.0;
    }
    return singular_values.squaredNorm() / total_energy;
}

SubspaceBasis fit_subspace(const Dictionary &dictionary, Eigen::Index d1) {
    dictionary.validate();
    const Eigen::Index n = dictionary.atoms.rows();
    const Eigen::Index d0 = dictionary.atoms.cols();
    if (n == 0) {
        throw DomainError("fit_subspace: empty dictionary");
    }
    if (d1 < 1 || d1 > std::min(n, d0)) {
        throw DomainError("fit_subspace: d1 must lie in [1, min(N, d0)]");
    }

    Eigen::MatrixXd atoms = dictionary.atoms;
    if (!dictionary.normalized) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double norm = atoms.row(i).norm();
            if (norm > 0.0) {
                atoms.row(i) /= norm;
            }
        }
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(atoms, Eigen::ComputeThinV);
    const auto &sv = svd.singularValues();

    SubspaceBasis out;
    out.total_energy = sv.squaredNorm();
    out.singular_values = sv.head(d1);
    out.basis = svd.matrixV().leftCols(d1);
    for (Eigen::Index k = 0; k < d1; ++k) {
        Eigen::Index arg = 0;
        out.basis.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.basis(arg, k) < 0.0) {
            out.basis.col(k) = -out.basis.col(k);
        }
    }
    return out;
}

RowMatrix project(const RowMatrix &signals, const SubspaceBasis &basis) {
    if (signals.cols() != basis.d0()) {
        throw DomainError("project: signal length does not match basis d0");
    }
    RowMatrix out(signals.rows(), basis.d1());
    out.noalias() = signals * basis.basis;
    return out;
}

RowMatrix reconstruct(const RowMatrix &coeffs, const SubspaceBasis &basis) {
    if (coeffs.cols() != basis.d1()) {
        throw DomainError("reconstruct: coefficient length does not match basis d1");
    }
    RowMatrix out(coeffs.rows(), basis.d0());
    out.noalias() = coeffs * basis.basis.transpose();
    return out;
}

} // namespace mrf
