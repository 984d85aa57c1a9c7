#pragma once

#include <Eigen/Core>

namespace mrf {

/// Row-major dense matrix; rows are signals (voxels or atoms).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace mrf
