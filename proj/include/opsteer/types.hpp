#pragma once

#include <Eigen/Core>

namespace opsteer {

using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-agent boolean flags (active set, actuation indicators).
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
using MaskMatrix =
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace opsteer
