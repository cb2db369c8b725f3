#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace sparse_score {

/// Row-per-sample storage: an n x d matrix holds n points of dimension d.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Index = Eigen::Index;

}  // namespace sparse_score
