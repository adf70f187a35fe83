#pragma once

#include <Eigen/Dense>

namespace mocca {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

} // namespace mocca
