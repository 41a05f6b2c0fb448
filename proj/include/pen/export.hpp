#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "pen/geometry.hpp"
#include "pen/network.hpp"

namespace pen {

/// Unit-norm point embeddings (d x N) of every point of `cloud`.
Eigen::MatrixXd embed_cloud(const PenParams<float>& params, const PointCloud& cloud);

/// Projects d x N embeddings onto their top three principal axes and maps each
/// axis to 0..255 by min-max scaling. Axis signs are fixed so that the largest
/// magnitude loading is positive. Fewer than three points or dimensions leave
/// the missing channels at 0.
Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic> pca_rgb(const Eigen::MatrixXd& embedding);

}  // namespace pen
