#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>

#include "pen/geometry.hpp"

namespace pen {

/// ASCII PLY with `x y z` floats and `leaf_id tag_id label` ints (kNone for
/// absent annotations).
std::string write_cloud_ply(const PointCloud& cloud);

/// ASCII PLY with xyz, embedding columns `e0..e{d-1}` and `red green blue`.
/// `embedding` is d x N, `rgb` is 3 x N.
std::string write_embedding_ply(const PointCloud& cloud, const Eigen::MatrixXd& embedding,
                                const Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>& rgb);

/// Reads any ASCII PLY vertex element; x/y/z are required, leaf_id, tag_id
/// and label are picked up when present. Throws ParseError.
PointCloud parse_cloud_ply(std::string_view bytes);

}  // namespace pen
