#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

namespace pen {

/// Static 3-D k-d tree over a copy of the input points; exact nearest
/// neighbour queries.
class KdTree {
 public:
  explicit KdTree(const Eigen::Matrix3Xd& points);

  struct Hit {
    std::uint32_t index = 0;
    double sq_dist = std::numeric_limits<double>::infinity();
  };
  Hit nearest(const Eigen::Vector3d& query) const;
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }

 private:
  struct Node {
    std::uint32_t begin, end;   // range into order_ (leaf) or split bounds
    std::int32_t left = -1, right = -1;
    int axis = -1;              // -1 for leaves
    double split = 0.0;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Eigen::Vector3d& q, Hit& best) const;

  Eigen::Matrix3Xd points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  static constexpr std::uint32_t kLeafSize = 8;
};

}  // namespace pen
