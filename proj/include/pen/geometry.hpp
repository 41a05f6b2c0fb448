#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "pen/error.hpp"
#include "pen/hierarchy.hpp"

namespace pen {

using Rng = std::mt19937_64;

/// Triangle soup with a leaf assignment per triangle.
struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<NodeId> triangle_leaf;            // one per triangle
  std::vector<std::int32_t> triangle_label;     // empty, or one semantic label per triangle

  std::size_t num_triangles() const { return triangles.size(); }
  double triangle_area(std::size_t t) const;
  double total_area() const;
  /// Throws InputError on out-of-range indices or mismatched per-triangle arrays.
  void validate() const;
};

inline constexpr std::int32_t kNone = -1;

/// N sampled surface points with parallel per-point annotations. Absent
/// annotations are stored as kNone.
struct PointCloud {
  Eigen::Matrix3Xd points;
  std::vector<std::int32_t> leaf_id;
  std::vector<std::int32_t> tag_id;
  std::vector<std::int32_t> semantic_label;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  bool empty() const { return points.cols() == 0; }

  /// Allocates `n` points with every annotation set to kNone.
  static PointCloud with_size(std::size_t n);
  /// Copies the listed points (with annotations) in order.
  PointCloud subset(const std::vector<std::uint32_t>& indices) const;
  void validate() const;
};

inline constexpr std::size_t kStoredCloudSize = 10000;
inline constexpr std::size_t kTrainSubsampleSize = 2500;

/// Area-weighted uniform surface sampling; each point inherits its triangle's
/// leaf id and (when present) semantic label.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng);

/// Centres the cloud at the origin and scales its maximum radius to 1.
PointCloud normalize_cloud(const PointCloud& cloud);

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  Eigen::Matrix3Xd apply(const Eigen::Matrix3Xd& pts) const;
  /// (*this) ∘ other: applies `other` first.
  RigidTransform compose(const RigidTransform& other) const;
  RigidTransform inverse() const;
  bool is_valid(double tol = 1e-9) const;
};

/// Angle of the relative rotation between `a` and `b`, in radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Least-squares rotation+translation mapping `src` columns onto `dst`
/// columns. Throws AlignmentError when the cross-covariance has rank < 2.
RigidTransform fit_rigid(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst);

struct IcpConfig {
  double tol = 1e-8;  // relative improvement of the mean squared residual
  int max_iters = 100;
};

struct IcpResult {
  RigidTransform transform;
  double residual = 0.0;                 // mean squared residual of `transform`
  std::vector<double> residual_history;  // one entry per correspondence step
  int iterations = 0;
};

/// Point-to-point ICP mapping `source` toward `target`.
IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpConfig& cfg = {});

/// Mean squared nearest distance from a to b plus from b to a.
double chamfer(const PointCloud& a, const PointCloud& b);
double chamfer(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b);

/// Chamfer distance with its gradient with respect to `a`; brute-force nearest
/// neighbours, suited to the few-thousand-point clouds of the autoencoder.
template <typename T>
T chamfer_with_grad(const Eigen::Matrix<T, 3, Eigen::Dynamic>& a,
                    const Eigen::Matrix<T, 3, Eigen::Dynamic>& b,
                    Eigen::Matrix<T, 3, Eigen::Dynamic>* grad_a);

extern template float chamfer_with_grad<float>(const Eigen::Matrix<float, 3, Eigen::Dynamic>&,
                                               const Eigen::Matrix<float, 3, Eigen::Dynamic>&,
                                               Eigen::Matrix<float, 3, Eigen::Dynamic>*);
extern template double chamfer_with_grad<double>(const Eigen::Matrix<double, 3, Eigen::Dynamic>&,
                                                 const Eigen::Matrix<double, 3, Eigen::Dynamic>&,
                                                 Eigen::Matrix<double, 3, Eigen::Dynamic>*);

}  // namespace pen
