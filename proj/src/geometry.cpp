#include "pen/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pen/kdtree.hpp"

namespace pen {

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Eigen::Vector3d& a = vertices[tri[0]];
  return 0.5 * (vertices[tri[1]] - a).cross(vertices[tri[2]] - a).norm();
}

double TriangleMesh::total_area() const {
  double area = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) area += triangle_area(t);
  return area;
}

void TriangleMesh::validate() const {
  if (triangle_leaf.size() != triangles.size())
    throw InputError("mesh has " + std::to_string(triangles.size()) + " triangles but " +
                     std::to_string(triangle_leaf.size()) + " leaf assignments");
  if (!triangle_label.empty() && triangle_label.size() != triangles.size())
    throw InputError("mesh semantic label count does not match triangle count");
  for (std::size_t t = 0; t < triangles.size(); ++t)
    for (std::uint32_t v : triangles[t])
      if (v >= vertices.size())
        throw InputError("triangle " + std::to_string(t) + " references vertex " +
                         std::to_string(v) + " of " + std::to_string(vertices.size()));
}

PointCloud PointCloud::with_size(std::size_t n) {
  PointCloud c;
  c.points.resize(3, static_cast<Eigen::Index>(n));
  c.leaf_id.assign(n, kNone);
  c.tag_id.assign(n, kNone);
  c.semantic_label.assign(n, kNone);
  return c;
}

PointCloud PointCloud::subset(const std::vector<std::uint32_t>& indices) const {
  PointCloud out = with_size(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::uint32_t j = indices[i];
    out.points.col(static_cast<Eigen::Index>(i)) = points.col(j);
    out.leaf_id[i] = leaf_id[j];
    out.tag_id[i] = tag_id[j];
    out.semantic_label[i] = semantic_label[j];
  }
  return out;
}

void PointCloud::validate() const {
  const std::size_t n = size();
  if (leaf_id.size() != n || tag_id.size() != n || semantic_label.size() != n)
    throw InputError("point cloud annotation arrays do not match point count " +
                     std::to_string(n));
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng) {
  mesh.validate();
  std::vector<double> cdf(mesh.num_triangles());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    total += mesh.triangle_area(t);
    cdf[t] = total;
  }
  if (!(total > 0.0)) throw GeometryError("mesh has zero total surface area");

  PointCloud cloud = PointCloud::with_size(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = unit(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    // upper_bound never lands on a zero-area triangle: its CDF step is empty.
    const std::size_t t = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    const auto& tri = mesh.triangles[t];
    const double s = std::sqrt(unit(rng));
    const double v = unit(rng);
    cloud.points.col(static_cast<Eigen::Index>(i)) =
        (1.0 - s) * mesh.vertices[tri[0]] + s * (1.0 - v) * mesh.vertices[tri[1]] +
        s * v * mesh.vertices[tri[2]];
    cloud.leaf_id[i] = static_cast<std::int32_t>(mesh.triangle_leaf[t].index);
    if (!mesh.triangle_label.empty()) cloud.semantic_label[i] = mesh.triangle_label[t];
  }
  return cloud;
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  if (cloud.empty()) throw InputError("cannot normalize an empty cloud");
  PointCloud out = cloud;
  const Eigen::Vector3d centroid = cloud.points.rowwise().mean();
  out.points.colwise() -= centroid;
  const double radius = out.points.colwise().norm().maxCoeff();
  if (!(radius > 1e-300)) throw GeometryError("degenerate cloud: all points coincide");
  out.points /= radius;
  return out;
}

Eigen::Matrix3Xd RigidTransform::apply(const Eigen::Matrix3Xd& pts) const {
  return (rotation * pts).colwise() + translation;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return {rt, -rt * translation};
}

bool RigidTransform::is_valid(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && rotation.determinant() > 0.0;
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d rel = a.transpose() * b;
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos is ill-conditioned near zero; recover small angles from the skew part.
  const Eigen::Vector3d axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * axis.norm(), c);
}

RigidTransform fit_rigid(const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst) {
  if (src.cols() != dst.cols() || src.cols() == 0)
    throw InputError("fit_rigid needs equally sized nonempty point sets");
  const Eigen::Vector3d cs = src.rowwise().mean();
  const Eigen::Vector3d cd = dst.rowwise().mean();
  const Eigen::Matrix3d cov = (dst.colwise() - cd) * (src.colwise() - cs).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0])
    throw AlignmentError("correspondence covariance has rank < 2");
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg) {
  if (source.empty() || target.empty()) throw InputError("ICP needs nonempty clouds");
  const KdTree tree(target.points);
  const auto n = source.points.cols();

  IcpResult result;
  RigidTransform current;
  Eigen::Matrix3Xd matched(3, n);
  double best = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= cfg.max_iters; ++iter) {
    const Eigen::Matrix3Xd moved = current.apply(source.points);
    double residual = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto hit = tree.nearest(moved.col(i));
      matched.col(i) = target.points.col(hit.index);
      residual += hit.sq_dist;
    }
    residual /= static_cast<double>(n);
    result.residual_history.push_back(residual);
    result.iterations = iter;

    const bool improved = residual <= best;
    if (improved) {
      result.transform = current;
      result.residual = residual;
    }
    const double gain = best - residual;
    best = std::min(best, residual);
    if (residual <= 1e-30 || iter == cfg.max_iters) break;
    if (iter > 0 && gain <= cfg.tol * std::max(best, 1e-300)) break;
    current = fit_rigid(source.points, matched);
  }
  return result;
}

double chamfer(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b) {
  if (a.cols() == 0 || b.cols() == 0) throw InputError("chamfer distance of an empty cloud");
  const auto one_way = [](const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to) {
    const KdTree tree(to);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < from.cols(); ++i) sum += tree.nearest(from.col(i)).sq_dist;
    return sum / static_cast<double>(from.cols());
  };
  return one_way(a, b) + one_way(b, a);
}

double chamfer(const PointCloud& a, const PointCloud& b) { return chamfer(a.points, b.points); }

template <typename T>
T chamfer_with_grad(const Eigen::Matrix<T, 3, Eigen::Dynamic>& a,
                    const Eigen::Matrix<T, 3, Eigen::Dynamic>& b,
                    Eigen::Matrix<T, 3, Eigen::Dynamic>* grad_a) {
  const Eigen::Index na = a.cols(), nb = b.cols();
  if (na == 0 || nb == 0) throw InputError("chamfer distance of an empty cloud");
  // Squared distances via |a|^2 + |b|^2 - 2 a.b, then exact recomputation of
  // the selected pairs so the loss does not inherit cancellation error.
  const Eigen::Matrix<T, Eigen::Dynamic, 1> a2 = a.colwise().squaredNorm().transpose();
  const Eigen::Matrix<T, 1, Eigen::Dynamic> b2 = b.colwise().squaredNorm();
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> d = -2 * (a.transpose() * b);
  d.colwise() += a2;
  d.rowwise() += b2;

  std::vector<Eigen::Index> nn_ab(na), nn_ba(nb);
  for (Eigen::Index i = 0; i < na; ++i) d.row(i).minCoeff(&nn_ab[i]);
  for (Eigen::Index j = 0; j < nb; ++j) d.col(j).minCoeff(&nn_ba[j]);

  T loss_ab = 0, loss_ba = 0;
  if (grad_a) grad_a->setZero(3, na);
  const T wa = T(1) / static_cast<T>(na), wb = T(1) / static_cast<T>(nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    const Eigen::Matrix<T, 3, 1> diff = a.col(i) - b.col(nn_ab[i]);
    loss_ab += diff.squaredNorm();
    if (grad_a) grad_a->col(i) += 2 * wa * diff;
  }
  for (Eigen::Index j = 0; j < nb; ++j) {
    const Eigen::Matrix<T, 3, 1> diff = a.col(nn_ba[j]) - b.col(j);
    loss_ba += diff.squaredNorm();
    if (grad_a) grad_a->col(nn_ba[j]) += 2 * wb * diff;
  }
  return loss_ab * wa + loss_ba * wb;
}

template float chamfer_with_grad<float>(const Eigen::Matrix<float, 3, Eigen::Dynamic>&,
                                        const Eigen::Matrix<float, 3, Eigen::Dynamic>&,
                                        Eigen::Matrix<float, 3, Eigen::Dynamic>*);
template double chamfer_with_grad<double>(const Eigen::Matrix<double, 3, Eigen::Dynamic>&,
                                          const Eigen::Matrix<double, 3, Eigen::Dynamic>&,
                                          Eigen::Matrix<double, 3, Eigen::Dynamic>*);

}  // namespace pen
