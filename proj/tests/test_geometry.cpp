#include "doctest.h"
#include "pen/error.hpp"
#include "pen/geometry.hpp"
#include "pen/kdtree.hpp"
#include "pen/ply.hpp"
#include "support.hpp"

using namespace pen;

namespace {

TriangleMesh two_triangles() {
  // areas 1 and 3, leaves 0 and 1
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 0, 1}, {6, 0, 1}, {0, 1, 1}};
  m.triangles = {{0, 1, 2}, {3, 4, 5}};
  m.triangle_leaf = {NodeId{0}, NodeId{1}};
  return m;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> g;
  Eigen::Vector3d axis(g(rng), g(rng), g(rng));
  axis.normalize();
  const double angle = std::uniform_real_distribution<double>(0, max_angle)(rng);
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

}  // namespace

TEST_CASE("sample_surface stays on the triangle") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  m.triangle_leaf = {NodeId{0}};
  Rng rng(1);
  const auto c = sample_surface(m, 1000, rng);
  REQUIRE(c.size() == 1000);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    const auto p = c.points.col(i);
    CHECK(p.z() == 0.0);
    CHECK(p.x() >= 0.0);
    CHECK(p.y() >= 0.0);
    CHECK(p.x() + p.y() <= 1.0 + 1e-12);
    CHECK(c.leaf_id[i] == 0);
  }
}

TEST_CASE("sample_surface is area weighted") {
  Rng rng(2);
  const std::size_t n = 100000;
  const auto c = sample_surface(two_triangles(), n, rng);
  const double frac = std::count(c.leaf_id.begin(), c.leaf_id.end(), 0) / double(n);
  CHECK(std::abs(frac - 0.25) < 0.01);

  TriangleMesh flat;
  flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  flat.triangles = {{0, 1, 2}};
  flat.triangle_leaf = {NodeId{0}};
  CHECK_THROWS_AS(sample_surface(flat, 10, rng), GeometryError);
}

TEST_CASE("normalize_cloud") {
  PointCloud c = PointCloud::with_size(8);
  for (int i = 0; i < 8; ++i) c.points.col(i) = Eigen::Vector3d(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const auto n = normalize_cloud(c);
  CHECK(n.points.rowwise().mean().norm() < 1e-12);
  CHECK(std::abs(n.points.colwise().norm().maxCoeff() - 1.0) < 1e-12);
  // corners of a cube centred at origin: every point at radius 1
  CHECK((n.points.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((normalize_cloud(n).points - n.points).cwiseAbs().maxCoeff() < 1e-12);

  PointCloud same = PointCloud::with_size(3);
  same.points.setConstant(0.5);
  CHECK_THROWS_AS(normalize_cloud(same), GeometryError);
  CHECK_THROWS_AS(normalize_cloud(PointCloud{}), InputError);
}

TEST_CASE("rigid transforms") {
  std::mt19937_64 rng(3);
  RigidTransform t{random_rotation(rng, 3.0), Eigen::Vector3d(1, 2, 3)};
  RigidTransform acc;
  for (int i = 0; i < 100; ++i) acc = acc.compose(t);
  CHECK(acc.is_valid(1e-9));
  const auto id = t.compose(t.inverse());
  CHECK(rotation_angle_between(id.rotation, Eigen::Matrix3d::Identity()) < 1e-9);
  CHECK(id.translation.norm() < 1e-12);

  Eigen::Matrix3Xd src = Eigen::Matrix3Xd::Random(3, 50);
  const auto fit = fit_rigid(src, t.apply(src));
  CHECK(rotation_angle_between(fit.rotation, t.rotation) < 1e-9);
  CHECK((fit.translation - t.translation).norm() < 1e-9);
  CHECK(fit.rotation.determinant() > 0);

  Eigen::Matrix3Xd line(3, 4);
  line << 0, 1, 2, 3, 0, 0, 0, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(fit_rigid(line, line), AlignmentError);
}

TEST_CASE("icp") {
  std::mt19937_64 rng(4);
  Rng srng(5);
  TriangleMesh m = two_triangles();
  m.vertices.push_back({3, 2, -1});
  m.triangles.push_back({0, 4, 6});
  m.triangle_leaf.push_back(NodeId{1});
  const auto src = normalize_cloud(sample_surface(m, 2000, srng));

  const auto self = icp_align(src, src);
  CHECK(self.residual < 1e-9);
  CHECK(rotation_angle_between(self.transform.rotation, Eigen::Matrix3d::Identity()) < 1e-9);

  int recovered = 0;
  std::uniform_real_distribution<double> shift(-0.2, 0.2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3d rot = random_rotation(rng, 30.0 * M_PI / 180.0);
    const RigidTransform truth{rot, Eigen::Vector3d(shift(rng), shift(rng), shift(rng))};
    PointCloud tgt = src;
    tgt.points = truth.apply(src.points);
    const auto r = icp_align(src, tgt);
    for (std::size_t k = 1; k < r.residual_history.size(); ++k)
      if (r.residual_history[k] > r.residual_history[k - 1]) {
        // the kept transform never gets worse even when one step overshoots
        CHECK(r.residual <= r.residual_history[k - 1]);
      }
    if (rotation_angle_between(r.transform.rotation, truth.rotation) < 1e-3 &&
        (r.transform.translation - truth.translation).norm() < 1e-4)
      ++recovered;
  }
  CHECK(recovered >= 9);

  // unrelated clouds: no error, finite residual
  PointCloud other = PointCloud::with_size(300);
  other.points = Eigen::Matrix3Xd::Random(3, 300);
  const auto r = icp_align(other, src);
  CHECK(std::isfinite(r.residual));
}

TEST_CASE("kd-tree agrees with brute force") {
  std::mt19937_64 rng(6);
  for (int n : {1, 7, 100, 2000}) {
    const Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, n);
    const KdTree tree(pts);
    for (int q = 0; q < 200; ++q) {
      const Eigen::Vector3d query = Eigen::Vector3d::Random() * 1.5;
      double best = 1e300;
      for (int i = 0; i < n; ++i) best = std::min(best, (pts.col(i) - query).squaredNorm());
      const auto hit = tree.nearest(query);
      CHECK(hit.sq_dist == doctest::Approx(best).epsilon(1e-12));
      CHECK((pts.col(hit.index) - query).squaredNorm() == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("chamfer properties") {
  const Eigen::Matrix3Xd a = Eigen::Matrix3Xd::Random(3, 40), b = Eigen::Matrix3Xd::Random(3, 25);
  CHECK(chamfer(a, a) == 0.0);
  CHECK(chamfer(a, b) == doctest::Approx(chamfer(b, a)).epsilon(1e-14));
  double brute = 0;
  for (int i = 0; i < 40; ++i) {
    double m = 1e300;
    for (int j = 0; j < 25; ++j) m = std::min(m, (a.col(i) - b.col(j)).squaredNorm());
    brute += m / 40;
  }
  for (int j = 0; j < 25; ++j) {
    double m = 1e300;
    for (int i = 0; i < 40; ++i) m = std::min(m, (a.col(i) - b.col(j)).squaredNorm());
    brute += m / 25;
  }
  CHECK(chamfer(a, b) == doctest::Approx(brute).epsilon(1e-12));
  CHECK_THROWS_AS(chamfer(a, Eigen::Matrix3Xd(3, 0)), InputError);
}

TEST_CASE("cloud PLY round trip") {
  PointCloud c = PointCloud::with_size(3);
  c.points << 0.5, -1, 0.25, 1e-3, 2, 3, 0, 0, -0.125;
  c.leaf_id = {1, 2, 3};
  c.tag_id = {kNone, 0, 1};
  c.semantic_label = {2, kNone, 0};
  const auto back = parse_cloud_ply(write_cloud_ply(c));
  CHECK((back.points - c.points).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(back.leaf_id == c.leaf_id);
  CHECK(back.tag_id == c.tag_id);
  CHECK(back.semantic_label == c.semantic_label);
  CHECK_THROWS_AS(parse_cloud_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n1\n"),
                  ParseError);
}
