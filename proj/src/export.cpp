#include "pen/export.hpp"

#include <Eigen/Eigenvalues>

#include "pen/trainer.hpp"

namespace pen {

Eigen::MatrixXd embed_cloud(const PenParams<float>& params, const PointCloud& cloud) {
  return forward(params, points_matrix(cloud)).embedding.cast<double>();
}

Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic> pca_rgb(const Eigen::MatrixXd& embedding) {
  const Eigen::Index d = embedding.rows(), n = embedding.cols();
  Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic> rgb = Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>::Zero(3, n);
  if (n < 2 || d == 0) return rgb;
  const Eigen::MatrixXd centered = embedding.colwise() - embedding.rowwise().mean();
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const int k = static_cast<int>(std::min<Eigen::Index>(3, d));
  for (int c = 0; c < k; ++c) {
    // eigenvalues ascend
    Eigen::VectorXd axis = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis(big) < 0) axis = -axis;
    const Eigen::RowVectorXd proj = axis.transpose() * centered;
    const double lo = proj.minCoeff(), hi = proj.maxCoeff();
    if (hi - lo <= 0) continue;
    for (Eigen::Index i = 0; i < n; ++i)
      rgb(c, i) = static_cast<std::uint8_t>(std::lround(255.0 * (proj(i) - lo) / (hi - lo)));
  }
  return rgb;
}

}  // namespace pen
