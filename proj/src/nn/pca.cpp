#include "geocsp/nn/pca.hpp"

#include <algorithm>

#include "geocsp/error.hpp"

namespace geocsp::nn {

PcaResult pca(const Matrix& points, int k) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (k < 1 || k > d) fail(ErrorKind::Dimension, "pca: k must lie in [1, dims]");
  if (n < k + 1) fail(ErrorKind::Dimension, "pca: needs at least k+1 points");

  PcaResult out;
  out.mean = points.colwise().mean();
  const Matrix centered = points.rowwise() - out.mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  // Eigen returns ascending eigenvalues.
  double total = 0.0;
  for (Eigen::Index i = d - 1; i >= 0; --i) {
    const double lambda = std::max(0.0, eig.eigenvalues()(i));
    out.eigenvalues.push_back(lambda);
    total += lambda;
  }
  out.components.resize(k, d);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.row(j) = v.transpose();
    out.explained_ratio.push_back(total > 0.0 ? out.eigenvalues[j] / total : 0.0);
  }
  out.coords = centered * out.components.transpose();
  return out;
}

}  // namespace geocsp::nn
