#pragma once

#include <vector>

#include "geocsp/nn/tape.hpp"

namespace geocsp::nn {

struct PcaResult {
  RowVector mean;
  /// k x d, rows are unit principal directions, largest-magnitude entry positive.
  Matrix components;
  /// All eigenvalues of the covariance, descending.
  std::vector<double> eigenvalues;
  /// Ratio of each of the k kept eigenvalues to the total variance.
  std::vector<double> explained_ratio;
  /// points x k.
  Matrix coords;
};

/// Principal components of the rows of `points`. Needs at least k+1 rows.
PcaResult pca(const Matrix& points, int k);

}  // namespace geocsp::nn
