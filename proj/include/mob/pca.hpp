#ifndef MOB_PCA_HPP
#define MOB_PCA_HPP

#include <vector>

namespace mob::exp {

struct PcaResult {
  std::vector<std::vector<double>> directions;  // q orthonormal rows of dim d
  std::vector<double> explained;  // variance fractions, non-increasing
  std::vector<std::vector<double>> coords;  // per input row: q projections
  bool rank_warning = false;  // fewer samples than dimensions
};

// Top-q principal components of the row covariance via power iteration with
// deflation. Deterministic start vectors; direction signs are fixed by making
// the largest-magnitude component positive.
PcaResult pca_top(const std::vector<std::vector<double>>& rows, int q,
                  double tol = 1e-10, int max_iters = 10000);

}  // namespace mob::exp

#endif
