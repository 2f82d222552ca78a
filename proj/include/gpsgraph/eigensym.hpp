#pragma once

#include <cstdint>
#include <vector>

namespace gps {

// Full eigendecomposition of a dense symmetric matrix (row-major, n x n):
// Householder reduction to tridiagonal form followed by implicit-shift QL.
// Eigenvalues ascend; eigenvectors are the columns of the returned matrix,
// each unit norm. Deterministic for a given input. Intended for n <= 2048.
struct EigenResult {
  std::vector<double> values;   // n, ascending
  std::vector<double> vectors;  // n x n row-major, column j pairs with values[j]
};

EigenResult eigen_symmetric(const std::vector<double>& matrix, std::int64_t n);

}  // namespace gps
