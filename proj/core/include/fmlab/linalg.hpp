#pragma once

// Small dense symmetric linear algebra: cyclic Jacobi eigendecomposition and
// helpers for d×d matrices (d is tiny here — data dims and feature dims).

#include <cstddef>
#include <vector>

namespace fmlab {

struct EigenSym {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // d×d, column j is the eigenvector of values[j]
};

// Cyclic Jacobi on a symmetric matrix (row-major d×d). Symmetrizes the input.
EigenSym eigh(const std::vector<double>& a, size_t d);

// C = A·B for d×d row-major matrices.
std::vector<double> matmul_sq(const std::vector<double>& a,
                              const std::vector<double>& b, size_t d);

// Mean vector and covariance (normalized by n) of n×d row-major data.
void mean_cov(const std::vector<double>& x, size_t n, size_t d,
              std::vector<double>& mean, std::vector<double>& cov);

}  // namespace fmlab
