#pragma once

// Random instances shared by the unit and acceptance tests.

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "mmot/density.hpp"
#include "mmot/hermitian.hpp"

namespace testing_support {

using mmot::ComplexMatrix;
using mmot::HermitianMatrix;
using mmot::MatrixDensity;

inline ComplexMatrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g;
  ComplexMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = {g(rng), g(rng)};
  }
  return m;
}

inline HermitianMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
  const ComplexMatrix g = gaussian_matrix(rng, n, n);
  return HermitianMatrix(ComplexMatrix(0.5 * (g + g.adjoint())));
}

/// G G^* plus a small ridge, so the result is positive definite.
inline HermitianMatrix random_pd(std::mt19937_64& rng, Eigen::Index n, double ridge = 0.05) {
  const ComplexMatrix g = gaussian_matrix(rng, n, n);
  return HermitianMatrix(ComplexMatrix(g * g.adjoint() + ridge * ComplexMatrix::Identity(n, n)));
}

/// Random PSD matrix of the given rank (rank < n gives a singular matrix).
inline HermitianMatrix random_psd_rank(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank) {
  const ComplexMatrix g = gaussian_matrix(rng, n, rank);
  return HermitianMatrix(ComplexMatrix(g * g.adjoint()));
}

inline HermitianMatrix unit_trace(const HermitianMatrix& h) { return h * (1.0 / h.trace()); }

inline std::vector<double> uniform_grid(std::size_t points, double lo = 0.0, double hi = 1.0) {
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) {
    g[k] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return g;
}

/// Sorted distinct random points in [0, 1).
inline std::vector<double> random_grid(std::mt19937_64& rng, std::size_t points) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> g;
  while (g.size() < points) {
    g.clear();
    for (std::size_t k = 0; k < points; ++k) g.push_back(u(rng));
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
  }
  return g;
}

/// Normalized density with positive definite blocks of varying size.
inline MatrixDensity random_density(std::mt19937_64& rng, const std::vector<double>& grid, Eigen::Index n,
                                    double ridge = 0.05) {
  std::uniform_real_distribution<double> w(0.2, 1.0);
  std::vector<HermitianMatrix> blocks;
  for (std::size_t k = 0; k < grid.size(); ++k) blocks.push_back(unit_trace(random_pd(rng, n, ridge)) * w(rng));
  return mmot::normalize(MatrixDensity(grid, std::move(blocks)));
}

}  // namespace testing_support
