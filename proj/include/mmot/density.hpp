#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/scalar_ot.hpp"

namespace mmot {

/// Hermitian PSD matrix-valued density: one n x n block per grid point.
/// Mass is atomic, so integrals over the grid are plain sums.
class MatrixDensity {
 public:
  MatrixDensity() = default;

  MatrixDensity(std::vector<double> grid, std::vector<HermitianMatrix> blocks)
      : grid_(std::move(grid)), blocks_(std::move(blocks)) {
    validate();
  }

  std::size_t size() const { return grid_.size(); }
  Eigen::Index dim() const { return blocks_.empty() ? 0 : blocks_.front().dim(); }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<HermitianMatrix>& blocks() const { return blocks_; }
  const HermitianMatrix& block(std::size_t i) const { return blocks_[i]; }

  std::vector<double> traces() const {
    std::vector<double> t(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) t[i] = blocks_[i].trace();
    return t;
  }

  double total_mass() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.trace();
    return s;
  }

  /// Scalar density of pointwise traces.
  ScalarDensity trace_density() const {
    std::vector<double> t = traces();
    for (double& v : t) v = std::max(v, 0.0);
    return ScalarDensity(grid_, std::move(t));
  }

  bool is_normalized(double tol = 1e-10) const { return std::abs(total_mass() - 1.0) <= tol; }

  bool has_strict_trace() const {
    for (const auto& b : blocks_) {
      if (!(b.trace() > 0.0)) return false;
    }
    return true;
  }

  void require_normalized(const char* what, double tol = 1e-10) const {
    if (!is_normalized(tol)) {
      throw InvalidInput(std::string(what) + ": density is not normalized (total trace " +
                         std::to_string(total_mass()) + ")");
    }
  }

  void require_strict_trace(const char* what) const {
    if (!has_strict_trace()) {
      throw InvalidInput(std::string(what) + ": every block must have positive trace");
    }
  }

 private:
  void validate() const {
    if (grid_.empty()) throw InvalidInput("MatrixDensity: empty grid");
    if (grid_.size() != blocks_.size()) {
      throw DimensionError("MatrixDensity: grid has " + std::to_string(grid_.size()) +
                           " points but there are " + std::to_string(blocks_.size()) + " blocks");
    }
    const Eigen::Index n = blocks_.front().dim();
    if (n <= 0) throw DimensionError("MatrixDensity: blocks must be non-empty");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (!std::isfinite(grid_[i])) throw InvalidInput("MatrixDensity: non-finite grid point");
      if (i > 0 && !(grid_[i] > grid_[i - 1])) {
        throw InvalidInput("MatrixDensity: grid is not strictly increasing");
      }
      if (blocks_[i].dim() != n) throw DimensionError("MatrixDensity: blocks differ in size");
      if (!blocks_[i].matrix().allFinite()) throw InvalidInput("MatrixDensity: non-finite block");
      if (!blocks_[i].is_psd()) {
        throw InvalidInput("MatrixDensity: block " + std::to_string(i) + " is not PSD");
      }
    }
  }

  std::vector<double> grid_;
  std::vector<HermitianMatrix> blocks_;
};

/// Scales all blocks by 1 / (sum of traces).
inline MatrixDensity normalize(const MatrixDensity& mu) {
  const double mass = mu.total_mass();
  if (!(mass > 0.0)) throw InvalidInput("normalize: density has no mass");
  std::vector<HermitianMatrix> blocks = mu.blocks();
  for (auto& b : blocks) b *= 1.0 / mass;
  return MatrixDensity(mu.grid(), std::move(blocks));
}

/// Largest entrywise block difference between two densities on one grid.
inline double max_block_diff(const MatrixDensity& a, const MatrixDensity& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) throw DimensionError("max_block_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, max_abs_diff(a.block(i), b.block(i)));
  return d;
}

}  // namespace mmot
