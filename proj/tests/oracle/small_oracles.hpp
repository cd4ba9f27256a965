#pragma once

// Slow, direct reference computations. Nothing here calls into the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using CMat = Eigen::MatrixXcd;

/// (a (x) b)[k n + i, l n + j] = a(k, l) b(i, j), one entry at a time.
inline CMat kron_by_index(const CMat& a, const CMat& b) {
  const Eigen::Index n = a.rows();
  CMat out(n * n, n * n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(k * n + i, l * n + j) = a(k, l) * b(i, j);
  return out;
}

/// Trace over the second factor: entry (k, l) = sum_i rho[k n + i, l n + i].
inline CMat trace_out_second(const CMat& rho, Eigen::Index n) {
  CMat out = CMat::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l)
      for (Eigen::Index i = 0; i < n; ++i) out(k, l) += rho(k * n + i, l * n + i);
  return out;
}

/// Trace over the first factor: entry (i, j) = sum_k rho[k n + i, k n + j].
inline CMat trace_out_first(const CMat& rho, Eigen::Index n) {
  CMat out = CMat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) out(i, j) += rho(k * n + i, k * n + j);
  return out;
}

/// First grid point whose running mass reaches t times the total.
inline double quantile_scan(const std::vector<double>& grid, const std::vector<double>& w, double t) {
  double total = 0.0;
  for (double v : w) total += v;
  double run = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    run += w[k];
    if (run >= t * total) return grid[k];
  }
  return grid.back();
}

/// Minimum of the transport LP over all basic feasible solutions. Only
/// sensible for a handful of cells.
inline double transport_by_vertices(const Eigen::MatrixXd& cost, const std::vector<double>& a,
                                    const std::vector<double>& b) {
  const int m = static_cast<int>(a.size()), k = static_cast<int>(b.size());
  const int cells = m * k, basis = m + k - 1;
  // Row constraints, then all but the last column constraint.
  Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(basis, cells);
  Eigen::VectorXd rhs(basis);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) eq(i, i * k + j) = 1.0;
    rhs(i) = a[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j + 1 < k; ++j) {
    for (int i = 0; i < m; ++i) eq(m + j, i * k + j) = 1.0;
    rhs(m + j) = b[static_cast<std::size_t>(j)];
  }
  std::vector<int> pick(static_cast<std::size_t>(cells), 0);
  std::fill(pick.begin(), pick.begin() + basis, 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<int> idx;
    for (int c = 0; c < cells; ++c)
      if (pick[static_cast<std::size_t>(c)]) idx.push_back(c);
    Eigen::MatrixXd sub(basis, basis);
    for (int c = 0; c < basis; ++c) sub.col(c) = eq.col(idx[static_cast<std::size_t>(c)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.rank() < basis) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    if (x.minCoeff() < -1e-12) continue;
    double v = 0.0;
    for (int c = 0; c < basis; ++c) {
      const int cell = idx[static_cast<std::size_t>(c)];
      v += x(c) * cost(cell / k, cell % k);
    }
    best = std::min(best, v);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

/// Nearest PSD matrix by gradient descent on X = L L^*, from several random
/// starting factors. Accurate to a few digits.
inline CMat nearest_psd_search(const CMat& h, unsigned seed = 1) {
  const Eigen::Index n = h.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  CMat best;
  double best_f = std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, h.norm());
  for (int start = 0; start < 4; ++start) {
    CMat l(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) l(r, c) = {g(rng), g(rng)};
    l *= std::sqrt(scale / static_cast<double>(n));
    double step = 0.05 / scale;
    double f = (l * l.adjoint() - h).squaredNorm();
    for (int it = 0; it < 20000; ++it) {
      const CMat grad = 4.0 * (l * l.adjoint() - h) * l;
      const CMat trial = l - step * grad;
      const double ft = (trial * trial.adjoint() - h).squaredNorm();
      if (ft < f) {
        l = trial;
        f = ft;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    if (f < best_f) {
      best_f = f;
      best = l * l.adjoint();
    }
  }
  return best;
}

}  // namespace oracle
