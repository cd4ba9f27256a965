#pragma once

// One-dimensional optimal transport: quantile formula, monotone coupling,
// displacement interpolation, and an exact transportation simplex for
// arbitrary finite ground costs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mmot/errors.hpp"

namespace mmot {

/// Relative tolerance used when two densities must carry the same mass.
inline constexpr double kMassTolerance = 1e-9;

/// Atomic density on a strictly increasing grid.
struct ScalarDensity {
  std::vector<double> grid;
  std::vector<double> weights;

  ScalarDensity() = default;
  ScalarDensity(std::vector<double> g, std::vector<double> w)
      : grid(std::move(g)), weights(std::move(w)) {
    validate();
  }

  std::size_t size() const { return grid.size(); }

  double total_mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

  bool is_normalized(double tol = 1e-12) const { return std::abs(total_mass() - 1.0) <= tol; }

  void validate() const {
    if (grid.size() != weights.size()) {
      throw DimensionError("ScalarDensity: grid and weights differ in length");
    }
    if (grid.empty()) throw InvalidInput("ScalarDensity: empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!std::isfinite(grid[i]) || !std::isfinite(weights[i])) {
        throw InvalidInput("ScalarDensity: non-finite entry");
      }
      if (weights[i] < 0.0) throw InvalidInput("ScalarDensity: negative weight");
      if (i > 0 && !(grid[i] > grid[i - 1])) {
        throw InvalidInput("ScalarDensity: grid is not strictly increasing");
      }
    }
  }
};

/// Coupling between two scalar densities. Rows index the source grid.
struct ScalarPlan {
  Eigen::MatrixXd coupling;
  std::vector<double> source_grid;
  std::vector<double> target_grid;
};

/// Dual potentials with phi0[i] - phi1[j] <= C(i,j).
struct DualCertificate {
  Eigen::VectorXd phi0;
  Eigen::VectorXd phi1;
};

struct LpSolution {
  ScalarPlan plan;
  double value = 0.0;
  DualCertificate dual;
  double dual_value = 0.0;
  long pivots = 0;
};

namespace detail {

inline void require_same_mass(double a, double b, const char* what) {
  if (std::abs(a - b) > kMassTolerance * (1.0 + std::max(std::abs(a), std::abs(b)))) {
    throw InfeasibleProblem(std::string(what) + ": total masses differ (" + std::to_string(a) +
                            " vs " + std::to_string(b) + ")");
  }
}

// Right-continuous cumulative sums.
inline std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> f(w.size());
  std::partial_sum(w.begin(), w.end(), f.begin());
  return f;
}

}  // namespace detail

/// Generalized inverse of the cumulative: min{x_k : F(x_k) >= t}.
inline double quantile(const ScalarDensity& d, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("quantile: t outside [0, 1]");
  const std::vector<double> f = detail::cumulative(d.weights);
  const double level = t * f.back();
  const auto it = std::lower_bound(f.begin(), f.end(), level);
  if (it == f.end()) return d.grid.back();
  return d.grid[static_cast<std::size_t>(it - f.begin())];
}

/// Squared 2-Wasserstein distance by integrating the squared quantile
/// difference over the merged cumulative breakpoints.
inline double w2_closed_form(const ScalarDensity& mu0, const ScalarDensity& mu1) {
  const double m0 = mu0.total_mass();
  const double m1 = mu1.total_mass();
  detail::require_same_mass(m0, m1, "w2_closed_form");
  if (m0 == 0.0) return 0.0;

  std::vector<double> breaks;
  breaks.reserve(mu0.size() + mu1.size() + 1);
  breaks.push_back(0.0);
  for (double f : detail::cumulative(mu0.weights)) breaks.push_back(std::min(1.0, f / m0));
  for (double f : detail::cumulative(mu1.weights)) breaks.push_back(std::min(1.0, f / m1));
  std::sort(breaks.begin(), breaks.end());

  double total = 0.0;
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    const double dt = breaks[k] - breaks[k - 1];
    if (dt <= 0.0) continue;
    const double mid = 0.5 * (breaks[k] + breaks[k - 1]);
    const double diff = quantile(mu0, mid) - quantile(mu1, mid);
    total += diff * diff * dt;
  }
  return total * 0.5 * (m0 + m1);
}

/// Northwest-corner monotone coupling, the discrete form of F0(x) = F1(T(x)).
inline ScalarPlan monotone_map(const ScalarDensity& mu0, const ScalarDensity& mu1) {
  const double m0 = mu0.total_mass();
  const double m1 = mu1.total_mass();
  detail::require_same_mass(m0, m1, "monotone_map");

  ScalarPlan plan{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mu0.size()),
                                        static_cast<Eigen::Index>(mu1.size())),
                  mu0.grid, mu1.grid};
  std::size_t i = 0, j = 0;
  double ri = mu0.weights[0], rj = mu1.weights[0];
  while (i < mu0.size() && j < mu1.size()) {
    const double take = std::min(ri, rj);
    plan.coupling(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += take;
    ri -= take;
    rj -= take;
    // Ties advance the source first; the target then receives a zero atom.
    if (ri <= rj) {
      if (++i < mu0.size()) ri = mu0.weights[i];
    } else {
      if (++j < mu1.size()) rj = mu1.weights[j];
    }
  }
  // Round-off leftovers land on the last cell.
  const Eigen::Index n = plan.coupling.rows(), m = plan.coupling.cols();
  const double row_gap = mu0.weights.back() - plan.coupling.row(n - 1).sum();
  if (row_gap > 0.0) plan.coupling(n - 1, m - 1) += row_gap;
  return plan;
}

/// Cost of a coupling under a ground cost matrix.
inline double coupling_cost(const Eigen::MatrixXd& coupling, const Eigen::MatrixXd& cost) {
  if (coupling.rows() != cost.rows() || coupling.cols() != cost.cols()) {
    throw DimensionError("coupling_cost: shape mismatch");
  }
  return coupling.cwiseProduct(cost).sum();
}

/// Quadratic ground cost (x_i - y_j)^2.
inline Eigen::MatrixXd quadratic_cost(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double d = x[i] - y[j];
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d * d;
    }
  }
  return c;
}

/// Displacement interpolation: every monotone-coupling atom (x, y, w) moves
/// to (1 - tau) x + tau y. Atoms landing on the same location merge.
inline ScalarDensity displacement_geodesic(const ScalarDensity& mu0, const ScalarDensity& mu1,
                                           double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("displacement_geodesic: tau outside [0, 1]");
  const ScalarPlan plan = monotone_map(mu0, mu1);
  std::vector<std::pair<double, double>> atoms;
  for (Eigen::Index i = 0; i < plan.coupling.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.coupling.cols(); ++j) {
      const double w = plan.coupling(i, j);
      if (w <= 0.0) continue;
      atoms.emplace_back((1.0 - tau) * mu0.grid[static_cast<std::size_t>(i)] +
                             tau * mu1.grid[static_cast<std::size_t>(j)],
                         w);
    }
  }
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> grid, weights;
  for (const auto& [x, w] : atoms) {
    if (!grid.empty() && std::abs(x - grid.back()) <= 1e-14 * (1.0 + std::abs(x))) {
      weights.back() += w;
    } else {
      grid.push_back(x);
      weights.push_back(w);
    }
  }
  return ScalarDensity(std::move(grid), std::move(weights));
}

/// Splits each atom linearly between the two nearest points of `grid`;
/// atoms outside the grid range go to the nearest end point.
inline std::vector<double> rebin(const ScalarDensity& d, const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidInput("rebin: empty grid");
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double x = d.grid[k], w = d.weights[k];
    if (x <= grid.front()) {
      out.front() += w;
      continue;
    }
    if (x >= grid.back()) {
      out.back() += w;
      continue;
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), x) - grid.begin());
    const std::size_t lo = hi - 1;
    const double frac = (x - grid[lo]) / (grid[hi] - grid[lo]);
    out[lo] += (1.0 - frac) * w;
    out[hi] += frac * w;
  }
  return out;
}

namespace detail {

// Transportation simplex on a spanning-tree basis of N + M - 1 cells.
// Entering cell: lowest row-major index with negative reduced cost.
// Leaving cell: lowest index among the tied minimum-ratio cells (Bland).
class TransportationSimplex {
 public:
  TransportationSimplex(const Eigen::MatrixXd& cost, const std::vector<double>& supply,
                        const std::vector<double>& demand)
      : c_(cost), a_(supply), b_(demand), n_(cost.rows()), m_(cost.cols()) {
    flow_ = Eigen::MatrixXd::Zero(n_, m_);
    basic_ = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_, m_, false);
    scale_ = 1.0 + c_.cwiseAbs().maxCoeff();
  }

  void solve(long max_pivots) {
    northwest_corner();
    for (;;) {
      compute_potentials();
      Eigen::Index ei = -1, ej = -1;
      const double eps = 1e-12 * scale_;
      for (Eigen::Index i = 0; i < n_ && ei < 0; ++i) {
        for (Eigen::Index j = 0; j < m_; ++j) {
          if (!basic_(i, j) && c_(i, j) - u_(i) - v_(j) < -eps) {
            ei = i;
            ej = j;
            break;
          }
        }
      }
      if (ei < 0) return;
      if (++pivots_ > max_pivots) throw NumericalError("transportation simplex: pivot limit reached");
      pivot(ei, ej);
    }
  }

  const Eigen::MatrixXd& flow() const { return flow_; }
  const Eigen::VectorXd& u() const { return u_; }
  const Eigen::VectorXd& v() const { return v_; }
  long pivots() const { return pivots_; }

 private:
  void northwest_corner() {
    std::vector<double> s(a_), d(b_);
    Eigen::Index i = 0, j = 0;
    while (i < n_ && j < m_) {
      const double take = std::min(s[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)]);
      flow_(i, j) = take;
      basic_(i, j) = true;
      s[static_cast<std::size_t>(i)] -= take;
      d[static_cast<std::size_t>(j)] -= take;
      if (i == n_ - 1 && j == m_ - 1) break;
      if ((s[static_cast<std::size_t>(i)] <= d[static_cast<std::size_t>(j)] && i < n_ - 1) || j == m_ - 1) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  // Tree nodes: rows 0..n-1, columns n..n+m-1.
  void build_adjacency() {
    adj_.assign(static_cast<std::size_t>(n_ + m_), {});
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = 0; j < m_; ++j) {
        if (!basic_(i, j)) continue;
        adj_[static_cast<std::size_t>(i)].push_back(n_ + j);
        adj_[static_cast<std::size_t>(n_ + j)].push_back(i);
      }
    }
  }

  void compute_potentials() {
    build_adjacency();
    u_ = Eigen::VectorXd::Zero(n_);
    v_ = Eigen::VectorXd::Zero(m_);
    std::vector<char> seen(static_cast<std::size_t>(n_ + m_), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const Eigen::Index node = stack.back();
      stack.pop_back();
      for (Eigen::Index next : adj_[static_cast<std::size_t>(node)]) {
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = 1;
        if (node < n_) {
          v_(next - n_) = c_(node, next - n_) - u_(node);
        } else {
          u_(next) = c_(next, node - n_) - v_(node - n_);
        }
        stack.push_back(next);
      }
    }
  }

  void pivot(Eigen::Index ei, Eigen::Index ej) {
    // Path in the basis tree from column node ej back to row node ei.
    const Eigen::Index start = n_ + ej, goal = ei;
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(n_ + m_), -1);
    std::vector<Eigen::Index> queue{start};
    parent[static_cast<std::size_t>(start)] = start;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const Eigen::Index node = queue[q];
      if (node == goal) break;
      for (Eigen::Index next : adj_[static_cast<std::size_t>(node)]) {
        if (parent[static_cast<std::size_t>(next)] >= 0) continue;
        parent[static_cast<std::size_t>(next)] = node;
        queue.push_back(next);
      }
    }
    // Walk goal -> start; cells alternate -, +, -, ... after the entering +.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> minus, plus;
    bool take_minus = true;
    for (Eigen::Index node = goal; node != start;) {
      const Eigen::Index prev = parent[static_cast<std::size_t>(node)];
      const auto cell = node < n_ ? std::make_pair(node, prev - n_) : std::make_pair(prev, node - n_);
      (take_minus ? minus : plus).push_back(cell);
      take_minus = !take_minus;
      node = prev;
    }
    double theta = std::numeric_limits<double>::infinity();
    std::pair<Eigen::Index, Eigen::Index> leave{-1, -1};
    for (const auto& [i, j] : minus) {
      const double f = flow_(i, j);
      if (f < theta || (f == theta && i * m_ + j < leave.first * m_ + leave.second)) {
        theta = f;
        leave = {i, j};
      }
    }
    for (const auto& [i, j] : minus) flow_(i, j) -= theta;
    for (const auto& [i, j] : plus) flow_(i, j) += theta;
    flow_(ei, ej) = theta;
    flow_(leave.first, leave.second) = 0.0;
    basic_(ei, ej) = true;
    basic_(leave.first, leave.second) = false;
  }

  const Eigen::MatrixXd& c_;
  std::vector<double> a_, b_;
  Eigen::Index n_, m_;
  Eigen::MatrixXd flow_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
  Eigen::VectorXd u_, v_;
  std::vector<std::vector<Eigen::Index>> adj_;
  double scale_ = 1.0;
  long pivots_ = 0;
};

}  // namespace detail

/// Exact discrete optimal transport for a finite cost matrix. Returns the
/// optimal coupling, its value, and dual potentials proving optimality.
inline LpSolution discrete_ot_lp(const Eigen::MatrixXd& cost, const ScalarDensity& mu0,
                                 const ScalarDensity& mu1, long max_pivots = 50'000'000) {
  if (cost.rows() != static_cast<Eigen::Index>(mu0.size()) ||
      cost.cols() != static_cast<Eigen::Index>(mu1.size())) {
    throw DimensionError("discrete_ot_lp: cost shape does not match the marginals");
  }
  if (!cost.allFinite()) throw InvalidInput("discrete_ot_lp: cost must be finite");
  mu0.validate();
  mu1.validate();
  detail::require_same_mass(mu0.total_mass(), mu1.total_mass(), "discrete_ot_lp");

  detail::TransportationSimplex simplex(cost, mu0.weights, mu1.weights);
  simplex.solve(max_pivots);

  LpSolution out;
  out.plan = ScalarPlan{simplex.flow(), mu0.grid, mu1.grid};
  out.value = coupling_cost(out.plan.coupling, cost);
  out.dual.phi0 = simplex.u();
  out.dual.phi1 = -simplex.v();
  out.dual_value = 0.0;
  for (std::size_t i = 0; i < mu0.size(); ++i) out.dual_value += simplex.u()(static_cast<Eigen::Index>(i)) * mu0.weights[i];
  for (std::size_t j = 0; j < mu1.size(); ++j) out.dual_value += simplex.v()(static_cast<Eigen::Index>(j)) * mu1.weights[j];
  out.pivots = simplex.pivots();
  return out;
}

}  // namespace mmot
