#pragma once

// Operator-splitting solver for a chain of matrix-valued transport problems.
//
// Layers 0..S carry grids of sizes G_0..G_S. Segment k couples layer k to
// layer k+1 through cells (i, j), each holding (P, Q, m): P and Q are n x n
// Hermitian blocks, m a scalar mass. The program is
//
//   minimize   sum_k sum_ij C_k(i,j) m + lambda ||P - Q||_F^2 / m
//   subject to P, Q PSD,  tr P = tr Q = m,
//              sum_j P^0_ij = A_i,  sum_i Q^{S-1}_ij = B_j,
//              sum_j P^k_ij = sum_i' Q^{k-1}_i'i  for 0 < k < S.
//
// S = 1 is the single transport problem; S > 1 chains intermediate
// densities whose blocks are the shared row/column sums.
//
// Iteration (scaled ADMM, two copies x1, x2 of the cell variables, one
// consensus variable z restricted to the marginal constraints):
//   x1 = prox of the perspective objective at z - u1       (per cell, 1-D root)
//   x2 = projection of z - u2 onto PSD blocks with traces m (per cell)
//   z  = projection of the relaxed average onto the marginal constraints
//   u += relaxed x - z

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <functional>
#include <utility>
#include <vector>

#include "mmot/detail/parallel.hpp"
#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/problem.hpp"

namespace mmot::detail {

/// argmin_m>=0  C m + k rho e2 / (rho m + k) + rho/2 (m - m0)^2  with k > 0.
/// The derivative is concave and increasing, so Newton started at 0 climbs
/// monotonically to the root.
inline double perspective_mass_root(double cost, double m0, double e2, double k, double rho) {
  auto deriv = [&](double m) {
    const double den = rho * m + k;
    return cost + rho * (m - m0) - k * rho * rho * e2 / (den * den);
  };
  if (deriv(0.0) >= 0.0) return 0.0;
  double m = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double den = rho * m + k;
    const double g = deriv(m);
    const double h = rho + 2.0 * k * rho * rho * rho * e2 / (den * den * den);
    const double next = m - g / h;
    if (!(next > m)) break;
    const bool done = next - m <= 1e-15 * (1.0 + next);
    m = next;
    if (done) return m;
  }
  // Fallback: bisection on [m, hi].
  double lo = m, hi = std::max(1.0, 2.0 * m);
  while (deriv(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Proximal map of (P, Q, m) -> C m + lambda ||P - Q||^2 / m with penalty rho,
/// in place on a cell of 2h+1 coordinates [P, Q, m].
inline void perspective_prox(double* cell, Eigen::Index h, double cost, double lambda, double rho) {
  double* p = cell;
  double* q = cell + h;
  double& m = cell[2 * h];
  // P = S + E, Q = S - E: S is untouched, E shrinks toward 0.
  double e2 = 0.0;
  for (Eigen::Index a = 0; a < h; ++a) {
    const double e = 0.5 * (p[a] - q[a]);
    e2 += e * e;
  }
  const double k = 4.0 * lambda;
  double shrink = 1.0;
  if (k == 0.0 || e2 == 0.0) {
    m = std::max(0.0, m - cost / rho);
  } else {
    m = perspective_mass_root(cost, m, e2, k, rho);
    shrink = rho * m / (rho * m + k);
  }
  for (Eigen::Index a = 0; a < h; ++a) {
    const double s = 0.5 * (p[a] + q[a]);
    const double e = 0.5 * (p[a] - q[a]) * shrink;
    p[a] = s + e;
    q[a] = s - e;
  }
}

struct ChainProblem {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> layer_sizes;     // S + 1 entries
  std::vector<Eigen::MatrixXd> costs;        // S entries, G_k x G_{k+1}
  std::vector<ComplexMatrix> source;         // G_0 blocks
  std::vector<ComplexMatrix> target;         // G_S blocks
  double lambda = 0.0;
};

/// Cell values of one segment, row-major over (i, j).
struct SegmentValues {
  Eigen::Index rows = 0, cols = 0;
  Eigen::MatrixXd mass;
  std::vector<ComplexMatrix> p, q;
};

struct ChainResult {
  std::vector<SegmentValues> segments;
  SolverReport report;
  double objective = 0.0;
};

class ChainSplitting {
 public:
  ChainSplitting(ChainProblem problem, const SolverConfig& cfg)
      : pb_(std::move(problem)), cfg_(cfg) {
    cfg_.validate();
    const std::size_t layers = pb_.layer_sizes.size();
    if (layers < 2 || pb_.costs.size() != layers - 1) throw DimensionError("ChainSplitting: bad layer layout");
    if (pb_.source.size() != static_cast<std::size_t>(pb_.layer_sizes.front()) ||
        pb_.target.size() != static_cast<std::size_t>(pb_.layer_sizes.back())) {
      throw DimensionError("ChainSplitting: endpoint blocks do not match layer sizes");
    }
    segments_ = static_cast<Eigen::Index>(layers - 1);
    h_ = coord_count(pb_.n);
    d_ = 2 * h_ + 1;
    seg_offset_.assign(static_cast<std::size_t>(segments_) + 1, 0);
    for (Eigen::Index k = 0; k < segments_; ++k) {
      const auto& c = pb_.costs[static_cast<std::size_t>(k)];
      if (c.rows() != g(k) || c.cols() != g(k + 1)) throw DimensionError("ChainSplitting: cost shape");
      seg_offset_[static_cast<std::size_t>(k) + 1] = seg_offset_[static_cast<std::size_t>(k)] + g(k) * g(k + 1);
    }
    cells_ = seg_offset_.back();
    cost_.resize(cells_);
    for (Eigen::Index k = 0; k < segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i)
        for (Eigen::Index j = 0; j < g(k + 1); ++j) cost_(cell(k, i, j)) = pb_.costs[static_cast<std::size_t>(k)](i, j);
    }
    prepare_endpoints();
    z_ = Eigen::VectorXd::Zero(cells_ * d_);
  }

  Eigen::Index cells() const { return cells_; }

  /// Called at every convergence check with (iteration, primal, dual, rho).
  void set_monitor(std::function<void(long, double, double, double)> fn) { monitor_ = std::move(fn); }

  /// Sets the starting consensus point from per-segment cell values.
  void warm_start(const std::vector<SegmentValues>& segs) {
    if (static_cast<Eigen::Index>(segs.size()) != segments_) throw DimensionError("warm_start: segment count");
    for (Eigen::Index k = 0; k < segments_; ++k) {
      const auto& s = segs[static_cast<std::size_t>(k)];
      for (Eigen::Index i = 0; i < g(k); ++i) {
        for (Eigen::Index j = 0; j < g(k + 1); ++j) {
          double* c = z_.data() + cell(k, i, j) * d_;
          const auto idx = static_cast<std::size_t>(i * g(k + 1) + j);
          to_coords(s.p[idx], c);
          to_coords(s.q[idx], c + h_);
          c[2 * h_] = s.mass(i, j);
        }
      }
    }
  }

  ChainResult solve() {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index total = cells_ * d_;
    // State (z, u1, u2) of the splitting iteration, stacked.
    Eigen::VectorXd s(3 * total), f(3 * total);
    s << z_, Eigen::VectorXd::Zero(2 * total);
    rho_ = cfg_.rho > 0.0 ? cfg_.rho : default_rho();
    x1_.resize(total);
    x2_.resize(total);
    w_.resize(total);

    double primal = std::numeric_limits<double>::infinity();
    double r_dual = std::numeric_limits<double>::infinity();
    long it = 0;
    bool converged = false;
    Eigen::VectorXd vals(total);
    while (it < cfg_.max_iter) {
      ++it;
      step(s, f);
      const bool check = it % cfg_.check_interval == 0;
      const bool adapt = cfg_.adapt_interval > 0 && it % cfg_.adapt_interval == 0;
      if (check || adapt) {
        r_dual = rho_ * (f.head(total) - s.head(total)).cwiseAbs().maxCoeff();
        if (check) {
          primal = clean_plan(x2_, vals);
          if (monitor_) monitor_(it, primal, r_dual, rho_);
          if (primal <= cfg_.tol_primal && r_dual <= cfg_.tol_dual) {
            converged = true;
            s.swap(f);
            break;
          }
        }
        if (adapt) rebalance(s, f);
      }
      s.swap(f);
    }
    if (!converged) primal = clean_plan(x2_, vals);
    z_ = s.head(total);
    ChainResult best = build_result(vals);
    best.report.converged = converged;
    best.report.iterations = it;
    best.report.primal_residual = primal;
    best.report.dual_residual = r_dual;
    best.report.rho = rho_;
    best.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return best;
  }

 private:
  // One splitting iteration on the stacked state; fills x1_, x2_ as a side effect.
  void step(const Eigen::VectorXd& s, Eigen::VectorXd& out) {
    const Eigen::Index total = cells_ * d_;
    const auto z = s.segment(0, total), u1 = s.segment(total, total), u2 = s.segment(2 * total, total);
    const double alpha = cfg_.relaxation;
    parallel_for(static_cast<std::size_t>(cells_), cfg_.threads, [&](std::size_t b, std::size_t e) {
      for (auto c = static_cast<Eigen::Index>(b); c < static_cast<Eigen::Index>(e); ++c) {
        const Eigen::Index off = c * d_;
        for (Eigen::Index a = 0; a < d_; ++a) {
          x1_(off + a) = z(off + a) - u1(off + a);
          x2_(off + a) = z(off + a) - u2(off + a);
        }
        perspective_prox(x1_.data() + off, h_, cost_(c), pb_.lambda, rho_);
        project_trace_coupled(x2_.data() + off, pb_.n);
      }
    });
    w_ = 0.5 * (alpha * (x1_ + x2_) + (2.0 - 2.0 * alpha) * z + u1 + u2);
    auto zn = out.segment(0, total);
    project_affine(w_, zn);
    out.segment(total, total) = u1 + alpha * x1_ + (1.0 - alpha) * z - zn;
    out.segment(2 * total, total) = u2 + alpha * x2_ + (1.0 - alpha) * z - zn;
  }

  // Residual balancing of rho. Rescales the duals in f when rho changes.
  bool rebalance(const Eigen::VectorXd& s, Eigen::VectorXd& f) {
    const Eigen::Index total = cells_ * d_;
    const auto z = f.segment(0, total);
    const auto dz = f.segment(0, total) - s.segment(0, total);
    const double rp = std::sqrt((x1_ - z).squaredNorm() + (x2_ - z).squaredNorm()) /
                      std::max({x1_.norm(), x2_.norm(), z.norm(), 1e-300});
    const double rd = std::sqrt(2.0) * dz.norm() / std::max(f.tail(2 * total).norm(), 1e-300);
    if (!(rp > 0.0 && rd > 0.0)) return false;
    const double factor = std::clamp(std::sqrt(rp / rd), 0.1, 10.0);
    if (factor <= 3.0 && factor >= 1.0 / 3.0) return false;
    rho_ *= factor;
    f.tail(2 * total) /= factor;
    return true;
  }

  Eigen::Index g(Eigen::Index layer) const { return pb_.layer_sizes[static_cast<std::size_t>(layer)]; }
  Eigen::Index cell(Eigen::Index k, Eigen::Index i, Eigen::Index j) const {
    return seg_offset_[static_cast<std::size_t>(k)] + i * g(k + 1) + j;
  }

  double default_rho() const {
    const double mean_cost = cost_.size() ? cost_.mean() : 0.0;
    const double per_segment = static_cast<double>(cells_) / static_cast<double>(segments_);
    return std::max(mean_cost + pb_.lambda, 1e-3) * per_segment;
  }

  void prepare_endpoints() {
    auto coords = [&](const std::vector<ComplexMatrix>& blocks, Eigen::MatrixXd& out) {
      out.resize(h_, static_cast<Eigen::Index>(blocks.size()));
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].rows() != pb_.n || blocks[i].cols() != pb_.n) {
          throw DimensionError("ChainSplitting: block dimension");
        }
        to_coords(blocks[i], out.col(static_cast<Eigen::Index>(i)).data());
      }
    };
    coords(pb_.source, src_);
    coords(pb_.target, tgt_);
  }

  // Projection onto the marginal constraints. Each layer node owns a
  // disjoint set of P rows and Q columns, so nodes are handled independently;
  // the mass coordinate is unconstrained here.
  template <class Out>
  void project_affine(const Eigen::VectorXd& w, Out&& z) const {
    z = w;
    Eigen::VectorXd r(h_);
    for (Eigen::Index k = 0; k <= segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i) {
        node_residual(z, k, i, r);
        const Eigen::Index count = (k < segments_ ? g(k + 1) : 0) + (k > 0 ? g(k - 1) : 0);
        // Residual of (sum P) - (sum Q) = target; P rows move against it, Q columns with it.
        r /= static_cast<double>(count);
        if (k < segments_) {
          for (Eigen::Index j = 0; j < g(k + 1); ++j) z.segment(cell(k, i, j) * d_, h_) -= r;
        }
        if (k > 0) {
          for (Eigen::Index ip = 0; ip < g(k - 1); ++ip) z.segment(cell(k - 1, ip, i) * d_ + h_, h_) += r;
        }
      }
    }
  }

  // (sum_j P^k_ij) - (sum_i' Q^{k-1}_i'i) minus the endpoint block.
  template <class V>
  void node_residual(const V& v, Eigen::Index k, Eigen::Index i, Eigen::VectorXd& r) const {
    r.setZero();
    if (k < segments_) {
      for (Eigen::Index j = 0; j < g(k + 1); ++j) r += v.segment(cell(k, i, j) * d_, h_);
    }
    if (k > 0) {
      for (Eigen::Index ip = 0; ip < g(k - 1); ++ip) r -= v.segment(cell(k - 1, ip, i) * d_ + h_, h_);
    }
    if (k == 0) r -= src_.col(i);
    if (k == segments_) r += tgt_.col(i);
  }

  // Output plan from the cone copy, whose blocks already have trace m.
  // Cells below mass_floor are emptied. Returns the worst node residual.
  double clean_plan(const Eigen::VectorXd& cone, Eigen::VectorXd& vals) const {
    vals = cone;
    for (Eigen::Index c = 0; c < cells_; ++c) {
      double* o = vals.data() + c * d_;
      if (!(o[2 * h_] > cfg_.mass_floor)) {
        for (Eigen::Index a = 0; a < d_; ++a) o[a] = 0.0;
      }
    }
    double worst = 0.0;
    Eigen::VectorXd r(h_);
    for (Eigen::Index k = 0; k <= segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i) {
        node_residual(vals, k, i, r);
        worst = std::max(worst, r.norm());
      }
    }
    return worst;
  }

  ChainResult build_result(const Eigen::VectorXd& vals) const {
    ChainResult out;
    out.segments.resize(static_cast<std::size_t>(segments_));
    double objective = 0.0;
    for (Eigen::Index k = 0; k < segments_; ++k) {
      SegmentValues& sv = out.segments[static_cast<std::size_t>(k)];
      sv.rows = g(k);
      sv.cols = g(k + 1);
      sv.mass = Eigen::MatrixXd::Zero(sv.rows, sv.cols);
      sv.p.resize(static_cast<std::size_t>(sv.rows * sv.cols));
      sv.q.resize(sv.p.size());
      for (Eigen::Index i = 0; i < sv.rows; ++i) {
        for (Eigen::Index j = 0; j < sv.cols; ++j) {
          const Eigen::Index c = cell(k, i, j);
          const double* v = vals.data() + c * d_;
          const auto idx = static_cast<std::size_t>(i * sv.cols + j);
          sv.p[idx] = from_coords(v, pb_.n);
          sv.q[idx] = from_coords(v + h_, pb_.n);
          const double m = v[2 * h_];
          sv.mass(i, j) = m;
          if (m > 0.0) objective += cost_(c) * m + pb_.lambda * (sv.p[idx] - sv.q[idx]).squaredNorm() / m;
        }
      }
    }
    out.objective = objective;
    return out;
  }

  ChainProblem pb_;
  SolverConfig cfg_;
  Eigen::Index segments_ = 0, h_ = 0, d_ = 0, cells_ = 0;
  std::vector<Eigen::Index> seg_offset_;
  Eigen::VectorXd cost_;
  Eigen::MatrixXd src_, tgt_;  // endpoint blocks in coordinates, one per column
  Eigen::VectorXd z_;
  Eigen::VectorXd x1_, x2_, w_;
  double rho_ = 0.0;
  std::function<void(long, double, double, double)> monitor_;
};

}  // namespace mmot::detail
