#pragma once

// Log-barrier path-following solver for the chain program of
// chain_splitting.hpp. Each cell carries (P, Q, t) with m = tr P and the
// epigraph constraint t m >= ||P - Q||_F^2, so the objective is linear:
//
//   minimize   sum C m + lambda t
//   barrier    -log det P - log det Q - log(t m - ||P - Q||^2)
//   subject to tr P = tr Q per cell, node marginals as before.
//
// The per-cell trace equality is eliminated locally, leaving a Schur
// complement over layer nodes. Nodes of one layer do not interact, and a cell
// only links layer k to k + 1, so the Schur matrix is block tridiagonal over
// layers and is factored by block Cholesky.
//
// Needs a strictly feasible start: positive definite endpoint blocks.
//
// With lambda = 0 the epigraph term is dropped (t carries no cost and the
// barrier would push it to infinity); t is then frozen and P, Q are only
// coupled through their traces.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "mmot/detail/chain_splitting.hpp"
#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/problem.hpp"

namespace mmot::detail {

class ChainBarrier {
  using Small = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

 public:
  ChainBarrier(ChainProblem problem, const SolverConfig& cfg) : pb_(std::move(problem)), cfg_(cfg) {
    cfg_.validate();
    const std::size_t layers = pb_.layer_sizes.size();
    if (layers < 2 || pb_.costs.size() != layers - 1) throw DimensionError("ChainBarrier: bad layer layout");
    if (pb_.n > 8) throw DimensionError("ChainBarrier: block dimension above 8");
    segments_ = static_cast<Eigen::Index>(layers - 1);
    n_ = pb_.n;
    h_ = coord_count(n_);
    d_ = 2 * h_ + 1;
    seg_offset_.assign(static_cast<std::size_t>(segments_) + 1, 0);
    for (Eigen::Index k = 0; k < segments_; ++k) {
      const auto& c = pb_.costs[static_cast<std::size_t>(k)];
      if (c.rows() != g(k) || c.cols() != g(k + 1)) throw DimensionError("ChainBarrier: cost shape");
      seg_offset_[static_cast<std::size_t>(k) + 1] = seg_offset_[static_cast<std::size_t>(k)] + g(k) * g(k + 1);
    }
    cells_ = seg_offset_.back();
    cost_.resize(cells_);
    for (Eigen::Index k = 0; k < segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i)
        for (Eigen::Index j = 0; j < g(k + 1); ++j) cost_(cell(k, i, j)) = pb_.costs[static_cast<std::size_t>(k)](i, j);
    }
    if (pb_.source.size() != static_cast<std::size_t>(g(0)) ||
        pb_.target.size() != static_cast<std::size_t>(g(segments_))) {
      throw DimensionError("ChainBarrier: endpoint blocks do not match layer sizes");
    }
    src_.resize(h_, g(0));
    tgt_.resize(h_, g(segments_));
    for (Eigen::Index i = 0; i < g(0); ++i) to_coords(pb_.source[static_cast<std::size_t>(i)], src_.col(i).data());
    for (Eigen::Index j = 0; j < g(segments_); ++j) {
      to_coords(pb_.target[static_cast<std::size_t>(j)], tgt_.col(j).data());
    }
    for (Eigen::Index k = 0; k < h_; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(h_);
      e(k) = 1.0;
      basis_.push_back(from_coords(e.data(), n_));
    }
    x_ = Eigen::VectorXd::Zero(cells_ * d_);
    epigraph_ = pb_.lambda > 0.0;
  }

  Eigen::Index cells() const { return cells_; }

  /// Called after every centering with (newton steps, primal, gap, tau).
  void set_monitor(std::function<void(long, double, double, double)> fn) { monitor_ = std::move(fn); }

  /// Starting point; every block must be positive definite.
  void warm_start(const std::vector<SegmentValues>& segs) {
    if (static_cast<Eigen::Index>(segs.size()) != segments_) throw DimensionError("warm_start: segment count");
    for (Eigen::Index k = 0; k < segments_; ++k) {
      const auto& s = segs[static_cast<std::size_t>(k)];
      for (Eigen::Index i = 0; i < g(k); ++i) {
        for (Eigen::Index j = 0; j < g(k + 1); ++j) {
          double* c = x_.data() + cell(k, i, j) * d_;
          const auto idx = static_cast<std::size_t>(i * g(k + 1) + j);
          to_coords(s.p[idx], c);
          to_coords(s.q[idx], c + h_);
          const double m = coords_trace(c, n_);
          double e2 = 0.0;
          for (Eigen::Index a = 0; a < h_; ++a) e2 += (c[a] - c[h_ + a]) * (c[a] - c[h_ + a]);
          c[2 * h_] = m > 0.0 ? e2 / m + m : 0.0;
        }
      }
    }
    if (!std::isfinite(barrier(x_))) throw NumericalError("ChainBarrier: start point is not strictly interior");
  }

  ChainResult solve() {
    const auto t0 = std::chrono::steady_clock::now();
    const double nu = static_cast<double>(cells_) * static_cast<double>(2 * n_ + (epigraph_ ? 2 : 0));
    double obj = objective(x_);
    double tau = nu / std::max(obj, 1e-6);
    const double mu = 10.0;
    long steps = 0;
    double gap = nu / tau;
    bool stalled = false, centered = false;

    Eigen::VectorXd dx(x_.size()), trial(x_.size());
    while (steps < cfg_.max_iter) {
      centered = false;
      for (int inner = 0; inner < 1000 && steps < cfg_.max_iter; ++inner) {
        ++steps;
        const double dec = newton_direction(tau, dx);
        if (!std::isfinite(dec)) {
          stalled = true;
          break;
        }
        if (dec <= 1e-6) {
          centered = true;
          break;
        }
        const double f0 = tau * objective(x_) + barrier(x_);
        double step = std::min(1.0, 0.99 * max_step(x_, dx));
        for (;;) {
          trial = x_ + step * dx;
          const double f1 = tau * objective(trial) + barrier(trial);
          // Slack for roundoff in f once the decrease falls below it.
          if (std::isfinite(f1) && f1 <= f0 - 0.25 * step * dec + 1e-13 * std::abs(f0)) break;
          step *= 0.5;
          if (step < 1e-12) break;
        }
        if (step < 1e-12) {
          stalled = true;
          break;
        }
        x_.swap(trial);
      }
      gap = nu / tau;
      if (monitor_) monitor_(steps, max_residual(x_), gap, tau);
      if (stalled || gap <= cfg_.tol_dual) break;
      tau *= mu;
    }

    // Roundoff drifts the iterate off the equality constraints; pull it back.
    for (int pass = 0; pass < 3 && !stalled; ++pass) {
      if (!std::isfinite(newton_direction(tau, dx, true))) break;
      double step = 1.0;
      while (step > 1e-3 && !std::isfinite(barrier(x_ + step * dx))) step *= 0.5;
      if (!std::isfinite(barrier(x_ + step * dx))) break;
      x_ += step * dx;
    }

    Eigen::VectorXd vals = x_;
    for (Eigen::Index c = 0; c < cells_; ++c) {
      double* v = vals.data() + c * d_;
      if (!(coords_trace(v, n_) > cfg_.mass_floor)) {
        for (Eigen::Index a = 0; a < d_; ++a) v[a] = 0.0;
      }
    }
    const double primal = max_residual(vals);
    ChainResult out = build_result(vals);
    out.report.converged = !stalled && centered && gap <= cfg_.tol_dual && primal <= cfg_.tol_primal;
    out.report.iterations = steps;
    out.report.primal_residual = primal;
    out.report.dual_residual = gap;
    out.report.rho = tau;
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

 private:
  Eigen::Index g(Eigen::Index layer) const { return pb_.layer_sizes[static_cast<std::size_t>(layer)]; }
  Eigen::Index cell(Eigen::Index k, Eigen::Index i, Eigen::Index j) const {
    return seg_offset_[static_cast<std::size_t>(k)] + i * g(k + 1) + j;
  }

  Small small_from(const double* c) const {
    Small m(n_, n_);
    Eigen::Index idx = n_;
    for (Eigen::Index k = 0; k < n_; ++k) m(k, k) = c[k];
    const double s = 1.0 / std::sqrt(2.0);
    for (Eigen::Index k = 0; k < n_; ++k) {
      for (Eigen::Index l = k + 1; l < n_; ++l) {
        m(k, l) = Complex(s * c[idx], s * c[idx + 1]);
        m(l, k) = std::conj(m(k, l));
        idx += 2;
      }
    }
    return m;
  }

  void small_to(const Small& m, double* c) const {
    Eigen::Index idx = n_;
    for (Eigen::Index k = 0; k < n_; ++k) c[k] = m(k, k).real();
    const double s = std::sqrt(2.0);
    for (Eigen::Index k = 0; k < n_; ++k) {
      for (Eigen::Index l = k + 1; l < n_; ++l) {
        // Average of (k, l) and conj(l, k) keeps the result Hermitian.
        const Complex v = 0.5 * (m(k, l) + std::conj(m(l, k)));
        c[idx++] = s * v.real();
        c[idx++] = s * v.imag();
      }
    }
  }

  // log det of the block at c, or NaN if it is not positive definite.
  double log_det(const double* c) const {
    if (n_ == 1) return c[0] > 0.0 ? std::log(c[0]) : std::numeric_limits<double>::quiet_NaN();
    if (n_ == 2) {
      const double det = c[0] * c[1] - 0.5 * (c[2] * c[2] + c[3] * c[3]);
      return c[0] > 0.0 && det > 0.0 ? std::log(det) : std::numeric_limits<double>::quiet_NaN();
    }
    Eigen::LLT<Small> llt(small_from(c));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (Eigen::Index k = 0; k < n_; ++k) {
      const double l = llt.matrixLLT()(k, k).real();
      if (!(l > 0.0)) return std::numeric_limits<double>::quiet_NaN();
      s += 2.0 * std::log(l);
    }
    return s;
  }

  double slack(const double* c) const {
    double e2 = 0.0;
    for (Eigen::Index a = 0; a < h_; ++a) e2 += (c[a] - c[h_ + a]) * (c[a] - c[h_ + a]);
    return c[2 * h_] * coords_trace(c, n_) - e2;
  }

  // Largest a with X + a dX positive definite (infinity if none).
  double psd_step(const double* c, const double* dc) const {
    Eigen::LLT<Small> llt(small_from(c));
    Small m = llt.matrixL().solve(small_from(dc));
    m = llt.matrixL().solve(m.adjoint().eval()).adjoint();
    Eigen::SelfAdjointEigenSolver<Small> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
  }

  // Smallest positive root of a x^2 + b x + c with c > 0.
  static double first_root(double a, double b, double c) {
    const double inf = std::numeric_limits<double>::infinity();
    if (a == 0.0) return b < 0.0 ? -c / b : inf;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return inf;
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    double best = inf;
    for (double r : {q / a, c / q}) {
      if (r > 0.0 && std::isfinite(r)) best = std::min(best, r);
    }
    return best;
  }

  // Step to the boundary of the barrier domain along dx.
  double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < cells_; ++c) {
      const double* v = x.data() + c * d_;
      const double* dv = dx.data() + c * d_;
      best = std::min({best, psd_step(v, dv), psd_step(v + h_, dv + h_)});
      // slack(a) = (t + a dt)(m + a dm) - ||e + a de||^2
      const double m = coords_trace(v, n_), dm = coords_trace(dv, n_);
      double ee = 0.0, ed = 0.0, dd = 0.0;
      for (Eigen::Index q = 0; q < h_; ++q) {
        const double e = v[q] - v[h_ + q], de = dv[q] - dv[h_ + q];
        ee += e * e;
        ed += e * de;
        dd += de * de;
      }
      const double t = v[2 * h_], dt = dv[2 * h_];
      if (epigraph_) best = std::min(best, first_root(dt * dm - dd, t * dm + dt * m - 2.0 * ed, t * m - ee));
    }
    return best;
  }

  double objective(const Eigen::VectorXd& x) const {
    double f = 0.0;
    for (Eigen::Index c = 0; c < cells_; ++c) {
      const double* v = x.data() + c * d_;
      f += cost_(c) * coords_trace(v, n_) + pb_.lambda * v[2 * h_];
    }
    return f;
  }

  // +inf outside the domain.
  double barrier(const Eigen::VectorXd& x) const {
    double f = 0.0;
    for (Eigen::Index c = 0; c < cells_; ++c) {
      const double* v = x.data() + c * d_;
      const double lp = log_det(v), lq = log_det(v + h_);
      if (std::isnan(lp) || std::isnan(lq)) return std::numeric_limits<double>::infinity();
      f -= lp + lq;
      if (!epigraph_) continue;
      const double s = slack(v);
      if (!(s > 0.0) || !(v[2 * h_] > 0.0)) return std::numeric_limits<double>::infinity();
      f -= std::log(s);
    }
    return f;
  }

  // Gradient and Hessian of -log det at the block c, written into g and hess.
  template <class G, class H>
  void log_det_derivatives(const double* c, G&& grad, H&& hess) const {
    const Small y = small_from(c).inverse();
    Eigen::VectorXd col(h_);
    small_to(y, col.data());
    grad = -col;
    for (Eigen::Index k = 0; k < h_; ++k) {
      const Small e = basis_[static_cast<std::size_t>(k)];
      small_to(y * e * y, col.data());
      hess.col(k) = col;
    }
  }

  // Solves for the Newton direction at barrier weight tau. Returns the
  // Newton decrement squared.
  // With restore_only the objective is dropped and dx is the smallest step,
  // in the local Hessian norm, onto the affine constraints.
  double newton_direction(double tau, Eigen::VectorXd& dx, bool restore_only = false) {
    const Eigen::Index m = h_;
    if (kmat_.size() != static_cast<std::size_t>(cells_)) kmat_.resize(static_cast<std::size_t>(cells_));
    v_.resize(cells_ * d_);
    grad_.resize(cells_ * d_);

    diag_.resize(static_cast<std::size_t>(segments_) + 1);
    off_.resize(static_cast<std::size_t>(segments_));
    for (Eigen::Index k = 0; k <= segments_; ++k) diag_[static_cast<std::size_t>(k)].setZero(g(k) * m, g(k) * m);
    for (Eigen::Index k = 0; k < segments_; ++k) off_[static_cast<std::size_t>(k)].setZero(g(k) * m, g(k + 1) * m);
    std::vector<Eigen::VectorXd> rhs(static_cast<std::size_t>(segments_) + 1);
    for (Eigen::Index k = 0; k <= segments_; ++k) {
      rhs[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(g(k) * m);
      for (Eigen::Index i = 0; i < g(k); ++i) {
        Eigen::VectorXd r(m);
        node_residual(x_, k, i, r);
        rhs[static_cast<std::size_t>(k)].segment(i * m, m) = r;
      }
    }

    Eigen::VectorXd a = Eigen::VectorXd::Zero(d_);
    a.head(n_).setOnes();
    a.segment(h_, n_).setConstant(-1.0);
    Eigen::MatrixXd hc(d_, d_);
    Eigen::VectorXd gc(d_), ds(d_);
    for (Eigen::Index k = 0; k < segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i) {
        for (Eigen::Index j = 0; j < g(k + 1); ++j) {
          const Eigen::Index c = cell(k, i, j);
          const double* v = x_.data() + c * d_;
          hc.setZero();
          gc.setZero();
          log_det_derivatives(v, gc.head(h_), hc.topLeftCorner(h_, h_));
          log_det_derivatives(v + h_, gc.segment(h_, h_), hc.block(h_, h_, h_, h_));
          const double s = slack(v);
          const double t = v[2 * h_];
          const double mass = coords_trace(v, n_);
          if (!epigraph_) {
            hc(2 * h_, 2 * h_) = 1.0;
          } else {
            for (Eigen::Index q = 0; q < h_; ++q) {
              const double e = v[q] - v[h_ + q];
              ds(q) = (q < n_ ? t : 0.0) - 2.0 * e;
              ds(h_ + q) = 2.0 * e;
            }
            ds(2 * h_) = mass;
            gc -= ds / s;
            hc += ds * ds.transpose() / (s * s);
            for (Eigen::Index q = 0; q < h_; ++q) {
              hc(q, q) += 2.0 / s;
              hc(h_ + q, h_ + q) += 2.0 / s;
              hc(q, h_ + q) -= 2.0 / s;
              hc(h_ + q, q) -= 2.0 / s;
              if (q < n_) {
                hc(q, 2 * h_) -= 1.0 / s;
                hc(2 * h_, q) -= 1.0 / s;
              }
            }
          }
          for (Eigen::Index q = 0; q < n_; ++q) gc(q) += tau * cost_(c);
          gc(2 * h_) += tau * pb_.lambda;
          grad_.segment(c * d_, d_) = gc;

          // K = H^-1 restricted to a' dx = 0; omega restores tr P = tr Q.
          // Jacobi scaling first: entries span many orders on near-empty cells.
          const Eigen::VectorXd sc = hc.diagonal().cwiseSqrt().cwiseInverse();
          Eigen::MatrixXd hs = sc.asDiagonal() * hc * sc.asDiagonal();
          Eigen::LLT<Eigen::MatrixXd> llt(hs);
          // Near-tight epigraph cells can lose definiteness to roundoff.
          for (double eps = 1e-14; llt.info() != Eigen::Success && eps < 1e-6; eps *= 100.0) {
            hs.diagonal().array() += eps;
            llt.compute(hs);
          }
          if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
          const Eigen::MatrixXd hinv =
              sc.asDiagonal() * llt.solve(Eigen::MatrixXd::Identity(d_, d_)) * sc.asDiagonal();
          const Eigen::VectorXd ha = hinv * a;
          const double aha = a.dot(ha);
          Eigen::MatrixXd& kc = kmat_[static_cast<std::size_t>(c)];
          kc = hinv - ha * ha.transpose() / aha;
          const double drift = -a.dot(Eigen::Map<const Eigen::VectorXd>(v, d_));
          v_.segment(c * d_, d_) = ha * (drift / aha);
          if (!restore_only) v_.segment(c * d_, d_) -= kc * gc;

          auto& dk = diag_[static_cast<std::size_t>(k)];
          auto& dk1 = diag_[static_cast<std::size_t>(k + 1)];
          dk.block(i * m, i * m, m, m) += kc.topLeftCorner(m, m);
          dk1.block(j * m, j * m, m, m) += kc.block(m, m, m, m);
          off_[static_cast<std::size_t>(k)].block(i * m, j * m, m, m) -= kc.block(0, m, m, m);
          rhs[static_cast<std::size_t>(k)].segment(i * m, m) += v_.segment(c * d_, m);
          rhs[static_cast<std::size_t>(k + 1)].segment(j * m, m) -= v_.segment(c * d_ + m, m);
        }
      }
    }

    // The trace direction on every node is a null vector; pin it at node 0.
    {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
      u.head(n_).setConstant(1.0 / std::sqrt(static_cast<double>(n_)));
      auto blk = diag_[0].topLeftCorner(m, m);
      const double scale = std::max(blk.trace(), 1e-300);
      blk += scale * u * u.transpose();
    }
    // Node rows differ by many orders of magnitude once some cells empty out;
    // solve the Jacobi-scaled system.
    std::vector<Eigen::VectorXd> scale(diag_.size());
    for (std::size_t k = 0; k < diag_.size(); ++k) {
      scale[k] = diag_[k].diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      diag_[k] = scale[k].asDiagonal() * diag_[k] * scale[k].asDiagonal();
      rhs[k] = scale[k].cwiseProduct(rhs[k]);
    }
    for (std::size_t k = 0; k < off_.size(); ++k) off_[k] = scale[k].asDiagonal() * off_[k] * scale[k + 1].asDiagonal();

    std::vector<Eigen::VectorXd> y;
    // Cells pinned to P = Q (equal marginals, large tau) make the dual nearly
    // degenerate beyond the trace direction; a small ridge is harmless there.
    const std::vector<Eigen::MatrixXd> schur = diag_;
    bool solved = solve_block_tridiagonal(rhs, y);
    for (double eps = 1e-14; !solved && eps < 1e-6; eps *= 100.0) {
      diag_ = schur;
      for (auto& blk : diag_) blk.diagonal().array() += eps;
      solved = solve_block_tridiagonal(rhs, y);
    }
    if (!solved) return std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = scale[k].cwiseProduct(y[k]);

    for (Eigen::Index k = 0; k < segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i) {
        for (Eigen::Index j = 0; j < g(k + 1); ++j) {
          const Eigen::Index c = cell(k, i, j);
          Eigen::VectorXd nty = Eigen::VectorXd::Zero(d_);
          nty.head(m) = y[static_cast<std::size_t>(k)].segment(i * m, m);
          nty.segment(m, m) = -y[static_cast<std::size_t>(k + 1)].segment(j * m, m);
          dx.segment(c * d_, d_) = v_.segment(c * d_, d_) - kmat_[static_cast<std::size_t>(c)] * nty;
        }
      }
    }
    return std::max(0.0, -grad_.dot(dx));
  }

  // Block Cholesky of the layer-tridiagonal Schur matrix; overwrites diag_.
  bool solve_block_tridiagonal(const std::vector<Eigen::VectorXd>& rhs, std::vector<Eigen::VectorXd>& y) {
    const auto layers = static_cast<std::size_t>(segments_) + 1;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chol(layers);
    std::vector<Eigen::MatrixXd> w(layers - 1);
    std::vector<Eigen::VectorXd> z(layers);
    for (std::size_t k = 0; k < layers; ++k) {
      if (k > 0) diag_[k].noalias() -= w[k - 1].transpose() * w[k - 1];
      chol[k].compute(diag_[k]);
      if (chol[k].info() != Eigen::Success) return false;
      if (k + 1 < layers) w[k] = chol[k].matrixL().solve(off_[k]);
      Eigen::VectorXd r = rhs[k];
      if (k > 0) r.noalias() -= w[k - 1].transpose() * z[k - 1];
      z[k] = chol[k].matrixL().solve(r);
    }
    y.assign(layers, Eigen::VectorXd());
    for (std::size_t k = layers; k-- > 0;) {
      Eigen::VectorXd r = z[k];
      if (k + 1 < layers) r.noalias() -= w[k] * y[k + 1];
      y[k] = chol[k].matrixU().solve(r);
    }
    return true;
  }

  // (sum_j P^k_ij) - (sum_i' Q^{k-1}_i'i) minus the endpoint block.
  void node_residual(const Eigen::VectorXd& v, Eigen::Index k, Eigen::Index i, Eigen::VectorXd& r) const {
    r.setZero(h_);
    if (k < segments_) {
      for (Eigen::Index j = 0; j < g(k + 1); ++j) r += v.segment(cell(k, i, j) * d_, h_);
    }
    if (k > 0) {
      for (Eigen::Index ip = 0; ip < g(k - 1); ++ip) r -= v.segment(cell(k - 1, ip, i) * d_ + h_, h_);
    }
    if (k == 0) r -= src_.col(i);
    if (k == segments_) r += tgt_.col(i);
  }

  double max_residual(const Eigen::VectorXd& v) const {
    double worst = 0.0;
    Eigen::VectorXd r(h_);
    for (Eigen::Index k = 0; k <= segments_; ++k) {
      for (Eigen::Index i = 0; i < g(k); ++i) {
        node_residual(v, k, i, r);
        worst = std::max(worst, r.norm());
      }
    }
    // Per-cell trace coupling.
    for (Eigen::Index c = 0; c < cells_; ++c) {
      const double* p = v.data() + c * d_;
      worst = std::max(worst, std::abs(coords_trace(p, n_) - coords_trace(p + h_, n_)));
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
          sv.p[idx] = from_coords(v, n_);
          sv.q[idx] = from_coords(v + h_, n_);
          const double mass = coords_trace(v, n_);
          sv.mass(i, j) = mass;
          if (mass > 0.0) objective += cost_(c) * mass + pb_.lambda * (sv.p[idx] - sv.q[idx]).squaredNorm() / mass;
        }
      }
    }
    out.objective = objective;
    return out;
  }

  ChainProblem pb_;
  SolverConfig cfg_;
  Eigen::Index segments_ = 0, n_ = 0, h_ = 0, d_ = 0, cells_ = 0;
  std::vector<Eigen::Index> seg_offset_;
  Eigen::VectorXd cost_;
  Eigen::MatrixXd src_, tgt_;
  std::vector<Small> basis_;
  Eigen::VectorXd x_, v_, grad_;
  std::vector<Eigen::MatrixXd> kmat_, diag_, off_;
  bool epigraph_ = true;
  std::function<void(long, double, double, double)> monitor_;
};

}  // namespace mmot::detail
