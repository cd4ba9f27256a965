#pragma once

// Discrete geodesics: N - 1 intermediate densities on the endpoints' grid
// chosen to minimise the sum of the N segment transport costs.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mmot/density.hpp"
#include "mmot/detail/chain_solver.hpp"
#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/matrix_ot_full.hpp"
#include "mmot/matrix_ot_restricted.hpp"
#include "mmot/problem.hpp"
#include "mmot/scalar_ot.hpp"

namespace mmot {

enum class GeodesicMode { full, restricted };

inline const char* to_string(GeodesicMode m) { return m == GeodesicMode::full ? "full" : "restricted"; }

struct GeodesicPath {
  GeodesicMode mode = GeodesicMode::full;
  std::vector<double> taus;               ///< k / N
  std::vector<MatrixDensity> densities;   ///< N + 1 entries, endpoints are the inputs
  std::vector<double> segment_values;     ///< cost of segment k -> k + 1
  double value = 0.0;                     ///< sum of segment_values
  Eigen::MatrixXd cost;
  double lambda = 0.0;
  SolverReport report;

  std::vector<FullTransportPlan> full_plans;  ///< mode full
  std::vector<RestrictedPlan> restricted_plans;  ///< mode restricted
  /// mode restricted: unit-trace orientation at every layer node.
  std::vector<std::vector<HermitianMatrix>> directions;

  std::size_t segments() const { return segment_values.size(); }
};

/// Recomputes each segment's cost from the stored plans.
inline std::vector<double> segment_costs(const GeodesicPath& path) {
  std::vector<double> out;
  if (path.mode == GeodesicMode::full) {
    for (const auto& p : path.full_plans) out.push_back(transport_cost(p, path.cost, path.lambda));
  } else {
    for (std::size_t k = 0; k < path.restricted_plans.size(); ++k) {
      const Eigen::MatrixXd d = path.cost + path.lambda * direction_distance(path.directions[k], path.directions[k + 1]);
      out.push_back((d.array() * path.restricted_plans[k].coupling.array()).sum());
    }
  }
  return out;
}

namespace detail {

inline std::vector<MatrixDensity> linear_blends(const MatrixDensity& mu0, const MatrixDensity& mu1, std::size_t n_seg) {
  std::vector<MatrixDensity> out;
  for (std::size_t k = 0; k <= n_seg; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n_seg);
    if (k == 0) {
      out.push_back(mu0);
    } else if (k == n_seg) {
      out.push_back(mu1);
    } else {
      std::vector<HermitianMatrix> b;
      for (std::size_t i = 0; i < mu0.size(); ++i) b.push_back(mu0.block(i) * (1.0 - t) + mu1.block(i) * t);
      out.push_back(normalize(MatrixDensity(mu0.grid(), std::move(b))));
    }
  }
  return out;
}

inline void require_path_inputs(const MatrixDensity& mu0, const MatrixDensity& mu1, const Eigen::MatrixXd& cost,
                                int n_seg) {
  require_solver_inputs(mu0, mu1, "interpolate");
  if (n_seg < 1) throw InvalidInput("interpolate: need at least one segment");
  if (mu0.grid() != mu1.grid()) throw InvalidInput("interpolate: endpoints must share one grid");
  const auto g = static_cast<Eigen::Index>(mu0.size());
  if (cost.rows() != g || cost.cols() != g) throw DimensionError("interpolate: cost shape does not match the grid");
}

inline GeodesicPath interpolate_full(const MatrixDensity& mu0, const MatrixDensity& mu1, int n_seg,
                                     const Eigen::MatrixXd& cost, const SolverConfig& cfg) {
  const auto seg = static_cast<std::size_t>(n_seg);
  const auto g = static_cast<Eigen::Index>(mu0.size());
  ChainProblem pb;
  pb.n = mu0.dim();
  pb.layer_sizes.assign(seg + 1, g);
  pb.costs.assign(seg, cost);
  pb.source = raw_blocks(mu0);
  pb.target = raw_blocks(mu1);
  pb.lambda = cfg.lambda;

  const auto blends = linear_blends(mu0, mu1, seg);
  std::vector<SegmentValues> start;
  for (std::size_t k = 0; k < seg; ++k) start.push_back(to_segment(product_plan(blends[k], blends[k + 1])));
  ChainResult res = solve_chain(std::move(pb), start, cfg);

  GeodesicPath path;
  path.mode = GeodesicMode::full;
  path.cost = cost;
  path.lambda = cfg.lambda;
  path.report = res.report;
  for (std::size_t k = 0; k < seg; ++k) path.full_plans.push_back(from_segment(res.segments[k], mu0.grid(), mu0.grid()));

  path.densities.push_back(mu0);
  for (std::size_t k = 1; k < seg; ++k) {
    // Average of the two plans meeting at this layer; each is within the
    // primal tolerance of the other.
    const auto& in = path.full_plans[k - 1];
    const auto& out = path.full_plans[k];
    std::vector<HermitianMatrix> blocks(static_cast<std::size_t>(g), HermitianMatrix(mu0.dim()));
    for (Eigen::Index i = 0; i < g; ++i) {
      for (Eigen::Index j = 0; j < g; ++j) {
        blocks[static_cast<std::size_t>(i)] += out.b0(i, j) * 0.5;
        blocks[static_cast<std::size_t>(j)] += in.b1(i, j) * 0.5;
      }
    }
    path.densities.emplace_back(mu0.grid(), std::move(blocks));
  }
  path.densities.push_back(mu1);
  return path;
}

// Block-coordinate descent for the restricted program. Orientations U_k(i)
// and couplings pi_k alternate:
//  * couplings: for fixed U the chained LP collapses to one LP between the
//    endpoint traces with the min-plus composed cost; flow is routed along
//    the minimising paths;
//  * orientations: for fixed pi the objective is a weighted Dirichlet energy
//    whose minimiser is a harmonic extension, hence unit-trace PSD again.
class RestrictedChain {
 public:
  RestrictedChain(const MatrixDensity& mu0, const MatrixDensity& mu1, int n_seg, const Eigen::MatrixXd& cost,
                  double lambda)
      : seg_(static_cast<std::size_t>(n_seg)), g_(static_cast<Eigen::Index>(mu0.size())), n_(mu0.dim()),
        cost_(cost), lambda_(lambda), t0_(mu0.trace_density()), t1_(mu1.trace_density()) {}

  struct State {
    std::vector<std::vector<HermitianMatrix>> dir;
    std::vector<Eigen::MatrixXd> pi;
    double objective = std::numeric_limits<double>::infinity();
    long sweeps = 0;
  };

  State run(std::vector<std::vector<HermitianMatrix>> dir, double tol, long max_sweeps) const {
    State s;
    s.dir = std::move(dir);
    double prev = std::numeric_limits<double>::infinity();
    for (long it = 0; it < max_sweeps; ++it) {
      s.sweeps = it + 1;
      s.pi = couple(s.dir);
      update_directions(s.pi, s.dir);
      s.objective = objective(s.pi, s.dir);
      if (std::isfinite(prev) && prev - s.objective <= tol * std::max(std::abs(prev), 1e-300)) break;
      prev = s.objective;
    }
    return s;
  }

  double objective(const std::vector<Eigen::MatrixXd>& pi, const std::vector<std::vector<HermitianMatrix>>& dir) const {
    double v = 0.0;
    for (std::size_t k = 0; k < seg_; ++k) v += (segment_cost(dir, k).array() * pi[k].array()).sum();
    return v;
  }

 private:
  Eigen::MatrixXd segment_cost(const std::vector<std::vector<HermitianMatrix>>& dir, std::size_t k) const {
    return cost_ + lambda_ * direction_distance(dir[k], dir[k + 1]);
  }

  std::vector<Eigen::MatrixXd> couple(const std::vector<std::vector<HermitianMatrix>>& dir) const {
    // composed(i0, j): cheapest path cost from layer 0 to node j of layer k.
    Eigen::MatrixXd composed = segment_cost(dir, 0);
    std::vector<Eigen::MatrixXi> via(seg_);
    for (std::size_t k = 1; k < seg_; ++k) {
      const Eigen::MatrixXd d = segment_cost(dir, k);
      Eigen::MatrixXd next(g_, g_);
      via[k].resize(g_, g_);
      for (Eigen::Index i0 = 0; i0 < g_; ++i0) {
        for (Eigen::Index j = 0; j < g_; ++j) {
          double best = std::numeric_limits<double>::infinity();
          Eigen::Index arg = 0;
          for (Eigen::Index l = 0; l < g_; ++l) {
            const double v = composed(i0, l) + d(l, j);
            if (v < best) {
              best = v;
              arg = l;
            }
          }
          next(i0, j) = best;
          via[k](i0, j) = static_cast<int>(arg);
        }
      }
      composed.swap(next);
    }
    const LpSolution lp = discrete_ot_lp(composed, t0_, t1_);
    std::vector<Eigen::MatrixXd> pi(seg_, Eigen::MatrixXd::Zero(g_, g_));
    std::vector<Eigen::Index> nodes(seg_ + 1);
    for (Eigen::Index i0 = 0; i0 < g_; ++i0) {
      for (Eigen::Index j = 0; j < g_; ++j) {
        const double f = lp.plan.coupling(i0, j);
        if (!(f > 0.0)) continue;
        nodes[0] = i0;
        nodes[seg_] = j;
        for (std::size_t k = seg_ - 1; k >= 1; --k) nodes[k] = via[k](i0, nodes[k + 1]);
        for (std::size_t k = 0; k < seg_; ++k) pi[k](nodes[k], nodes[k + 1]) += f;
      }
    }
    return pi;
  }

  void update_directions(const std::vector<Eigen::MatrixXd>& pi, std::vector<std::vector<HermitianMatrix>>& dir) const {
    if (seg_ < 2 || lambda_ == 0.0) return;
    // Unknowns: interior nodes with positive weight.
    const std::size_t interior = seg_ - 1;
    std::vector<Eigen::Index> id(interior * static_cast<std::size_t>(g_), -1);
    auto idx = [&](std::size_t k, Eigen::Index i) -> Eigen::Index& {
      return id[(k - 1) * static_cast<std::size_t>(g_) + static_cast<std::size_t>(i)];
    };
    Eigen::Index count = 0;
    for (std::size_t k = 1; k < seg_; ++k) {
      for (Eigen::Index i = 0; i < g_; ++i) {
        if (pi[k].row(i).sum() + pi[k - 1].col(i).sum() > 0.0) idx(k, i) = count++;
      }
    }
    if (count == 0) return;
    const Eigen::Index h = n_ * n_;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(count, 2 * h);
    auto add_edge = [&](std::size_t ka, Eigen::Index a, std::size_t kb, Eigen::Index b, double w) {
      const bool ua = ka > 0 && ka < seg_ && idx(ka, a) >= 0;
      const bool ub = kb > 0 && kb < seg_ && idx(kb, b) >= 0;
      auto flat = [&](const HermitianMatrix& m) {
        Eigen::VectorXd v(2 * h);
        for (Eigen::Index r = 0; r < n_; ++r) {
          for (Eigen::Index c = 0; c < n_; ++c) {
            v(r * n_ + c) = m(r, c).real();
            v(h + r * n_ + c) = m(r, c).imag();
          }
        }
        return v;
      };
      if (ua) trip.emplace_back(idx(ka, a), idx(ka, a), w);
      if (ub) trip.emplace_back(idx(kb, b), idx(kb, b), w);
      if (ua && ub) {
        trip.emplace_back(idx(ka, a), idx(kb, b), -w);
        trip.emplace_back(idx(kb, b), idx(ka, a), -w);
      } else if (ua) {
        rhs.row(idx(ka, a)) += w * flat(dir[kb][static_cast<std::size_t>(b)]).transpose();
      } else if (ub) {
        rhs.row(idx(kb, b)) += w * flat(dir[ka][static_cast<std::size_t>(a)]).transpose();
      }
    };
    for (std::size_t k = 0; k < seg_; ++k) {
      for (Eigen::Index i = 0; i < g_; ++i) {
        for (Eigen::Index j = 0; j < g_; ++j) {
          if (pi[k](i, j) > 0.0) add_edge(k, i, k + 1, j, pi[k](i, j));
        }
      }
    }
    Eigen::SparseMatrix<double> lap(count, count);
    lap.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(lap);
    if (ldlt.info() != Eigen::Success) throw NumericalError("interpolate: orientation system is singular");
    const Eigen::MatrixXd sol = ldlt.solve(rhs);
    for (std::size_t k = 1; k < seg_; ++k) {
      for (Eigen::Index i = 0; i < g_; ++i) {
        const Eigen::Index r = idx(k, i);
        if (r < 0) continue;
        ComplexMatrix m(n_, n_);
        for (Eigen::Index a = 0; a < n_; ++a) {
          for (Eigen::Index c = 0; c < n_; ++c) m(a, c) = Complex(sol(r, a * n_ + c), sol(r, h + a * n_ + c));
        }
        // Convex combination of unit-trace PSD matrices; renormalise roundoff only.
        HermitianMatrix u(m);
        dir[k][static_cast<std::size_t>(i)] = u * (1.0 / u.trace());
      }
    }
  }

  std::size_t seg_;
  Eigen::Index g_, n_;
  Eigen::MatrixXd cost_;
  double lambda_;
  ScalarDensity t0_, t1_;
};

inline GeodesicPath interpolate_restricted(const MatrixDensity& mu0, const MatrixDensity& mu1, int n_seg,
                                           const Eigen::MatrixXd& cost, const SolverConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto seg = static_cast<std::size_t>(n_seg);
  const auto g = mu0.size();
  const Eigen::Index n = mu0.dim();
  RestrictedChain chain(mu0, mu1, n_seg, cost, cfg.lambda);

  std::vector<std::vector<HermitianMatrix>> init;
  for (const auto& b : linear_blends(mu0, mu1, seg)) init.push_back(unit_trace_blocks(b, "interpolate"));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  RestrictedChain::State best;
  for (int r = 0; r < cfg.restarts; ++r) {
    auto dir = init;
    if (r > 0) {
      // Restarts mix a random unit-trace PSD matrix into every interior orientation.
      for (std::size_t k = 1; k < seg; ++k) {
        for (auto& u : dir[k]) {
          ComplexMatrix a(n, n);
          for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = 0; q < n; ++q) a(p, q) = Complex(normal(rng), normal(rng));
          HermitianMatrix w(ComplexMatrix(a * a.adjoint()));
          u = u * 0.5 + w * (0.5 / w.trace());
        }
      }
    }
    auto s = chain.run(std::move(dir), cfg.bcd_tol, cfg.bcd_max_iter);
    if (s.objective < best.objective) best = std::move(s);
  }

  GeodesicPath path;
  path.mode = GeodesicMode::restricted;
  path.cost = cost;
  path.lambda = cfg.lambda;
  path.directions = best.dir;
  path.report.converged = best.sweeps < cfg.bcd_max_iter;
  path.report.iterations = best.sweeps;
  path.report.restarts = cfg.restarts;
  for (std::size_t k = 0; k < seg; ++k) path.restricted_plans.push_back({best.pi[k], mu0.grid(), mu0.grid()});

  path.densities.push_back(mu0);
  for (std::size_t k = 1; k < seg; ++k) {
    std::vector<HermitianMatrix> blocks;
    for (std::size_t i = 0; i < g; ++i) {
      const double t = best.pi[k].row(static_cast<Eigen::Index>(i)).sum();
      blocks.push_back(best.dir[k][i] * t);
    }
    path.densities.emplace_back(mu0.grid(), std::move(blocks));
  }
  path.densities.push_back(mu1);
  path.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return path;
}

}  // namespace detail

/// Minimises sum_k T(mu_k, mu_{k+1}) over intermediates mu_1..mu_{N-1} on the
/// common grid, with tau_k = k / N. Mode full solves one convex program over
/// all segments; mode restricted uses restricted-plan segment costs d^2 and
/// returns a stationary point of block-coordinate descent.
inline GeodesicPath interpolate(const MatrixDensity& mu0, const MatrixDensity& mu1, int n_seg,
                                const Eigen::MatrixXd& cost, const SolverConfig& cfg,
                                GeodesicMode mode = GeodesicMode::full) {
  cfg.validate();
  detail::require_path_inputs(mu0, mu1, cost, n_seg);
  GeodesicPath path = mode == GeodesicMode::full ? detail::interpolate_full(mu0, mu1, n_seg, cost, cfg)
                                                 : detail::interpolate_restricted(mu0, mu1, n_seg, cost, cfg);
  for (int k = 0; k <= n_seg; ++k) path.taus.push_back(static_cast<double>(k) / static_cast<double>(n_seg));
  path.segment_values = segment_costs(path);
  path.value = 0.0;
  for (double v : path.segment_values) path.value += v;
  return path;
}

inline GeodesicPath interpolate(const MatrixDensity& mu0, const MatrixDensity& mu1, int n_seg, const GroundCost& cost,
                                const SolverConfig& cfg, GeodesicMode mode = GeodesicMode::full) {
  return interpolate(mu0, mu1, n_seg, cost.matrix, cfg, mode);
}

}  // namespace mmot
