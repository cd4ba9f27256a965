#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mmot/density.hpp"
#include "mmot/detail/chain_solver.hpp"
#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/problem.hpp"

namespace mmot {

/// Per grid pair (i, j): scalar mass and two PSD blocks whose traces equal it.
/// Cells are stored row-major, index i * cols + j.
struct FullTransportPlan {
  std::vector<double> source_grid, target_grid;
  Eigen::MatrixXd mass;
  std::vector<HermitianMatrix> block0, block1;

  Eigen::Index rows() const { return mass.rows(); }
  Eigen::Index cols() const { return mass.cols(); }
  Eigen::Index dim() const { return block0.empty() ? 0 : block0.front().dim(); }
  std::size_t index(Eigen::Index i, Eigen::Index j) const { return static_cast<std::size_t>(i * cols() + j); }
  const HermitianMatrix& b0(Eigen::Index i, Eigen::Index j) const { return block0[index(i, j)]; }
  const HermitianMatrix& b1(Eigen::Index i, Eigen::Index j) const { return block1[index(i, j)]; }

  static FullTransportPlan zeros(std::vector<double> x, std::vector<double> y, Eigen::Index n) {
    FullTransportPlan p;
    p.source_grid = std::move(x);
    p.target_grid = std::move(y);
    const auto r = static_cast<Eigen::Index>(p.source_grid.size());
    const auto c = static_cast<Eigen::Index>(p.target_grid.size());
    p.mass = Eigen::MatrixXd::Zero(r, c);
    p.block0.assign(static_cast<std::size_t>(r * c), HermitianMatrix(n));
    p.block1 = p.block0;
    return p;
  }
};

/// Worst violations of the plan constraints.
struct PlanResiduals {
  double trace_mismatch = 0.0;   ///< max |tr block - mass|
  double source_residual = 0.0;  ///< max_i ||sum_j block0_ij - mu0_i||_F
  double target_residual = 0.0;  ///< max_j ||sum_i block1_ij - mu1_j||_F
  double min_eigenvalue = 0.0;   ///< over all blocks
  double min_mass = 0.0;

  bool ok(double marginal_tol = 1e-7, double trace_tol = 1e-9) const {
    return trace_mismatch <= trace_tol && source_residual <= marginal_tol && target_residual <= marginal_tol &&
           min_eigenvalue >= -kPsdTolerance && min_mass >= 0.0;
  }
};

inline PlanResiduals check_plan(const FullTransportPlan& plan, const MatrixDensity& mu0, const MatrixDensity& mu1) {
  if (static_cast<std::size_t>(plan.rows()) != mu0.size() || static_cast<std::size_t>(plan.cols()) != mu1.size()) {
    throw DimensionError("check_plan: plan shape does not match the marginals");
  }
  if (plan.dim() != mu0.dim() || mu0.dim() != mu1.dim()) throw DimensionError("check_plan: block dimension");
  PlanResiduals r;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  r.min_mass = plan.mass.size() ? plan.mass.minCoeff() : 0.0;
  std::vector<ComplexMatrix> col(mu1.size(), ComplexMatrix::Zero(mu1.dim(), mu1.dim()));
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    ComplexMatrix row = ComplexMatrix::Zero(mu0.dim(), mu0.dim());
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      const auto& a = plan.b0(i, j);
      const auto& b = plan.b1(i, j);
      r.trace_mismatch = std::max({r.trace_mismatch, std::abs(a.trace() - plan.mass(i, j)),
                                   std::abs(b.trace() - plan.mass(i, j))});
      r.min_eigenvalue = std::min({r.min_eigenvalue, a.min_eigenvalue(), b.min_eigenvalue()});
      row += a.matrix();
      col[static_cast<std::size_t>(j)] += b.matrix();
    }
    r.source_residual = std::max(r.source_residual, (row - mu0.block(static_cast<std::size_t>(i)).matrix()).norm());
  }
  for (std::size_t j = 0; j < mu1.size(); ++j) {
    r.target_residual = std::max(r.target_residual, (col[j] - mu1.block(j).matrix()).norm());
  }
  return r;
}

/// Cell (i, j) holds block0 = tr(mu1_j) mu0_i, block1 = tr(mu0_i) mu1_j.
inline FullTransportPlan product_plan(const MatrixDensity& mu0, const MatrixDensity& mu1) {
  if (mu0.dim() != mu1.dim()) throw DimensionError("product_plan: block dimension mismatch");
  const double m0 = mu0.total_mass(), m1 = mu1.total_mass();
  if (std::abs(m0 - m1) > 1e-10 * (1.0 + m0)) throw InfeasibleProblem("product_plan: marginals differ in mass");
  // For unit masses this is exactly tr_1 / tr_0 of mu0_i (x) mu1_j.
  auto plan = FullTransportPlan::zeros(mu0.grid(), mu1.grid(), mu0.dim());
  const auto t0 = mu0.traces();
  const auto t1 = mu1.traces();
  for (std::size_t i = 0; i < mu0.size(); ++i) {
    for (std::size_t j = 0; j < mu1.size(); ++j) {
      const auto ei = static_cast<Eigen::Index>(i), ej = static_cast<Eigen::Index>(j);
      const double s = 1.0 / m1;
      plan.mass(ei, ej) = t0[i] * t1[j] * s;
      plan.block0[plan.index(ei, ej)] = mu0.block(i) * (t1[j] * s);
      plan.block1[plan.index(ei, ej)] = mu1.block(j) * (t0[i] * s);
    }
  }
  return plan;
}

/// kron(block0, block1) / mass for one cell. Its partial traces give back
/// block0 and block1 because both have trace equal to the mass.
inline BigMatrix lift_cell(const FullTransportPlan& plan, Eigen::Index i, Eigen::Index j) {
  const double m = plan.mass(i, j);
  const auto& a = plan.b0(i, j);
  const auto& b = plan.b1(i, j);
  if (!(m > 0.0)) {
    if (a.matrix().norm() > 0.0 || b.matrix().norm() > 0.0) {
      throw InvalidInput("lift_plan: zero-mass cell (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") has nonzero blocks");
    }
    return BigMatrix::zero(a.dim());
  }
  BigMatrix k = kron(a, b);
  return BigMatrix(k.matrix() / m, a.dim());
}

inline std::vector<BigMatrix> lift_plan(const FullTransportPlan& plan) {
  std::vector<BigMatrix> out;
  out.reserve(plan.block0.size());
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) out.push_back(lift_cell(plan, i, j));
  }
  return out;
}

/// sum C m + lambda ||block0 - block1||^2 / m. An empty cell costs 0 if its
/// blocks agree and +infinity otherwise.
inline double transport_cost(const FullTransportPlan& plan, const Eigen::MatrixXd& cost, double lambda) {
  if (cost.rows() != plan.rows() || cost.cols() != plan.cols()) throw DimensionError("transport_cost: cost shape");
  double v = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      const double m = plan.mass(i, j);
      const double d = frob_dist_sq(plan.b0(i, j), plan.b1(i, j));
      if (m > 0.0) {
        v += cost(i, j) * m + lambda * d / m;
      } else if (d > 0.0 && lambda > 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
  }
  return v;
}

inline double transport_cost(const FullTransportPlan& plan, const GroundCost& cost, double lambda) {
  return transport_cost(plan, cost.matrix, lambda);
}

/// Pointwise convex combination t a + (1 - t) b of two plans on one grid pair.
inline FullTransportPlan blend(const FullTransportPlan& a, const FullTransportPlan& b, double t) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.dim() != b.dim()) throw DimensionError("blend: shape");
  FullTransportPlan out = a;
  out.mass = t * a.mass + (1.0 - t) * b.mass;
  for (std::size_t c = 0; c < a.block0.size(); ++c) {
    out.block0[c] = a.block0[c] * t + b.block0[c] * (1.0 - t);
    out.block1[c] = a.block1[c] * t + b.block1[c] * (1.0 - t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Naive joint-density constraint: PSD M_ij with sum_j M_ij = mu0_i and
// sum_i M_ij = mu1_j.

/// Hermitian Y_i, Z_j with Y_i + Z_j PSD for all (i, j). Any feasible M gives
/// sum tr(Y_i mu0_i) + sum tr(Z_j mu1_j) = sum tr((Y_i + Z_j) M_ij) >= 0, so a
/// negative value proves infeasibility.
struct NaiveCertificate {
  std::vector<HermitianMatrix> y, z;
  double value = 0.0;           ///< sum tr(Y mu0) + sum tr(Z mu1)
  double min_pair_eigenvalue = 0.0;  ///< min over (i, j) of lambda_min(Y_i + Z_j)
};

/// Recomputes value and pair eigenvalues of a candidate certificate.
inline NaiveCertificate evaluate_certificate(std::vector<HermitianMatrix> y, std::vector<HermitianMatrix> z,
                                             const MatrixDensity& mu0, const MatrixDensity& mu1) {
  if (y.size() != mu0.size() || z.size() != mu1.size()) throw DimensionError("certificate: size mismatch");
  NaiveCertificate c;
  c.value = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) c.value += (y[i].matrix() * mu0.block(i).matrix()).trace().real();
  for (std::size_t j = 0; j < z.size(); ++j) c.value += (z[j].matrix() * mu1.block(j).matrix()).trace().real();
  c.min_pair_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& a : y) {
    for (const auto& b : z) c.min_pair_eigenvalue = std::min(c.min_pair_eigenvalue, (a + b).min_eigenvalue());
  }
  c.y = std::move(y);
  c.z = std::move(z);
  return c;
}

inline bool certifies_infeasibility(const NaiveCertificate& c) {
  return c.min_pair_eigenvalue >= 0.0 && c.value < 0.0;
}

enum class NaiveStatus { feasible, infeasible, undecided };

inline const char* to_string(NaiveStatus s) {
  switch (s) {
    case NaiveStatus::feasible: return "feasible";
    case NaiveStatus::infeasible: return "infeasible";
    default: return "undecided";
  }
}

struct NaiveResult {
  NaiveStatus status = NaiveStatus::undecided;
  std::vector<HermitianMatrix> plan;  ///< row-major M_ij (last iterate)
  NaiveCertificate certificate;       ///< meaningful when infeasible
  double residual = 0.0;              ///< max Frobenius marginal residual of plan
  long iterations = 0;
};

struct NaiveOptions {
  double tol = 1e-9;
  long max_iter = 200000;
};

/// Accelerated projected gradient on 1/2 sum ||row residual||^2 + 1/2 sum
/// ||column residual||^2 over PSD fields. At a minimiser the residuals
/// (R_i, S_j) have R_i + S_j PSD and pair value -(||R||^2 + ||S||^2), which is
/// the certificate when the marginals cannot be met.
inline NaiveResult naive_feasibility(const MatrixDensity& mu0, const MatrixDensity& mu1, NaiveOptions opt = {}) {
  if (mu0.dim() != mu1.dim()) throw DimensionError("naive_feasibility: block dimension mismatch");
  const auto rows = mu0.size(), cols = mu1.size();
  const Eigen::Index n = mu0.dim();
  const double step = 1.0 / static_cast<double>(rows + cols);

  using Field = std::vector<ComplexMatrix>;
  auto residuals = [&](const Field& m, Field& r, Field& s) {
    for (std::size_t i = 0; i < rows; ++i) r[i] = -mu0.block(i).matrix();
    for (std::size_t j = 0; j < cols; ++j) s[j] = -mu1.block(j).matrix();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        r[i] += m[i * cols + j];
        s[j] += m[i * cols + j];
      }
    }
  };
  auto objective = [](const Field& r, const Field& s) {
    double f = 0.0;
    for (const auto& a : r) f += a.squaredNorm();
    for (const auto& b : s) f += b.squaredNorm();
    return 0.5 * f;
  };
  auto worst = [](const Field& r, const Field& s) {
    double w = 0.0;
    for (const auto& a : r) w = std::max(w, a.norm());
    for (const auto& b : s) w = std::max(w, b.norm());
    return w;
  };

  const auto t0 = mu0.traces();
  const auto t1 = mu1.traces();
  const double mass = std::max(mu0.total_mass(), 1e-300);
  Field x(rows * cols), prev, ypt, r(rows), s(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      x[i * cols + j] = ComplexMatrix::Identity(n, n) * (t0[i] * t1[j] / (mass * static_cast<double>(n)));
    }
  }
  prev = x;
  ypt = x;
  double theta = 1.0;
  double f_prev = std::numeric_limits<double>::infinity();
  NaiveResult out;

  auto try_certificate = [&](const Field& rr, const Field& ss) {
    std::vector<HermitianMatrix> yy, zz;
    for (const auto& a : rr) yy.emplace_back(a);
    for (const auto& b : ss) zz.emplace_back(b);
    double shift = 0.0;
    for (const auto& a : yy) {
      for (const auto& b : zz) shift = std::max(shift, -(a + b).min_eigenvalue());
    }
    // Lift the pair spectrum onto the cone; tr(shift I mu0_i) sums to shift * mass.
    if (shift > 0.0) {
      for (auto& a : yy) a += HermitianMatrix::identity(n) * (shift * (1.0 + 1e-12) + 1e-300);
    }
    return evaluate_certificate(std::move(yy), std::move(zz), mu0, mu1);
  };

  long it = 0;
  for (; it < opt.max_iter; ++it) {
    residuals(ypt, r, s);
    prev.swap(x);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t c = i * cols + j;
        x[c] = psd_project(HermitianMatrix(ComplexMatrix(ypt[c] - step * (r[i] + s[j])))).matrix();
      }
    }
    residuals(x, r, s);
    const double f = objective(r, s);
    if (worst(r, s) <= opt.tol) {
      out.status = NaiveStatus::feasible;
      break;
    }
    if (it % 50 == 49) {
      NaiveCertificate cert = try_certificate(r, s);
      if (certifies_infeasibility(cert) && cert.value < -1e3 * opt.tol) {
        out.status = NaiveStatus::infeasible;
        out.certificate = std::move(cert);
        break;
      }
    }
    // Function-value restart keeps the accelerated scheme monotone.
    if (f > f_prev) {
      theta = 1.0;
      ypt = x;
      f_prev = f;
      continue;
    }
    f_prev = f;
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double beta = (theta - 1.0) / theta_next;
    for (std::size_t c = 0; c < x.size(); ++c) ypt[c] = x[c] + beta * (x[c] - prev[c]);
    theta = theta_next;
  }
  residuals(x, r, s);
  out.residual = worst(r, s);
  out.iterations = it;
  for (const auto& m : x) out.plan.emplace_back(m);
  return out;
}

// ---------------------------------------------------------------------------
// Convex solver.

struct FullSolution {
  FullTransportPlan plan;
  double value = 0.0;
  SolverReport report;
};

namespace detail {

inline std::vector<ComplexMatrix> raw_blocks(const MatrixDensity& mu) {
  std::vector<ComplexMatrix> out;
  out.reserve(mu.size());
  for (const auto& b : mu.blocks()) out.push_back(b.matrix());
  return out;
}

inline SegmentValues to_segment(const FullTransportPlan& plan) {
  SegmentValues s;
  s.rows = plan.rows();
  s.cols = plan.cols();
  s.mass = plan.mass;
  for (const auto& b : plan.block0) s.p.push_back(b.matrix());
  for (const auto& b : plan.block1) s.q.push_back(b.matrix());
  return s;
}

inline FullTransportPlan from_segment(const SegmentValues& s, const std::vector<double>& x,
                                      const std::vector<double>& y) {
  FullTransportPlan p;
  p.source_grid = x;
  p.target_grid = y;
  p.mass = s.mass;
  for (const auto& b : s.p) p.block0.emplace_back(b);
  for (const auto& b : s.q) p.block1.emplace_back(b);
  return p;
}

inline void require_solver_inputs(const MatrixDensity& mu0, const MatrixDensity& mu1, const char* what) {
  if (mu0.dim() != mu1.dim()) throw DimensionError(std::string(what) + ": block dimension mismatch");
  mu0.require_normalized(what);
  mu1.require_normalized(what);
  mu0.require_strict_trace(what);
  mu1.require_strict_trace(what);
}

}  // namespace detail

/// Minimises sum C m + lambda ||block0 - block1||^2 / m over plans with the
/// given marginals, starting from the product plan.
inline FullSolution solve_full(const MatrixDensity& mu0, const MatrixDensity& mu1, const Eigen::MatrixXd& cost,
                               const SolverConfig& cfg) {
  detail::require_solver_inputs(mu0, mu1, "solve_full");
  if (cost.rows() != static_cast<Eigen::Index>(mu0.size()) || cost.cols() != static_cast<Eigen::Index>(mu1.size())) {
    throw DimensionError("solve_full: cost shape does not match the grids");
  }
  detail::ChainProblem pb;
  pb.n = mu0.dim();
  pb.layer_sizes = {static_cast<Eigen::Index>(mu0.size()), static_cast<Eigen::Index>(mu1.size())};
  pb.costs = {cost};
  pb.source = detail::raw_blocks(mu0);
  pb.target = detail::raw_blocks(mu1);
  pb.lambda = cfg.lambda;

  detail::ChainResult res = detail::solve_chain(std::move(pb), {detail::to_segment(product_plan(mu0, mu1))}, cfg);

  FullSolution out;
  out.plan = detail::from_segment(res.segments.front(), mu0.grid(), mu1.grid());
  out.value = transport_cost(out.plan, cost, cfg.lambda);
  out.report = res.report;
  return out;
}

inline FullSolution solve_full(const MatrixDensity& mu0, const MatrixDensity& mu1, const GroundCost& cost,
                               const SolverConfig& cfg) {
  return solve_full(mu0, mu1, cost.matrix, cfg);
}

}  // namespace mmot
