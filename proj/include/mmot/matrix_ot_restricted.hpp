#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mmot/density.hpp"
#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/matrix_ot_full.hpp"
#include "mmot/problem.hpp"
#include "mmot/scalar_ot.hpp"

namespace mmot {

/// Scalar coupling of the trace densities. The full plan it stands for is
/// coupling(i, j) * (mu0_i / tr mu0_i) (x) (mu1_j / tr mu1_j).
struct RestrictedPlan {
  Eigen::MatrixXd coupling;
  std::vector<double> source_grid, target_grid;
};

/// R(i, j) = ||mu0_i / tr mu0_i - mu1_j / tr mu1_j||_F^2, always in [0, 2].
struct RotationalCost {
  Eigen::MatrixXd r;
};

inline std::vector<HermitianMatrix> unit_trace_blocks(const MatrixDensity& mu, const char* what) {
  std::vector<HermitianMatrix> out;
  out.reserve(mu.size());
  for (const auto& b : mu.blocks()) {
    const double t = b.trace();
    if (!(t > 0.0)) throw InvalidInput(std::string(what) + ": block with zero trace");
    out.push_back(b * (1.0 / t));
  }
  return out;
}

inline Eigen::MatrixXd direction_distance(const std::vector<HermitianMatrix>& a, const std::vector<HermitianMatrix>& b) {
  Eigen::MatrixXd r(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = frob_dist_sq(a[i], b[j]);
    }
  }
  return r;
}

inline RotationalCost rotational_cost(const MatrixDensity& mu0, const MatrixDensity& mu1) {
  if (mu0.dim() != mu1.dim()) throw DimensionError("rotational_cost: block dimension mismatch");
  return {direction_distance(unit_trace_blocks(mu0, "rotational_cost"), unit_trace_blocks(mu1, "rotational_cost"))};
}

struct RestrictedResult {
  double value = 0.0;    ///< d_{2,lambda}
  double squared = 0.0;  ///< LP optimum, value^2
  RestrictedPlan plan;
  DualCertificate dual;
};

/// Restricted-plan metric: square root of the transport LP between the trace
/// densities with ground cost C + lambda R.
inline RestrictedResult d2lambda(const MatrixDensity& mu0, const MatrixDensity& mu1, const Eigen::MatrixXd& cost,
                                 double lambda) {
  if (mu0.dim() != mu1.dim()) throw DimensionError("d2lambda: block dimension mismatch");
  if (!(lambda >= 0.0)) throw InvalidInput("d2lambda: lambda must be >= 0");
  mu0.require_normalized("d2lambda");
  mu1.require_normalized("d2lambda");
  if (cost.rows() != static_cast<Eigen::Index>(mu0.size()) || cost.cols() != static_cast<Eigen::Index>(mu1.size())) {
    throw DimensionError("d2lambda: cost shape does not match the grids");
  }
  const Eigen::MatrixXd total = cost + lambda * rotational_cost(mu0, mu1).r;
  LpSolution lp = discrete_ot_lp(total, mu0.trace_density(), mu1.trace_density());
  RestrictedResult out;
  out.squared = std::max(0.0, lp.value);
  out.value = std::sqrt(out.squared);
  out.plan.coupling = std::move(lp.plan.coupling);
  out.plan.source_grid = mu0.grid();
  out.plan.target_grid = mu1.grid();
  out.dual = std::move(lp.dual);
  return out;
}

inline RestrictedResult d2lambda(const MatrixDensity& mu0, const MatrixDensity& mu1, const GroundCost& cost,
                                 double lambda) {
  return d2lambda(mu0, mu1, cost.matrix, lambda);
}

/// Objective of a restricted plan, sum (C + lambda R) coupling.
inline double restricted_cost(const RestrictedPlan& plan, const MatrixDensity& mu0, const MatrixDensity& mu1,
                              const Eigen::MatrixXd& cost, double lambda) {
  return ((cost + lambda * rotational_cost(mu0, mu1).r).array() * plan.coupling.array()).sum();
}

/// The plan in (mass, block0, block1) form: block0 = coupling mu0_i / tr mu0_i,
/// block1 = coupling mu1_j / tr mu1_j.
inline FullTransportPlan to_full_plan(const RestrictedPlan& plan, const MatrixDensity& mu0, const MatrixDensity& mu1) {
  const auto u0 = unit_trace_blocks(mu0, "to_full_plan");
  const auto u1 = unit_trace_blocks(mu1, "to_full_plan");
  if (plan.coupling.rows() != static_cast<Eigen::Index>(u0.size()) ||
      plan.coupling.cols() != static_cast<Eigen::Index>(u1.size())) {
    throw DimensionError("to_full_plan: coupling shape");
  }
  auto out = FullTransportPlan::zeros(mu0.grid(), mu1.grid(), mu0.dim());
  out.mass = plan.coupling;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double m = plan.coupling(i, j);
      out.block0[out.index(i, j)] = u0[static_cast<std::size_t>(i)] * m;
      out.block1[out.index(i, j)] = u1[static_cast<std::size_t>(j)] * m;
    }
  }
  return out;
}

}  // namespace mmot
