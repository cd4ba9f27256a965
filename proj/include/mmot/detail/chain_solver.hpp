#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>
#include <vector>

#include "mmot/detail/chain_barrier.hpp"
#include "mmot/detail/chain_splitting.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/problem.hpp"

namespace mmot::detail {

/// Every endpoint block positive definite, relative to its trace.
inline bool endpoints_definite(const ChainProblem& pb) {
  auto definite = [](const std::vector<ComplexMatrix>& blocks) {
    for (const auto& b : blocks) {
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(b, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues()(0) > 1e-10 * b.trace().real())) return false;
    }
    return true;
  };
  return definite(pb.source) && definite(pb.target);
}

inline SolverMethod resolve_method(const ChainProblem& pb, SolverMethod requested) {
  if (requested != SolverMethod::automatic) return requested;
  return endpoints_definite(pb) ? SolverMethod::barrier : SolverMethod::splitting;
}

/// Runs the selected engine from `start`. The barrier start must be strictly
/// interior; the splitting accepts any start.
inline ChainResult solve_chain(ChainProblem pb, const std::vector<SegmentValues>& start, const SolverConfig& cfg,
                               std::function<void(long, double, double, double)> monitor = {}) {
  const SolverMethod method = resolve_method(pb, cfg.method);
  ChainResult res;
  if (method == SolverMethod::barrier) {
    ChainBarrier solver(std::move(pb), cfg);
    solver.warm_start(start);
    if (monitor) solver.set_monitor(std::move(monitor));
    res = solver.solve();
  } else {
    ChainSplitting solver(std::move(pb), cfg);
    solver.warm_start(start);
    if (monitor) solver.set_monitor(std::move(monitor));
    res = solver.solve();
  }
  res.report.method = method;
  return res;
}

}  // namespace mmot::detail
