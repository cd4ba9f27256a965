#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mmot/errors.hpp"

namespace mmot {

/// Ground cost c(x, y) between two grids.
struct GroundCost {
  enum class Kind { quadratic_linear, quadratic_circular };

  Kind kind = Kind::quadratic_linear;
  double period = 0.0;  ///< only meaningful for quadratic_circular
  Eigen::MatrixXd matrix;

  /// C(i,j) = (x_i - y_j)^2. This is the default cost.
  static GroundCost quadratic(const std::vector<double>& x, const std::vector<double>& y) {
    return build(Kind::quadratic_linear, 0.0, x, y);
  }

  /// C(i,j) = min(|x_i - y_j|, P - |x_i - y_j|)^2 for period P.
  static GroundCost circular(const std::vector<double>& x, const std::vector<double>& y,
                             double period) {
    if (!(period > 0.0)) throw InvalidInput("GroundCost: period must be positive");
    return build(Kind::quadratic_circular, period, x, y);
  }

  static GroundCost make(Kind kind, const std::vector<double>& x, const std::vector<double>& y,
                         double period = 0.0) {
    return kind == Kind::quadratic_linear ? quadratic(x, y) : circular(x, y, period);
  }

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return matrix(i, j); }

 private:
  static GroundCost build(Kind kind, double period, const std::vector<double>& x,
                          const std::vector<double>& y) {
    GroundCost c;
    c.kind = kind;
    c.period = period;
    c.matrix.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < y.size(); ++j) {
        double d = std::abs(x[i] - y[j]);
        if (kind == Kind::quadratic_circular) {
          d = std::fmod(d, period);
          d = std::min(d, period - d);
        }
        c.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d * d;
      }
    }
    return c;
  }
};

inline const char* to_string(GroundCost::Kind k) {
  return k == GroundCost::Kind::quadratic_linear ? "quadratic-linear" : "quadratic-circular";
}

/// Parameters shared by the full, restricted and geodesic solvers.
/// Engine for the full-plan programs. automatic picks the barrier method when
/// every endpoint block is positive definite and the splitting otherwise.
enum class SolverMethod { automatic, barrier, splitting };

inline const char* to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::barrier: return "barrier";
    case SolverMethod::splitting: return "splitting";
    default: return "automatic";
  }
}

inline SolverMethod parse_method(const std::string& s) {
  if (s == "automatic") return SolverMethod::automatic;
  if (s == "barrier") return SolverMethod::barrier;
  if (s == "splitting") return SolverMethod::splitting;
  throw InvalidInput("unknown solver method '" + s + "'");
}

struct SolverConfig {
  double lambda = 0.1;          ///< rotation weight
  SolverMethod method = SolverMethod::automatic;
  double tol_primal = 1e-7;     ///< max marginal residual (Frobenius, per block)
  double tol_dual = 1e-7;       ///< splitting dual residual (infinity norm); barrier duality gap
  long max_iter = 200000;
  double rho = 0.0;             ///< initial penalty; 0 selects from problem scale
  double relaxation = 1.6;      ///< over-relaxation in (0, 2)
  int adapt_interval = 50;      ///< iterations between penalty updates (0 disables)
  int check_interval = 25;      ///< iterations between convergence checks
  double mass_floor = 1e-12;    ///< cells below this mass are emptied on output
  int threads = 1;
  int restarts = 1;             ///< restricted geodesic: initializations tried
  std::uint64_t seed = 0;       ///< seeds restart perturbations only
  double bcd_tol = 1e-12;       ///< restricted geodesic: relative objective decrease
  long bcd_max_iter = 500;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("SolverConfig: lambda must be >= 0");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0)) throw InvalidInput("SolverConfig: tolerances must be positive");
    if (max_iter <= 0) throw InvalidInput("SolverConfig: max_iter must be positive");
    if (!(relaxation > 0.0 && relaxation < 2.0)) throw InvalidInput("SolverConfig: relaxation must lie in (0, 2)");
    if (rho < 0.0) throw InvalidInput("SolverConfig: rho must be >= 0");
    if (check_interval <= 0) throw InvalidInput("SolverConfig: check_interval must be positive");
    if (!(mass_floor >= 0.0)) throw InvalidInput("SolverConfig: mass_floor must be >= 0");
    if (threads <= 0 || restarts <= 0) throw InvalidInput("SolverConfig: threads and restarts must be positive");
  }
};

/// Convergence diagnostics of an iterative solve.
struct SolverReport {
  SolverMethod method = SolverMethod::automatic;  ///< engine actually used
  bool converged = false;
  long iterations = 0;           ///< splitting iterations or Newton steps
  double primal_residual = 0.0;  ///< max marginal residual of the returned plan
  double dual_residual = 0.0;    ///< splitting dual residual, or the barrier duality gap bound
  double rho = 0.0;              ///< final penalty (splitting) or barrier weight
  double seconds = 0.0;
  int restarts = 1;
};

}  // namespace mmot
