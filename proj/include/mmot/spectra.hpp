#pragma once

// Matrix-valued power spectra on a frequency grid. normalize() lives in
// density.hpp and is available through this header.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "mmot/density.hpp"
#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"

namespace mmot {

/// Real quadratic factor z^2 + b z + c.
struct QuadraticFactor {
  double b = 0.0;
  double c = 0.0;

  Complex operator()(Complex z) const { return z * z + b * z + c; }

  /// Larger root modulus.
  double max_root_modulus() const {
    const Complex disc = std::sqrt(Complex(b * b - 4.0 * c, 0.0));
    return std::max(std::abs((-b + disc) / 2.0), std::abs((-b - disc) / 2.0));
  }

  /// Factor with a conjugate root pair at radius r, angle w.
  static QuadraticFactor pole_pair(double radius, double angle) {
    return {-2.0 * radius * std::cos(angle), radius * radius};
  }
};

/// Two-channel spectrum L(theta) diag(d_0, d_1) L(theta)^* where one diagonal
/// slot is 1/|a(e^{j theta})|^2 and the other a constant floor.
struct RationalSpectrumSpec {
  enum class Shaping {
    lower_phase,  ///< L = [[1, 0], [g e^{-j theta}, 1]]
    upper_real,   ///< L = [[1, g], [0, 1]]
  };

  std::vector<QuadraticFactor> factors;
  int ar_channel = 0;
  double floor = 0.01;
  Shaping shaping = Shaping::lower_phase;
  double gain = 0.2;

  bool is_stable() const {
    for (const auto& f : factors) {
      if (!(std::abs(f.c) < 1.0) || !(f.max_root_modulus() < 1.0)) return false;
    }
    return true;
  }
};

/// 1 / |a(e^{j theta})|^2 for a = product of the quadratic factors.
inline double eval_ar_magnitude(const RationalSpectrumSpec& spec, double theta) {
  if (!spec.is_stable()) throw InvalidInput("eval_ar_magnitude: factor with a root on or outside the unit circle");
  const Complex z = std::polar(1.0, theta);
  Complex a(1.0, 0.0);
  for (const auto& f : spec.factors) a *= f(z);
  return 1.0 / std::norm(a);
}

inline HermitianMatrix eval_spectrum(const RationalSpectrumSpec& spec, double theta) {
  ComplexMatrix l = ComplexMatrix::Identity(2, 2);
  if (spec.shaping == RationalSpectrumSpec::Shaping::lower_phase) {
    l(1, 0) = spec.gain * std::polar(1.0, -theta);
  } else {
    l(0, 1) = spec.gain;
  }
  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  const int other = 1 - spec.ar_channel;
  d(spec.ar_channel, spec.ar_channel) = eval_ar_magnitude(spec, theta);
  d(other, other) = spec.floor;
  return HermitianMatrix(ComplexMatrix(l * d * l.adjoint()));
}

inline RationalSpectrumSpec paper_source_spec() {
  RationalSpectrumSpec s;
  s.factors = {QuadraticFactor::pole_pair(0.9, std::numbers::pi / 4.0),
               QuadraticFactor::pole_pair(0.7, std::numbers::pi / 3.0)};
  s.ar_channel = 0;
  s.shaping = RationalSpectrumSpec::Shaping::lower_phase;
  return s;
}

inline RationalSpectrumSpec paper_target_spec() {
  RationalSpectrumSpec s;
  s.factors = {QuadraticFactor::pole_pair(0.9, std::numbers::pi / 6.0),
               QuadraticFactor::pole_pair(0.75, 2.0 * std::numbers::pi / 15.0)};
  s.ar_channel = 1;
  s.shaping = RationalSpectrumSpec::Shaping::upper_real;
  return s;
}

/// Uniform grid of `points` values on [0, pi], endpoints included.
inline std::vector<double> frequency_grid(std::size_t points) {
  if (points == 0) throw InvalidInput("frequency_grid: need at least one point");
  if (points == 1) return {0.0};
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) {
    g[k] = std::numbers::pi * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return g;
}

inline MatrixDensity sample_spectrum(const RationalSpectrumSpec& spec, const std::vector<double>& grid) {
  std::vector<HermitianMatrix> blocks;
  blocks.reserve(grid.size());
  for (double t : grid) blocks.push_back(eval_spectrum(spec, t));
  return normalize(MatrixDensity(grid, std::move(blocks)));
}

struct DensityPair {
  MatrixDensity mu0, mu1;
};

/// The two-channel example pair sampled on `grid` and normalized to unit mass.
inline DensityPair build_paper_pair(const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidInput("build_paper_pair: empty grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0.0 || grid[k] > std::numbers::pi) throw InvalidInput("build_paper_pair: grid must lie in [0, pi]");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw InvalidInput("build_paper_pair: grid must be increasing");
  }
  return {sample_spectrum(paper_source_spec(), grid), sample_spectrum(paper_target_spec(), grid)};
}

/// Two-point pair with no PSD joint field M_ij matching both marginals:
/// mu0 = diag(1/2, 0), diag(0, 1/2); mu1 = (1/4)[[1, -1], [-1, 1]], (1/4)[[1, 1], [1, 1]].
inline DensityPair naive_counterexample(double x1 = 0.0, double x2 = 1.0) {
  ComplexMatrix minus(2, 2), plus(2, 2);
  minus << 0.25, -0.25, -0.25, 0.25;
  plus << 0.25, 0.25, 0.25, 0.25;
  return {MatrixDensity({x1, x2}, {HermitianMatrix::diagonal({0.5, 0.0}), HermitianMatrix::diagonal({0.0, 0.5})}),
          MatrixDensity({x1, x2}, {HermitianMatrix(minus), HermitianMatrix(plus)})};
}

/// Grid index where |mu(channel, channel)| is largest.
inline std::size_t channel_argmax(const MatrixDensity& mu, Eigen::Index channel) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < mu.size(); ++k) {
    if (std::abs(mu.block(k)(channel, channel)) > std::abs(mu.block(best)(channel, channel))) best = k;
  }
  return best;
}

/// Sum over the grid of mu(channel, channel).
inline double channel_mass(const MatrixDensity& mu, Eigen::Index channel) {
  double s = 0.0;
  for (const auto& b : mu.blocks()) s += b(channel, channel).real();
  return s;
}

}  // namespace mmot
