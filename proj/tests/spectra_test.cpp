#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "mmot/spectra.hpp"
#include "support.hpp"

using namespace mmot;
using std::numbers::pi;

TEST(ArMagnitude, PureDelayFactorIsFlat) {
  RationalSpectrumSpec s;
  s.factors = {QuadraticFactor{0.0, 0.0}};
  for (double t : {0.0, 0.3, 1.0, 2.5, pi}) EXPECT_NEAR(eval_ar_magnitude(s, t), 1.0, 1e-14);
}

TEST(ArMagnitude, DirectPolynomialEvaluation) {
  const double t = pi / 4;
  const std::complex<double> z = std::exp(std::complex<double>(0.0, t));
  const double r1 = 0.9, w1 = pi / 4, r2 = 0.7, w2 = pi / 3;
  // (z - p)(z - conj p) for each pole pair.
  const auto p1 = std::polar(r1, w1), p2 = std::polar(r2, w2);
  const std::complex<double> a = (z - p1) * (z - std::conj(p1)) * (z - p2) * (z - std::conj(p2));
  EXPECT_NEAR(eval_ar_magnitude(paper_source_spec(), t), 1.0 / std::norm(a), 1e-10);
}

TEST(ArMagnitude, ConjugateSymmetric) {
  for (double t : {0.1, 0.7, 2.0}) {
    EXPECT_NEAR(eval_ar_magnitude(paper_target_spec(), t), eval_ar_magnitude(paper_target_spec(), -t), 1e-12);
  }
}

TEST(ArMagnitude, PositiveAndBounded) {
  for (double t : frequency_grid(200)) {
    const double v = eval_ar_magnitude(paper_source_spec(), t);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1e4);
  }
}

TEST(ArMagnitude, UnstableFactorRejected) {
  RationalSpectrumSpec s;
  s.factors = {QuadraticFactor::pole_pair(1.2, 0.5)};
  EXPECT_THROW(eval_ar_magnitude(s, 0.0), InvalidInput);
}

TEST(Spectrum, SourceMatchesHandCongruence) {
  const double t = pi / 4;
  const double a = eval_ar_magnitude(paper_source_spec(), t);
  const std::complex<double> g = 0.2 * std::exp(std::complex<double>(0.0, -t));
  const HermitianMatrix s = eval_spectrum(paper_source_spec(), t);
  // [[1, 0], [g, 1]] diag(a, 0.01) [[1, conj g], [0, 1]]
  EXPECT_NEAR(std::abs(s(0, 0) - a), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s(0, 1) - a * std::conj(g)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s(1, 0) - g * a), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s(1, 1) - (std::norm(g) * a + 0.01)), 0.0, 1e-12);
}

TEST(Spectrum, TargetOffDiagonalIsReal) {
  for (double t : frequency_grid(33)) {
    const HermitianMatrix s = eval_spectrum(paper_target_spec(), t);
    EXPECT_EQ(s(0, 1).imag(), 0.0);
    EXPECT_EQ(s(1, 0).imag(), 0.0);
  }
}

TEST(ExamplePair, BlocksHermitianPsdAndNormalized) {
  const auto pair = build_paper_pair(frequency_grid(64));
  for (const auto* mu : {&pair.mu0, &pair.mu1}) {
    EXPECT_NEAR(mu->total_mass(), 1.0, 1e-12);
    for (const auto& b : mu->blocks()) {
      EXPECT_LT((b.matrix() - b.matrix().adjoint()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GE(b.min_eigenvalue(), -1e-10);
    }
  }
}

TEST(ExamplePair, PeakLocations) {
  for (std::size_t points : {16u, 64u}) {
    const auto grid = frequency_grid(points);
    const double step = grid[1] - grid[0];
    const auto pair = build_paper_pair(grid);
    EXPECT_LE(std::abs(grid[channel_argmax(pair.mu0, 0)] - pi / 4), step + 1e-12) << points;
    EXPECT_LE(std::abs(grid[channel_argmax(pair.mu1, 1)] - pi / 6), step + 1e-12) << points;
  }
}

TEST(ExamplePair, RejectsGridOutsideRange) {
  EXPECT_THROW(build_paper_pair({0.0, 4.0}), InvalidInput);
  EXPECT_THROW(build_paper_pair({}), InvalidInput);
}

TEST(Normalize, Cases) {
  std::mt19937_64 rng(61);
  const auto mu = testing_support::random_density(rng, testing_support::random_grid(rng, 5), 2);
  EXPECT_LT(max_block_diff(normalize(mu), mu), 1e-12);

  std::vector<HermitianMatrix> doubled;
  for (const auto& b : mu.blocks()) doubled.push_back(b * 2.0);
  EXPECT_LT(max_block_diff(normalize(MatrixDensity(mu.grid(), doubled)), mu), 1e-15);

  std::vector<HermitianMatrix> raw;
  for (int k = 0; k < 9; ++k) raw.push_back(testing_support::random_pd(rng, 3));
  EXPECT_NEAR(normalize(MatrixDensity(testing_support::uniform_grid(9), raw)).total_mass(), 1.0, 1e-12);

  EXPECT_THROW(normalize(MatrixDensity({0.0}, {HermitianMatrix(2)})), InvalidInput);
}
