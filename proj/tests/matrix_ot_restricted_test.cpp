#include <gtest/gtest.h>

#include <random>

#include "mmot/matrix_ot_full.hpp"
#include "mmot/matrix_ot_restricted.hpp"
#include "support.hpp"

using namespace mmot;
using testing_support::random_density;
using testing_support::random_grid;

TEST(RotationalCost, ZeroDiagonalForEqualDensities) {
  std::mt19937_64 rng(51);
  const auto mu = random_density(rng, random_grid(rng, 5), 3);
  const auto r = rotational_cost(mu, mu).r;
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_LT(r(i, i), 1e-15);
}

TEST(RotationalCost, OrthogonalDirections) {
  const MatrixDensity a({0.0}, {HermitianMatrix::diagonal({1, 0})});
  const MatrixDensity b({0.0}, {HermitianMatrix::diagonal({0, 1})});
  EXPECT_DOUBLE_EQ(rotational_cost(a, b).r(0, 0), 2.0);
}

TEST(RotationalCost, EntriesWithinBounds) {
  std::mt19937_64 rng(52);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_density(rng, random_grid(rng, 6), 2, 0.0);
    const auto b = random_density(rng, random_grid(rng, 7), 2, 0.0);
    const auto r = rotational_cost(a, b).r;
    EXPECT_GE(r.minCoeff(), 0.0);
    EXPECT_LE(r.maxCoeff(), 2.0 + 1e-12);
  }
}

TEST(D2Lambda, EqualDensities) {
  std::mt19937_64 rng(53);
  const auto mu = random_density(rng, random_grid(rng, 6), 2);
  const auto d = d2lambda(mu, mu, quadratic_cost(mu.grid(), mu.grid()), 0.2);
  EXPECT_LE(d.value, 1e-9);
  const auto& c = d.plan.coupling;
  EXPECT_LT((c - Eigen::MatrixXd(c.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(D2Lambda, SinglePoint) {
  std::mt19937_64 rng(54);
  const auto a = testing_support::unit_trace(testing_support::random_pd(rng, 2));
  const auto b = testing_support::unit_trace(testing_support::random_pd(rng, 2));
  const double lambda = 0.3;
  const auto d = d2lambda(MatrixDensity({0.0}, {a}), MatrixDensity({0.0}, {b}), Eigen::MatrixXd::Zero(1, 1), lambda);
  EXPECT_NEAR(d.value, std::sqrt(lambda * frob_dist_sq(a, b)), 1e-14);
}

TEST(D2Lambda, ZeroLambdaIsScalarW2) {
  std::mt19937_64 rng(55);
  for (int t = 0; t < 10; ++t) {
    const auto mu0 = random_density(rng, random_grid(rng, 8), 2);
    const auto mu1 = random_density(rng, random_grid(rng, 5), 2);
    const auto d = d2lambda(mu0, mu1, quadratic_cost(mu0.grid(), mu1.grid()), 0.0);
    EXPECT_NEAR(d.value, std::sqrt(w2_closed_form(mu0.trace_density(), mu1.trace_density())), 1e-9);
  }
}

TEST(D2Lambda, ReductionMatchesFullCostFormula) {
  std::mt19937_64 rng(56);
  for (int t = 0; t < 10; ++t) {
    const auto mu0 = random_density(rng, random_grid(rng, 6), 2 + t % 2);
    const auto mu1 = random_density(rng, random_grid(rng, 6), 2 + t % 2);
    const auto c = quadratic_cost(mu0.grid(), mu1.grid());
    const auto d = d2lambda(mu0, mu1, c, 0.4);
    const auto full = to_full_plan(d.plan, mu0, mu1);
    EXPECT_NEAR(transport_cost(full, c, 0.4), restricted_cost(d.plan, mu0, mu1, c, 0.4), 1e-10);
    EXPECT_NEAR(d.squared, restricted_cost(d.plan, mu0, mu1, c, 0.4), 1e-10);
    EXPECT_TRUE(check_plan(full, mu0, mu1).ok(1e-12));
  }
}

TEST(D2Lambda, NoSmallerThanFullOptimum) {
  std::mt19937_64 rng(57);
  for (int t = 0; t < 5; ++t) {
    const auto mu0 = random_density(rng, random_grid(rng, 4), 2);
    const auto mu1 = random_density(rng, random_grid(rng, 4), 2);
    const auto c = quadratic_cost(mu0.grid(), mu1.grid());
    SolverConfig cfg;
    cfg.lambda = 0.2;
    const double full = solve_full(mu0, mu1, c, cfg).value;
    EXPECT_GE(d2lambda(mu0, mu1, c, 0.2).squared, full - 1e-7);
  }
}

TEST(D2Lambda, MetricAxiomsOnSmallTriples) {
  std::mt19937_64 rng(58);
  const auto grid = testing_support::uniform_grid(8);
  const auto c = quadratic_cost(grid, grid);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_density(rng, grid, 2), b = random_density(rng, grid, 2), m = random_density(rng, grid, 2);
    const double ab = d2lambda(a, b, c, 0.1).value, ba = d2lambda(b, a, c, 0.1).value;
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_LE(ab, d2lambda(a, m, c, 0.1).value + d2lambda(m, b, c, 0.1).value + 1e-7);
    EXPECT_LE(d2lambda(a, a, c, 0.1).value, 1e-9);
    EXPECT_GT(ab, 1e-6);
  }
}

TEST(D2Lambda, InputErrors) {
  std::mt19937_64 rng(59);
  const auto mu = random_density(rng, random_grid(rng, 3), 2);
  const auto c = quadratic_cost(mu.grid(), mu.grid());
  EXPECT_THROW(d2lambda(mu, mu, c, -1.0), InvalidInput);
  EXPECT_THROW(d2lambda(mu, random_density(rng, random_grid(rng, 3), 3), c, 0.1), DimensionError);
  const MatrixDensity zero_trace(mu.grid(), {mu.block(0) * 2.0, mu.block(1), HermitianMatrix(2)});
  EXPECT_THROW(d2lambda(normalize(zero_trace), mu, c, 0.1), InvalidInput);
}
