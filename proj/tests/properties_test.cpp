#include <gtest/gtest.h>

#include <random>

#include "mmot/properties.hpp"
#include "support.hpp"

using namespace mmot;
using testing_support::random_density;
using testing_support::random_grid;

namespace {

HermitianMatrix random_direction(std::mt19937_64& rng) {
  return testing_support::unit_trace(testing_support::random_psd_rank(rng, 2, 1 + rng() % 2));
}

RearrangementQuadruple random_quadruple(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RearrangementQuadruple q;
  q.x1 = u(rng);
  q.x2 = q.x1 + u(rng);
  q.y2 = u(rng);
  q.y1 = q.y2 + u(rng);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      q.m[i][j] = (i == j || u(rng) < 0.5) ? 0.05 + u(rng) : 0.0;
      q.a[i][j] = random_direction(rng);
      q.b[i][j] = random_direction(rng);
    }
  }
  return q;
}

}  // namespace

TEST(SupportSet, DiagonalPlan) {
  std::mt19937_64 rng(71);
  const auto mu = random_density(rng, random_grid(rng, 5), 2);
  const auto s = support_set(monotone_map(mu.trace_density(), mu.trace_density()).coupling, mu.grid(), mu.grid());
  ASSERT_EQ(s.points.size(), 5u);
  for (const auto& p : s.points) EXPECT_EQ(p.x, p.y);
}

TEST(SupportSet, ProductPlanFillsEveryCell) {
  std::mt19937_64 rng(72);
  const auto mu0 = random_density(rng, random_grid(rng, 4), 2);
  const auto mu1 = random_density(rng, random_grid(rng, 6), 2);
  EXPECT_EQ(support_set(product_plan(mu0, mu1)).points.size(), 24u);
}

TEST(SupportSet, CountMatchesScan) {
  std::mt19937_64 rng(73);
  const auto mu0 = random_density(rng, random_grid(rng, 6), 2);
  const auto mu1 = random_density(rng, random_grid(rng, 6), 2);
  SolverConfig cfg;
  cfg.lambda = 0.05;
  const auto plan = solve_full(mu0, mu1, quadratic_cost(mu0.grid(), mu1.grid()), cfg).plan;
  std::size_t count = 0;
  for (Eigen::Index k = 0; k < plan.mass.size(); ++k) count += plan.mass(k) > 1e-7 * plan.mass.sum() ? 1 : 0;
  EXPECT_EQ(support_set(plan).points.size(), count);
}

TEST(LambdaMonotone, ScalarMonotoneMapPassesWithZeroBound) {
  std::mt19937_64 rng(74);
  const auto mu0 = random_density(rng, random_grid(rng, 9), 1);
  const auto mu1 = random_density(rng, random_grid(rng, 7), 1);
  const auto c = monotone_map(mu0.trace_density(), mu1.trace_density()).coupling;
  EXPECT_TRUE(check_lambda_monotone(support_set(c, mu0.grid(), mu1.grid()), 0.0).pass);
}

TEST(LambdaMonotone, CrossingPairReportsArea) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 1) = 0.5;
  m(1, 0) = 0.5;
  const auto r = check_lambda_monotone(support_set(m, {0.0, 1.0}, {0.0, 1.0}), 0.5);
  EXPECT_FALSE(r.pass);
  EXPECT_DOUBLE_EQ(r.worst_area, 1.0);
}

TEST(Rearrangement, AlignedOrientationsGainTwiceTheArea) {
  RearrangementQuadruple q;
  q.x1 = 0.1, q.x2 = 0.7, q.y1 = 0.9, q.y2 = 0.2;
  q.m = {{{0.3, 0.0}, {0.0, 0.5}}};
  const auto d = HermitianMatrix::diagonal({0.6, 0.4});
  for (auto& row : q.a) row = {d, d};
  q.b = q.a;
  const auto r = rearrange_quadruple(q, 0.05);
  EXPECT_NEAR(r.new_cost - r.old_cost, -2.0 * 0.3 * (q.x2 - q.x1) * (q.y1 - q.y2), 1e-14);
}

TEST(Rearrangement, DegenerateRectangleChangesNothing) {
  std::mt19937_64 rng(75);
  auto q = random_quadruple(rng);
  q.x2 = q.x1;
  const auto d = random_direction(rng);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) q.a[i][j] = q.b[i][j] = d;
  }
  const auto r = rearrange_quadruple(q, 0.1);
  EXPECT_NEAR(r.new_cost, r.old_cost, 1e-14);
}

TEST(Rearrangement, StrictGainBeyondFourLambda) {
  std::mt19937_64 rng(76);
  int checked = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto q = random_quadruple(rng);
    const double lambda = 0.01 + 0.2 * std::uniform_real_distribution<double>(0, 1)(rng);
    if (!((q.x2 - q.x1) * (q.y1 - q.y2) > 4 * lambda)) continue;
    ++checked;
    const auto r = rearrange_quadruple(q, lambda);
    EXPECT_LT(r.new_cost, r.old_cost);
  }
  EXPECT_GT(checked, 100);
}

TEST(Rearrangement, KeepsCornerMarginals) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 200; ++t) {
    const auto q = random_quadruple(rng);
    const auto r = rearrange_quadruple(q, 0.1).rearranged;
    for (int k = 0; k < 2; ++k) {
      EXPECT_LT((row_marginal(q, k) - row_marginal(r, k)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((col_marginal(q, k) - col_marginal(r, k)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Rearrangement, RejectsEmptyDiagonalCorner) {
  std::mt19937_64 rng(78);
  auto q = random_quadruple(rng);
  q.m[1][1] = 0.0;
  EXPECT_THROW(rearrange_quadruple(q, 0.1), InvalidInput);
}
