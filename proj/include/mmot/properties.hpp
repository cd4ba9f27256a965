#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mmot/errors.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/matrix_ot_full.hpp"
#include "mmot/matrix_ot_restricted.hpp"

namespace mmot {

/// Default support threshold, relative to the total plan mass.
inline constexpr double kSupportThreshold = 1e-7;

struct SupportPoint {
  Eigen::Index i = 0, j = 0;
  double x = 0.0, y = 0.0, mass = 0.0;
};

struct SupportSet {
  std::vector<SupportPoint> points;
  double threshold = 0.0;  ///< absolute mass cut actually applied
};

/// Cells with mass > threshold * (total mass), in row-major order.
inline SupportSet support_set(const Eigen::MatrixXd& mass, const std::vector<double>& x, const std::vector<double>& y,
                              double threshold = kSupportThreshold) {
  if (mass.rows() != static_cast<Eigen::Index>(x.size()) || mass.cols() != static_cast<Eigen::Index>(y.size())) {
    throw DimensionError("support_set: grid sizes do not match the plan");
  }
  SupportSet s;
  s.threshold = threshold * mass.sum();
  for (Eigen::Index i = 0; i < mass.rows(); ++i) {
    for (Eigen::Index j = 0; j < mass.cols(); ++j) {
      if (mass(i, j) > s.threshold) {
        s.points.push_back({i, j, x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)], mass(i, j)});
      }
    }
  }
  return s;
}

inline SupportSet support_set(const FullTransportPlan& plan, double threshold = kSupportThreshold) {
  return support_set(plan.mass, plan.source_grid, plan.target_grid, threshold);
}

inline SupportSet support_set(const RestrictedPlan& plan, double threshold = kSupportThreshold) {
  return support_set(plan.coupling, plan.source_grid, plan.target_grid, threshold);
}

struct MonotoneCheck {
  bool pass = true;
  double worst_area = 0.0;  ///< largest (x2 - x1)(y1 - y2) over anti-monotone pairs
  std::size_t first = 0, second = 0;  ///< indices into the support of the worst pair
};

/// Every pair with x2 > x1 and y1 > y2 must satisfy (x2 - x1)(y1 - y2) <= bound + slack.
inline MonotoneCheck check_lambda_monotone(const SupportSet& s, double bound, double slack = 1e-9) {
  MonotoneCheck r;
  const auto& p = s.points;
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t b = 0; b < p.size(); ++b) {
      if (!(p[b].x > p[a].x && p[a].y > p[b].y)) continue;
      const double area = (p[b].x - p[a].x) * (p[a].y - p[b].y);
      if (area > r.worst_area) {
        r.worst_area = area;
        r.first = a;
        r.second = b;
      }
    }
  }
  r.pass = r.worst_area <= bound + slack;
  return r;
}

/// Four corners (x_i, y_j), i, j in {1, 2}, with x1 < x2 and y2 < y1. Corner
/// (i, j) carries m_ij A_ij (x) B_ij with unit-trace PSD A_ij, B_ij. Arrays
/// are indexed [i - 1][j - 1].
struct RearrangementQuadruple {
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  std::array<std::array<double, 2>, 2> m{};
  std::array<std::array<HermitianMatrix, 2>, 2> a, b;

  double x(int i) const { return i == 0 ? x1 : x2; }
  double y(int j) const { return j == 0 ? y1 : y2; }
};

/// sum m_ij ((x_i - y_j)^2 + lambda ||A_ij - B_ij||_F^2)
inline double local_cost(const RearrangementQuadruple& q, double lambda) {
  double c = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double d = q.x(i) - q.y(j);
      if (q.m[i][j] > 0.0) c += q.m[i][j] * (d * d + lambda * frob_dist_sq(q.a[i][j], q.b[i][j]));
    }
  }
  return c;
}

/// sum_j m_ij A_ij for row i.
inline ComplexMatrix row_marginal(const RearrangementQuadruple& q, int i) {
  return q.m[i][0] * q.a[i][0].matrix() + q.m[i][1] * q.a[i][1].matrix();
}

/// sum_i m_ij B_ij for column j.
inline ComplexMatrix col_marginal(const RearrangementQuadruple& q, int j) {
  return q.m[0][j] * q.b[0][j].matrix() + q.m[1][j] * q.b[1][j].matrix();
}

struct RearrangementResult {
  RearrangementQuadruple rearranged;
  double old_cost = 0.0;
  double new_cost = 0.0;
  bool emptied_11 = false;  ///< m22 >= m11: corner (x1, y1) is emptied; otherwise (x2, y2)
};

/// Moves min(m11, m22) off the anti-monotone corners onto (x1, y2) and
/// (x2, y1), mixing orientations so that every corner marginal is kept.
inline RearrangementResult rearrange_quadruple(const RearrangementQuadruple& q, double lambda) {
  if (!(q.m[0][0] > 0.0) || !(q.m[1][1] > 0.0)) throw InvalidInput("rearrange_quadruple: m11 and m22 must be positive");
  for (const auto& row : q.m) {
    for (double v : row) {
      if (v < 0.0) throw InvalidInput("rearrange_quadruple: negative corner mass");
    }
  }
  const double m11 = q.m[0][0], m12 = q.m[0][1], m21 = q.m[1][0], m22 = q.m[1][1];
  RearrangementResult r;
  r.rearranged = q;
  auto& t = r.rearranged;
  auto mix = [](double wa, const HermitianMatrix& a, double wb, const HermitianMatrix& b) {
    return a * (wa / (wa + wb)) + b * (wb / (wa + wb));
  };
  if (m22 >= m11) {
    r.emptied_11 = true;
    t.m[0][0] = 0.0;
    t.m[0][1] = m11 + m12;
    t.m[1][0] = m11 + m21;
    t.m[1][1] = m22 - m11;
    t.a[0][1] = mix(m11, q.a[0][0], m12, q.a[0][1]);
    t.b[0][1] = mix(m11, q.b[1][1], m12, q.b[0][1]);
    t.a[1][0] = mix(m11, q.a[1][1], m21, q.a[1][0]);
    t.b[1][0] = mix(m11, q.b[0][0], m21, q.b[1][0]);
  } else {
    t.m[0][0] = m11 - m22;
    t.m[0][1] = m12 + m22;
    t.m[1][0] = m21 + m22;
    t.m[1][1] = 0.0;
    t.a[0][1] = mix(m12, q.a[0][1], m22, q.a[0][0]);
    t.b[0][1] = mix(m12, q.b[0][1], m22, q.b[1][1]);
    t.a[1][0] = mix(m21, q.a[1][0], m22, q.a[1][1]);
    t.b[1][0] = mix(m21, q.b[1][0], m22, q.b[0][0]);
  }
  r.old_cost = local_cost(q, lambda);
  r.new_cost = local_cost(t, lambda);
  return r;
}

/// Reads the quadruple at rows i1 < i2 and columns j2 < j1 of a plan, with
/// A = block0 / m and B = block1 / m (identity / n on empty cells).
inline RearrangementQuadruple quadruple_from_plan(const FullTransportPlan& plan, Eigen::Index i1, Eigen::Index i2,
                                                  Eigen::Index j1, Eigen::Index j2) {
  RearrangementQuadruple q;
  q.x1 = plan.source_grid[static_cast<std::size_t>(i1)];
  q.x2 = plan.source_grid[static_cast<std::size_t>(i2)];
  q.y1 = plan.target_grid[static_cast<std::size_t>(j1)];
  q.y2 = plan.target_grid[static_cast<std::size_t>(j2)];
  if (!(q.x1 < q.x2) || !(q.y2 < q.y1)) throw InvalidInput("quadruple_from_plan: corners must satisfy x1 < x2, y2 < y1");
  const Eigen::Index rows[2] = {i1, i2}, cols[2] = {j1, j2};
  const Eigen::Index n = plan.dim();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double m = plan.mass(rows[i], cols[j]);
      q.m[i][j] = m;
      if (m > 0.0) {
        q.a[i][j] = plan.b0(rows[i], cols[j]) * (1.0 / m);
        q.b[i][j] = plan.b1(rows[i], cols[j]) * (1.0 / m);
      } else {
        q.a[i][j] = HermitianMatrix::identity(n) * (1.0 / static_cast<double>(n));
        q.b[i][j] = q.a[i][j];
      }
    }
  }
  return q;
}

}  // namespace mmot
