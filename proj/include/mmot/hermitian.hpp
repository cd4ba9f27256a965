#pragma once

// Dense complex Hermitian matrices, Kronecker products and partial traces.
//
// Block convention for an n^2 x n^2 matrix rho: block (k,l) occupies rows
// k*n .. k*n+n-1 and columns l*n .. l*n+n-1 (zero based), so that
// kron(a, b) has block (k,l) equal to a(k,l) * b.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <string>
#include <vector>

#include "mmot/errors.hpp"

namespace mmot {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// Tolerance used when comparing Hermitian entries and real traces.
inline constexpr double kHermitianTolerance = 1e-12;
/// Asymmetry accepted by the strict construction mode.
inline constexpr double kStrictAsymmetry = 1e-9;
/// Eigenvalues in [-kPsdTolerance, 0) count as zero in PSD checks.
inline constexpr double kPsdTolerance = 1e-10;

enum class Validation {
  symmetrize,  ///< replace H by (H + H*)/2
  strict,      ///< reject asymmetry above kStrictAsymmetry, then symmetrize
};

namespace detail {

inline double max_asymmetry(const ComplexMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& m) {
  return (m + m.adjoint()) * 0.5;
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix is not square");
  }
}

}  // namespace detail

/// An n x n complex Hermitian matrix. Construction symmetrizes the input.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  /// Zero matrix of size n.
  explicit HermitianMatrix(Eigen::Index n) : m_(ComplexMatrix::Zero(n, n)) {}

  explicit HermitianMatrix(const ComplexMatrix& m,
                           Validation mode = Validation::symmetrize) {
    detail::require_square(m, "HermitianMatrix");
    if (mode == Validation::strict) {
      const double asym = m.size() ? detail::max_asymmetry(m) : 0.0;
      if (asym > kStrictAsymmetry) {
        throw InvalidInput("HermitianMatrix: asymmetry " + std::to_string(asym) +
                           " exceeds strict tolerance");
      }
    }
    m_ = detail::hermitian_part(m);
  }

  static HermitianMatrix identity(Eigen::Index n) {
    HermitianMatrix h;
    h.m_ = ComplexMatrix::Identity(n, n);
    return h;
  }

  static HermitianMatrix diagonal(std::initializer_list<double> values) {
    HermitianMatrix h(static_cast<Eigen::Index>(values.size()));
    Eigen::Index k = 0;
    for (double v : values) {
      h.m_(k, k) = v;
      ++k;
    }
    return h;
  }

  static HermitianMatrix diagonal(const Eigen::VectorXd& values) {
    HermitianMatrix h(values.size());
    h.m_.diagonal() = values.cast<Complex>();
    return h;
  }

  Eigen::Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  double trace() const { return m_.trace().real(); }

  /// Eigenvalues in ascending order.
  Eigen::VectorXd eigenvalues() const {
    if (dim() == 0) return {};
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      throw NumericalError("eigenvalue computation did not converge");
    }
    return es.eigenvalues();
  }

  double min_eigenvalue() const { return dim() ? eigenvalues()(0) : 0.0; }

  bool is_psd(double tol = kPsdTolerance) const { return min_eigenvalue() >= -tol; }

  HermitianMatrix& operator+=(const HermitianMatrix& o) {
    require_same_dim(o);
    m_ += o.m_;
    return *this;
  }
  HermitianMatrix& operator-=(const HermitianMatrix& o) {
    require_same_dim(o);
    m_ -= o.m_;
    return *this;
  }
  HermitianMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }

  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

 private:
  void require_same_dim(const HermitianMatrix& o) const {
    if (o.dim() != dim()) throw DimensionError("HermitianMatrix: dimension mismatch");
  }

  ComplexMatrix m_;
};

/// Sum of squared magnitudes of the entry differences, ||a - b||_F^2.
inline double frob_dist_sq(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("frob_dist_sq: dimension mismatch");
  return (a.matrix() - b.matrix()).squaredNorm();
}

/// Largest entrywise deviation, used by tests and validators.
inline double max_abs_diff(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("max_abs_diff: dimension mismatch");
  if (a.dim() == 0) return 0.0;
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to 0.
inline HermitianMatrix psd_project(const HermitianMatrix& h) {
  if (h.dim() == 0) return h;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.matrix());
  if (es.info() != Eigen::Success) {
    throw NumericalError("psd_project: eigendecomposition did not converge");
  }
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  const ComplexMatrix& v = es.eigenvectors();
  return HermitianMatrix(v * clipped.cast<Complex>().asDiagonal() * v.adjoint());
}

/// An n^2 x n^2 Hermitian matrix viewed as an n x n array of n x n blocks.
class BigMatrix {
 public:
  BigMatrix() = default;

  BigMatrix(const ComplexMatrix& m, Eigen::Index block_dim,
            Validation mode = Validation::symmetrize)
      : block_dim_(block_dim) {
    detail::require_square(m, "BigMatrix");
    if (block_dim * block_dim != m.rows()) {
      throw DimensionError("BigMatrix: dimension " + std::to_string(m.rows()) +
                           " is not the square of block dimension " +
                           std::to_string(block_dim));
    }
    if (mode == Validation::strict && m.size() && detail::max_asymmetry(m) > kStrictAsymmetry) {
      throw InvalidInput("BigMatrix: asymmetry exceeds strict tolerance");
    }
    m_ = detail::hermitian_part(m);
  }

  /// Infers the block dimension; fails if the size is not a perfect square.
  explicit BigMatrix(const ComplexMatrix& m)
      : BigMatrix(m, infer_block_dim(m.rows())) {}

  static BigMatrix zero(Eigen::Index block_dim) {
    BigMatrix b;
    b.block_dim_ = block_dim;
    b.m_ = ComplexMatrix::Zero(block_dim * block_dim, block_dim * block_dim);
    return b;
  }

  Eigen::Index dim() const { return m_.rows(); }
  Eigen::Index block_dim() const { return block_dim_; }
  const ComplexMatrix& matrix() const { return m_; }
  double trace() const { return m_.trace().real(); }

  auto block(Eigen::Index k, Eigen::Index l) const {
    return m_.block(k * block_dim_, l * block_dim_, block_dim_, block_dim_);
  }

  double min_eigenvalue() const {
    if (dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation did not converge");
    return es.eigenvalues()(0);
  }

 private:
  static Eigen::Index infer_block_dim(Eigen::Index size) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(size))));
    if (n * n != size) {
      throw DimensionError("BigMatrix: dimension " + std::to_string(size) +
                           " is not a perfect square");
    }
    return n;
  }

  ComplexMatrix m_;
  Eigen::Index block_dim_ = 0;
};

/// Kronecker product; block (k,l) of the result is a(k,l) * b.
inline BigMatrix kron(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("kron: operands must share dimension n");
  const Eigen::Index n = a.dim();
  ComplexMatrix out(n * n, n * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) {
      out.block(k * n, l * n, n, n) = a(k, l) * b.matrix();
    }
  }
  return BigMatrix(out, n);
}

/// tr_1: entry (k,l) is the trace of block (k,l).
inline HermitianMatrix partial_trace_1(const BigMatrix& rho) {
  const Eigen::Index n = rho.block_dim();
  ComplexMatrix out(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) out(k, l) = rho.block(k, l).trace();
  }
  return HermitianMatrix(out);
}

/// tr_0: entry (i,j) is the sum over k of block(k,k)(i,j).
inline HermitianMatrix partial_trace_0(const BigMatrix& rho) {
  const Eigen::Index n = rho.block_dim();
  ComplexMatrix out = ComplexMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) out += rho.block(k, k);
  return HermitianMatrix(out);
}

namespace detail {

// Orthonormal real coordinates of an n x n Hermitian matrix: the n diagonal
// entries followed by sqrt(2)*Re and sqrt(2)*Im of each strictly upper
// entry. The Euclidean inner product of coordinates is the Frobenius inner
// product, and the trace is the sum of the first n coordinates.
inline Eigen::Index coord_count(Eigen::Index n) { return n * n; }

inline void to_coords(const ComplexMatrix& h, double* out) {
  const Eigen::Index n = h.rows();
  Eigen::Index c = n;
  for (Eigen::Index k = 0; k < n; ++k) out[k] = h(k, k).real();
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = k + 1; l < n; ++l) {
      out[c++] = std::sqrt(2.0) * h(k, l).real();
      out[c++] = std::sqrt(2.0) * h(k, l).imag();
    }
  }
}

inline ComplexMatrix from_coords(const double* in, Eigen::Index n) {
  ComplexMatrix h(n, n);
  Eigen::Index c = n;
  for (Eigen::Index k = 0; k < n; ++k) h(k, k) = in[k];
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = k + 1; l < n; ++l) {
      const Complex v(s * in[c], s * in[c + 1]);
      h(k, l) = v;
      h(l, k) = std::conj(v);
      c += 2;
    }
  }
  return h;
}

inline double coords_trace(const double* c, Eigen::Index n) {
  double t = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) t += c[k];
  return t;
}

// In-place PSD projection in coordinates. n = 1 and n = 2 use closed forms.
inline void project_psd_coords(double* c, Eigen::Index n) {
  if (n == 1) {
    c[0] = std::max(c[0], 0.0);
    return;
  }
  if (n == 2) {
    const double a = c[0], d = c[1];
    const double b2 = 0.5 * (c[2] * c[2] + c[3] * c[3]);
    const double mid = 0.5 * (a + d);
    const double half = 0.5 * (a - d);
    const double rad = std::sqrt(half * half + b2);
    const double lo = mid - rad, hi = mid + rad;
    if (lo >= 0.0) return;
    if (hi <= 0.0) {
      c[0] = c[1] = c[2] = c[3] = 0.0;
      return;
    }
    // hi * (H - lo I) / (hi - lo): projector onto the top eigenvector.
    const double s = hi / (2.0 * rad);
    c[0] = s * (a - lo);
    c[1] = s * (d - lo);
    c[2] *= s;
    c[3] *= s;
    return;
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(from_coords(c, n));
  if (es.info() != Eigen::Success) throw NumericalError("PSD projection did not converge");
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  const ComplexMatrix& v = es.eigenvectors();
  to_coords(v * clipped.cast<Complex>().asDiagonal() * v.adjoint(), c);
}

// Threshold tau with sum_i max(e_i - tau, 0) = m for eigenvalues sorted in
// decreasing order and m > 0.
inline double simplex_threshold(const Eigen::VectorXd& e_desc, double m) {
  const Eigen::Index n = e_desc.size();
  double partial = 0.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    partial += e_desc(k - 1);
    const double tau = (partial - m) / static_cast<double>(k);
    if (k == n || tau >= e_desc(k)) return tau;
  }
  return (partial - m) / static_cast<double>(n);
}

// Masses at which the active set of simplex_threshold changes.
inline void simplex_breakpoints(const Eigen::VectorXd& e_desc, std::vector<double>& out) {
  double partial = 0.0;
  for (Eigen::Index k = 1; k < e_desc.size(); ++k) {
    partial += e_desc(k - 1);
    const double b = partial - static_cast<double>(k) * e_desc(k);
    if (b > 0.0) out.push_back(b);
  }
}

// Projection of (P, Q, m) onto {P, Q PSD, tr P = tr Q = m}, in place on
// 2h + 1 coordinates. For fixed m each block's eigenvalues go to the scaled
// simplex; the optimal m solves a strictly increasing piecewise-linear
// equation, located exactly through its breakpoints.
inline void project_trace_coupled(double* c, Eigen::Index n) {
  const Eigen::Index h = coord_count(n);
  double& m = c[2 * h];
  if (n == 1) {
    m = std::max(0.0, (c[0] + c[1] + m) / 3.0);
    c[0] = c[1] = m;
    return;
  }
  // Spectra in decreasing order; n = 2 uses the closed form mid +- rad.
  Eigen::VectorXd ev_p(n), ev_q(n);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> ep, eq;
  double mid_p = 0.0, rad_p = 0.0, mid_q = 0.0, rad_q = 0.0;
  if (n == 2) {
    auto spectrum = [](const double* v, double& mid, double& rad, Eigen::VectorXd& ev) {
      mid = 0.5 * (v[0] + v[1]);
      const double half = 0.5 * (v[0] - v[1]);
      rad = std::sqrt(half * half + 0.5 * (v[2] * v[2] + v[3] * v[3]));
      ev << mid + rad, mid - rad;
    };
    spectrum(c, mid_p, rad_p, ev_p);
    spectrum(c + h, mid_q, rad_q, ev_q);
  } else {
    ep.compute(from_coords(c, n));
    eq.compute(from_coords(c + h, n));
    if (ep.info() != Eigen::Success || eq.info() != Eigen::Success) {
      throw NumericalError("trace-coupled projection did not converge");
    }
    ev_p = ep.eigenvalues().reverse();
    ev_q = eq.eigenvalues().reverse();
  }
  const double m0 = m;
  auto slope_value = [&](double mm) {
    return -simplex_threshold(ev_p, mm) - simplex_threshold(ev_q, mm) + mm - m0;
  };
  double mass = 0.0;
  // At m = 0 the derivative is -max eig(P) - max eig(Q) - m0.
  if (-ev_p(0) - ev_q(0) - m0 < 0.0) {
    thread_local std::vector<double> bps;
    bps.clear();
    simplex_breakpoints(ev_p, bps);
    simplex_breakpoints(ev_q, bps);
    std::sort(bps.begin(), bps.end());
    double lo = 0.0, f_lo = -ev_p(0) - ev_q(0) - m0;
    bool found = false;
    for (double b : bps) {
      if (b <= lo) continue;
      const double f_b = slope_value(b);
      if (f_b >= 0.0) {
        mass = lo + (b - lo) * (-f_lo) / (f_b - f_lo);
        found = true;
        break;
      }
      lo = b;
      f_lo = f_b;
    }
    if (!found) mass = lo - f_lo / (1.0 + 2.0 / static_cast<double>(n));
  }
  m = mass;
  if (!(mass > 0.0)) {
    for (Eigen::Index a = 0; a < 2 * h; ++a) c[a] = 0.0;
    return;
  }
  if (n == 2) {
    auto rebuild2 = [&](double* v, double mid, double rad, const Eigen::VectorXd& ev) {
      const double tau = simplex_threshold(ev, mass);
      const double l1 = std::max(ev(0) - tau, 0.0), l2 = std::max(ev(1) - tau, 0.0);
      const double new_mid = 0.5 * (l1 + l2);
      const double s = rad > 0.0 ? 0.5 * (l1 - l2) / rad : 0.0;
      v[0] = new_mid + s * (v[0] - mid);
      v[1] = new_mid + s * (v[1] - mid);
      v[2] *= s;
      v[3] *= s;
    };
    rebuild2(c, mid_p, rad_p, ev_p);
    rebuild2(c + h, mid_q, rad_q, ev_q);
    return;
  }
  auto rebuild = [&](const Eigen::SelfAdjointEigenSolver<ComplexMatrix>& es, const Eigen::VectorXd& ev_desc,
                     double* out) {
    const double tau = simplex_threshold(ev_desc, mass);
    const Eigen::VectorXd lam = (es.eigenvalues().array() - tau).cwiseMax(0.0);
    const ComplexMatrix& v = es.eigenvectors();
    to_coords(v * lam.cast<Complex>().asDiagonal() * v.adjoint(), out);
  };
  rebuild(ep, ev_p, c);
  rebuild(eq, ev_q, c + h);
}

}  // namespace detail

}  // namespace mmot
