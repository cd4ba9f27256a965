// One line per criterion: "[PASS]" or "[FAIL]", the measured quantity and
// the wall time against its budget. Exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "mmot/geodesic.hpp"
#include "mmot/matrix_ot_restricted.hpp"
#include "mmot/properties.hpp"
#include "mmot/spectra.hpp"
#include "oracle/barrier_reference.hpp"
#include "oracle/small_oracles.hpp"
#include "support.hpp"

using namespace mmot;
using testing_support::random_density;
using testing_support::random_grid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

HermitianMatrix direction(std::mt19937_64& rng) {
  return testing_support::unit_trace(testing_support::random_psd_rank(rng, 2, 1 + rng() % 2));
}

// 1. tr_1(a (x) b) = tr(b) a and tr_0(a (x) b) = tr(a) b.
Outcome partial_traces() {
  std::mt19937_64 rng(1001);
  double worst = 0.0, oracle_gap = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index n = 2 + t % 3;
    const auto a = testing_support::random_hermitian(rng, n);
    const auto b = testing_support::random_hermitian(rng, n);
    const BigMatrix rho = kron(a, b);
    worst = std::max(worst, max_abs_diff(partial_trace_1(rho), a * b.trace()));
    worst = std::max(worst, max_abs_diff(partial_trace_0(rho), b * a.trace()));
    const auto ref = oracle::kron_by_index(a.matrix(), b.matrix());
    oracle_gap = std::max(oracle_gap, (rho.matrix() - ref).cwiseAbs().maxCoeff());
    oracle_gap = std::max(oracle_gap, (partial_trace_1(rho).matrix() - oracle::trace_out_second(ref, n)).cwiseAbs().maxCoeff());
    oracle_gap = std::max(oracle_gap, (partial_trace_0(rho).matrix() - oracle::trace_out_first(ref, n)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12 && oracle_gap <= 1e-12, "max error " + sci(worst) + ", vs index oracle " + sci(oracle_gap)};
}

// 2. Closed-form W2 against the exact LP.
Outcome scalar_closed_form() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<int> size(8, 32);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    auto make = [&](std::size_t m) {
      std::vector<double> v(m);
      for (auto& x : v) x = w(rng);
      double s = 0.0;
      for (double x : v) s += x;
      for (auto& x : v) x /= s;
      return ScalarDensity(random_grid(rng, m), v);
    };
    const auto a = make(static_cast<std::size_t>(size(rng)));
    const auto b = make(static_cast<std::size_t>(size(rng)));
    const double closed = w2_closed_form(a, b);
    const double lp = discrete_ot_lp(quadratic_cost(a.grid, b.grid), a, b).value;
    worst = std::max(worst, std::abs(closed - lp) / (1.0 + lp));
  }
  return {worst <= 1e-8, "max |closed - lp| / (1 + lp) = " + sci(worst)};
}

// 3. No PSD joint field for the two-point pair; the product plan is admissible.
Outcome naive_infeasibility() {
  const auto pair = naive_counterexample();
  const auto r = naive_feasibility(pair.mu0, pair.mu1);
  const auto cert = evaluate_certificate(r.certificate.y, r.certificate.z, pair.mu0, pair.mu1);
  const auto res = check_plan(product_plan(pair.mu0, pair.mu1), pair.mu0, pair.mu1);
  const double worst = std::max({res.source_residual, res.target_residual, res.trace_mismatch});
  const bool ok = r.status == NaiveStatus::infeasible && certifies_infeasibility(cert) && worst == 0.0 &&
                  res.min_eigenvalue >= -kPsdTolerance && res.min_mass >= 0.0;
  return {ok, std::string("status ") + to_string(r.status) + ", certificate value " + sci(cert.value) +
                  " (pair eig " + sci(cert.min_pair_eigenvalue) + "), product plan residual " + sci(worst)};
}

// 4. Library solver against the dense reference barrier.
Outcome oracle_equivalence() {
  std::mt19937_64 rng(1004);
  const double lambdas[] = {0.05, 0.1, 0.5};
  double worst = 0.0;
  bool all_converged = true;
  for (int t = 0; t < 30; ++t) {
    const auto g0 = random_grid(rng, 2 + rng() % 2);
    const auto g1 = random_grid(rng, 2 + rng() % 2);
    const auto mu0 = random_density(rng, g0, 2);
    const auto mu1 = random_density(rng, g1, 2);
    const double lambda = lambdas[t % 3];
    SolverConfig cfg;
    cfg.lambda = lambda;
    cfg.tol_primal = cfg.tol_dual = 1e-10;
    const auto sol = solve_full(mu0, mu1, quadratic_cost(g0, g1), cfg);
    all_converged = all_converged && sol.report.converged;
    oracle::Instance in;
    in.a = detail::raw_blocks(mu0);
    in.b = detail::raw_blocks(mu1);
    in.cost = quadratic_cost(g0, g1);
    in.lambda = lambda;
    const auto ref = oracle::solve(in);
    worst = std::max(worst, std::abs(sol.value - ref.value) / std::max(std::abs(ref.value), 1e-12));
  }
  return {all_converged && worst <= 1e-4, "max relative gap " + sci(worst) + (all_converged ? "" : ", not converged")};
}

// 5. Support of full plans is 4 lambda-monotone, of restricted plans 2 lambda-monotone.
Outcome monotone_support() {
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> lam(0.005, 0.08);
  double worst_full = 0.0, worst_restricted = 0.0;
  bool ok = true, all_converged = true;
  const int instances = 60;
  for (int t = 0; t < instances; ++t) {
    const auto g0 = random_grid(rng, 4 + rng() % 9);
    const auto g1 = random_grid(rng, 4 + rng() % 9);
    const auto mu0 = random_density(rng, g0, 2);
    const auto mu1 = random_density(rng, g1, 2);
    const double lambda = lam(rng);
    SolverConfig cfg;
    cfg.lambda = lambda;
    cfg.tol_primal = cfg.tol_dual = 1e-10;
    const auto full = solve_full(mu0, mu1, quadratic_cost(g0, g1), cfg);
    all_converged = all_converged && full.report.converged;
    const auto mf = check_lambda_monotone(support_set(full.plan, 1e-7), 4.0 * lambda, 1e-6);
    const auto rest = d2lambda(mu0, mu1, quadratic_cost(g0, g1), lambda);
    const auto mr = check_lambda_monotone(support_set(rest.plan, 1e-7), 2.0 * lambda, 1e-6);
    ok = ok && mf.pass && mr.pass;
    worst_full = std::max(worst_full, mf.worst_area / lambda);
    worst_restricted = std::max(worst_restricted, mr.worst_area / lambda);
  }
  return {ok && all_converged, std::to_string(instances) + " instances, worst area / lambda: full " + sci(worst_full) +
                                   " (bound 4), restricted " + sci(worst_restricted) + " (bound 2)" +
                                   (all_converged ? "" : ", not converged")};
}

// 6. d_{2,lambda} is a metric on random triples.
Outcome metric_axioms() {
  std::mt19937_64 rng(1006);
  const auto grid = testing_support::uniform_grid(16);
  const auto cost = quadratic_cost(grid, grid);
  const double lambda = 0.1;
  double tri = std::numeric_limits<double>::infinity(), sym = 0.0, ident = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto a = random_density(rng, grid, 2);
    const auto b = random_density(rng, grid, 2);
    const auto c = random_density(rng, grid, 2);
    const double ab = d2lambda(a, b, cost, lambda).value;
    const double bc = d2lambda(b, c, cost, lambda).value;
    const double ac = d2lambda(a, c, cost, lambda).value;
    tri = std::min(tri, ab + bc - ac);
    sym = std::max(sym, std::abs(ab - d2lambda(b, a, cost, lambda).value));
    ident = std::max(ident, d2lambda(a, a, cost, lambda).value);
  }
  return {tri >= -1e-7 && sym <= 1e-9 && ident <= 1e-9,
          "triangle slack " + sci(tri) + ", asymmetry " + sci(sym) + ", d(a, a) " + sci(ident)};
}

// 7. Rearranging an anti-monotone quadruple with area > 4 lambda pays off.
Outcome rearrangement() {
  std::mt19937_64 rng(1007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int done = 0;
  double worst_gain = -std::numeric_limits<double>::infinity(), worst_marg = 0.0;
  while (done < 500) {
    RearrangementQuadruple q;
    q.x1 = u(rng);
    q.x2 = q.x1 + 2.0 * u(rng);
    q.y2 = u(rng);
    q.y1 = q.y2 + 2.0 * u(rng);
    const double lambda = 0.01 + 0.3 * u(rng);
    if (!((q.x2 - q.x1) * (q.y1 - q.y2) > 4.0 * lambda)) continue;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        q.m[i][j] = (i == j || u(rng) < 0.5) ? 0.05 + u(rng) : 0.0;
        q.a[i][j] = direction(rng);
        q.b[i][j] = direction(rng);
      }
    }
    const auto r = rearrange_quadruple(q, lambda);
    worst_gain = std::max(worst_gain, r.new_cost - r.old_cost);
    for (int k = 0; k < 2; ++k) {
      worst_marg = std::max(worst_marg, (row_marginal(q, k) - row_marginal(r.rearranged, k)).cwiseAbs().maxCoeff());
      worst_marg = std::max(worst_marg, (col_marginal(q, k) - col_marginal(r.rearranged, k)).cwiseAbs().maxCoeff());
    }
    ++done;
  }
  return {worst_gain < 0.0 && worst_marg <= 1e-12,
          "largest cost change " + sci(worst_gain) + ", marginal drift " + sci(worst_marg)};
}

// 8. Energy moves from channel 1 to channel 2 along the full geodesic.
Outcome two_channel_geodesic() {
  const auto grid = frequency_grid(64);
  const auto pair = build_paper_pair(grid);
  SolverConfig cfg;
  cfg.lambda = 0.1;
  cfg.threads = 1;
  const auto path = interpolate(pair.mu0, pair.mu1, 8, GroundCost::quadratic(grid, grid), cfg, GeodesicMode::full);
  const auto& d = path.densities;
  const bool a = channel_mass(d.front(), 0) > channel_mass(d.front(), 1) && channel_mass(d.back(), 1) > channel_mass(d.back(), 0);
  bool b = true;
  double prev = -1.0;
  std::string ratios;
  for (const auto& mu : d) {
    const double r = channel_mass(mu, 1) / channel_mass(mu, 0);
    if (prev >= 0.0 && r < prev - 1e-3) b = false;
    prev = r;
    ratios += (ratios.empty() ? "" : " ") + sci(r);
  }
  bool c = true;
  double mass_err = 0.0, min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < d.size(); ++k) {
    mass_err = std::max(mass_err, std::abs(d[k].total_mass() - 1.0));
    for (const auto& blk : d[k].blocks()) min_eig = std::min(min_eig, blk.min_eigenvalue());
  }
  c = mass_err <= 1e-7 && min_eig >= -kPsdTolerance;
  const double step = grid[1] - grid[0];
  const double peak0 = grid[channel_argmax(d.front(), 0)], peak1 = grid[channel_argmax(d.back(), 1)];
  const bool dd = std::abs(peak0 - std::numbers::pi / 4) <= step + 1e-12 && std::abs(peak1 - std::numbers::pi / 6) <= step + 1e-12;
  return {a && b && c && dd && path.report.converged,
          std::string("(a) ") + (a ? "ok" : "no") + ", (b) ratios " + ratios + ", (c) mass error " + sci(mass_err) +
              " min eig " + sci(min_eig) + ", (d) peaks " + sci(peak0) + " / " + sci(peak1) +
              (path.report.converged ? "" : ", not converged")};
}

// 9. n = 1 full geodesic against displacement interpolation.
Outcome scalar_geodesic() {
  // Each atom moves a multiple of N grid steps, so the exact interpolant lives
  // on the grid. The floor keeps every block positive.
  const int points = 33, n_seg = 4;
  const auto grid = testing_support::uniform_grid(points);
  std::mt19937_64 rng(1009);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> w0(points, 1e-9), w1(points, 1e-9);
  for (int i = 2; i <= 13; ++i) {
    const double w = u(rng);
    w0[static_cast<std::size_t>(i)] += w;
    w1[static_cast<std::size_t>(i + 8 + 4 * ((i - 2) / 4))] += w;
  }
  auto make = [&](const std::vector<double>& w) {
    std::vector<HermitianMatrix> blocks;
    for (double v : w) blocks.push_back(HermitianMatrix::diagonal({v}));
    return normalize(MatrixDensity(grid, blocks));
  };
  const auto mu0 = make(w0), mu1 = make(w1);
  SolverConfig cfg;
  cfg.lambda = 0.1;
  cfg.tol_primal = 1e-9;
  cfg.tol_dual = 1e-10;
  const auto path = interpolate(mu0, mu1, n_seg, GroundCost::quadratic(grid, grid), cfg, GeodesicMode::full);
  double worst = 0.0;
  for (int k = 0; k <= n_seg; ++k) {
    const auto expect = rebin(displacement_geodesic(mu0.trace_density(), mu1.trace_density(), k / double(n_seg)), grid);
    const auto got = path.densities[static_cast<std::size_t>(k)].traces();
    double tv = 0.0;
    for (int g = 0; g < points; ++g) tv += std::abs(expect[static_cast<std::size_t>(g)] - got[static_cast<std::size_t>(g)]);
    worst = std::max(worst, 0.5 * tv);
  }
  return {worst <= 1e-4, "max total variation " + sci(worst)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const Criterion all[] = {
      {"partial-trace identities", 5, partial_traces},
      {"scalar closed form vs LP", 30, scalar_closed_form},
      {"naive joint field infeasible", 1, naive_infeasibility},
      {"solver vs reference program", 600, oracle_equivalence},
      {"4 lambda / 2 lambda monotone support", 900, monotone_support},
      {"restricted metric axioms", 120, metric_axioms},
      {"quadruple rearrangement", 10, rearrangement},
      {"two-channel geodesic (64 points, N = 8)", 1800, two_channel_geodesic},
      {"scalar geodesic vs displacement", 60, scalar_geodesic},
  };
  int failed = 0, idx = 0;
  for (const auto& c : all) {
    ++idx;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.budget;
    failed += pass ? 0 : 1;
    std::printf("[%s] %d. %s: %s; %.1f s (budget %.0f s)\n", pass ? "PASS" : "FAIL", idx, c.name, o.detail.c_str(), secs,
                c.budget);
    std::fflush(stdout);
  }
  std::printf("%d of 9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
