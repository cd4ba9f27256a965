// mmot: command-line front end.
//
// Exit codes: 0 success, 1 check failed, 2 infeasible, 3 not converged or
// numerical failure, 4 input error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mmot/geodesic.hpp"
#include "mmot/io.hpp"
#include "mmot/matrix_ot_full.hpp"
#include "mmot/matrix_ot_restricted.hpp"
#include "mmot/properties.hpp"
#include "mmot/spectra.hpp"

namespace fs = std::filesystem;
using namespace mmot;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kInfeasible = 2, kNotConverged = 3, kInputError = 4;

struct Globals {
  std::string config_path;
  std::optional<double> lambda;
  std::optional<std::string> method;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<long> max_iter;
};

/// Config file (flag, else MMOT_CONFIG), then command-line overrides. A run
/// manifest is accepted as a config file: its "config" member is used.
SolverConfig load_config(const Globals& g) {
  SolverConfig cfg;
  std::string path = g.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("MMOT_CONFIG")) path = env;
  }
  if (!path.empty()) {
    json j;
    try {
      j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
      throw InvalidInput(path + ": " + e.what());
    }
    io::apply_config(j.contains("config") ? j.at("config") : j, cfg);
  }
  if (g.lambda) cfg.lambda = *g.lambda;
  if (g.method) cfg.method = parse_method(*g.method);
  if (g.threads) cfg.threads = *g.threads;
  if (g.seed) cfg.seed = *g.seed;
  if (g.tol) cfg.tol_primal = cfg.tol_dual = *g.tol;
  if (g.max_iter) cfg.max_iter = *g.max_iter;
  cfg.validate();
  return cfg;
}

struct Inputs {
  std::string path0, path1;
  MatrixDensity mu0, mu1;
  json digests;

  void load() {
    mu0 = io::load_density(path0);
    mu1 = io::load_density(path1);
    digests = {{path0, io::fnv1a_hex(io::read_file(path0))}, {path1, io::fnv1a_hex(io::read_file(path1))}};
  }
};

struct CostFlags {
  std::string kind = "quadratic-linear";
  double period = 2.0 * std::numbers::pi;

  GroundCost build(const std::vector<double>& x, const std::vector<double>& y) const {
    if (kind == "quadratic-linear") return GroundCost::quadratic(x, y);
    if (kind == "quadratic-circular") return GroundCost::circular(x, y, period);
    throw InvalidInput("unknown cost kind '" + kind + "'");
  }
};

json manifest(const std::string& command, const SolverConfig& cfg, const json& digests, const SolverReport* report,
              double seconds) {
  json m = {{"command", command}, {"config", io::config_to_json(cfg)}, {"inputs", digests}, {"wall_seconds", seconds}};
  if (report) m["report"] = io::report_to_json(*report);
  return m;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int converged_code(const SolverReport& r) {
  if (r.converged) return kOk;
  std::cerr << "warning: solver stopped before convergence (primal " << r.primal_residual << ", dual "
            << r.dual_residual << ")\n";
  return kNotConverged;
}

// --- commands ------------------------------------------------------------------

int cmd_example(std::size_t points, const std::string& out_dir, bool counterexample) {
  const DensityPair pair = counterexample ? naive_counterexample() : build_paper_pair(frequency_grid(points));
  io::save_density(join(out_dir, "mu0.json"), pair.mu0);
  io::save_density(join(out_dir, "mu1.json"), pair.mu1);
  std::cout << "wrote " << join(out_dir, "mu0.json") << " and " << join(out_dir, "mu1.json") << "\n";
  return kOk;
}

int cmd_distance(const Globals& g, Inputs& in, const CostFlags& cf, const std::string& mode,
                 const std::string& out_dir) {
  const SolverConfig cfg = load_config(g);
  in.load();
  const auto cost = cf.build(in.mu0.grid(), in.mu1.grid());
  const auto t0 = std::chrono::steady_clock::now();
  json m;
  int code = kOk;
  double value = 0.0;
  if (mode == "restricted") {
    value = d2lambda(in.mu0, in.mu1, cost, cfg.lambda).value;
    m = manifest("distance", cfg, in.digests, nullptr, seconds_since(t0));
  } else if (mode == "full") {
    const FullSolution s = solve_full(in.mu0, in.mu1, cost, cfg);
    value = s.value;
    m = manifest("distance", cfg, in.digests, &s.report, seconds_since(t0));
    code = converged_code(s.report);
  } else {
    throw InvalidInput("unknown mode '" + mode + "'");
  }
  m["mode"] = mode;
  m["cost"] = cf.kind;
  m["value"] = value;
  io::atomic_write(join(out_dir, "manifest.json"), m.dump(2) + "\n");
  std::cout << io::fmt(value) << "\n";
  return code;
}

int cmd_naive(const Inputs& in, const std::string& out_dir) {
  const NaiveResult r = naive_feasibility(in.mu0, in.mu1);
  json report = {{"status", to_string(r.status)}, {"residual", r.residual}, {"iterations", r.iterations}};
  if (r.status == NaiveStatus::infeasible) {
    report["certificate_value"] = r.certificate.value;
    report["certificate_min_pair_eigenvalue"] = r.certificate.min_pair_eigenvalue;
  }
  io::atomic_write(join(out_dir, "naive_report.json"), report.dump(2) + "\n");
  switch (r.status) {
    case NaiveStatus::infeasible:
      std::cout << "infeasible: no PSD joint field has these marginals (certificate value "
                << io::fmt(r.certificate.value) << ")\n";
      return kInfeasible;
    case NaiveStatus::feasible:
      std::cout << "feasible: joint field found (residual " << io::fmt(r.residual) << ")\n";
      return kOk;
    default:
      std::cout << "undecided after " << r.iterations << " iterations (residual " << io::fmt(r.residual) << ")\n";
      return kNotConverged;
  }
}

int cmd_transport(const Globals& g, Inputs& in, const CostFlags& cf, const std::string& mode, bool naive,
                  const std::string& out_dir) {
  const SolverConfig cfg = load_config(g);
  in.load();
  if (naive) return cmd_naive(in, out_dir);
  const auto cost = cf.build(in.mu0.grid(), in.mu1.grid());
  const auto t0 = std::chrono::steady_clock::now();
  FullTransportPlan plan;
  json m;
  int code = kOk;
  if (mode == "full") {
    FullSolution s = solve_full(in.mu0, in.mu1, cost, cfg);
    plan = std::move(s.plan);
    m = manifest("transport", cfg, in.digests, &s.report, seconds_since(t0));
    m["value"] = s.value;
    code = converged_code(s.report);
  } else if (mode == "restricted") {
    const RestrictedResult r = d2lambda(in.mu0, in.mu1, cost, cfg.lambda);
    plan = to_full_plan(r.plan, in.mu0, in.mu1);
    m = manifest("transport", cfg, in.digests, nullptr, seconds_since(t0));
    m["value"] = r.squared;
  } else {
    throw InvalidInput("unknown mode '" + mode + "'");
  }
  m["mode"] = mode;
  m["cost"] = cf.kind;
  io::atomic_write(join(out_dir, "plan.csv"), io::plan_to_csv(plan));
  io::atomic_write(join(out_dir, "support.csv"), io::support_to_csv(support_set(plan)));
  io::atomic_write(join(out_dir, "manifest.json"), m.dump(2) + "\n");
  std::cout << io::fmt(m["value"].get<double>()) << "\n";
  return code;
}

int cmd_geodesic(const Globals& g, Inputs& in, const CostFlags& cf, const std::string& mode, int segments,
                 const std::string& out_dir) {
  const SolverConfig cfg = load_config(g);
  in.load();
  GeodesicMode gm;
  if (mode == "full") {
    gm = GeodesicMode::full;
  } else if (mode == "restricted") {
    gm = GeodesicMode::restricted;
  } else {
    throw InvalidInput("unknown mode '" + mode + "'");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const GeodesicPath path = interpolate(in.mu0, in.mu1, segments, cf.build(in.mu0.grid(), in.mu1.grid()), cfg, gm);
  json files = json::array();
  for (std::size_t k = 0; k < path.densities.size(); ++k) {
    const std::string name = "tau_" + std::to_string(k) + ".json";
    io::save_density(join(out_dir, name), path.densities[k]);
    files.push_back(name);
  }
  io::atomic_write(join(out_dir, "trajectory.csv"), io::trajectory_to_csv(path.taus, path.densities));
  json m = manifest("geodesic", cfg, in.digests, &path.report, seconds_since(t0));
  m["mode"] = mode;
  m["cost"] = cf.kind;
  m["segments"] = segments;
  m["value"] = path.value;
  m["segment_values"] = path.segment_values;
  m["densities"] = files;
  io::atomic_write(join(out_dir, "manifest.json"), m.dump(2) + "\n");
  std::cout << io::fmt(path.value) << "\n";
  return gm == GeodesicMode::full ? converged_code(path.report) : kOk;
}

int cmd_check(const Globals& g, const std::string& plan_path, Inputs& in, const CostFlags& cf,
              std::optional<double> expect_cost, bool require_monotone, double tol) {
  const SolverConfig cfg = load_config(g);
  in.load();
  const FullTransportPlan plan = io::plan_from_csv(io::read_file(plan_path), in.mu0.grid(), in.mu1.grid());
  const PlanResiduals r = check_plan(plan, in.mu0, in.mu1);
  bool pass = true;
  auto line = [&](const char* name, double value, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << " " << io::fmt(value) << "\n";
    pass = pass && ok;
  };
  line("source-marginal", r.source_residual, r.source_residual <= tol);
  line("target-marginal", r.target_residual, r.target_residual <= tol);
  line("trace-equals-mass", r.trace_mismatch, r.trace_mismatch <= 1e-9);
  line("psd-blocks", r.min_eigenvalue, r.min_eigenvalue >= -kPsdTolerance);
  line("nonnegative-mass", r.min_mass, r.min_mass >= 0.0);

  const double cost = transport_cost(plan, cf.build(in.mu0.grid(), in.mu1.grid()), cfg.lambda);
  if (expect_cost) {
    line("cost", cost, std::abs(cost - *expect_cost) <= 1e-8 * (1.0 + std::abs(*expect_cost)));
  } else {
    std::cout << "info cost " << io::fmt(cost) << "\n";
  }
  const MonotoneCheck mono = check_lambda_monotone(support_set(plan), 4.0 * cfg.lambda);
  if (require_monotone) {
    line("monotone-support", mono.worst_area, mono.pass);
  } else {
    std::cout << "info monotone-support " << io::fmt(mono.worst_area) << " (bound " << io::fmt(4.0 * cfg.lambda)
              << ")\n";
  }
  std::cout << (pass ? "pass" : "fail") << "\n";
  return pass ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-valued optimal mass transport"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON solver config or run manifest (default: $MMOT_CONFIG)");
  app.add_option("--lambda", g.lambda, "rotation weight");
  app.add_option("--method", g.method, "full-plan engine: automatic, barrier or splitting");
  app.add_option("--threads", g.threads, "solver threads");
  app.add_option("--seed", g.seed, "seed for restart perturbations");
  app.add_option("--tol", g.tol, "primal and dual tolerance");
  app.add_option("--max-iter", g.max_iter, "iteration cap");

  Inputs in;
  CostFlags cf;
  std::string mode = "full", out_dir = ".";
  auto add_pair = [&](CLI::App* sub) {
    sub->add_option("mu0", in.path0, "source density (JSON)")->required();
    sub->add_option("mu1", in.path1, "target density (JSON)")->required();
    sub->add_option("--cost", cf.kind, "quadratic-linear or quadratic-circular");
    sub->add_option("--period", cf.period, "period of the circular cost");
    sub->add_option("--mode", mode, "full or restricted");
    sub->add_option("--out-dir", out_dir, "output directory");
  };

  std::size_t points = 64;
  bool counterexample = false;
  auto* example = app.add_subcommand("example", "write the two-channel example densities");
  example->add_option("--grid-size", points, "frequency grid points on [0, pi]");
  example->add_option("--out-dir", out_dir, "output directory");
  example->add_flag("--counterexample", counterexample, "write the two-point pair without a naive joint field");

  auto* distance = app.add_subcommand("distance", "print the transport objective (full) or d2,lambda (restricted)");
  add_pair(distance);

  bool naive = false;
  auto* transport = app.add_subcommand("transport", "write the optimal plan and its support");
  add_pair(transport);
  transport->add_flag("--naive", naive, "only decide whether a PSD joint field matches both marginals");

  int segments = 8;
  auto* geodesic = app.add_subcommand("geodesic", "write the densities along the geodesic");
  add_pair(geodesic);
  geodesic->add_option("-N,--segments", segments, "number of segments");

  std::string plan_path;
  std::optional<double> expect_cost;
  bool require_monotone = false;
  double check_tol = 1e-7;
  auto* check = app.add_subcommand("check", "validate a plan file against its marginals");
  check->add_option("plan", plan_path, "plan CSV")->required();
  check->add_option("mu0", in.path0)->required();
  check->add_option("mu1", in.path1)->required();
  check->add_option("--cost", cf.kind);
  check->add_option("--period", cf.period);
  check->add_option("--expect-cost", expect_cost, "fail unless the recomputed cost matches");
  check->add_flag("--require-monotone", require_monotone, "fail when the support is not 4 lambda-monotone");
  check->add_option("--marginal-tol", check_tol, "marginal residual tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*example) return cmd_example(points, out_dir, counterexample);
    if (*distance) return cmd_distance(g, in, cf, mode, out_dir);
    if (*transport) return cmd_transport(g, in, cf, mode, naive, out_dir);
    if (*geodesic) return cmd_geodesic(g, in, cf, mode, segments, out_dir);
    if (*check) return cmd_check(g, plan_path, in, cf, expect_cost, require_monotone, check_tol);
  } catch (const InfeasibleProblem& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNotConverged;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
