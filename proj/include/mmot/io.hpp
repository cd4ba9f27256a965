#pragma once

// File formats.
//
// Density (JSON):
//   {"n": 2, "grid": [x_0, ...], "blocks": [B_0, ...]}
//   where each B is n rows of n [re, im] pairs.
//
// Plan (CSV), one row per cell with positive mass or nonzero blocks:
//   i,j,x,y,mass,b0_re_0_0,b0_im_0_0,...,b1_re_0_0,b1_im_0_0,...
//   Block entries are listed row-major, (k, l) for k, l in 0..n-1.
//
// Support (CSV): i,j,x,y,mass
//
// Trajectory (CSV, long format): tau,theta,channel,magnitude,phase
//   channel "k_l" (1-based) for k <= l; phase is arg of entry (l, k).
//
// Numbers are written in shortest round-trip form.

#include "json.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

#include "mmot/density.hpp"
#include "mmot/errors.hpp"
#include "mmot/geodesic.hpp"
#include "mmot/hermitian.hpp"
#include "mmot/matrix_ot_full.hpp"
#include "mmot/properties.hpp"

namespace mmot::io {

using nlohmann::json;

/// Shortest decimal form that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// 64-bit FNV-1a digest, lower-case hex.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw InvalidInput("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InvalidInput("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

// --- densities -------------------------------------------------------------

inline json density_to_json(const MatrixDensity& mu) {
  json blocks = json::array();
  for (const auto& b : mu.blocks()) {
    json rows = json::array();
    for (Eigen::Index k = 0; k < b.dim(); ++k) {
      json row = json::array();
      for (Eigen::Index l = 0; l < b.dim(); ++l) row.push_back({b(k, l).real(), b(k, l).imag()});
      rows.push_back(std::move(row));
    }
    blocks.push_back(std::move(rows));
  }
  return {{"n", mu.dim()}, {"grid", mu.grid()}, {"blocks", std::move(blocks)}};
}

/// Blocks must be Hermitian within 1e-9; they are then symmetrized.
inline MatrixDensity density_from_json(const json& j) {
  try {
    const auto n = j.at("n").get<Eigen::Index>();
    if (n <= 0) throw InvalidInput("density: n must be positive");
    auto grid = j.at("grid").get<std::vector<double>>();
    const auto& blocks = j.at("blocks");
    if (!blocks.is_array() || blocks.size() != grid.size()) {
      throw InvalidInput("density: block count does not match grid length");
    }
    std::vector<HermitianMatrix> out;
    out.reserve(grid.size());
    for (const auto& b : blocks) {
      if (!b.is_array() || static_cast<Eigen::Index>(b.size()) != n) throw InvalidInput("density: block is not n x n");
      ComplexMatrix m(n, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& row = b[static_cast<std::size_t>(k)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
          throw InvalidInput("density: block is not n x n");
        }
        for (Eigen::Index l = 0; l < n; ++l) {
          const auto& e = row[static_cast<std::size_t>(l)];
          if (!e.is_array() || e.size() != 2) throw InvalidInput("density: entries must be [re, im] pairs");
          m(k, l) = Complex(e[0].get<double>(), e[1].get<double>());
        }
      }
      out.emplace_back(m, Validation::strict);
    }
    return MatrixDensity(std::move(grid), std::move(out));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("density: malformed JSON: ") + e.what());
  }
}

inline void save_density(const std::string& path, const MatrixDensity& mu) {
  atomic_write(path, density_to_json(mu).dump(1) + "\n");
}

inline MatrixDensity load_density(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
  return density_from_json(j);
}

// --- plans -------------------------------------------------------------------

inline std::string plan_header(Eigen::Index n) {
  std::string h = "i,j,x,y,mass";
  for (const char* which : {"b0", "b1"}) {
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index l = 0; l < n; ++l) {
        const std::string kl = std::to_string(k) + "_" + std::to_string(l);
        h += std::string(",") + which + "_re_" + kl + "," + which + "_im_" + kl;
      }
    }
  }
  return h;
}

inline std::string plan_to_csv(const FullTransportPlan& plan) {
  const Eigen::Index n = plan.dim();
  std::string out = plan_header(n) + "\n";
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      const auto& a = plan.b0(i, j);
      const auto& b = plan.b1(i, j);
      if (!(plan.mass(i, j) != 0.0 || a.matrix().norm() > 0.0 || b.matrix().norm() > 0.0)) continue;
      out += std::to_string(i) + "," + std::to_string(j) + "," + fmt(plan.source_grid[static_cast<std::size_t>(i)]) +
             "," + fmt(plan.target_grid[static_cast<std::size_t>(j)]) + "," + fmt(plan.mass(i, j));
      for (const HermitianMatrix* h : {&a, &b}) {
        for (Eigen::Index k = 0; k < n; ++k) {
          for (Eigen::Index l = 0; l < n; ++l) out += "," + fmt((*h)(k, l).real()) + "," + fmt((*h)(k, l).imag());
        }
      }
      out += "\n";
    }
  }
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      f.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  f.push_back(cur);
  return f;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InvalidInput(where + ": bad number '" + s + "'");
  return v;
}

/// Reads a plan CSV; cells absent from the file are empty. The grids are
/// taken from the marginals the plan is checked against.
inline FullTransportPlan plan_from_csv(const std::string& text, const std::vector<double>& source_grid,
                                       const std::vector<double>& target_grid) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("plan: empty file");
  const auto header = split_csv_line(line);
  const std::size_t blocks = header.size() >= 5 ? header.size() - 5 : 0;
  Eigen::Index n = 0;
  while (static_cast<std::size_t>(4 * n * n) < blocks) ++n;
  if (n == 0 || static_cast<std::size_t>(4 * n * n) != blocks || split_csv_line(plan_header(n)) != header) {
    throw InvalidInput("plan: unrecognised header");
  }
  auto plan = FullTransportPlan::zeros(source_grid, target_grid, n);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = "plan line " + std::to_string(lineno);
    if (f.size() != header.size()) throw InvalidInput(where + ": wrong field count");
    const auto i = static_cast<Eigen::Index>(parse_double(f[0], where));
    const auto j = static_cast<Eigen::Index>(parse_double(f[1], where));
    if (i < 0 || j < 0 || i >= plan.rows() || j >= plan.cols()) throw InvalidInput(where + ": cell index out of range");
    plan.mass(i, j) = parse_double(f[4], where);
    std::size_t c = 5;
    for (auto* dst : {&plan.block0, &plan.block1}) {
      ComplexMatrix m(n, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l, c += 2) m(k, l) = Complex(parse_double(f[c], where), parse_double(f[c + 1], where));
      }
      (*dst)[plan.index(i, j)] = HermitianMatrix(m, Validation::strict);
    }
  }
  return plan;
}

inline std::string support_to_csv(const SupportSet& s) {
  std::string out = "i,j,x,y,mass\n";
  for (const auto& p : s.points) {
    out += std::to_string(p.i) + "," + std::to_string(p.j) + "," + fmt(p.x) + "," + fmt(p.y) + "," + fmt(p.mass) + "\n";
  }
  return out;
}

inline std::string trajectory_to_csv(const std::vector<double>& taus, const std::vector<MatrixDensity>& densities) {
  std::string out = "tau,theta,channel,magnitude,phase\n";
  for (std::size_t k = 0; k < densities.size(); ++k) {
    const auto& mu = densities[k];
    for (std::size_t g = 0; g < mu.size(); ++g) {
      const auto& b = mu.block(g);
      for (Eigen::Index r = 0; r < b.dim(); ++r) {
        for (Eigen::Index c = r; c < b.dim(); ++c) {
          out += fmt(taus[k]) + "," + fmt(mu.grid()[g]) + "," + std::to_string(r + 1) + "_" + std::to_string(c + 1) +
                 "," + fmt(std::abs(b(r, c))) + "," + fmt(std::arg(b(c, r))) + "\n";
        }
      }
    }
  }
  return out;
}

// --- configuration -----------------------------------------------------------

inline json config_to_json(const SolverConfig& c) {
  return {{"lambda", c.lambda},         {"method", to_string(c.method)}, {"tol_primal", c.tol_primal},   {"tol_dual", c.tol_dual},
          {"max_iter", c.max_iter},     {"rho", c.rho},                 {"relaxation", c.relaxation},
          {"adapt_interval", c.adapt_interval}, {"check_interval", c.check_interval},
          {"mass_floor", c.mass_floor}, {"threads", c.threads},         {"restarts", c.restarts},
          {"seed", c.seed},             {"bcd_tol", c.bcd_tol},         {"bcd_max_iter", c.bcd_max_iter}};
}

/// Overrides the fields present in `j`; unknown keys are rejected. On error
/// `out` is left unchanged.
inline void apply_config(const json& j, SolverConfig& out) {
  if (!j.is_object()) throw InvalidInput("config: expected a JSON object");
  SolverConfig c = out;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "method") c.method = parse_method(v.get<std::string>());
      else if (key == "tol_primal") c.tol_primal = v.get<double>();
      else if (key == "tol_dual") c.tol_dual = v.get<double>();
      else if (key == "max_iter") c.max_iter = v.get<long>();
      else if (key == "rho") c.rho = v.get<double>();
      else if (key == "relaxation") c.relaxation = v.get<double>();
      else if (key == "adapt_interval") c.adapt_interval = v.get<int>();
      else if (key == "check_interval") c.check_interval = v.get<int>();
      else if (key == "mass_floor") c.mass_floor = v.get<double>();
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "restarts") c.restarts = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "bcd_tol") c.bcd_tol = v.get<double>();
      else if (key == "bcd_max_iter") c.bcd_max_iter = v.get<long>();
      else throw InvalidInput("config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw InvalidInput("config: bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
  out = c;
}

inline json report_to_json(const SolverReport& r) {
  return {{"method", to_string(r.method)}, {"converged", r.converged}, {"iterations", r.iterations}, {"primal_residual", r.primal_residual},
          {"dual_residual", r.dual_residual}, {"rho", r.rho}, {"seconds", r.seconds}, {"restarts", r.restarts}};
}

}  // namespace mmot::io
