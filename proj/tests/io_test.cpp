#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "mmot/io.hpp"
#include "mmot/spectra.hpp"
#include "support.hpp"

using namespace mmot;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mmot_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Io, DensityRoundTripIsExact) {
  std::mt19937_64 rng(91);
  const auto mu = testing_support::random_density(rng, testing_support::random_grid(rng, 7), 3);
  const auto path = scratch("d.json").string();
  io::save_density(path, mu);
  const auto back = io::load_density(path);
  EXPECT_EQ(back.grid(), mu.grid());
  EXPECT_EQ(max_block_diff(back, mu), 0.0);
}

TEST(Io, DensityRejectsBadInput) {
  EXPECT_THROW(io::density_from_json(nlohmann::json::parse(R"({"n": 1, "grid": [0], "blocks": [[[[-1, 0]]]]})")),
               InvalidInput);
  EXPECT_THROW(io::density_from_json(nlohmann::json::parse(R"({"n": 1, "grid": [0, 1], "blocks": [[[[1, 0]]]]})")),
               InvalidInput);
  EXPECT_THROW(io::density_from_json(nlohmann::json::parse(
                   R"({"n": 2, "grid": [0], "blocks": [[[[1, 0], [1, 0]], [[0, 0], [1, 0]]]]})")),
               InvalidInput);
  EXPECT_THROW(io::load_density(scratch("missing.json").string()), InvalidInput);
}

TEST(Io, PlanRoundTripIsExact) {
  std::mt19937_64 rng(92);
  const auto mu0 = testing_support::random_density(rng, testing_support::random_grid(rng, 3), 2);
  const auto mu1 = testing_support::random_density(rng, testing_support::random_grid(rng, 4), 2);
  const auto plan = product_plan(mu0, mu1);
  const auto back = io::plan_from_csv(io::plan_to_csv(plan), mu0.grid(), mu1.grid());
  EXPECT_EQ((back.mass - plan.mass).cwiseAbs().maxCoeff(), 0.0);
  for (std::size_t c = 0; c < plan.block0.size(); ++c) {
    EXPECT_EQ(max_abs_diff(back.block0[c], plan.block0[c]), 0.0);
    EXPECT_EQ(max_abs_diff(back.block1[c], plan.block1[c]), 0.0);
  }
}

TEST(Io, PlanRejectsMalformedRows) {
  const std::vector<double> g = {0.0, 1.0};
  const std::string header = io::plan_header(1) + "\n";
  EXPECT_THROW(io::plan_from_csv("a,b\n", g, g), InvalidInput);
  EXPECT_THROW(io::plan_from_csv(header + "0,0,0,0,1,1,0\n", g, g), InvalidInput);
  EXPECT_THROW(io::plan_from_csv(header + "5,0,0,0,1,1,0,1,0\n", g, g), InvalidInput);
  EXPECT_THROW(io::plan_from_csv(header + "0,0,0,0,x,1,0,1,0\n", g, g), InvalidInput);
}

TEST(Io, TrajectoryCsvLayout) {
  const auto pair = build_paper_pair(frequency_grid(4));
  const std::string csv = io::trajectory_to_csv({0.0, 1.0}, {pair.mu0, pair.mu1});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tau,theta,channel,magnitude,phase");
  long rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 * 4 * 3);
}

TEST(Io, ConfigOverridesAndRejectsUnknownKeys) {
  SolverConfig c;
  io::apply_config(nlohmann::json::parse(R"({"lambda": 0.25, "method": "splitting", "threads": 2})"), c);
  EXPECT_EQ(c.lambda, 0.25);
  EXPECT_EQ(c.method, SolverMethod::splitting);
  EXPECT_EQ(c.threads, 2);
  EXPECT_THROW(io::apply_config(nlohmann::json::parse(R"({"lamda": 0.25})"), c), InvalidInput);
  EXPECT_THROW(io::apply_config(nlohmann::json::parse(R"({"lambda": -1})"), c), InvalidInput);
  EXPECT_THROW(io::apply_config(nlohmann::json::parse(R"({"method": "simplex"})"), c), InvalidInput);
  SolverConfig back;
  io::apply_config(io::config_to_json(c), back);
  EXPECT_EQ(io::config_to_json(back), io::config_to_json(c));
}

TEST(Io, AtomicWriteReplacesWholeFile) {
  const auto path = scratch("atomic.txt").string();
  io::atomic_write(path, "first version, rather long\n");
  io::atomic_write(path, "second\n");
  EXPECT_EQ(io::read_file(path), "second\n");
  for (const auto& e : std::filesystem::directory_iterator(scratch("").parent_path())) {
    EXPECT_EQ(e.path().string().find(".tmp."), std::string::npos);
  }
}
