#include <gtest/gtest.h>

#include <random>

#include "opttolls/experiments.hpp"
#include "test_support.hpp"

namespace opttolls {
namespace {

double num(const io::Json& j) { return io::to_number(j, "field"); }

TEST(Impossibility, FullGrid) {
  auto r = run_impossibility_demo({.grid_resolution = 21});
  EXPECT_EQ(r.outcome, ExperimentOutcome::kPassed);
  EXPECT_EQ(r.results["toll_points"], 441);
  EXPECT_LE(num(r.results["max_discrepancy"]), 1e-6);
  const auto& games = r.results["games"];
  EXPECT_NEAR(num(games[0]["optimal_flow"]["e0"]), 0.0, 1e-9);
  EXPECT_NEAR(num(games[0]["optimal_flow"]["e1"]), 1.0, 1e-9);
  EXPECT_NEAR(num(games[0]["optimal_cost"]), 0.0, 1e-9);
  EXPECT_NEAR(num(games[1]["optimal_flow"]["e0"]), 0.5, 1e-9);
  EXPECT_NEAR(num(games[1]["optimal_flow"]["e1"]), 0.5, 1e-9);
  EXPECT_NEAR(num(games[1]["optimal_cost"]), 0.75, 1e-9);
  EXPECT_EQ(r.oracle_queries, 2 * 441);
}

TEST(Impossibility, CoarseGridSameConclusion) {
  auto r = run_impossibility_demo({.grid_resolution = 2});
  EXPECT_EQ(r.outcome, ExperimentOutcome::kPassed);
  EXPECT_EQ(r.results["toll_points"], 4);
  EXPECT_THROW(run_impossibility_demo({.grid_resolution = 0}), BadSpec);
}

TEST(Report, JsonRoundTrip) {
  auto r = run_impossibility_demo({.grid_resolution = 3});
  const auto j = r.to_json();
  auto back = ExperimentReport::from_json(io::Json::parse(j.dump()));
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.to_json().dump(), j.dump());
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"instance", "command", "config", "results", "oracle_queries",
                                            "wall_clock_seconds", "outcome"}));
  auto broken = j;
  broken["outcome"] = "MAYBE";
  EXPECT_THROW(ExperimentReport::from_json(broken), ParseError);
  broken.erase("outcome");
  EXPECT_THROW(ExperimentReport::from_json(broken), ParseError);
}

TEST(Pipeline, Pigou) {
  auto r = run_pipeline(InstanceSpec{.topology = Topology::kPigou}, {.opt = {.epsilon = 0.02}});
  EXPECT_EQ(r.outcome, ExperimentOutcome::kPassed);
  EXPECT_NEAR(num(r.results["opt_cost"]), 0.75, 1e-9);
  EXPECT_LE(num(r.results["gap"]), 0.02);
  EXPECT_GT(r.oracle_queries, 0);
}

TEST(Pipeline, Braess) {
  auto r = run_pipeline(InstanceSpec{.topology = Topology::kBraess}, {.opt = {.epsilon = 0.02}});
  EXPECT_NEAR(num(r.results["opt_cost"]), testing::brute_force_opt(testing::braess()), 1e-4);
  EXPECT_LE(num(r.results["gap"]), 0.02);
}

TEST(Pipeline, RandomParallel) {
  const InstanceSpec spec{.topology = Topology::kParallel, .parallel_edges = 4, .degree = 2, .seed = 1};
  auto r = run_pipeline(spec, {.opt = {.epsilon = 0.05}});
  EXPECT_LE(num(r.results["gap"]), 0.05);
  // The reference optimum is no worse than any sampled flow.
  auto g = generate(spec);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i)
    EXPECT_LE(num(r.results["opt_cost"]), total_latency(g, testing::random_path_flow(g.network, rng)) + 1e-9);
}

TEST(Pipeline, BudgetOutcome) {
  auto r = run_pipeline(InstanceSpec{.topology = Topology::kBraess}, {.max_queries = 30});
  EXPECT_EQ(r.outcome, ExperimentOutcome::kBudgetExhausted);
  EXPECT_EQ(r.results["status"], "BUDGET_EXHAUSTED");
  EXPECT_TRUE(r.results["best_sampled_cost"].is_null());
}

TEST(Enforce, OptimumOfBraess) {
  auto g = testing::braess();
  std::vector<EnforcementTraceEntry> trace;
  std::vector<QueryRecord> log;
  auto r = run_enforce(g, system_optimum(g).flow, "braess", {.delta = 1e-3, .record_trace = true}, &trace, &log);
  EXPECT_EQ(r.outcome, ExperimentOutcome::kPassed);
  EXPECT_EQ(r.results["status"], "SUCCESS");
  EXPECT_LE(num(r.results["achieved_deviation"]), 2e-3);
  EXPECT_EQ(static_cast<std::int64_t>(log.size()), r.oracle_queries);
  EXPECT_FALSE(trace.empty());

  auto grid = generate({.topology = Topology::kGrid, .grid_width = 3, .grid_height = 3, .degree = 2, .seed = 2});
  auto capped = run_enforce(grid, system_optimum(grid).flow, "grid", {.delta = 1e-6, .max_queries = 3});
  EXPECT_EQ(capped.outcome, ExperimentOutcome::kBudgetExhausted);
}

TEST(SolveEq, BraessZeroTolls) {
  auto r = run_solve_eq(testing::braess(), TollVector::zeros(5), "braess");
  EXPECT_EQ(r.outcome, ExperimentOutcome::kPassed);
  EXPECT_NEAR(num(r.results["total_latency"]), 2.0, 1e-6);
}

TEST(Bench, SlopeAndRows) {
  std::vector<double> x{2, 4, 8}, y{12, 48, 192};
  EXPECT_NEAR(log_log_slope(x, y), 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(log_log_slope({2}, {1})));

  auto r = run_bench({.sizes = {2, 3}, .epsilon = 0.1});
  ASSERT_EQ(r.results["rows"].size(), 2u);
  EXPECT_EQ(r.results["rows"][1]["m"], 3);
  EXPECT_FALSE(r.results["enforce_log_log_slope"].is_null());
  EXPECT_EQ(r.outcome, ExperimentOutcome::kPassed);
}

}  // namespace
}  // namespace opttolls
