#include <gtest/gtest.h>

#include <thread>

#include "opttolls/oracle.hpp"
#include "test_support.hpp"

namespace opttolls {
namespace {

TollVector tolls(double a, double b) { return TollVector(Eigen::Vector2d(a, b)); }

TEST(Query, Fig1FlowOnlyZeroTolls) {
  QueryOracle o(testing::fig1_l1(), OracleMode::kFlowOnly);
  auto r = o.query(tolls(0, 0));
  EXPECT_NEAR(r.aggregate_flow[0], 0.0, 1e-9);
  EXPECT_NEAR(r.aggregate_flow[1], 1.0, 1e-9);
  EXPECT_FALSE(r.total_cost.has_value());
}

TEST(Query, Fig1PairIndistinguishableWithoutCost) {
  QueryOracle a(testing::fig1_l1(), OracleMode::kFlowOnly);
  QueryOracle b(testing::fig1_l2(), OracleMode::kFlowOnly);
  double worst = 0.0;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      auto t = tolls(0.1 * i, 0.1 * j);
      worst = std::max(worst, (a.query(t).aggregate_flow - b.query(t).aggregate_flow).lpNorm<Eigen::Infinity>());
    }
  EXPECT_LE(worst, 2 * a.accuracy());
}

TEST(Query, Fig1CostsDiffer) {
  QueryOracle a(testing::fig1_l1(), OracleMode::kFlowAndCost);
  QueryOracle b(testing::fig1_l2(), OracleMode::kFlowAndCost);
  auto ra = a.query(tolls(0, 0));
  auto rb = b.query(tolls(0, 0));
  ASSERT_TRUE(ra.total_cost && rb.total_cost);
  EXPECT_NEAR(*ra.total_cost, 0.0, 1e-9);
  EXPECT_NEAR(*rb.total_cost, 1.0, 1e-9);
}

TEST(Query, CountsAndLogs) {
  QueryOracle o(testing::pigou(), OracleMode::kFlowOnly);
  EXPECT_EQ(o.query(tolls(0, 0)).query_index, 1);
  EXPECT_EQ(o.query(tolls(0.5, 0)).query_index, 2);
  EXPECT_EQ(o.query_count(), 2);
  auto log = o.query_log();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[1].tolls[0], 0.5);
  EXPECT_EQ(log[1].response.query_index, 2);
}

TEST(Query, ResetCounter) {
  QueryOracle o(testing::pigou(), OracleMode::kFlowOnly);
  o.reset_counter();
  EXPECT_EQ(o.query_count(), 0);
  for (int i = 0; i < 5; ++i) o.query(tolls(0, 0));
  o.reset_counter();
  EXPECT_EQ(o.query_count(), 0);
  EXPECT_TRUE(o.query_log().empty());
  EXPECT_EQ(o.query(tolls(0, 0)).query_index, 1);
}

TEST(Query, RejectsOutOfRangeTolls) {
  QueryOracle o(testing::pigou(), OracleMode::kFlowOnly);
  EXPECT_THROW(o.query(tolls(9.0, 0)), TollOutOfRange);  // T_max = 8
  EXPECT_THROW(o.query(TollVector(Eigen::Vector3d::Zero())), TollOutOfRange);
  EXPECT_NO_THROW(o.query(tolls(8.0, 8.0)));
  EXPECT_EQ(o.query_count(), 1);
}

TEST(Query, Budget) {
  QueryOracle o(testing::pigou(), OracleMode::kFlowOnly, {.max_queries = 2});
  o.query(tolls(0, 0));
  o.query(tolls(0, 0));
  EXPECT_THROW(o.query(tolls(0, 0)), OracleBudgetExceeded);
  EXPECT_EQ(o.query_count(), 2);
}

TEST(Query, Deterministic) {
  auto game = generate({.topology = Topology::kGrid, .grid_width = 3, .grid_height = 2, .degree = 2, .seed = 8});
  QueryOracle a(game, OracleMode::kFlowAndCost);
  QueryOracle b(game, OracleMode::kFlowAndCost);
  TollVector t(Eigen::VectorXd::LinSpaced(game.num_edges(), 0.0, 2.0));
  auto ra = a.query(t), rb = b.query(t), rc = a.query(t);
  EXPECT_EQ(ra.aggregate_flow, rb.aggregate_flow);
  EXPECT_EQ(ra.aggregate_flow, rc.aggregate_flow);
  EXPECT_EQ(*ra.total_cost, *rc.total_cost);
}

TEST(Query, AccurateAgainstClosedForm) {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto game = generate({.topology = Topology::kParallel, .parallel_edges = 4, .degree = 2, .seed = seed});
    QueryOracle o(game, OracleMode::kFlowAndCost);
    Eigen::VectorXd t(4);
    for (int e = 0; e < 4; ++e) t[e] = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    auto r = o.query(TollVector(t));
    Eigen::VectorXd exact = testing::parallel_equilibrium(game, t);
    EXPECT_LE((r.aggregate_flow - exact).lpNorm<Eigen::Infinity>(), o.accuracy());
    const auto c = o.constants();
    EXPECT_LE(std::abs(*r.total_cost - aggregate_cost(game, exact)), 2 * 4 * c.K * c.K * o.accuracy());
  }
}

TEST(Query, SerializedAcrossThreads) {
  QueryOracle o(testing::braess(), OracleMode::kFlowOnly);
  std::vector<std::jthread> workers;
  for (int w = 0; w < 4; ++w)
    workers.emplace_back([&] {
      for (int i = 0; i < 25; ++i) o.query(TollVector::zeros(5));
    });
  workers.clear();
  auto log = o.query_log();
  ASSERT_EQ(log.size(), 100u);
  for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(log[i].response.query_index, static_cast<std::int64_t>(i + 1));
}

TEST(Query, BackdoorReturnsHiddenGame) {
  QueryOracle o(testing::fig1_l2(), OracleMode::kFlowOnly);
  EXPECT_EQ(OracleBackdoor::hidden_game(o).latencies, testing::fig1_l2().latencies);
}

}  // namespace
}  // namespace opttolls
