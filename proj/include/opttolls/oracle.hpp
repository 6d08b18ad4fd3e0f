#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "opttolls/equilibrium.hpp"
#include "opttolls/errors.hpp"
#include "opttolls/game.hpp"

namespace opttolls {

enum class OracleMode { kFlowOnly, kFlowAndCost };

inline const char* to_string(OracleMode mode) {
  return mode == OracleMode::kFlowOnly ? "FLOW_ONLY" : "FLOW_AND_COST";
}

struct OracleResponse {
  Eigen::VectorXd aggregate_flow;
  std::optional<double> total_cost;
  std::int64_t query_index = 0;
};

struct QueryRecord {
  Eigen::VectorXd tolls;
  OracleResponse response;
};

struct OracleOptions {
  /// Requested accuracy of returned aggregate flows, in flow units.
  double accuracy = 1e-9;
  std::optional<std::int64_t> max_queries;
  /// Long optimization runs issue millions of queries; they switch the log
  /// off and rely on the counter alone.
  bool keep_log = true;
};

/// Answers toll queries with the induced equilibrium of a routing game whose
/// latency functions it never reveals. Queries are serialized.
class QueryOracle {
 public:
  QueryOracle(RoutingGame game, OracleMode mode, OracleOptions options = {})
      : game_(validate_game(game)), constants_(derive_constants(game_)), mode_(mode), options_(options) {
    if (!(options_.accuracy > 0.0)) throw std::invalid_argument("oracle accuracy must be positive");
    eq_config_.accuracy = std::min(1e-8, options_.accuracy / 4.0);
    eq_config_.violation_tol =
        std::max(1e-13 * (1.0 + constants_.T_max), std::min(1e-9, options_.accuracy));
  }

  QueryOracle(const QueryOracle&) = delete;
  QueryOracle& operator=(const QueryOracle&) = delete;

  OracleResponse query(const TollVector& tolls) {
    std::lock_guard lock(mu_);
    if (tolls.size() != game_.num_edges()) throw TollOutOfRange("toll vector has the wrong length");
    const double cap = constants_.T_max * (1.0 + 1e-12);
    for (int e = 0; e < tolls.size(); ++e)
      if (tolls[e] > cap)
        throw TollOutOfRange("toll " + std::to_string(tolls[e]) + " exceeds T_max " +
                             std::to_string(constants_.T_max));
    if (options_.max_queries && count_ >= *options_.max_queries)
      throw OracleBudgetExceeded("query budget of " + std::to_string(*options_.max_queries) + " spent");

    auto eq = solve_equilibrium(game_, tolls, eq_config_);
    OracleResponse response;
    response.aggregate_flow = eq.flow.aggregate();
    if (mode_ == OracleMode::kFlowAndCost) response.total_cost = aggregate_cost(game_, response.aggregate_flow);
    response.query_index = ++count_;
    if (options_.keep_log) log_.push_back({tolls.values(), response});
    return response;
  }

  void reset_counter() {
    std::lock_guard lock(mu_);
    count_ = 0;
    log_.clear();
  }

  std::int64_t query_count() const {
    std::lock_guard lock(mu_);
    return count_;
  }
  std::vector<QueryRecord> query_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  /// Public knowledge about the instance: graph, commodities and bounds.
  const Network& network() const { return game_.network; }
  const GameConstants& constants() const { return constants_; }
  OracleMode mode() const { return mode_; }
  double accuracy() const { return options_.accuracy; }
  const OracleOptions& options() const { return options_; }

 private:
  friend struct OracleBackdoor;

  const RoutingGame game_;
  const GameConstants constants_;
  const OracleMode mode_;
  const OracleOptions options_;
  EqConfig eq_config_;
  mutable std::mutex mu_;
  std::int64_t count_ = 0;
  std::vector<QueryRecord> log_;
};

#ifdef OPTTOLLS_ENABLE_TEST_BACKDOOR
/// Ground-truth access for test suites only.
struct OracleBackdoor {
  static const RoutingGame& hidden_game(const QueryOracle& oracle) { return oracle.game_; }
};
#endif

}  // namespace opttolls
