#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "opttolls/equilibrium.hpp"
#include "opttolls/game.hpp"
#include "opttolls/instances.hpp"
#include "opttolls/io.hpp"
#include "opttolls/oracle.hpp"
#include "opttolls/toll_inference.hpp"
#include "opttolls/zero_order.hpp"

namespace opttolls {

enum class ExperimentOutcome { kPassed, kToleranceFailure, kBudgetExhausted };

inline const char* to_string(ExperimentOutcome o) {
  switch (o) {
    case ExperimentOutcome::kPassed: return "PASSED";
    case ExperimentOutcome::kToleranceFailure: return "TOLERANCE_FAILURE";
    case ExperimentOutcome::kBudgetExhausted: return "BUDGET_EXHAUSTED";
  }
  return "?";
}

inline ExperimentOutcome outcome_from_string(const std::string& s) {
  if (s == "PASSED") return ExperimentOutcome::kPassed;
  if (s == "TOLERANCE_FAILURE") return ExperimentOutcome::kToleranceFailure;
  if (s == "BUDGET_EXHAUSTED") return ExperimentOutcome::kBudgetExhausted;
  throw ParseError("unknown outcome '" + s + "'");
}

struct ExperimentReport {
  std::string instance;
  std::string command;
  io::Json config = io::Json::object();
  io::Json results = io::Json::object();
  std::int64_t oracle_queries = 0;
  double wall_clock_seconds = 0.0;
  ExperimentOutcome outcome = ExperimentOutcome::kPassed;

  io::Json to_json() const {
    io::Json j;
    j["instance"] = instance;
    j["command"] = command;
    j["config"] = config;
    j["results"] = results;
    j["oracle_queries"] = oracle_queries;
    j["wall_clock_seconds"] = io::number(wall_clock_seconds);
    j["outcome"] = to_string(outcome);
    return j;
  }

  static ExperimentReport from_json(const io::Json& j) {
    ExperimentReport r;
    try {
      r.instance = j.at("instance").get<std::string>();
      r.command = j.at("command").get<std::string>();
      r.config = j.at("config");
      r.results = j.at("results");
      r.oracle_queries = j.at("oracle_queries").get<std::int64_t>();
      r.wall_clock_seconds = io::to_number(j.at("wall_clock_seconds"), "wall_clock_seconds");
      r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("report: ") + e.what());
    }
    return r;
  }
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::vector<double> grid_points(int resolution, double hi) {
  std::vector<double> v;
  if (resolution == 1) return {0.0};
  for (int i = 0; i < resolution; ++i) v.push_back(hi * i / (resolution - 1));
  return v;
}

}  // namespace detail

struct ImpossibilityConfig {
  int grid_resolution = 21;
  double max_toll = 2.0;
  double tolerance = 1e-6;
  double oracle_accuracy = 1e-9;
};

/// Queries FLOW_ONLY oracles for the two single-link-pair games over a toll
/// grid and compares their responses, next to the optima each game has.
inline ExperimentReport run_impossibility_demo(const ImpossibilityConfig& cfg = {}) {
  if (cfg.grid_resolution < 1) throw BadSpec("grid resolution must be at least 1");
  detail::Stopwatch clock;
  const RoutingGame g1 = generate({.topology = Topology::kFig1L1});
  const RoutingGame g2 = generate({.topology = Topology::kFig1L2});
  QueryOracle o1(g1, OracleMode::kFlowOnly, {.accuracy = cfg.oracle_accuracy, .keep_log = false});
  QueryOracle o2(g2, OracleMode::kFlowOnly, {.accuracy = cfg.oracle_accuracy, .keep_log = false});

  double worst = 0.0;
  const auto pts = detail::grid_points(cfg.grid_resolution, cfg.max_toll);
  for (double a : pts)
    for (double b : pts) {
      TollVector t(Eigen::Vector2d(a, b));
      worst = std::max(worst, (o1.query(t).aggregate_flow - o2.query(t).aggregate_flow).lpNorm<Eigen::Infinity>());
    }

  ExperimentReport r;
  r.instance = "fig1_l1+fig1_l2";
  r.command = "demo-impossibility";
  r.config = {{"grid_resolution", cfg.grid_resolution},
              {"max_toll", io::number(cfg.max_toll)},
              {"tolerance", io::number(cfg.tolerance)},
              {"oracle_accuracy", io::number(cfg.oracle_accuracy)}};
  io::Json games = io::Json::array();
  std::vector<Eigen::VectorXd> optima;
  for (const auto* g : {&g1, &g2}) {
    auto opt = system_optimum(*g, {.accuracy = 1e-14, .violation_tol = 1e-14});
    optima.push_back(opt.flow.aggregate());
    games.push_back({{"name", g == &g1 ? "fig1_l1" : "fig1_l2"},
                     {"optimal_flow", io::edge_map(g->network, opt.flow.aggregate())},
                     {"optimal_cost", io::number(opt.cost)}});
  }
  const double optimum_gap = (optima[0] - optima[1]).lpNorm<Eigen::Infinity>();
  r.results = {{"toll_points", static_cast<std::int64_t>(pts.size() * pts.size())},
               {"max_discrepancy", io::number(worst)},
               {"games", games},
               {"optimal_flow_distance", io::number(optimum_gap)}};
  r.oracle_queries = o1.query_count() + o2.query_count();
  r.outcome = worst <= cfg.tolerance && optimum_gap > 0.1 ? ExperimentOutcome::kPassed
                                                          : ExperimentOutcome::kToleranceFailure;
  r.wall_clock_seconds = clock.seconds();
  return r;
}

/// Equilibrium of a known game under given tolls.
inline ExperimentReport run_solve_eq(const RoutingGame& game, const TollVector& tolls, const std::string& instance,
                                     const EqConfig& cfg = {}) {
  detail::Stopwatch clock;
  auto eq = solve_equilibrium(game, tolls, cfg);
  ExperimentReport r;
  r.instance = instance;
  r.command = "solve-eq";
  r.config = {{"accuracy", io::number(cfg.accuracy)}, {"tolls", io::tolls_to_json(game.network, tolls)}};
  r.results = {{"flow", io::flow_to_json(game.network, eq.flow)},
               {"total_latency", io::number(total_latency(game, eq.flow))},
               {"beckmann_gap", io::number(eq.beckmann_gap)},
               {"wardrop_violation", io::number(eq.wardrop_violation)},
               {"iterations", eq.iterations}};
  r.outcome = eq.wardrop_violation <= 2 * cfg.accuracy ? ExperimentOutcome::kPassed
                                                       : ExperimentOutcome::kToleranceFailure;
  r.wall_clock_seconds = clock.seconds();
  return r;
}

struct EnforceRun {
  double delta = 1e-3;
  std::optional<std::int64_t> max_queries;
  bool record_trace = false;
};

/// Hides `game` in a FLOW_ONLY oracle and searches for tolls inducing
/// `target`. The iteration trace and the oracle's query log are copied out
/// when the pointers are set.
inline ExperimentReport run_enforce(const RoutingGame& game, const FlowVector& target, const std::string& instance,
                                    const EnforceRun& cfg, std::vector<EnforcementTraceEntry>* trace = nullptr,
                                    std::vector<QueryRecord>* queries = nullptr) {
  detail::Stopwatch clock;
  QueryOracle oracle(game, OracleMode::kFlowOnly, {.max_queries = cfg.max_queries, .keep_log = queries != nullptr});
  auto ecfg = EnforcementConfig::make(cfg.delta, oracle.constants(), game.num_edges(), game.num_commodities());
  ExperimentReport r;
  r.instance = instance;
  r.command = "enforce";
  r.config = {{"delta_enforce", io::number(cfg.delta)},
              {"max_queries", cfg.max_queries ? io::Json(*cfg.max_queries) : io::Json(nullptr)},
              {"target", io::flow_to_json(game.network, target)}};
  try {
    auto res = enforce_flow(oracle, target, ecfg, {.record_trace = cfg.record_trace});
    r.results = {{"status", to_string(res.status)},
                 {"achieved_deviation", io::number_or_null(res.achieved_deviation)},
                 {"tolls", io::tolls_to_json(game.network, res.tolls)},
                 {"iterations", res.iterations},
                 {"queries", res.queries_used}};
    r.outcome = res.status == EnforcementStatus::kSuccess && res.achieved_deviation <= 2 * cfg.delta
                    ? ExperimentOutcome::kPassed
                    : ExperimentOutcome::kToleranceFailure;
    if (trace) *trace = std::move(res.trace);
  } catch (const OracleBudgetExceeded&) {
    r.results = {{"status", "BUDGET_EXHAUSTED"}, {"queries", oracle.query_count()}};
    r.outcome = ExperimentOutcome::kBudgetExhausted;
  }
  r.oracle_queries = oracle.query_count();
  if (queries) *queries = oracle.query_log();
  r.wall_clock_seconds = clock.seconds();
  return r;
}

struct PipelineRun {
  OptConfig opt;
  std::optional<std::int64_t> max_queries;
  /// Oracle accuracy in flow units.
  double oracle_accuracy = 1e-12;
  /// Allowed excess of the induced equilibrium cost over OPT, in units of
  /// epsilon.
  double tolerance_factor = 2.0;
};

/// Generates (or takes) a game, hides it in a FLOW_AND_COST oracle, computes
/// tolls from oracle answers alone and scores them against the exact optimum.
inline ExperimentReport run_pipeline(const RoutingGame& game, const std::string& instance, const PipelineRun& cfg,
                                     OptimizationReport* details = nullptr) {
  detail::Stopwatch clock;
  QueryOracle oracle(game, OracleMode::kFlowAndCost,
                     {.accuracy = cfg.oracle_accuracy, .max_queries = cfg.max_queries, .keep_log = false});
  auto [tolls, rep] = compute_optimal_tolls(oracle, game.network, cfg.opt);

  // Evaluation only: the known latencies give the induced cost and OPT.
  const auto induced = solve_equilibrium(game, tolls);
  const double induced_cost = total_latency(game, induced.flow);
  const double opt = system_optimum(game).cost;
  const double tolerance = cfg.tolerance_factor * cfg.opt.epsilon;

  ExperimentReport r;
  r.instance = instance;
  r.command = "optimize";
  r.config = {{"epsilon", io::number(cfg.opt.epsilon)},
              {"delta", io::number(rep.delta)},
              {"fd_step", io::number(rep.fd_step)},
              {"interior_mix", io::number(cfg.opt.interior_mix)},
              {"max_iterations", cfg.opt.max_iterations},
              {"max_queries", cfg.max_queries ? io::Json(*cfg.max_queries) : io::Json(nullptr)},
              {"oracle_accuracy", io::number(cfg.oracle_accuracy)}};
  r.results = {{"status", to_string(rep.status)},
               {"best_sampled_cost", io::number_or_null(rep.best_cost)},
               {"induced_cost", io::number(induced_cost)},
               {"opt_cost", io::number(opt)},
               {"gap", io::number(induced_cost - opt)},
               {"tolerance", io::number(tolerance)},
               {"tolls", io::tolls_to_json(game.network, tolls)},
               {"induced_flow", io::edge_map(game.network, induced.flow.aggregate())},
               {"iterations", rep.iterations},
               {"reduced_dimension", rep.reduced_dimension},
               {"final_gap_estimate",
                io::number_or_null(rep.final_gap_estimate)}};
  r.oracle_queries = rep.total_oracle_queries;
  if (rep.status == OptStatus::kBudgetExhausted)
    r.outcome = ExperimentOutcome::kBudgetExhausted;
  else
    r.outcome = induced_cost - opt <= tolerance ? ExperimentOutcome::kPassed : ExperimentOutcome::kToleranceFailure;
  r.wall_clock_seconds = clock.seconds();
  if (details) *details = std::move(rep);
  return r;
}

inline ExperimentReport run_pipeline(const InstanceSpec& spec, const PipelineRun& cfg,
                                     OptimizationReport* details = nullptr) {
  return run_pipeline(generate(spec), to_string(spec), cfg, details);
}

struct BenchConfig {
  std::vector<int> sizes{2, 4, 8, 16};
  int degree = 1;
  std::uint64_t seed = 1;
  double epsilon = 0.1;
  double delta_enforce = 1e-3;
  /// Per-size cap on optimization queries; the largest size hits it at the
  /// defaults and is reported as capped.
  std::optional<std::int64_t> max_queries = 60000;
};

/// Least-squares slope of log(y) against log(x) over positive pairs.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly, ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

/// Query counts of enforcement and of the full pipeline on parallel-link
/// games of growing size. The slopes are recorded, not asserted.
inline ExperimentReport run_bench(const BenchConfig& cfg = {}) {
  detail::Stopwatch clock;
  ExperimentReport r;
  r.instance = "parallel";
  r.command = "bench";
  io::Json sizes = io::Json::array();
  for (int m : cfg.sizes) sizes.push_back(m);
  r.config = {{"sizes", sizes},
              {"degree", cfg.degree},
              {"seed", cfg.seed},
              {"epsilon", io::number(cfg.epsilon)},
              {"delta_enforce", io::number(cfg.delta_enforce)},
              {"max_queries", cfg.max_queries ? io::Json(*cfg.max_queries) : io::Json(nullptr)}};

  io::Json rows = io::Json::array();
  // Capped optimization runs only give a lower bound and stay out of the fit.
  std::vector<double> ms, enf_q, opt_m, opt_q;
  bool failed = false, capped = false;
  for (int m : cfg.sizes) {
    const InstanceSpec spec{.topology = Topology::kParallel, .parallel_edges = m, .degree = cfg.degree,
                            .seed = cfg.seed};
    const RoutingGame game = generate(spec);

    // Enforcement of the exact optimum.
    auto enf = run_enforce(game, system_optimum(game).flow, to_string(spec), {.delta = cfg.delta_enforce});
    auto opt = run_pipeline(game, to_string(spec),
                            {.opt = {.epsilon = cfg.epsilon}, .max_queries = cfg.max_queries});
    for (const auto* x : {&enf, &opt}) {
      failed = failed || x->outcome == ExperimentOutcome::kToleranceFailure;
      capped = capped || x->outcome == ExperimentOutcome::kBudgetExhausted;
    }
    ms.push_back(m);
    enf_q.push_back(static_cast<double>(enf.oracle_queries));
    if (opt.outcome == ExperimentOutcome::kPassed) {
      opt_m.push_back(m);
      opt_q.push_back(static_cast<double>(opt.oracle_queries));
    }
    rows.push_back({{"m", m},
                    {"enforce_queries", enf.oracle_queries},
                    {"enforce_seconds", io::number(enf.wall_clock_seconds)},
                    {"optimize_queries", opt.oracle_queries},
                    {"optimize_status", opt.results["status"]},
                    {"optimize_gap", opt.results["gap"]},
                    {"optimize_seconds", io::number(opt.wall_clock_seconds)}});
    r.oracle_queries += enf.oracle_queries + opt.oracle_queries;
  }
  r.results = {{"rows", rows},
               {"enforce_log_log_slope", io::number_or_null(log_log_slope(ms, enf_q))},
               {"optimize_log_log_slope", io::number_or_null(log_log_slope(opt_m, opt_q))}};
  r.outcome = failed   ? ExperimentOutcome::kToleranceFailure
              : capped ? ExperimentOutcome::kBudgetExhausted
                       : ExperimentOutcome::kPassed;
  r.wall_clock_seconds = clock.seconds();
  return r;
}

}  // namespace opttolls
