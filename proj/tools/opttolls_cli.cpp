// Command-line front end: instance generation, equilibrium solves, toll
// enforcement, toll optimization, the two-game demo and the query benchmark.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "opttolls/opttolls.hpp"

namespace {

using namespace opttolls;

constexpr int kExitOk = 0;
constexpr int kExitTolerance = 2;
constexpr int kExitInvalid = 3;
constexpr int kExitBudget = 4;

struct Common {
  std::string instance;
  std::string topology;
  std::string out;
  std::string trace;
  std::uint64_t seed = 0;
  int degree = 1;
  double coef_bound = 1.0;
  double demand = 1.0;
  int commodities = 1;
  std::int64_t max_queries = 0;

  std::optional<std::int64_t> budget() const {
    return max_queries > 0 ? std::optional<std::int64_t>(max_queries) : std::nullopt;
  }
};

InstanceSpec spec_of(const Common& c) {
  InstanceSpec base{.degree = c.degree, .coef_bound = c.coef_bound, .demand = c.demand, .commodities = c.commodities,
                    .seed = c.seed};
  return parse_topology(c.topology, base);
}

// Game from --instance, otherwise generated from --topology.
std::pair<RoutingGame, std::string> load_game(const Common& c) {
  if (!c.instance.empty()) return {io::read_game(c.instance), c.instance};
  if (c.topology.empty()) throw BadSpec("give --instance or --topology");
  auto spec = spec_of(c);
  return {generate(spec), to_string(spec)};
}

void emit(const Common& c, const io::Json& j) {
  if (c.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_json_file(c.out, j);
}

int finish(const Common& c, const ExperimentReport& r) {
  emit(c, r.to_json());
  if (!c.out.empty()) std::cerr << r.command << " " << r.instance << ": " << to_string(r.outcome) << "\n";
  switch (r.outcome) {
    case ExperimentOutcome::kPassed: return kExitOk;
    case ExperimentOutcome::kBudgetExhausted: return kExitBudget;
    case ExperimentOutcome::kToleranceFailure: return kExitTolerance;
  }
  return kExitTolerance;
}

bool invalid_input(const std::exception& e) {
  return dynamic_cast<const ParseError*>(&e) || dynamic_cast<const InvalidGame*>(&e) ||
         dynamic_cast<const BadSpec*>(&e) || dynamic_cast<const InvalidFlow*>(&e) ||
         dynamic_cast<const TargetInfeasible*>(&e) || dynamic_cast<const TargetCyclic*>(&e) ||
         dynamic_cast<const TollOutOfRange*>(&e) || dynamic_cast<const std::invalid_argument*>(&e);
}

void add_instance_flags(CLI::App* app, Common& c) {
  app->add_option("--instance", c.instance, "game JSON file");
  app->add_option("--topology", c.topology,
                  "pigou, braess, fig1_l1, fig1_l2, parallel:P, grid:WxH or random_dag:N:DENSITY");
  app->add_option("--seed", c.seed, "seed for generated latencies");
  app->add_option("--degree", c.degree, "latency degree for generated games");
  app->add_option("--coef-bound", c.coef_bound, "coefficient bound for generated games");
  app->add_option("--demand", c.demand, "demand per commodity");
  app->add_option("--commodities", c.commodities, "1 or 2 (grid and random_dag only)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toll inference and optimization from equilibrium queries"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("gen", "write a generated game as JSON");
  add_instance_flags(gen, c);
  gen->add_option("--out", c.out, "output file (stdout if omitted)");

  std::string tolls_path;
  auto* solve = app.add_subcommand("solve-eq", "equilibrium of a known game under tolls");
  add_instance_flags(solve, c);
  solve->add_option("--tolls", tolls_path, "toll JSON (zero tolls if omitted)");
  solve->add_option("--out", c.out, "report file");

  std::string target_path;
  double delta_enforce = 1e-3;
  auto* enforce = app.add_subcommand("enforce", "find tolls inducing a target flow from flow queries");
  add_instance_flags(enforce, c);
  enforce->add_option("--target", target_path, "target flow JSON (the system optimum if omitted)");
  enforce->add_option("--delta-enforce", delta_enforce, "allowed deviation in max norm")->check(CLI::PositiveNumber);
  enforce->add_option("--max-queries", c.max_queries, "oracle query budget");
  enforce->add_option("--trace", c.trace, "iteration trace (JSON lines)");
  std::string query_log;
  enforce->add_option("--query-log", query_log, "every oracle query and answer (JSON lines)");
  enforce->add_option("--out", c.out, "report file");

  PipelineRun pipeline;
  double delta = 0.0;
  auto* optimize = app.add_subcommand("optimize", "optimal tolls from flow and cost queries");
  add_instance_flags(optimize, c);
  optimize->add_option("--epsilon", pipeline.opt.epsilon, "target accuracy")->check(CLI::PositiveNumber);
  optimize->add_option("--delta", delta, "cost-oracle accuracy (default derived from epsilon)");
  optimize->add_option("--max-iterations", pipeline.opt.max_iterations, "descent iterations");
  optimize->add_option("--max-queries", c.max_queries, "oracle query budget");
  optimize->add_option("--trace", c.trace, "iteration trace (JSON lines)");
  optimize->add_option("--out", c.out, "report file");

  ImpossibilityConfig demo;
  auto* demo_cmd = app.add_subcommand("demo-impossibility", "flow-only oracles cannot tell the two games apart");
  demo_cmd->add_option("--grid", demo.grid_resolution, "points per toll axis")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--out", c.out, "report file");

  BenchConfig bench;
  auto* bench_cmd = app.add_subcommand("bench", "query counts on parallel links of growing size");
  bench_cmd->add_option("--sizes", bench.sizes, "edge counts")->delimiter(',');
  bench_cmd->add_option("--degree", bench.degree, "latency degree");
  bench_cmd->add_option("--seed", bench.seed, "instance seed");
  bench_cmd->add_option("--epsilon", bench.epsilon, "optimization accuracy")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--delta-enforce", bench.delta_enforce, "enforcement accuracy")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--max-queries", c.max_queries, "per-size optimization budget");
  bench_cmd->add_option("--out", c.out, "report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen) {
      auto [game, id] = load_game(c);
      emit(c, io::game_to_json(game));
      return kExitOk;
    }
    if (*solve) {
      auto [game, id] = load_game(c);
      TollVector tolls = tolls_path.empty() ? TollVector::zeros(game.num_edges())
                                            : io::tolls_from_json(game.network, io::read_json_file(tolls_path));
      return finish(c, run_solve_eq(game, tolls, id));
    }
    if (*enforce) {
      auto [game, id] = load_game(c);
      FlowVector target = target_path.empty() ? system_optimum(game).flow
                                              : io::flow_from_json(game.network, io::read_json_file(target_path));
      std::vector<EnforcementTraceEntry> trace;
      std::vector<QueryRecord> queries;
      auto r = run_enforce(game, target, id,
                           {.delta = delta_enforce, .max_queries = c.budget(), .record_trace = !c.trace.empty()},
                           &trace, query_log.empty() ? nullptr : &queries);
      if (!query_log.empty()) {
        std::ofstream os(query_log);
        io::write_query_log(os, game.network, queries);
      }
      if (!c.trace.empty()) {
        std::ofstream os(c.trace);
        io::write_lines(os, trace, [&](const auto& t) { return io::trace_to_json(game.network, t); });
      }
      return finish(c, r);
    }
    if (*optimize) {
      auto [game, id] = load_game(c);
      if (delta > 0.0) pipeline.opt.delta = delta;
      pipeline.max_queries = c.budget();
      OptimizationReport details;
      auto r = run_pipeline(game, id, pipeline, &details);
      if (!c.trace.empty()) {
        std::ofstream os(c.trace);
        io::write_lines(os, details.trace, [](const auto& t) { return io::trace_to_json(t); });
      }
      return finish(c, r);
    }
    if (*demo_cmd) return finish(c, run_impossibility_demo(demo));
    if (*bench_cmd) {
      if (c.budget()) bench.max_queries = c.budget();
      return finish(c, run_bench(bench));
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return invalid_input(e) ? kExitInvalid : 1;
  }
  return kExitOk;
}
