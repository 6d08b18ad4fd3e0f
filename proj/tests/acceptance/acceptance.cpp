// Acceptance checks 1-6. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. The bench report is written next to the binary.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "opttolls/opttolls.hpp"
#include "test_support.hpp"

namespace {

using namespace opttolls;
namespace ts = opttolls::testing;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double num(const io::Json& j) { return io::to_number(j, "report field"); }

Outcome impossibility() {
  auto r = run_impossibility_demo({.grid_resolution = 21, .max_toll = 2.0});
  const auto& g = r.results["games"];
  const double disc = num(r.results["max_discrepancy"]);
  const double f1a = num(g[0]["optimal_flow"]["e0"]), f1b = num(g[0]["optimal_flow"]["e1"]);
  const double f2a = num(g[1]["optimal_flow"]["e0"]), f2b = num(g[1]["optimal_flow"]["e1"]);
  const double c1 = num(g[0]["optimal_cost"]), c2 = num(g[1]["optimal_cost"]);
  bool ok = disc <= 1e-6;
  ok = ok && std::abs(f1a) <= 1e-9 && std::abs(f1b - 1) <= 1e-9;
  ok = ok && std::abs(f2a - 0.5) <= 1e-9 && std::abs(f2b - 0.5) <= 1e-9;
  ok = ok && std::abs(c1) <= 1e-9 && std::abs(c2 - 0.75) <= 1e-9;
  ok = ok && r.wall_clock_seconds < 10.0;
  return {ok, fmt("max discrepancy %.2e on 441 toll points; optimal costs %.12f and %.12f", disc, c1, c2)};
}

Outcome equilibrium() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> toll(0.0, 2.0);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int m = 2 + n % 3;
    auto game = generate({.topology = Topology::kParallel, .parallel_edges = m, .degree = 1 + n % 3,
                          .seed = static_cast<std::uint64_t>(1000 + n)});
    Eigen::VectorXd t(m);
    for (auto& x : t) x = toll(rng);
    auto eq = solve_equilibrium(game, TollVector(t));
    worst = std::max(worst, (eq.flow.aggregate() - ts::parallel_equilibrium(game, t)).lpNorm<Eigen::Infinity>());
  }
  const auto braess = ts::braess();
  const double cost = total_latency(braess, solve_equilibrium(braess, TollVector::zeros(5)).flow);
  return {worst <= 1e-6 && std::abs(cost - 2.0) <= 1e-6,
          fmt("worst closed-form deviation %.2e over 100 games; Braess cost %.9f", worst, cost)};
}

RoutingGame random_instance(int n, std::mt19937_64& rng) {
  const auto seed = static_cast<std::uint64_t>(rng());
  const int degree = 1 + n % 3;
  const int k = 1 + (n / 3) % 2;
  switch (n % 5) {
    case 0:
    case 1: return generate({.topology = Topology::kParallel, .parallel_edges = 2 + n % 15, .degree = degree,
                             .seed = seed});
    case 2: return generate({.topology = Topology::kGrid, .grid_width = 2 + n % 2, .grid_height = 2 + (n / 2) % 2,
                             .degree = degree, .commodities = k, .seed = seed});
    case 3: return generate({.topology = Topology::kRandomDag, .dag_vertices = 4 + n % 3, .dag_density = 0.5,
                             .degree = degree, .commodities = k, .seed = seed});
    default: return n % 2 ? ts::braess() : generate({.topology = Topology::kGrid, .grid_width = 3, .grid_height = 3,
                                                     .degree = degree, .commodities = k, .seed = seed});
  }
}

Outcome enforcement() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  const double delta = 1e-3;
  int failures = 0, violations = 0, largest = 0;
  double worst = 0.0;
  std::int64_t queries = 0;
  for (int n = 0; n < 50; ++n) {
    auto game = random_instance(n, rng);
    largest = std::max(largest, game.num_edges());
    auto target = ts::random_path_flow(game.network, rng);
    const Eigen::VectorXd cert = ts::potential_tolls(game, target);
    QueryOracle oracle(game, OracleMode::kFlowOnly);
    auto cfg = EnforcementConfig::make(delta, oracle.constants(), game.num_edges(), game.num_commodities());
    EnforcementHooks hooks;
    hooks.on_update = [&](const Ellipsoid& E) { violations += !E.contains(cert, 1e-6); };
    auto r = enforce_flow(oracle, target, cfg, hooks);
    failures += r.status != EnforcementStatus::kSuccess || !(r.achieved_deviation <= 2 * delta);
    if (r.status == EnforcementStatus::kSuccess) worst = std::max(worst, r.achieved_deviation);
    queries += r.queries_used;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && violations == 0 && largest <= 16 && secs < 60.0,
          fmt("%.0f failures, %.0f certificate violations, worst deviation %.2e, %.0f queries", failures, violations,
              worst, static_cast<double>(queries))};
}

Outcome oracle_accuracy() {
  std::mt19937_64 rng(5);
  const double delta = 1e-2;
  double worst = 0.0;
  int over = 0;
  for (int n = 0; n < 100; ++n) {
    auto game = random_instance(n, rng);
    QueryOracle oracle(game, OracleMode::kFlowAndCost, {.accuracy = 1e-12, .keep_log = false});
    auto f = ts::random_path_flow(game.network, rng);
    auto s = zero_order_cost_oracle(oracle, f, delta);
    const double err = std::abs(s.observed_cost - total_latency(game, f));
    worst = std::max(worst, err);
    over += err > delta;
  }
  return {over == 0, fmt("worst |observed - exact| = %.2e over 100 flows (bound %.0e)", worst, delta)};
}

Outcome end_to_end() {
  auto t0 = std::chrono::steady_clock::now();
  const double eps = 0.02;
  std::vector<std::pair<std::string, RoutingGame>> games{
      {"pigou", ts::pigou()}, {"fig1_l2", ts::fig1_l2()}, {"braess", ts::braess()}};
  const std::vector<InstanceSpec> random{
      {.topology = Topology::kParallel, .parallel_edges = 3, .degree = 1, .seed = 1},
      {.topology = Topology::kParallel, .parallel_edges = 4, .degree = 1, .seed = 2},
      {.topology = Topology::kParallel, .parallel_edges = 5, .degree = 1, .seed = 3},
      {.topology = Topology::kParallel, .parallel_edges = 3, .degree = 2, .seed = 4},
      {.topology = Topology::kParallel, .parallel_edges = 4, .degree = 2, .seed = 5},
      {.topology = Topology::kGrid, .grid_width = 2, .grid_height = 2, .degree = 1, .seed = 6},
      {.topology = Topology::kGrid, .grid_width = 3, .grid_height = 2, .degree = 1, .seed = 7},
      {.topology = Topology::kGrid, .grid_width = 2, .grid_height = 3, .degree = 1, .seed = 8},
      {.topology = Topology::kGrid, .grid_width = 2, .grid_height = 2, .degree = 2, .seed = 9},
      {.topology = Topology::kGrid, .grid_width = 3, .grid_height = 2, .degree = 2, .seed = 10},
  };
  for (const auto& s : random) games.emplace_back(to_string(s) + "/seed" + std::to_string(s.seed), generate(s));

  int failures = 0;
  double worst = -1.0;
  std::string worst_name;
  std::int64_t queries = 0;
  for (const auto& [name, game] : games) {
    auto r = run_pipeline(game, name, {.opt = {.epsilon = eps}});
    const double gap = num(r.results["gap"]);
    // Small instances: the reference optimum must agree with a path-split grid.
    if (ts::enumerate_paths(game.network, game.network.commodities[0].source, game.network.commodities[0].sink)
                .size() <= 3 &&
        game.num_commodities() == 1)
      failures += std::abs(num(r.results["opt_cost"]) - ts::brute_force_opt(game)) > 1e-4;
    failures += !(gap <= 2 * eps);
    if (gap > worst) worst = gap, worst_name = name;
    queries += r.oracle_queries;
    std::printf("  %-28s gap %.2e  queries %lld  %s\n", name.c_str(), gap, static_cast<long long>(r.oracle_queries),
                r.results["status"].get<std::string>().c_str());
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 300.0,
          fmt("%.0f instances, %.0f over OPT + 2 eps, worst gap %.2e, %.0f queries", games.size(), failures, worst,
              static_cast<double>(queries)) +
              " (" + worst_name + ")"};
}

Outcome numerics(const std::string& bench_path) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Convexity of total latency along random chords.
  int convexity = 0;
  for (int n = 0; n < 10000; ++n) {
    auto game = random_instance(n % 50, rng);
    auto f = ts::random_path_flow(game.network, rng), g = ts::random_path_flow(game.network, rng);
    const double lam = unit(rng);
    FlowVector mid(lam * f.per_commodity() + (1 - lam) * g.per_commodity());
    const double lhs = total_latency(game, mid);
    const double rhs = lam * total_latency(game, f) + (1 - lam) * total_latency(game, g);
    convexity += lhs > rhs + 1e-12 * (1 + std::abs(rhs));
  }

  // Volume ratio of central cuts.
  double ratio_err = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int D = 2; D <= 16; ++D)
    for (int t = 0; t < 10; ++t) {
      Eigen::MatrixXd A(D, D);
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) A(i, j) = normal(rng) + (i == j ? 3.0 : 0.0);
      Ellipsoid E(Eigen::VectorXd::Zero(D), A);
      Eigen::VectorXd g(D);
      for (auto& x : g) x = normal(rng);
      auto next = E.cut_keep_geq(g);
      const double d = D;
      const double analytic = d / (d + 1) * std::pow(d * d / (d * d - 1), (d - 1) / 2);
      const double measured =
          std::abs(next.factor().determinant()) / std::abs(E.factor().determinant());
      ratio_err = std::max(ratio_err, std::abs(measured - analytic));
    }

  // Finite-difference gradients from cost-oracle samples against the analytic
  // gradient projected onto the affine hull.
  double grad_excess = 0.0, grad_abs = 0.0;
  for (int n = 0; n < 4; ++n) {
    RoutingGame game = n == 0   ? ts::pigou()
                       : n == 1 ? ts::braess()
                       : n == 2 ? generate({.topology = Topology::kParallel, .parallel_edges = 4, .degree = 2,
                                            .seed = 3})
                                : generate({.topology = Topology::kGrid, .grid_width = 3, .grid_height = 2,
                                            .degree = 2, .seed = 4});
    QueryOracle oracle(game, OracleMode::kFlowAndCost, {.accuracy = 1e-12, .keep_log = false});
    FlowGeometry geom(game.network);
    const double h = 1e-3, delta = 1e-8;
    const double k2 = curvature_bound(oracle.constants());
    FlowVector f(0.5 * geom.reference().per_commodity() + 0.5 * ts::random_path_flow(game.network, rng).per_commodity());
    auto est = estimate_gradient(oracle, f, h, delta);
    Eigen::VectorXd exact(f.num_commodities() * f.num_edges());
    for (int i = 0; i < f.num_commodities(); ++i)
      for (int e = 0; e < f.num_edges(); ++e) {
        const double x = f.aggregate()[e];
        exact[i * f.num_edges() + e] = game.latencies[e](x) + x * game.latencies[e].derivative(x);
      }
    const Eigen::VectorXd exact_reduced = geom.basis().transpose() * exact;
    const double err = (est.reduced - exact_reduced).lpNorm<Eigen::Infinity>();
    grad_excess = std::max(grad_excess, err / std::max(1e-4, k2 * h));
    grad_abs = std::max(grad_abs, err);
  }

  auto bench = run_bench();
  io::write_json_file(bench_path, bench.to_json());
  const auto slope = bench.results["optimize_log_log_slope"];
  const auto enf_slope = bench.results["enforce_log_log_slope"];
  std::printf("  bench: enforce slope %s, optimize slope %s (converged sizes only), report %s\n",
              enf_slope.is_null() ? "n/a" : enf_slope.get<std::string>().c_str(),
              slope.is_null() ? "n/a" : slope.get<std::string>().c_str(), bench_path.c_str());
  for (const auto& row : bench.results["rows"])
    std::printf("    m=%-3d enforce %6lld queries, optimize %8lld queries (%s)\n", row["m"].get<int>(),
                static_cast<long long>(row["enforce_queries"].get<std::int64_t>()),
                static_cast<long long>(row["optimize_queries"].get<std::int64_t>()),
                row["optimize_status"].get<std::string>().c_str());

  return {convexity == 0 && ratio_err <= 1e-9 && grad_excess <= 1.0,
          fmt("%.0f convexity violations in 1e4, volume-ratio error %.2e, gradient error %.2e (%.3f of bound)",
              convexity, ratio_err, grad_abs, grad_excess)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string bench_path = argc > 1 ? argv[1] : "acceptance_bench.json";
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"impossibility", impossibility},
      {"equilibrium", equilibrium},
      {"enforcement", enforcement},
      {"oracle-accuracy", oracle_accuracy},
      {"end-to-end", end_to_end},
      {"numerics", [&] { return numerics(bench_path); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    std::printf("%s %zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
