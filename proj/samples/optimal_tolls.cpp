// Computes tolls for a game seen only through a flow-and-cost oracle, then
// checks them against the hidden latencies.
//
//   optimal_tolls [game.json] [epsilon]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "opttolls/opttolls.hpp"

int main(int argc, char** argv) {
  using namespace opttolls;
  const std::string path = argc > 1 ? argv[1] : OPTTOLLS_SAMPLE_DATA "/braess.json";
  const double eps = argc > 2 ? std::atof(argv[2]) : 0.02;

  RoutingGame game = io::read_game(path);
  QueryOracle oracle(game, OracleMode::kFlowAndCost, {.accuracy = 1e-12, .keep_log = false});

  // The optimizer gets the graph and demands, nothing else.
  auto [tolls, report] = compute_optimal_tolls(oracle, game.network, {.epsilon = eps});

  std::printf("%s after %d iterations, %lld queries\n", to_string(report.status), report.iterations,
              static_cast<long long>(report.total_oracle_queries));
  for (int e = 0; e < game.num_edges(); ++e) std::printf("  toll %-4s %.6f\n", game.network.arcs[e].id.c_str(), tolls[e]);

  const double induced = total_latency(game, solve_equilibrium(game, tolls).flow);
  const double untolled = total_latency(game, solve_equilibrium(game, TollVector::zeros(game.num_edges())).flow);
  const double opt = system_optimum(game).cost;
  std::printf("cost without tolls %.6f, with tolls %.6f, optimum %.6f\n", untolled, induced, opt);
  return induced <= opt + 2 * eps ? 0 : 2;
}
