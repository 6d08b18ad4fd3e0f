// Finds tolls that make a chosen flow the equilibrium, asking a flow-only
// oracle. The target defaults to the optimum of the game.
//
//   enforce_flow [game.json] [target.json] [delta]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "opttolls/opttolls.hpp"

int main(int argc, char** argv) {
  using namespace opttolls;
  const std::string path = argc > 1 ? argv[1] : OPTTOLLS_SAMPLE_DATA "/grid3x2.json";
  RoutingGame game = io::read_game(path);
  FlowVector target = argc > 2 ? io::flow_from_json(game.network, io::read_json_file(argv[2]))
                               : system_optimum(game).flow;
  const double delta = argc > 3 ? std::atof(argv[3]) : 1e-3;

  QueryOracle oracle(game, OracleMode::kFlowOnly);
  auto cfg = EnforcementConfig::make(delta, oracle.constants(), game.num_edges(), game.num_commodities());
  auto r = enforce_flow(oracle, target, cfg);

  std::printf("%s: deviation %.2e after %lld queries\n", to_string(r.status), r.achieved_deviation,
              static_cast<long long>(r.queries_used));
  std::printf("%s\n", io::tolls_to_json(game.network, r.tolls).dump(2).c_str());
  return r.status == EnforcementStatus::kSuccess ? 0 : 2;
}
