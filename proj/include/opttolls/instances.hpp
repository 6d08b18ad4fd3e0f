#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "opttolls/errors.hpp"
#include "opttolls/game.hpp"

namespace opttolls {

enum class Topology { kParallel, kPigou, kBraess, kFig1L1, kFig1L2, kGrid, kRandomDag };

struct InstanceSpec {
  Topology topology = Topology::kPigou;
  int parallel_edges = 2;
  int grid_width = 2;
  int grid_height = 2;
  int dag_vertices = 5;
  double dag_density = 0.5;
  int degree = 1;
  double coef_bound = 1.0;
  double demand = 1.0;
  int commodities = 1;
  std::uint64_t seed = 0;
};

inline std::string to_string(const InstanceSpec& spec) {
  switch (spec.topology) {
    case Topology::kParallel: return "parallel:" + std::to_string(spec.parallel_edges);
    case Topology::kPigou: return "pigou";
    case Topology::kBraess: return "braess";
    case Topology::kFig1L1: return "fig1_l1";
    case Topology::kFig1L2: return "fig1_l2";
    case Topology::kGrid:
      return "grid:" + std::to_string(spec.grid_width) + "x" + std::to_string(spec.grid_height);
    case Topology::kRandomDag: {
      std::string d = std::to_string(spec.dag_density);
      d.erase(d.find_last_not_of('0') + 1);
      if (d.back() == '.') d.pop_back();
      return "random_dag:" + std::to_string(spec.dag_vertices) + ":" + d;
    }
  }
  return "?";
}

/// Parses "pigou", "braess", "fig1_l1", "fig1_l2", "parallel:P", "grid:WxH"
/// or "random_dag:N:DENSITY" into the topology fields of `base`.
inline InstanceSpec parse_topology(const std::string& text, InstanceSpec base = {}) {
  auto fail = [&]() -> InstanceSpec { throw BadSpec("unknown topology '" + text + "'"); };
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) fail();
      return v;
    } catch (const std::logic_error&) {
      fail();
    }
    return 0;
  };
  if (text == "pigou") base.topology = Topology::kPigou;
  else if (text == "braess") base.topology = Topology::kBraess;
  else if (text == "fig1_l1") base.topology = Topology::kFig1L1;
  else if (text == "fig1_l2") base.topology = Topology::kFig1L2;
  else if (text.rfind("parallel:", 0) == 0) {
    base.topology = Topology::kParallel;
    base.parallel_edges = to_int(text.substr(9));
  } else if (text.rfind("grid:", 0) == 0) {
    base.topology = Topology::kGrid;
    auto rest = text.substr(5);
    auto x = rest.find('x');
    if (x == std::string::npos) return fail();
    base.grid_width = to_int(rest.substr(0, x));
    base.grid_height = to_int(rest.substr(x + 1));
  } else if (text.rfind("random_dag:", 0) == 0) {
    base.topology = Topology::kRandomDag;
    auto rest = text.substr(11);
    auto colon = rest.find(':');
    if (colon == std::string::npos) return fail();
    base.dag_vertices = to_int(rest.substr(0, colon));
    try {
      base.dag_density = std::stod(rest.substr(colon + 1));
    } catch (const std::logic_error&) {
      return fail();
    }
  } else {
    return fail();
  }
  return base;
}

namespace detail {

class CoefficientSampler {
 public:
  CoefficientSampler(std::uint64_t seed, int degree, double bound)
      : rng_(seed), degree_(degree), bound_(bound) {}

  /// Random strictly increasing polynomial with coefficients in [0, bound],
  /// rounded to three decimals; the linear term is at least bound/4.
  PolyLatency next() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> c(degree_ + 1);
    for (int j = 0; j <= degree_; ++j) c[j] = round3(bound_ * unit(rng_));
    c[1] = std::max(c[1], round3(0.25 * bound_ + 0.75 * bound_ * unit(rng_)));
    if (c[1] <= 0.0) c[1] = 0.001;
    return PolyLatency(std::move(c));
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  static double round3(double x) { return std::round(x * 1000.0) / 1000.0; }
  std::mt19937_64 rng_;
  int degree_;
  double bound_;
};

inline void add_edge(RoutingGame& g, int tail, int head, PolyLatency lat) {
  g.network.arcs.push_back({"e" + std::to_string(g.network.arcs.size()), tail, head});
  g.latencies.push_back(std::move(lat));
}

}  // namespace detail

/// Builds a game from a spec. Random topologies are deterministic in `seed`.
inline RoutingGame generate(const InstanceSpec& spec) {
  if (spec.degree < 1 && (spec.topology == Topology::kParallel || spec.topology == Topology::kGrid ||
                          spec.topology == Topology::kRandomDag))
    throw BadSpec("degree must be at least 1 for random latencies");
  if (!(spec.coef_bound > 0.0)) throw BadSpec("coefficient bound must be positive");
  if (!(spec.demand > 0.0)) throw BadSpec("demand must be positive");
  if (spec.commodities < 1 || spec.commodities > 2) throw BadSpec("1 or 2 commodities supported");

  RoutingGame g;
  auto& net = g.network;
  detail::CoefficientSampler sample(spec.seed, std::max(1, spec.degree), spec.coef_bound);
  const PolyLatency identity = PolyLatency::linear(0.0, 1.0);

  auto two_terminal = [&] {
    net.vertices = {"s", "t"};
    net.commodities = {{0, 1, spec.demand}};
  };
  switch (spec.topology) {
    case Topology::kPigou:
      two_terminal();
      detail::add_edge(g, 0, 1, identity);
      detail::add_edge(g, 0, 1, PolyLatency::constant_value(1.0));
      break;
    case Topology::kFig1L1:
      two_terminal();
      detail::add_edge(g, 0, 1, identity);
      detail::add_edge(g, 0, 1, PolyLatency::constant_value(0.0));
      break;
    case Topology::kFig1L2:
      two_terminal();
      detail::add_edge(g, 0, 1, PolyLatency::constant_value(1.0));
      detail::add_edge(g, 0, 1, identity);
      break;
    case Topology::kBraess:
      net.vertices = {"s", "v", "w", "t"};
      net.commodities = {{0, 3, spec.demand}};
      detail::add_edge(g, 0, 1, identity);
      detail::add_edge(g, 0, 2, PolyLatency::constant_value(1.0));
      detail::add_edge(g, 1, 3, PolyLatency::constant_value(1.0));
      detail::add_edge(g, 2, 3, identity);
      detail::add_edge(g, 1, 2, PolyLatency::constant_value(0.0));
      break;
    case Topology::kParallel:
      if (spec.parallel_edges < 1) throw BadSpec("parallel needs at least one edge");
      two_terminal();
      for (int e = 0; e < spec.parallel_edges; ++e) detail::add_edge(g, 0, 1, sample.next());
      break;
    case Topology::kGrid: {
      const int w = spec.grid_width, h = spec.grid_height;
      if (w < 1 || h < 1 || w * h < 2) throw BadSpec("grid needs at least two vertices");
      auto id = [w](int r, int c) { return r * w + c; };
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) net.vertices.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          if (c + 1 < w) detail::add_edge(g, id(r, c), id(r, c + 1), sample.next());
          if (r + 1 < h) detail::add_edge(g, id(r, c), id(r + 1, c), sample.next());
        }
      net.commodities = {{id(0, 0), id(h - 1, w - 1), spec.demand}};
      if (spec.commodities == 2) {
        int src = w >= 2 ? id(0, 1) : id(1, 0);
        if (src == id(h - 1, w - 1)) throw BadSpec("grid too small for a second commodity");
        net.commodities.push_back({src, id(h - 1, w - 1), spec.demand});
      }
      break;
    }
    case Topology::kRandomDag: {
      const int n = spec.dag_vertices;
      if (n < 2) throw BadSpec("random_dag needs at least two vertices");
      if (spec.dag_density < 0.0 || spec.dag_density > 1.0) throw BadSpec("density must be in [0, 1]");
      for (int v = 0; v < n; ++v) net.vertices.push_back("v" + std::to_string(v));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
          if (v == u + 1 || unit(sample.rng()) < spec.dag_density) detail::add_edge(g, u, v, sample.next());
      net.commodities = {{0, n - 1, spec.demand}};
      if (spec.commodities == 2) {
        if (n < 3) throw BadSpec("random_dag too small for a second commodity");
        net.commodities.push_back({1, n - 1, spec.demand});
      }
      break;
    }
  }
  if (spec.commodities == 2 && spec.topology != Topology::kGrid && spec.topology != Topology::kRandomDag)
    throw BadSpec("a second commodity is only supported on grid and random_dag");
  return validate_game(g);
}

}  // namespace opttolls
