#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "opttolls/errors.hpp"
#include "opttolls/game.hpp"
#include "opttolls/graph.hpp"

namespace opttolls {

struct EqConfig {
  /// Target Beckmann duality gap (potential units). Success requires it.
  double accuracy = 1e-8;
  /// After the gap target is met the solver keeps equilibrating until the
  /// worst used path is within this of its commodity's shortest path, or
  /// until progress stalls at floating-point resolution.
  double violation_tol = 1e-12;
  int max_iterations = 20000;
};

struct EquilibriumResult {
  FlowVector flow;
  double beckmann_gap = 0.0;
  double wardrop_violation = 0.0;
  int iterations = 0;
};

/// sum_e [ int_0^{f_e} l_e + tau_e f_e ].
inline double beckmann_potential(const RoutingGame& game, const TollVector& tolls, const FlowVector& f) {
  if (!is_feasible(game, f)) throw Infeasible("beckmann_potential requires a feasible flow");
  double total = 0.0;
  for (int e = 0; e < game.num_edges(); ++e) {
    double x = f.aggregate()[e];
    total += game.latencies[e].integral(x) + tolls[e] * x;
  }
  return total;
}

namespace detail {

struct PathFlow {
  std::vector<int> edges;
  double flow = 0.0;
};

/// Path-based equilibration. Each commodity keeps a working set of paths;
/// a sweep adds the current shortest path (the linear-minimization step of
/// conditional gradient) and then moves flow pairwise from every other path
/// onto it with an exact line search on the potential. The duality gap of
/// the shortest-path oracle is the stopping certificate.
class PathEquilibrator {
 public:
  PathEquilibrator(const RoutingGame& game, const TollVector& tolls)
      : game_(game), tolls_(tolls), out_(game.network.out_edges()),
        load_(Eigen::VectorXd::Zero(game.num_edges())), paths_(game.num_commodities()) {}

  EquilibriumResult solve(const EqConfig& cfg) {
    const Network& net = game_.network;
    for (int i = 0; i < net.num_commodities(); ++i) {
      const Path& sp = cheapest(i);
      paths_[i].push_back({sp.edges, net.commodities[i].demand});
      for (int e : sp.edges) load_[e] += net.commodities[i].demand;
    }

    double best_violation = std::numeric_limits<double>::infinity();
    int stalled = 0;
    int sweep = 0;
    Certificate cert = certificate();
    // Path costs carry rounding of order eps * cost, so a gap target below
    // that floor is raised to it.
    auto target = [&] { return std::max(cfg.accuracy, 32.0 * std::numeric_limits<double>::epsilon() * cert.scale); };
    while (sweep < cfg.max_iterations) {
      if (cert.gap <= target() && (cert.violation <= cfg.violation_tol || stalled >= kStallSweeps)) break;
      ++sweep;
      for (int i = 0; i < net.num_commodities(); ++i) equilibrate(i);
      cert = certificate();
      if (cert.violation < best_violation * (1.0 - 1e-3)) {
        best_violation = cert.violation;
        stalled = 0;
      } else {
        ++stalled;
      }
    }
    if (cert.gap > target())
      throw NoConvergence("equilibrium gap " + std::to_string(cert.gap) + " after " +
                          std::to_string(sweep) + " sweeps");
    return {assemble(), cert.gap, cert.violation, sweep};
  }

 private:
  static constexpr int kStallSweeps = 25;

  struct Certificate {
    double gap = 0.0;
    double violation = 0.0;
    /// sum_i d_i * (costliest used path of i).
    double scale = 0.0;
  };

  double edge_cost(int e, double x) const { return game_.latencies[e](x) + tolls_[e]; }

  const std::vector<double>& edge_costs() {
    costs_.resize(game_.num_edges());
    for (int e = 0; e < game_.num_edges(); ++e) costs_[e] = edge_cost(e, load_[e]);
    return costs_;
  }

  const Path& cheapest(int i) {
    const Commodity& c = game_.network.commodities[i];
    return shortest_path(game_.network, out_, edge_costs(), c.source, c.sink, ws_);
  }

  double path_cost(const std::vector<int>& edges, const std::vector<double>& costs) const {
    double total = 0.0;
    for (int e : edges) total += costs[e];
    return total;
  }

  Certificate certificate() {
    const Network& net = game_.network;
    Certificate cert;
    for (int i = 0; i < net.num_commodities(); ++i) {
      const double shortest = cheapest(i).distance;
      double costliest = std::abs(shortest);
      for (const auto& p : paths_[i]) {
        if (p.flow <= 0.0) continue;
        const double c = path_cost(p.edges, costs_);
        costliest = std::max(costliest, std::abs(c));
        double excess = std::max(0.0, c - shortest);
        cert.gap += p.flow * excess;
        cert.violation = std::max(cert.violation, excess);
      }
      cert.scale += net.commodities[i].demand * costliest;
    }
    return cert;
  }

  void equilibrate(int i) {
    const Network& net = game_.network;
    auto& paths = paths_[i];
    const Path& sp = cheapest(i);
    std::size_t target = paths.size();
    for (std::size_t p = 0; p < paths.size(); ++p)
      if (paths[p].edges == sp.edges) target = p;
    if (target == paths.size()) paths.push_back({sp.edges, 0.0});
    for (std::size_t p = 0; p < paths.size(); ++p) {
      if (p == target || paths[p].flow <= 0.0) continue;
      shift(paths[p], paths[target]);
    }
    std::erase_if(paths, [](const PathFlow& p) { return p.flow <= 0.0; });
  }

  /// Exact line search moving t in [0, from.flow] units from `from` to `to`.
  /// The directional derivative g(t) = cost(to) - cost(from) restricted to
  /// the symmetric difference is nondecreasing in t.
  void shift(PathFlow& from, PathFlow& to) {
    auto& lose = lose_;
    auto& gain = gain_;
    lose.clear();
    gain.clear();
    for (int e : from.edges)
      if (std::find(to.edges.begin(), to.edges.end(), e) == to.edges.end()) lose.push_back(e);
    for (int e : to.edges)
      if (std::find(from.edges.begin(), from.edges.end(), e) == from.edges.end()) gain.push_back(e);

    auto slope = [&](double t) {
      double g = 0.0;
      for (int e : gain) g += edge_cost(e, load_[e] + t);
      for (int e : lose) g -= edge_cost(e, load_[e] - t);
      return g;
    };
    auto curvature = [&](double t) {
      double h = 0.0;
      for (int e : gain) h += game_.latencies[e].derivative(load_[e] + t);
      for (int e : lose) h += game_.latencies[e].derivative(std::max(0.0, load_[e] - t));
      return h;
    };

    const double cap = from.flow;
    if (slope(0.0) >= 0.0) return;
    double t;
    if (slope(cap) <= 0.0) {
      t = cap;
    } else {
      double lo = 0.0, hi = cap;
      t = 0.0;
      for (int it = 0; it < 200 && hi - lo > 1e-17 * std::max(1.0, cap); ++it) {
        double g = slope(t);
        if (g == 0.0) break;
        if (g < 0.0) lo = t; else hi = t;
        double h = curvature(t);
        double next = h > 0.0 ? t - g / h : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == t) break;
        t = next;
      }
    }
    if (t <= 0.0) return;
    for (int e : lose) load_[e] = std::max(0.0, load_[e] - t);
    for (int e : gain) load_[e] += t;
    if (t >= cap) {
      to.flow += from.flow;
      from.flow = 0.0;
    } else {
      from.flow -= t;
      to.flow += t;
    }
  }

  FlowVector assemble() const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(game_.num_commodities(), game_.num_edges());
    for (int i = 0; i < game_.num_commodities(); ++i)
      for (const auto& p : paths_[i])
        for (int e : p.edges) M(i, e) += p.flow;
    return FlowVector(std::move(M));
  }

  const RoutingGame& game_;
  const TollVector& tolls_;
  std::vector<std::vector<int>> out_;
  Eigen::VectorXd load_;
  std::vector<std::vector<PathFlow>> paths_;
  std::vector<double> costs_;
  ShortestPathWorkspace ws_;
  std::vector<int> lose_, gain_;
};

}  // namespace detail

inline EquilibriumResult solve_equilibrium(const RoutingGame& game, const TollVector& tolls,
                                           const EqConfig& cfg = {}) {
  if (tolls.size() != game.num_edges()) throw TollOutOfRange("toll vector has the wrong length");
  if (!(cfg.accuracy > 0.0)) throw std::invalid_argument("EqConfig.accuracy must be positive");
  detail::PathEquilibrator solver(game, tolls);
  return solver.solve(cfg);
}

/// Worst excess of a flow-carrying path over its commodity's tolled
/// shortest-path distance, using a path decomposition of `f`.
inline double wardrop_violation(const RoutingGame& game, const TollVector& tolls, const FlowVector& f) {
  if (!is_feasible(game, f)) throw Infeasible("wardrop_violation requires a feasible flow");
  const Network& net = game.network;
  const auto out = net.out_edges();
  std::vector<double> costs(game.num_edges());
  for (int e = 0; e < game.num_edges(); ++e) costs[e] = game.latencies[e](f.aggregate()[e]) + tolls[e];
  double worst = 0.0;
  for (int i = 0; i < net.num_commodities(); ++i) {
    const Commodity& c = net.commodities[i];
    const double shortest = shortest_path(net, out, costs, c.source, c.sink).distance;
    const double support = 1e-12 * std::max(1.0, c.demand);
    Eigen::VectorXd row = f.per_commodity().row(i).transpose();
    for (;;) {
      // Depth-first search for a simple s-t path on the remaining support.
      std::vector<int> pred_edge(net.num_vertices(), -1);
      std::vector<bool> seen(net.num_vertices(), false);
      std::vector<int> stack{c.source};
      seen[c.source] = true;
      while (!stack.empty() && !seen[c.sink]) {
        int v = stack.back();
        stack.pop_back();
        for (int e : out[v]) {
          int w = net.arcs[e].head;
          if (row[e] > support && !seen[w]) {
            seen[w] = true;
            pred_edge[w] = e;
            stack.push_back(w);
          }
        }
      }
      if (!seen[c.sink]) break;
      double bottleneck = std::numeric_limits<double>::infinity();
      double length = 0.0;
      std::vector<int> path;
      for (int v = c.sink; v != c.source; v = net.arcs[pred_edge[v]].tail) path.push_back(pred_edge[v]);
      for (int e : path) {
        bottleneck = std::min(bottleneck, row[e]);
        length += costs[e];
      }
      worst = std::max(worst, length - shortest);
      for (int e : path) row[e] -= bottleneck;
    }
  }
  return worst;
}

/// The game whose Wardrop equilibrium is the minimum-latency flow of `game`.
inline RoutingGame marginal_cost_game(const RoutingGame& game) {
  RoutingGame mc = game;
  for (auto& lat : mc.latencies) lat = lat.marginal_cost();
  return mc;
}

struct SystemOptimum {
  FlowVector flow;
  double cost = 0.0;
};

/// Minimum total latency with full knowledge of the latencies.
inline SystemOptimum system_optimum(const RoutingGame& game, const EqConfig& cfg = {}) {
  auto eq = solve_equilibrium(marginal_cost_game(game), TollVector::zeros(game.num_edges()), cfg);
  return {eq.flow, aggregate_cost(game, eq.flow.aggregate())};
}

}  // namespace opttolls
