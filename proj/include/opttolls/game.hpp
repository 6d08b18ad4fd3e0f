#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "opttolls/errors.hpp"
#include "opttolls/graph.hpp"

namespace opttolls {

/// Polynomial latency l(x) = a_0 + a_1 x + ... + a_r x^r with nonnegative
/// coefficients. Edges whose latency does not depend on the load (the "0" and
/// "1" links of the classic two-link examples) must be flagged constant.
class PolyLatency {
 public:
  PolyLatency() : coeffs_{0.0} {}
  explicit PolyLatency(std::vector<double> coeffs, bool constant = false)
      : coeffs_(std::move(coeffs)), constant_(constant) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
  }

  static PolyLatency constant_value(double c) { return PolyLatency({c}, true); }
  static PolyLatency linear(double a0, double a1) { return PolyLatency({a0, a1}); }

  const std::vector<double>& coeffs() const { return coeffs_; }
  bool is_constant() const { return constant_; }

  /// Index of the highest nonzero coefficient (0 for the zero polynomial).
  int degree() const {
    for (int j = static_cast<int>(coeffs_.size()) - 1; j > 0; --j)
      if (coeffs_[j] != 0.0) return j;
    return 0;
  }
  double max_coefficient() const { return *std::max_element(coeffs_.begin(), coeffs_.end()); }

  double operator()(double x) const {
    double v = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) v = v * x + *it;
    return v;
  }
  double derivative(double x) const {
    double v = 0.0;
    for (std::size_t j = coeffs_.size() - 1; j >= 1; --j) v = v * x + static_cast<double>(j) * coeffs_[j];
    return v;
  }
  double second_derivative(double x) const {
    double v = 0.0;
    for (std::size_t j = coeffs_.size() - 1; j >= 2; --j)
      v = v * x + static_cast<double>(j * (j - 1)) * coeffs_[j];
    return v;
  }
  /// Closed-form integral from 0 to x.
  double integral(double x) const {
    double v = 0.0;
    for (std::size_t j = coeffs_.size(); j-- > 0;) v = v * x + coeffs_[j] / static_cast<double>(j + 1);
    return v * x;
  }

  /// The marginal-cost latency d/dx [x l(x)] = sum (j+1) a_j x^j.
  PolyLatency marginal_cost() const {
    std::vector<double> c(coeffs_.size());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = static_cast<double>(j + 1) * coeffs_[j];
    return PolyLatency(std::move(c), constant_);
  }

  friend bool operator==(const PolyLatency&, const PolyLatency&) = default;

 private:
  std::vector<double> coeffs_;
  bool constant_ = false;
};

inline double eval_latency(const PolyLatency& lat, double x) { return lat(x); }

/// Derived bounds. K bounds l_e(x) and x l_e'(x) on feasible loads; tolls
/// are searched in [0, T_max]^m; N = mk is the flow-space dimension.
struct GameConstants {
  double K = 1.0;
  double T_max = 0.0;
  double total_demand = 0.0;
  int N = 0;
  double U = 0.0;
  int r = 0;
  int input_size = 0;
};

struct RoutingGame {
  Network network;
  std::vector<PolyLatency> latencies;

  int num_edges() const { return network.num_edges(); }
  int num_commodities() const { return network.num_commodities(); }
};

struct ValidationOptions {
  int max_degree = 8;
};

inline GameConstants derive_constants(const RoutingGame& game) {
  GameConstants c;
  const int m = game.num_edges();
  const int k = game.num_commodities();
  for (const auto& com : game.network.commodities) c.total_demand += com.demand;
  int coeff_count = 0;
  for (const auto& lat : game.latencies) {
    c.U = std::max(c.U, lat.max_coefficient());
    c.r = std::max(c.r, lat.degree());
    coeff_count += static_cast<int>(lat.coeffs().size());
  }
  const double load = std::max(1.0, c.total_demand);
  double K = (c.r + 1) * c.U * std::pow(load, c.r);
  // The closed form can fall below x l'(x) for dense polynomials of degree
  // >= 3; take the direct bound on [0, load] whenever it is larger.
  for (const auto& lat : game.latencies)
    K = std::max({K, lat(load), load * lat.derivative(load)});
  c.K = std::max(1.0, K);
  c.T_max = 2.0 * m * c.K;
  c.N = m * k;
  c.input_size = game.network.num_vertices() + m + k + coeff_count;
  return c;
}

/// Returns `game` unchanged if every structural invariant holds.
inline RoutingGame validate_game(const RoutingGame& game, const ValidationOptions& opts = {}) {
  const Network& net = game.network;
  const int n = net.num_vertices();
  if (n == 0) throw InvalidGame("no vertices");
  {
    std::set<std::string> names(net.vertices.begin(), net.vertices.end());
    if (static_cast<int>(names.size()) != n) throw InvalidGame("duplicate vertex id");
  }
  if (game.latencies.size() != net.arcs.size())
    throw InvalidGame("latency count does not match edge count");
  std::set<std::string> edge_ids;
  for (int e = 0; e < net.num_edges(); ++e) {
    const Arc& a = net.arcs[e];
    if (!edge_ids.insert(a.id).second) throw InvalidGame("duplicate edge id '" + a.id + "'");
    if (a.tail < 0 || a.tail >= n || a.head < 0 || a.head >= n)
      throw InvalidGame("edge '" + a.id + "' has an endpoint outside the vertex set");
    if (a.tail == a.head) throw InvalidGame("edge '" + a.id + "' is a self-loop");
    const PolyLatency& lat = game.latencies[e];
    bool increasing = false;
    for (std::size_t j = 0; j < lat.coeffs().size(); ++j) {
      double c = lat.coeffs()[j];
      if (!std::isfinite(c)) throw InvalidGame("edge '" + a.id + "' has a non-finite coefficient");
      if (c < 0.0) throw InvalidGame("edge '" + a.id + "' has a negative coefficient");
      if (j >= 1 && c > 0.0) increasing = true;
    }
    if (lat.degree() > opts.max_degree)
      throw InvalidGame("edge '" + a.id + "' exceeds the maximum degree");
    if (!increasing && !lat.is_constant())
      throw InvalidGame("edge '" + a.id + "' is not strictly increasing and not flagged constant");
    if (increasing && lat.is_constant())
      throw InvalidGame("edge '" + a.id + "' is flagged constant but depends on the load");
  }
  for (std::size_t i = 0; i < net.commodities.size(); ++i) {
    const Commodity& c = net.commodities[i];
    const std::string tag = "commodity " + std::to_string(i);
    if (c.source < 0 || c.source >= n || c.sink < 0 || c.sink >= n)
      throw InvalidGame(tag + " has an endpoint outside the vertex set");
    if (c.source == c.sink) throw InvalidGame(tag + " has source equal to sink");
    if (!(c.demand > 0.0) || !std::isfinite(c.demand))
      throw InvalidGame(tag + " must have positive demand");
    if (!reachable(net, c.source)[c.sink]) throw InvalidGame(tag + " has an unreachable sink");
  }
  return game;
}

/// Multicommodity edge flow: a k x m matrix plus its column sums.
class FlowVector {
 public:
  FlowVector() = default;
  explicit FlowVector(Eigen::MatrixXd per_commodity) : per_commodity_(std::move(per_commodity)) {
    for (Eigen::Index i = 0; i < per_commodity_.size(); ++i) {
      double& x = per_commodity_.data()[i];
      if (!std::isfinite(x)) throw InvalidFlow("non-finite entry");
      if (x < 0.0) {
        if (x < -kNegativeSlack) throw InvalidFlow("negative entry " + std::to_string(x));
        x = 0.0;
      }
    }
    aggregate_ = per_commodity_.colwise().sum().transpose();
  }

  static FlowVector zeros(int k, int m) { return FlowVector(Eigen::MatrixXd::Zero(k, m)); }
  static FlowVector from_flat(const Eigen::VectorXd& flat, int k, int m) {
    Eigen::MatrixXd M(k, m);
    for (int i = 0; i < k; ++i) M.row(i) = flat.segment(static_cast<Eigen::Index>(i) * m, m).transpose();
    return FlowVector(std::move(M));
  }

  const Eigen::MatrixXd& per_commodity() const { return per_commodity_; }
  const Eigen::VectorXd& aggregate() const { return aggregate_; }
  int num_commodities() const { return static_cast<int>(per_commodity_.rows()); }
  int num_edges() const { return static_cast<int>(per_commodity_.cols()); }
  double operator()(int i, int e) const { return per_commodity_(i, e); }

  /// Commodity-major flattening: entry i*m + e.
  Eigen::VectorXd flatten() const {
    const int k = num_commodities(), m = num_edges();
    Eigen::VectorXd v(static_cast<Eigen::Index>(k) * m);
    for (int i = 0; i < k; ++i) v.segment(static_cast<Eigen::Index>(i) * m, m) = per_commodity_.row(i).transpose();
    return v;
  }

  /// Entries in [-kNegativeSlack, 0) are treated as rounding noise and zeroed.
  static constexpr double kNegativeSlack = 1e-9;

 private:
  Eigen::MatrixXd per_commodity_;
  Eigen::VectorXd aggregate_;
};

/// Nonnegative per-edge tolls.
class TollVector {
 public:
  TollVector() = default;
  explicit TollVector(Eigen::VectorXd values) : values_(std::move(values)) {
    for (Eigen::Index e = 0; e < values_.size(); ++e)
      if (!(values_[e] >= 0.0) || !std::isfinite(values_[e]))
        throw TollOutOfRange("toll " + std::to_string(values_[e]) + " on edge " + std::to_string(e));
  }
  static TollVector zeros(int m) { return TollVector(Eigen::VectorXd::Zero(m)); }

  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int e) const { return values_[e]; }
  int size() const { return static_cast<int>(values_.size()); }

 private:
  Eigen::VectorXd values_;
};

inline constexpr double kFeasibilityTol = 1e-8;

inline bool is_feasible(const Network& net, const FlowVector& f, double tol = kFeasibilityTol) {
  if (f.num_commodities() != net.num_commodities() || f.num_edges() != net.num_edges()) return false;
  const int n = net.num_vertices();
  for (int i = 0; i < net.num_commodities(); ++i) {
    std::vector<double> net_out(n, 0.0);
    for (int e = 0; e < net.num_edges(); ++e) {
      double x = f(i, e);
      if (x < -tol) return false;
      net_out[net.arcs[e].tail] += x;
      net_out[net.arcs[e].head] -= x;
    }
    const Commodity& c = net.commodities[i];
    for (int v = 0; v < n; ++v) {
      double expected = v == c.source ? c.demand : (v == c.sink ? -c.demand : 0.0);
      if (std::abs(net_out[v] - expected) > tol) return false;
    }
  }
  return true;
}
inline bool is_feasible(const RoutingGame& game, const FlowVector& f, double tol = kFeasibilityTol) {
  return is_feasible(game.network, f, tol);
}

/// sum_e x_e l_e(x_e) for an aggregate load vector (no feasibility check).
inline double aggregate_cost(const RoutingGame& game, const Eigen::VectorXd& load) {
  double total = 0.0;
  for (int e = 0; e < game.num_edges(); ++e) total += load[e] * game.latencies[e](load[e]);
  return total;
}

inline double total_latency(const RoutingGame& game, const FlowVector& f) {
  if (!is_feasible(game, f)) throw Infeasible("flow is not feasible for the game");
  return aggregate_cost(game, f.aggregate());
}

/// True if no commodity has a directed cycle of strictly positive flow.
inline bool is_acyclic(const Network& net, const FlowVector& f) {
  for (int i = 0; i < f.num_commodities(); ++i) {
    Eigen::VectorXd row = f.per_commodity().row(i).transpose();
    if (!find_positive_cycle(net, std::span<const double>(row.data(), row.size())).empty()) return false;
  }
  return true;
}

/// Cancels every positive-flow cycle in every commodity. The result is
/// feasible with the same demands and bounded above by `f` edgewise, so with
/// nondecreasing latencies its cost never exceeds the input's.
inline FlowVector acyclic_reduce(const Network& net, const FlowVector& f) {
  if (!is_feasible(net, f)) throw Infeasible("acyclic_reduce requires a feasible flow");
  Eigen::MatrixXd M = f.per_commodity();
  for (int i = 0; i < M.rows(); ++i) {
    Eigen::VectorXd row = M.row(i).transpose();
    for (;;) {
      auto cycle = find_positive_cycle(net, std::span<const double>(row.data(), row.size()));
      if (cycle.empty()) break;
      double bottleneck = row[cycle.front()];
      int arg = cycle.front();
      for (int e : cycle)
        if (row[e] < bottleneck) bottleneck = row[e], arg = e;
      for (int e : cycle) row[e] -= bottleneck;
      row[arg] = 0.0;
    }
    M.row(i) = row.transpose();
  }
  return FlowVector(std::move(M));
}
inline FlowVector acyclic_reduce(const RoutingGame& game, const FlowVector& f) {
  return acyclic_reduce(game.network, f);
}

/// Routes every commodity's demand on a single path; handy for tests and
/// initial points.
inline FlowVector flow_on_paths(const Network& net, const std::vector<std::vector<int>>& paths) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(net.num_commodities(), net.num_edges());
  for (int i = 0; i < net.num_commodities(); ++i)
    for (int e : paths[i]) M(i, e) += net.commodities[i].demand;
  return FlowVector(std::move(M));
}

}  // namespace opttolls
