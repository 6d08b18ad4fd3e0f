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

/// Geometry of the feasible-flow polytope of a network, in flat
/// commodity-major coordinates (entry i*m + e). Each commodity lives on its
/// usable edges (those on some source-sink path), which must form a DAG.
///
/// Reduced coordinates y parametrize the affine hull as x = f_ref + Z y with
/// Z orthonormal; f_ref is strictly positive on every usable edge.
class FlowGeometry {
 public:
  explicit FlowGeometry(Network net) : net_(std::move(net)) {
    const int m = net_.num_edges(), k = net_.num_commodities();
    const int n = net_.num_vertices();
    out_ = net_.out_edges();
    usable_.resize(k);
    topo_.resize(k);
    std::vector<Eigen::MatrixXd> blocks(k);
    Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(k, m);
    int reduced = 0;
    for (int i = 0; i < k; ++i) {
      const Commodity& c = net_.commodities[i];
      usable_[i] = usable_edges(net_, c.source, c.sink);
      auto order = topological_order(net_, usable_[i]);
      if (!order) throw InvalidGame("commodity " + std::to_string(i) + " has a directed cycle among its usable edges");
      topo_[i] = *order;

      // Reference flow: average of one fewest-hop path through each usable edge.
      std::vector<std::vector<int>> paths;
      for (int e = 0; e < m; ++e) {
        if (!usable_[i][e]) continue;
        auto head = fewest_hop_path(net_, usable_[i], c.source, net_.arcs[e].tail);
        auto tail = fewest_hop_path(net_, usable_[i], net_.arcs[e].head, c.sink);
        std::vector<int> p = *head;
        p.push_back(e);
        p.insert(p.end(), tail->begin(), tail->end());
        if (std::find(paths.begin(), paths.end(), p) == paths.end()) paths.push_back(std::move(p));
      }
      for (const auto& p : paths)
        for (int e : p) ref(i, e) += c.demand / static_cast<double>(paths.size());

      // Directions of the affine hull: null space of the conservation
      // constraints restricted to usable edges.
      std::vector<int> cols;
      for (int e = 0; e < m; ++e)
        if (usable_[i][e]) cols.push_back(e);
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) {
        A(net_.arcs[cols[j]].tail, j) += 1.0;
        A(net_.arcs[cols[j]].head, j) -= 1.0;
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      int rank = 0;
      for (Eigen::Index j = 0; j < sv.size(); ++j)
        if (sv[j] > 1e-10 * std::max(1.0, sv[0])) ++rank;
      const int dim = static_cast<int>(cols.size()) - rank;
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(m, dim);
      for (int j = 0; j < dim; ++j) {
        Eigen::VectorXd v = svd.matrixV().col(rank + j);
        Eigen::Index lead = 0;
        while (lead < v.size() && std::abs(v[lead]) < 1e-12) ++lead;
        if (lead < v.size() && v[lead] < 0) v = -v;
        for (std::size_t t = 0; t < cols.size(); ++t) block(cols[t], j) = v[t];
      }
      blocks[i] = std::move(block);
      reduced += dim;
    }
    reference_ = FlowVector(ref);
    reference_flat_ = reference_.flatten();
    basis_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k) * m, reduced);
    for (int i = 0, col = 0; i < k; ++i) {
      basis_.block(static_cast<Eigen::Index>(i) * m, col, m, blocks[i].cols()) = blocks[i];
      col += static_cast<int>(blocks[i].cols());
    }
  }

  const Network& network() const { return net_; }
  int flow_dimension() const { return static_cast<int>(basis_.rows()); }
  int reduced_dimension() const { return static_cast<int>(basis_.cols()); }
  const Eigen::MatrixXd& basis() const { return basis_; }
  const FlowVector& reference() const { return reference_; }
  const Eigen::VectorXd& reference_flat() const { return reference_flat_; }
  bool usable(int i, int e) const { return usable_[i][e]; }

  Eigen::VectorXd to_flat(const Eigen::VectorXd& y) const { return reference_flat_ + basis_ * y; }
  Eigen::VectorXd to_reduced(const Eigen::VectorXd& flat) const {
    return basis_.transpose() * (flat - reference_flat_);
  }
  Eigen::VectorXd to_reduced(const FlowVector& f) const { return to_reduced(f.flatten()); }
  FlowVector to_flow(const Eigen::VectorXd& y) const {
    const int k = net_.num_commodities(), m = net_.num_edges();
    Eigen::VectorXd flat = to_flat(y);
    for (auto& x : flat)
      if (x < 0.0 && x > -FlowVector::kNegativeSlack) x = 0.0;
    return FlowVector::from_flat(flat, k, m);
  }

  /// Largest t >= 0 keeping to_flat(y + t u) nonnegative (infinite if u never
  /// decreases a coordinate).
  double max_step(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const {
    const Eigen::VectorXd x = to_flat(y), d = basis_ * u;
    double t = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (d[j] < -1e-15) t = std::min(t, std::max(0.0, x[j]) / -d[j]);
    return t;
  }

  /// Linear minimization over the polytope for flat (signed) costs: each
  /// commodity's demand on its cheapest path.
  Eigen::VectorXd lmo(const Eigen::VectorXd& flat_costs) const {
    const int k = net_.num_commodities(), m = net_.num_edges();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(flat_costs.size());
    for (int i = 0; i < k; ++i) {
      const Commodity& c = net_.commodities[i];
      Path p = dag_shortest_path(net_, std::span<const double>(flat_costs.data() + i * m, m), usable_[i], topo_[i],
                                 c.source, c.sink);
      for (int e : p.edges) v[i * m + e] = c.demand;
    }
    return v;
  }

  /// Euclidean projection of a flat point onto the polytope.
  FlowVector project(const Eigen::VectorXd& flat, double gap_tol = 1e-10) const {
    const int k = net_.num_commodities(), m = net_.num_edges();
    if (flat.size() != static_cast<Eigen::Index>(k) * m) throw InvalidFlow("point has the wrong dimension");
    Eigen::MatrixXd out(k, m);
    for (int i = 0; i < k; ++i) out.row(i) = project_commodity(i, flat.segment(i * m, m), gap_tol).transpose();
    return FlowVector(out);
  }

 private:
  struct Vertex {
    std::vector<int> edges;
    double weight = 0.0;  // convex weight
  };

  Eigen::VectorXd indicator(const std::vector<int>& edges, double demand) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(net_.num_edges());
    for (int e : edges) v[e] = demand;
    return v;
  }

  /// Away-step conditional gradient on 1/2 |y - a|^2 over paths of the
  /// commodity, followed by an exact solve on the final active face.
  Eigen::VectorXd project_commodity(int i, const Eigen::VectorXd& a, double gap_tol) const {
    const Commodity& c = net_.commodities[i];
    const double d = c.demand;
    auto cheapest = [&](const Eigen::VectorXd& cost) {
      return dag_shortest_path(net_, std::span<const double>(cost.data(), cost.size()), usable_[i], topo_[i],
                               c.source, c.sink)
          .edges;
    };
    std::vector<Vertex> active{{cheapest(-a), 1.0}};
    Eigen::VectorXd y = indicator(active[0].edges, d);

    const int max_rounds = 200000;
    double gap = std::numeric_limits<double>::infinity();
    bool polished = false;
    for (int round = 0; round < max_rounds; ++round) {
      Eigen::VectorXd grad = y - a;
      std::vector<int> s_edges = cheapest(grad);
      Eigen::VectorXd s = indicator(s_edges, d);
      gap = grad.dot(y - s);
      if (gap <= gap_tol) {
        if (polished || !polish(active, a, d, y)) break;
        polished = true;
        continue;
      }
      std::size_t away = 0;
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < active.size(); ++p) {
        double val = grad.dot(indicator(active[p].edges, d));
        if (val > worst) worst = val, away = p;
      }
      Eigen::VectorXd v_away = indicator(active[away].edges, d);
      const double away_gap = grad.dot(v_away - y);

      Eigen::VectorXd dir;
      double gamma_max;
      bool fw = gap >= away_gap;
      if (fw) {
        dir = s - y;
        gamma_max = 1.0;
      } else {
        dir = y - v_away;
        const double w = active[away].weight;
        gamma_max = w < 1.0 ? w / (1.0 - w) : std::numeric_limits<double>::infinity();
      }
      const double dd = dir.squaredNorm();
      if (!(dd > 0.0)) break;
      const double gamma = std::clamp(-grad.dot(dir) / dd, 0.0, gamma_max);
      if (gamma <= 0.0) break;
      y += gamma * dir;
      if (fw) {
        for (auto& v : active) v.weight *= 1.0 - gamma;
        auto it = std::find_if(active.begin(), active.end(), [&](const Vertex& v) { return v.edges == s_edges; });
        if (it == active.end()) active.push_back({s_edges, gamma});
        else it->weight += gamma;
      } else {
        for (auto& v : active) v.weight *= 1.0 + gamma;
        active[away].weight -= gamma;
      }
      std::erase_if(active, [](const Vertex& v) { return v.weight <= 1e-15; });
      if (gamma == gamma_max && fw) active = {{s_edges, 1.0}}, y = s;
    }
    if (gap > 10 * gap_tol)
      throw NoConvergence("projection gap " + std::to_string(gap) + " above tolerance");
    return y;
  }

  /// Solves the projection exactly on the affine span of the active paths;
  /// keeps the result only if the weights stay nonnegative and it improves.
  bool polish(std::vector<Vertex>& active, const Eigen::VectorXd& a, double d, Eigen::VectorXd& y) const {
    const std::size_t P = active.size();
    if (P < 2) return false;
    const Eigen::VectorXd p0 = indicator(active[0].edges, d);
    Eigen::MatrixXd D(a.size(), static_cast<Eigen::Index>(P - 1));
    for (std::size_t j = 1; j < P; ++j) D.col(static_cast<Eigen::Index>(j - 1)) = indicator(active[j].edges, d) - p0;
    Eigen::VectorXd w = D.completeOrthogonalDecomposition().solve(a - p0);
    const double w0 = 1.0 - w.sum();
    if (w0 < 0.0 || (w.array() < 0.0).any()) return false;
    Eigen::VectorXd candidate = p0 + D * w;
    if ((candidate - a).squaredNorm() > (y - a).squaredNorm()) return false;
    y = candidate;
    active[0].weight = w0;
    for (std::size_t j = 1; j < P; ++j) active[j].weight = w[static_cast<Eigen::Index>(j - 1)];
    std::erase_if(active, [](const Vertex& v) { return v.weight <= 1e-15; });
    return true;
  }

  Network net_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<bool>> usable_;
  std::vector<std::vector<int>> topo_;
  FlowVector reference_;
  Eigen::VectorXd reference_flat_;
  Eigen::MatrixXd basis_;
};

/// Feasible flow nearest to `x` (a k x m matrix of edge values, entries of
/// any sign) in Euclidean distance.
inline FlowVector project_to_polytope(const RoutingGame& game, const Eigen::MatrixXd& x) {
  const int k = game.num_commodities(), m = game.num_edges();
  if (x.rows() != k || x.cols() != m) throw InvalidFlow("point has the wrong shape");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(k) * m);
  for (int i = 0; i < k; ++i) flat.segment(static_cast<Eigen::Index>(i) * m, m) = x.row(i).transpose();
  return FlowGeometry(game.network).project(flat);
}

}  // namespace opttolls
