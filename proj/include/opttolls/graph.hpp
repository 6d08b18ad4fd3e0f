#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opttolls/errors.hpp"

namespace opttolls {

struct Arc {
  std::string id;
  int tail = 0;
  int head = 0;
};

struct Commodity {
  int source = 0;
  int sink = 0;
  double demand = 0.0;
};

/// Directed multigraph plus commodities. This is everything about a routing
/// game except its latency functions, i.e. what a toll-setter is allowed to
/// know about an instance hidden behind an oracle.
struct Network {
  std::vector<std::string> vertices;
  std::vector<Arc> arcs;
  std::vector<Commodity> commodities;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_edges() const { return static_cast<int>(arcs.size()); }
  int num_commodities() const { return static_cast<int>(commodities.size()); }

  int vertex_index(const std::string& name) const {
    auto it = std::find(vertices.begin(), vertices.end(), name);
    if (it == vertices.end()) return -1;
    return static_cast<int>(it - vertices.begin());
  }
  int edge_index(const std::string& id) const {
    for (int e = 0; e < num_edges(); ++e)
      if (arcs[e].id == id) return e;
    return -1;
  }

  /// Outgoing edge indices per vertex, each list in increasing edge order.
  std::vector<std::vector<int>> out_edges() const {
    std::vector<std::vector<int>> out(vertices.size());
    for (int e = 0; e < num_edges(); ++e) out[arcs[e].tail].push_back(e);
    return out;
  }
  std::vector<std::vector<int>> in_edges() const {
    std::vector<std::vector<int>> in(vertices.size());
    for (int e = 0; e < num_edges(); ++e) in[arcs[e].head].push_back(e);
    return in;
  }
};

/// A path as a sequence of edge indices, plus its length under some costs.
struct Path {
  std::vector<int> edges;
  double distance = 0.0;
};

/// Vertices reachable from `from` (forward) or that reach `from` (backward).
inline std::vector<bool> reachable(const Network& net, int from, bool forward = true) {
  std::vector<bool> seen(net.vertices.size(), false);
  const auto adj = forward ? net.out_edges() : net.in_edges();
  std::vector<int> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int e : adj[v]) {
      int w = forward ? net.arcs[e].head : net.arcs[e].tail;
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

/// Edges lying on some s-t walk: tail reachable from s, head reaching t.
inline std::vector<bool> usable_edges(const Network& net, int s, int t) {
  const auto from_s = reachable(net, s, true);
  const auto to_t = reachable(net, t, false);
  std::vector<bool> usable(net.arcs.size(), false);
  for (int e = 0; e < net.num_edges(); ++e)
    usable[e] = from_s[net.arcs[e].tail] && to_t[net.arcs[e].head];
  return usable;
}

/// Topological order of the vertices touched by the masked edge set, or
/// nullopt if those edges contain a directed cycle. Untouched vertices are
/// appended in index order so the result always covers every vertex.
inline std::optional<std::vector<int>> topological_order(const Network& net,
                                                         const std::vector<bool>& edge_mask) {
  const int n = net.num_vertices();
  std::vector<int> indegree(n, 0);
  const auto out = net.out_edges();
  for (int e = 0; e < net.num_edges(); ++e)
    if (edge_mask[e]) ++indegree[net.arcs[e].head];
  // Kahn with a min-heap on vertex index for a deterministic order.
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int e : out[v]) {
      if (!edge_mask[e]) continue;
      if (--indegree[net.arcs[e].head] == 0) ready.push(net.arcs[e].head);
    }
  }
  if (static_cast<int>(order.size()) != n) return std::nullopt;
  return order;
}

/// Finds one directed cycle among edges with `weight[e] > 0`. Returns its
/// edge indices in traversal order, or an empty vector if there is none.
inline std::vector<int> find_positive_cycle(const Network& net, std::span<const double> weight) {
  const int n = net.num_vertices();
  const auto out = net.out_edges();
  enum Color : char { kWhite, kGray, kBlack };
  std::vector<Color> color(n, kWhite);
  std::vector<int> parent_edge(n, -1);
  for (int root = 0; root < n; ++root) {
    if (color[root] != kWhite) continue;
    // Iterative DFS; frames hold (vertex, next out-edge position).
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    color[root] = kGray;
    while (!stack.empty()) {
      auto& [v, pos] = stack.back();
      if (pos == out[v].size()) {
        color[v] = kBlack;
        stack.pop_back();
        continue;
      }
      int e = out[v][pos++];
      if (!(weight[e] > 0.0)) continue;
      int w = net.arcs[e].head;
      if (color[w] == kGray) {
        std::vector<int> cycle{e};
        for (int x = v; x != w; x = net.arcs[parent_edge[x]].tail) cycle.push_back(parent_edge[x]);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (color[w] == kWhite) {
        color[w] = kGray;
        parent_edge[w] = e;
        stack.emplace_back(w, 0);
      }
    }
  }
  return {};
}

/// Scratch buffers for repeated shortest-path calls on one network.
struct ShortestPathWorkspace {
  std::vector<double> dist;
  std::vector<int> pred;
  std::vector<char> done;
  std::vector<std::pair<double, int>> heap;
  Path path;
};

/// Dijkstra on nonnegative edge costs. Ties are broken deterministically:
/// among equal-distance predecessors, the lower edge index wins. The result
/// is left in ws.path.
inline const Path& shortest_path(const Network& net, const std::vector<std::vector<int>>& out,
                                 std::span<const double> edge_costs, int s, int t, ShortestPathWorkspace& ws) {
  const int n = net.num_vertices();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  ws.dist.assign(n, kInf);
  ws.pred.assign(n, -1);
  ws.done.assign(n, 0);
  ws.heap.clear();
  auto& heap = ws.heap;
  const auto cmp = std::greater<>{};
  ws.dist[s] = 0.0;
  heap.emplace_back(0.0, s);
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), cmp);
    auto [d, v] = heap.back();
    heap.pop_back();
    if (ws.done[v] || d > ws.dist[v]) continue;
    ws.done[v] = 1;
    for (int e : out[v]) {
      int w = net.arcs[e].head;
      if (ws.done[w]) continue;
      double nd = d + edge_costs[e];
      if (nd < ws.dist[w] || (nd == ws.dist[w] && e < ws.pred[w])) {
        bool improved = nd < ws.dist[w];
        ws.dist[w] = nd;
        ws.pred[w] = e;
        if (improved) {
          heap.emplace_back(nd, w);
          std::push_heap(heap.begin(), heap.end(), cmp);
        }
      }
    }
  }
  if (ws.dist[t] == kInf)
    throw Unreachable("no path from " + net.vertices[s] + " to " + net.vertices[t]);
  ws.path.distance = ws.dist[t];
  ws.path.edges.clear();
  for (int v = t; v != s; v = net.arcs[ws.pred[v]].tail) ws.path.edges.push_back(ws.pred[v]);
  std::reverse(ws.path.edges.begin(), ws.path.edges.end());
  return ws.path;
}

inline Path shortest_path(const Network& net, const std::vector<std::vector<int>>& out,
                          std::span<const double> edge_costs, int s, int t) {
  ShortestPathWorkspace ws;
  return shortest_path(net, out, edge_costs, s, t, ws);
}

inline Path shortest_path(const Network& net, std::span<const double> edge_costs, int s, int t) {
  return shortest_path(net, net.out_edges(), edge_costs, s, t);
}

/// Min-cost s-t path with arbitrary-sign costs over the masked edges, which
/// must form a DAG with the given topological order.
inline Path dag_shortest_path(const Network& net, std::span<const double> edge_costs,
                              const std::vector<bool>& edge_mask, const std::vector<int>& topo,
                              int s, int t) {
  const int n = net.num_vertices();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int> pred(n, -1);
  const auto out = net.out_edges();
  dist[s] = 0.0;
  for (int v : topo) {
    if (dist[v] == kInf) continue;
    for (int e : out[v]) {
      if (!edge_mask[e]) continue;
      int w = net.arcs[e].head;
      double nd = dist[v] + edge_costs[e];
      if (nd < dist[w] || (nd == dist[w] && e < pred[w])) {
        dist[w] = nd;
        pred[w] = e;
      }
    }
  }
  if (dist[t] == kInf)
    throw Unreachable("no path from " + net.vertices[s] + " to " + net.vertices[t]);
  Path path;
  path.distance = dist[t];
  for (int v = t; v != s; v = net.arcs[pred[v]].tail) path.edges.push_back(pred[v]);
  std::reverse(path.edges.begin(), path.edges.end());
  return path;
}

/// Fewest-hop s-t path restricted to masked edges (BFS, lowest edge id first).
inline std::optional<std::vector<int>> fewest_hop_path(const Network& net,
                                                       const std::vector<bool>& edge_mask, int s,
                                                       int t) {
  const auto out = net.out_edges();
  std::vector<int> pred(net.vertices.size(), -1);
  std::vector<bool> seen(net.vertices.size(), false);
  std::queue<int> q;
  q.push(s);
  seen[s] = true;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    if (v == t) break;
    for (int e : out[v]) {
      if (!edge_mask[e]) continue;
      int w = net.arcs[e].head;
      if (seen[w]) continue;
      seen[w] = true;
      pred[w] = e;
      q.push(w);
    }
  }
  if (!seen[t]) return std::nullopt;
  std::vector<int> path;
  for (int v = t; v != s; v = net.arcs[pred[v]].tail) path.push_back(pred[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace opttolls
