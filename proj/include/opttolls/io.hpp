#pragma once

#include "json.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "opttolls/errors.hpp"
#include "opttolls/game.hpp"
#include "opttolls/oracle.hpp"
#include "opttolls/toll_inference.hpp"
#include "opttolls/zero_order.hpp"

namespace opttolls::io {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back as the same double.
inline std::string number_text(double x) {
  if (!std::isfinite(x)) throw ParseError("cannot write a non-finite number");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline Json number(double x) { return number_text(x); }
inline Json number_or_null(double x) { return std::isfinite(x) ? number(x) : Json(nullptr); }

/// Reads a number written either as a decimal string or a JSON number.
inline double to_number(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw ParseError(what + " must be a number or decimal string");
  const auto& s = j.get_ref<const std::string&>();
  double x = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError(what + ": bad number '" + s + "'");
  return x;
}

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + " lacks \"" + key + "\"");
  return j.at(key);
}

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

// Games

inline Json game_to_json(const RoutingGame& g) {
  const Network& net = g.network;
  Json j;
  j["vertices"] = net.vertices;
  Json edges = Json::array();
  for (int e = 0; e < net.num_edges(); ++e) {
    Json coeffs = Json::array();
    for (double c : g.latencies[e].coeffs()) coeffs.push_back(number(c));
    edges.push_back({{"id", net.arcs[e].id},
                     {"tail", net.vertices[net.arcs[e].tail]},
                     {"head", net.vertices[net.arcs[e].head]},
                     {"coeffs", coeffs}});
  }
  j["edges"] = edges;
  Json coms = Json::array();
  for (const auto& c : net.commodities)
    coms.push_back({{"source", net.vertices[c.source]}, {"sink", net.vertices[c.sink]}, {"demand", number(c.demand)}});
  j["commodities"] = coms;
  return j;
}

/// Parses and validates a game. A latency whose coefficients above the
/// constant term are all zero is read as a constant latency.
inline RoutingGame game_from_json(const Json& j) {
  RoutingGame g;
  Network& net = g.network;
  const Json& vs = field(j, "vertices", "game");
  if (!vs.is_array()) throw ParseError("\"vertices\" must be an array");
  for (const auto& v : vs) {
    if (!v.is_string()) throw ParseError("vertex ids must be strings");
    net.vertices.push_back(v.get<std::string>());
  }
  auto vertex = [&](const Json& v, const std::string& where) {
    if (!v.is_string()) throw ParseError(where + " must name a vertex");
    int idx = net.vertex_index(v.get<std::string>());
    if (idx < 0) throw InvalidGame(where + " names unknown vertex '" + v.get<std::string>() + "'");
    return idx;
  };
  const Json& es = field(j, "edges", "game");
  if (!es.is_array()) throw ParseError("\"edges\" must be an array");
  for (const auto& e : es) {
    const Json& id = field(e, "id", "edge");
    if (!id.is_string()) throw ParseError("edge ids must be strings");
    const std::string where = "edge '" + id.get<std::string>() + "'";
    const int tail = vertex(field(e, "tail", where), where + " tail");
    const int head = vertex(field(e, "head", where), where + " head");
    const Json& cs = field(e, "coeffs", where);
    if (!cs.is_array() || cs.empty()) throw ParseError(where + " needs a nonempty coefficient array");
    std::vector<double> coeffs;
    for (const auto& c : cs) coeffs.push_back(to_number(c, where + " coefficient"));
    bool flat = true;
    for (std::size_t k = 1; k < coeffs.size(); ++k) flat = flat && coeffs[k] == 0.0;
    net.arcs.push_back({id.get<std::string>(), tail, head});
    g.latencies.emplace_back(std::move(coeffs), flat);
  }
  const Json& cs = field(j, "commodities", "game");
  if (!cs.is_array()) throw ParseError("\"commodities\" must be an array");
  for (const auto& c : cs) {
    Commodity com;
    com.source = vertex(field(c, "source", "commodity"), "commodity source");
    com.sink = vertex(field(c, "sink", "commodity"), "commodity sink");
    com.demand = to_number(field(c, "demand", "commodity"), "demand");
    net.commodities.push_back(com);
  }
  return validate_game(g);
}

// Edge-keyed maps

inline Json edge_map(const Network& net, const Eigen::VectorXd& v) {
  Json j = Json::object();
  for (int e = 0; e < net.num_edges(); ++e) j[net.arcs[e].id] = number(v[e]);
  return j;
}

/// Missing edges read as zero; unknown edge ids are an error.
inline Eigen::VectorXd edge_map_from_json(const Network& net, const Json& j, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + " must be an edge-keyed object");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(net.num_edges());
  for (const auto& [key, val] : j.items()) {
    const int e = net.edge_index(key);
    if (e < 0) throw ParseError(what + " names unknown edge '" + key + "'");
    v[e] = to_number(val, what + " entry '" + key + "'");
  }
  return v;
}

inline Json flow_to_json(const Network& net, const FlowVector& f) {
  Json j;
  j["aggregate"] = edge_map(net, f.aggregate());
  Json per = Json::array();
  for (int i = 0; i < f.num_commodities(); ++i) per.push_back(edge_map(net, f.per_commodity().row(i).transpose()));
  j["per_commodity"] = per;
  return j;
}

/// Accepts the {"aggregate", "per_commodity"} form or, for a single
/// commodity, a bare edge map.
inline FlowVector flow_from_json(const Network& net, const Json& j) {
  const int k = net.num_commodities(), m = net.num_edges();
  Eigen::MatrixXd x(k, m);
  if (j.is_object() && j.contains("per_commodity")) {
    const Json& per = j.at("per_commodity");
    if (!per.is_array() || static_cast<int>(per.size()) != k)
      throw ParseError("flow needs one per_commodity entry per commodity");
    for (int i = 0; i < k; ++i) x.row(i) = edge_map_from_json(net, per[i], "flow").transpose();
  } else {
    if (k != 1) throw ParseError("a bare edge map only describes single-commodity flows");
    x.row(0) = edge_map_from_json(net, j, "flow").transpose();
  }
  try {
    return FlowVector(x);
  } catch (const InvalidFlow& e) {
    throw ParseError(e.what());
  }
}

inline Json tolls_to_json(const Network& net, const TollVector& t) { return edge_map(net, t.values()); }

inline TollVector tolls_from_json(const Network& net, const Json& j) {
  Eigen::VectorXd v = edge_map_from_json(net, j, "tolls");
  if ((v.array() < 0.0).any()) throw ParseError("tolls must be nonnegative");
  return TollVector(v);
}

// Logs and traces (one JSON object per line)

inline Json query_record_to_json(const Network& net, const QueryRecord& r) {
  Json j;
  j["index"] = r.response.query_index;
  j["tolls"] = edge_map(net, r.tolls);
  j["flow"] = edge_map(net, r.response.aggregate_flow);
  j["cost"] = r.response.total_cost ? number(*r.response.total_cost) : Json(nullptr);
  return j;
}

inline void write_query_log(std::ostream& os, const Network& net, const std::vector<QueryRecord>& log) {
  for (const auto& r : log) os << query_record_to_json(net, r).dump() << '\n';
}

inline Json trace_to_json(const Network& net, const EnforcementTraceEntry& t) {
  Json j;
  j["iteration"] = t.iteration;
  j["center"] = edge_map(net, t.center);
  j["deviation"] = t.deviation ? number(*t.deviation) : Json(nullptr);
  j["log_volume"] = number(t.log_volume);
  j["cut"] = t.cut;
  return j;
}

inline Json trace_to_json(const OptTraceEntry& t) {
  Json j;
  j["iteration"] = t.iteration;
  j["phase"] = t.phase;
  j["current_cost"] = number(t.current_cost);
  j["best_cost"] = number(t.best_cost);
  j["gap_estimate"] = number_or_null(t.gap_estimate);
  j["step"] = number(t.step);
  j["queries"] = t.queries;
  return j;
}

template <class Range, class Fn>
void write_lines(std::ostream& os, const Range& entries, Fn&& to_json) {
  for (const auto& e : entries) os << to_json(e).dump() << '\n';
}

// Files

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << text;
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline RoutingGame read_game(const std::string& path) { return game_from_json(read_json_file(path)); }

}  // namespace opttolls::io
