#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "opttolls/ellipsoid.hpp"
#include "opttolls/errors.hpp"
#include "opttolls/game.hpp"
#include "opttolls/oracle.hpp"

namespace opttolls {

struct EnforcementConfig {
  double delta = 1e-3;
  /// Oracle accuracy the search budgets for: delta^2 / (K m k sum_i d_i).
  double eps_query = 0.0;
  std::int64_t max_iterations = 0;
  /// Stop once log|det A| of the ellipsoid falls below this.
  double log_volume_floor = -std::numeric_limits<double>::infinity();
  /// Starting region; unset means the ball circumscribing [0, T_max]^m.
  std::optional<Ellipsoid> initial;

  /// Defaults: volume floor of an m-ball of radius delta/(4mK) and an
  /// iteration cap of 16 m^2 ln(T_max m K / delta).
  static EnforcementConfig make(double delta, const GameConstants& c, int m, int k) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    EnforcementConfig cfg;
    cfg.delta = delta;
    cfg.eps_query = delta * delta / (c.K * m * k * c.total_demand);
    const double dm = m;
    cfg.max_iterations = static_cast<std::int64_t>(
        std::ceil(16.0 * dm * dm * std::log(std::max(std::numbers::e, c.T_max * dm * c.K / delta))));
    cfg.log_volume_floor = dm * std::log(delta / (4.0 * dm * c.K));
    return cfg;
  }
};

enum class EnforcementStatus { kSuccess, kNotFound };

inline const char* to_string(EnforcementStatus s) {
  return s == EnforcementStatus::kSuccess ? "SUCCESS" : "NOT_FOUND";
}

struct EnforcementTraceEntry {
  std::int64_t iteration = 0;
  Eigen::VectorXd center;
  std::optional<double> deviation;
  double log_volume = 0.0;
  std::string cut;  // "box", "separation" or "success"
};

struct EnforcementResult {
  TollVector tolls;
  double achieved_deviation = std::numeric_limits<double>::infinity();
  std::int64_t queries_used = 0;
  EnforcementStatus status = EnforcementStatus::kNotFound;
  std::int64_t iterations = 0;
  std::vector<EnforcementTraceEntry> trace;
};

struct EnforcementHooks {
  /// Called with the ellipsoid after every update.
  std::function<void(const Ellipsoid&)> on_update;
  bool record_trace = false;
};

/// Normal of the cut through the queried tolls. Any tolls inducing the
/// target lie in { tau' : g . tau' >= g . tau_queried }: the equilibrium
/// variational inequalities at both toll vectors plus monotone latencies
/// give (tau - tau') . (f_target - f_observed) >= 0.
inline Eigen::VectorXd separation_cut(const TollVector& /*tau_queried*/, const Eigen::VectorXd& f_observed,
                                      const Eigen::VectorXd& f_target) {
  Eigen::VectorXd g = f_observed - f_target;
  if (!(g.lpNorm<Eigen::Infinity>() >= 1e-15)) throw DegenerateCut("observed flow equals the target");
  return g;
}

/// Central cut keeping { x : g . x >= g . center(E) }.
inline Ellipsoid ellipsoid_update(const Ellipsoid& E, const Eigen::VectorXd& g) { return E.cut_keep_geq(g); }

/// Searches toll space for tolls whose induced aggregate equilibrium is
/// within 2 delta of the target in the sup norm.
inline EnforcementResult enforce_flow(QueryOracle& oracle, const FlowVector& f_star, const EnforcementConfig& cfg,
                                      const EnforcementHooks& hooks = {}) {
  const Network& net = oracle.network();
  const GameConstants& gc = oracle.constants();
  const int m = net.num_edges();
  if (!is_feasible(net, f_star)) throw TargetInfeasible("target flow is not feasible");
  if (!is_acyclic(net, f_star)) throw TargetCyclic("target flow contains a positive cycle");

  const double T = gc.T_max;
  const double tol = 2.0 * cfg.delta;
  const Eigen::VectorXd target = f_star.aggregate();
  Ellipsoid E = cfg.initial ? *cfg.initial
                            : Ellipsoid::ball(Eigen::VectorXd::Constant(m, 0.5 * T), 0.5 * T * std::sqrt(double(m)));
  if (E.dimension() != m) throw std::invalid_argument("initial ellipsoid has the wrong dimension");

  EnforcementResult result;
  result.tolls = TollVector::zeros(m);
  const std::int64_t start = oracle.query_count();

  auto note = [&](std::int64_t it, const Eigen::VectorXd& center, std::optional<double> dev, const char* cut) {
    if (hooks.record_trace) result.trace.push_back({it, center, dev, E.log_volume(), cut});
  };
  auto updated = [&] {
    if (hooks.on_update) hooks.on_update(E);
  };

  std::int64_t it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (E.log_volume_ratio() < cfg.log_volume_floor) break;
    const Eigen::VectorXd c = E.center();

    int worst = -1;
    double violation = 0.0;
    for (int j = 0; j < m; ++j) {
      double v = std::max(-c[j], c[j] - T);
      if (v > violation) violation = v, worst = j;
    }
    if (worst >= 0) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
      g[worst] = c[worst] < 0.0 ? 1.0 : -1.0;
      E = ellipsoid_update(E, g);
      note(it, c, std::nullopt, "box");
      updated();
      continue;
    }

    TollVector tau(c.cwiseMax(0.0).cwiseMin(T));
    const OracleResponse resp = oracle.query(tau);
    const double dev = (resp.aggregate_flow - target).lpNorm<Eigen::Infinity>();
    if (dev < result.achieved_deviation) {
      result.achieved_deviation = dev;
      result.tolls = tau;
    }
    if (dev <= tol) {
      result.status = EnforcementStatus::kSuccess;
      note(it, c, dev, "success");
      ++it;
      break;
    }
    E = ellipsoid_update(E, separation_cut(tau, resp.aggregate_flow, target));
    note(it, c, dev, "separation");
    updated();
  }
  result.iterations = it;
  result.queries_used = oracle.query_count() - start;
  return result;
}

}  // namespace opttolls
