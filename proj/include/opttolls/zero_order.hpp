#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opttolls/ellipsoid.hpp"
#include "opttolls/errors.hpp"
#include "opttolls/game.hpp"
#include "opttolls/oracle.hpp"
#include "opttolls/polytope.hpp"
#include "opttolls/toll_inference.hpp"

namespace opttolls {

struct OptConfig {
  double epsilon = 0.02;
  /// Zero-order oracle accuracy; unset means the default below.
  std::optional<double> delta;
  /// Shrink toward the reference flow before finite differencing.
  double interior_mix = 1e-3;
  /// Finite-difference step; unset means sqrt(delta).
  std::optional<double> fd_step;
  int max_iterations = 500;
  /// Iterations of the ellipsoid fallback; unset means 10 (D' + 1)^2.
  std::optional<int> fallback_iterations;

  /// P_N = 8 N^2; any delta must satisfy delta <= epsilon / P_N.
  static double polynomial_factor(int N) { return 8.0 * N * N; }

  /// Default delta: interior_mix * epsilon / P_N, raised if needed so the
  /// enforcement tolerance delta / (4 m K^2) stays at or above 1e-10.
  double resolved_delta(const GameConstants& c, int m) const {
    if (delta) return *delta;
    const double floor = 4.0 * m * c.K * c.K * 1e-10;
    return std::min(epsilon / polynomial_factor(c.N), std::max(interior_mix * epsilon / polynomial_factor(c.N), floor));
  }
  double resolved_step(const GameConstants& c, int m) const {
    return fd_step ? *fd_step : std::sqrt(resolved_delta(c, m));
  }

  void validate(const GameConstants& c, int m) const {
    if (!(epsilon > 0.0)) throw BadSpec("epsilon must be positive");
    const double d = resolved_delta(c, m);
    if (!(d > 0.0)) throw BadSpec("delta must be positive");
    if (d > epsilon / polynomial_factor(c.N) * (1 + 1e-12))
      throw BadSpec("delta must not exceed epsilon / (8 N^2)");
    if (!(interior_mix > 0.0 && interior_mix < 1.0)) throw BadSpec("interior mix must lie in (0, 1)");
    if (!(resolved_step(c, m) > 0.0)) throw BadSpec("finite-difference step must be positive");
    if (max_iterations < 1) throw BadSpec("max_iterations must be positive");
  }
};

struct CostOracleSample {
  FlowVector requested_flow;
  TollVector enforcing_tolls;
  Eigen::VectorXd observed_flow;
  double observed_cost = 0.0;
  std::int64_t queries_spent = 0;
};

/// Bound on l_e'(x) on [0, max(1, sum d)] from the public U and r.
inline double slope_bound(const GameConstants& c) {
  const double D = std::max(1.0, c.total_demand);
  double k1 = 0.0;
  for (int j = 1; j <= c.r; ++j) k1 += j * c.U * std::pow(D, j - 1);
  return std::max(k1, 1e-12);
}

/// Zero-order delta-oracle for total latency: enforce f within
/// delta / (2 m K^2) and read the cost of the induced equilibrium.
///
/// `warm` may carry an earlier sample. The search then starts in a small
/// ball around its tolls and falls back to the full toll box if that ball
/// yields nothing.
inline CostOracleSample zero_order_cost_oracle(QueryOracle& oracle, const FlowVector& f, double delta,
                                               const CostOracleSample* warm = nullptr) {
  if (oracle.mode() != OracleMode::kFlowAndCost) throw BadSpec("the cost oracle needs a FLOW_AND_COST oracle");
  if (!(delta > 0.0)) throw BadSpec("delta must be positive");
  const Network& net = oracle.network();
  const GameConstants& c = oracle.constants();
  const int m = net.num_edges();
  if (!is_feasible(net, f)) throw Infeasible("cost oracle needs a feasible flow");

  const std::int64_t start = oracle.query_count();
  CostOracleSample sample;
  sample.requested_flow = acyclic_reduce(net, f);
  const double delta_enf = delta / (4.0 * m * c.K * c.K);
  auto cfg = EnforcementConfig::make(delta_enf, c, m, net.num_commodities());

  std::optional<EnforcementResult> res;
  if (warm && warm->enforcing_tolls.size() == m) {
    const double shift = (warm->observed_flow - sample.requested_flow.aggregate()).lpNorm<Eigen::Infinity>();
    const double radius = 4.0 * std::sqrt(double(m)) * (slope_bound(c) * shift + delta_enf);
    auto warm_cfg = cfg;
    warm_cfg.initial = Ellipsoid::ball(warm->enforcing_tolls.values(), radius);
    res = enforce_flow(oracle, sample.requested_flow, warm_cfg);
    if (res->status != EnforcementStatus::kSuccess) res.reset();
  }
  if (!res) res = enforce_flow(oracle, sample.requested_flow, cfg);
  if (res->status != EnforcementStatus::kSuccess)
    throw OracleSampleFailed("enforcement ended at deviation " + std::to_string(res->achieved_deviation));
  auto resp = oracle.query(res->tolls);
  sample.enforcing_tolls = res->tolls;
  sample.observed_flow = resp.aggregate_flow;
  sample.observed_cost = *resp.total_cost;
  sample.queries_spent = oracle.query_count() - start;
  return sample;
}

/// Upper bound on the second derivative of x l(x) on [0, max(1, sum d)],
/// using only the public bounds U and r.
inline double curvature_bound(const GameConstants& c) {
  const double D = std::max(1.0, c.total_demand);
  double k2 = 0.0;
  for (int j = 1; j <= c.r; ++j) k2 += j * (j + 1.0) * c.U * std::pow(D, j - 1);
  return std::max(k2, 1e-12);
}

struct GradientEstimate {
  /// Directional derivatives along the columns of the affine-hull basis.
  Eigen::VectorXd reduced;
  /// The same gradient as a flat flow-space vector (basis * reduced).
  Eigen::VectorXd flat;
  /// Per-component step actually used and its error bound delta/h + K''h.
  Eigen::VectorXd steps;
  Eigen::VectorXd error_bounds;
  int samples = 0;
};

/// Central differences of `cost` (a function of reduced coordinates) around
/// y along each basis direction. Steps are clipped to 0.999 of the room left
/// in the polytope on both sides.
template <class CostFn>
GradientEstimate estimate_gradient(const FlowGeometry& geom, CostFn&& cost, const Eigen::VectorXd& y, double h,
                                   double delta, double curvature) {
  const int D = geom.reduced_dimension();
  GradientEstimate g;
  g.reduced = Eigen::VectorXd::Zero(D);
  g.steps = Eigen::VectorXd::Zero(D);
  g.error_bounds = Eigen::VectorXd::Zero(D);
  for (int j = 0; j < D; ++j) {
    Eigen::VectorXd u = Eigen::VectorXd::Unit(D, j);
    const double room = std::min(geom.max_step(y, u), geom.max_step(y, -u));
    const double hj = std::min(h, 0.999 * room);
    if (!(hj > 0.0)) throw InvalidFlow("gradient point lies on the polytope boundary");
    const double plus = cost(Eigen::VectorXd(y + hj * u));
    const double minus = cost(Eigen::VectorXd(y - hj * u));
    g.reduced[j] = (plus - minus) / (2.0 * hj);
    g.steps[j] = hj;
    g.error_bounds[j] = delta / hj + curvature * hj;
    g.samples += 2;
  }
  g.flat = geom.basis() * g.reduced;
  return g;
}

/// Gradient of total latency at an interior feasible flow from oracle
/// samples only.
inline GradientEstimate estimate_gradient(QueryOracle& oracle, const FlowVector& f, double h, double delta) {
  FlowGeometry geom(oracle.network());
  auto cost = [&](const Eigen::VectorXd& y) {
    return zero_order_cost_oracle(oracle, geom.to_flow(y), delta).observed_cost;
  };
  return estimate_gradient(geom, cost, geom.to_reduced(f), h, delta, curvature_bound(oracle.constants()));
}

enum class OptStatus { kConverged, kIterationLimit, kBudgetExhausted };

inline const char* to_string(OptStatus s) {
  switch (s) {
    case OptStatus::kConverged: return "CONVERGED";
    case OptStatus::kIterationLimit: return "ITERATION_LIMIT";
    case OptStatus::kBudgetExhausted: return "BUDGET_EXHAUSTED";
  }
  return "?";
}

struct OptTraceEntry {
  int iteration = 0;
  std::string phase;  // "descent" or "ellipsoid"
  double current_cost = 0.0;
  double best_cost = 0.0;
  double gap_estimate = 0.0;
  double step = 0.0;
  std::int64_t queries = 0;
};

struct OptimizationReport {
  FlowVector best_flow;
  double best_cost = std::numeric_limits<double>::infinity();
  TollVector final_tolls;
  std::int64_t total_oracle_queries = 0;
  int iterations = 0;
  OptStatus status = OptStatus::kIterationLimit;
  double final_gap_estimate = std::numeric_limits<double>::infinity();
  int reduced_dimension = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double fd_step = 0.0;
  std::vector<OptTraceEntry> trace;
};

namespace detail {

struct BudgetStop {};

/// Shared state of one optimization run over reduced coordinates.
class ZeroOrderRun {
 public:
  ZeroOrderRun(QueryOracle& oracle, const OptConfig& cfg)
      : oracle_(oracle), geom_(oracle.network()), cfg_(cfg), start_(oracle.query_count()) {
    const auto& c = oracle.constants();
    const int m = oracle.network().num_edges();
    delta_ = cfg.resolved_delta(c, m);
    h_ = cfg.resolved_step(c, m);
    curvature_ = curvature_bound(c);
    report_.reduced_dimension = geom_.reduced_dimension();
    report_.epsilon = cfg.epsilon;
    report_.delta = delta_;
    report_.fd_step = h_;
  }

  OptimizationReport run() {
    try {
      descend();
    } catch (const BudgetStop&) {
      report_.status = OptStatus::kBudgetExhausted;
    }
    report_.total_oracle_queries = oracle_.query_count() - start_;
    return report_;
  }

 private:
  CostOracleSample sample(const Eigen::VectorXd& y) {
    try {
      auto s = zero_order_cost_oracle(oracle_, geom_.to_flow(y), delta_, last_ ? &*last_ : nullptr);
      last_ = s;
      return s;
    } catch (const OracleBudgetExceeded&) {
      throw BudgetStop{};
    }
  }
  double cost(const Eigen::VectorXd& y) { return sample(y).observed_cost; }

  void offer(const Eigen::VectorXd& y, const CostOracleSample& s) {
    if (s.observed_cost < report_.best_cost) {
      report_.best_cost = s.observed_cost;
      report_.best_flow = s.requested_flow;
      report_.final_tolls = s.enforcing_tolls;
      best_y_ = y;
    }
  }

  /// Gradient at the point mixed toward the reference flow, and the
  /// Frank-Wolfe gap it certifies at y itself.
  std::pair<GradientEstimate, double> gradient_and_gap(const Eigen::VectorXd& y) {
    const Eigen::VectorXd mixed = (1.0 - cfg_.interior_mix) * y;
    auto g = estimate_gradient(geom_, [&](const Eigen::VectorXd& p) { return cost(p); }, mixed, h_, delta_,
                               curvature_);
    const Eigen::VectorXd x = geom_.to_flat(y);
    const double gap = g.flat.dot(x - geom_.lmo(g.flat));
    return {std::move(g), gap};
  }

  void note(int it, const char* phase, double current, double gap, double step) {
    report_.trace.push_back(
        {it, phase, current, report_.best_cost, gap, step, oracle_.query_count() - start_});
  }

  void descend() {
    const int D = geom_.reduced_dimension();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(D);
    auto s = sample(y);
    offer(y, s);
    double fy = s.observed_cost;
    if (D == 0) {
      report_.status = OptStatus::kConverged;
      report_.final_gap_estimate = 0.0;
      note(0, "descent", fy, 0.0, 0.0);
      return;
    }

    const double k = oracle_.network().num_commodities();
    double alpha = 1.0 / (k * curvature_);
    const double alpha_min = 1e-10 * alpha;
    for (int it = 0; it < cfg_.max_iterations; ++it) {
      report_.iterations = it + 1;
      auto [g, gap] = gradient_and_gap(y);
      report_.final_gap_estimate = std::min(report_.final_gap_estimate, gap);
      note(it, "descent", fy, gap, alpha);
      if (gap <= 0.5 * cfg_.epsilon) {
        report_.status = OptStatus::kConverged;
        return;
      }
      bool accepted = false;
      while (alpha >= alpha_min) {
        Eigen::VectorXd trial = geom_.to_reduced(geom_.project(geom_.to_flat(y - alpha * g.reduced)));
        const Eigen::VectorXd step = trial - y;
        if (step.norm() <= 1e-13) break;
        auto st = sample(trial);
        const double bound = fy + g.reduced.dot(step) + step.squaredNorm() / (2.0 * alpha) + 2.0 * delta_;
        if (st.observed_cost <= bound) {
          y = trial;
          fy = st.observed_cost;
          offer(y, st);
          accepted = true;
          alpha *= 2.0;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        ellipsoid_fallback(it + 1);
        return;
      }
    }
    report_.status = OptStatus::kIterationLimit;
  }

  /// Central-cut ellipsoid over reduced coordinates with gradient cuts at
  /// feasible centers and constraint cuts at infeasible ones.
  void ellipsoid_fallback(int first_iteration) {
    const int D = geom_.reduced_dimension();
    double radius = 0.0;
    for (const auto& c : oracle_.network().commodities)
      radius += 4.0 * c.demand * c.demand * oracle_.network().num_edges();
    radius = std::sqrt(radius);
    Ellipsoid E = Ellipsoid::ball(Eigen::VectorXd::Zero(D), radius);
    const int cap = cfg_.fallback_iterations.value_or(10 * (D + 1) * (D + 1));
    const Eigen::MatrixXd& Z = geom_.basis();
    for (int t = 0; t < cap; ++t) {
      report_.iterations = first_iteration + t + 1;
      const Eigen::VectorXd c = E.center();
      const Eigen::VectorXd x = geom_.to_flat(c);
      Eigen::Index worst;
      const double lowest = x.minCoeff(&worst);
      if (lowest < 0.0) {
        // Keep the side where flow on that coordinate grows.
        E = E.cut_keep_geq(Z.row(worst).transpose());
        continue;
      }
      auto s = sample(c);
      offer(c, s);
      auto [g, gap] = gradient_and_gap(c);
      report_.final_gap_estimate = std::min(report_.final_gap_estimate, gap);
      note(first_iteration + t, "ellipsoid", s.observed_cost, gap, 0.0);
      if (gap <= 0.5 * cfg_.epsilon) {
        report_.status = OptStatus::kConverged;
        return;
      }
      if (!(g.reduced.norm() > 0.0)) break;
      E = E.cut_keep_geq(-g.reduced);
    }
    report_.status = OptStatus::kIterationLimit;
  }

  QueryOracle& oracle_;
  FlowGeometry geom_;
  OptConfig cfg_;
  std::int64_t start_;
  double delta_ = 0.0, h_ = 0.0, curvature_ = 0.0;
  Eigen::VectorXd best_y_;
  std::optional<CostOracleSample> last_;
  OptimizationReport report_;
};

inline void check_skeleton(const QueryOracle& oracle, const Network& skeleton) {
  const Network& net = oracle.network();
  bool same = skeleton.vertices == net.vertices && skeleton.num_edges() == net.num_edges() &&
              skeleton.num_commodities() == net.num_commodities();
  for (int e = 0; same && e < net.num_edges(); ++e)
    same = skeleton.arcs[e].id == net.arcs[e].id && skeleton.arcs[e].tail == net.arcs[e].tail &&
           skeleton.arcs[e].head == net.arcs[e].head;
  for (int i = 0; same && i < net.num_commodities(); ++i)
    same = skeleton.commodities[i].source == net.commodities[i].source &&
           skeleton.commodities[i].sink == net.commodities[i].sink &&
           skeleton.commodities[i].demand == net.commodities[i].demand;
  if (!same) throw BadSpec("skeleton does not match the oracle's network");
}

}  // namespace detail

/// Approximately minimizes total latency over feasible flows using only cost
/// samples from the oracle. The report's status says whether the gap
/// estimate reached epsilon/2 or a limit stopped the run first.
inline OptimizationReport minimize_total_latency(QueryOracle& oracle, const Network& skeleton,
                                                 const OptConfig& cfg = {}) {
  if (oracle.mode() != OracleMode::kFlowAndCost) throw BadSpec("optimization needs a FLOW_AND_COST oracle");
  detail::check_skeleton(oracle, skeleton);
  cfg.validate(oracle.constants(), skeleton.num_edges());
  detail::ZeroOrderRun run(oracle, cfg);
  return run.run();
}

/// Minimizes total latency, then enforces the best flow at tolerance
/// epsilon / (4 m K^2) to obtain the tolls.
inline std::pair<TollVector, OptimizationReport> compute_optimal_tolls(QueryOracle& oracle, const Network& skeleton,
                                                                       const OptConfig& cfg = {}) {
  auto report = minimize_total_latency(oracle, skeleton, cfg);
  // Out of queries: the best sample's tolls already enforce its flow more
  // tightly than the final pass would. Without any sample, zero tolls.
  if (report.status == OptStatus::kBudgetExhausted) {
    if (report.final_tolls.size() == 0) report.final_tolls = TollVector::zeros(skeleton.num_edges());
    return {report.final_tolls, report};
  }
  if (report.best_flow.num_commodities() == 0) throw NoConvergence("no flow was sampled");
  const auto& c = oracle.constants();
  const int m = skeleton.num_edges();
  const std::int64_t before = oracle.query_count();
  auto ecfg = EnforcementConfig::make(cfg.epsilon / (4.0 * m * c.K * c.K), c, m, skeleton.num_commodities());
  EnforcementResult res;
  try {
    res = enforce_flow(oracle, report.best_flow, ecfg);
  } catch (const OracleBudgetExceeded&) {
    report.total_oracle_queries += oracle.query_count() - before;
    report.status = OptStatus::kBudgetExhausted;
    return {report.final_tolls, report};
  }
  report.total_oracle_queries += oracle.query_count() - before;
  if (res.status != EnforcementStatus::kSuccess)
    throw OracleSampleFailed("final enforcement ended at deviation " + std::to_string(res.achieved_deviation));
  report.final_tolls = res.tolls;
  return {res.tolls, report};
}

}  // namespace opttolls
