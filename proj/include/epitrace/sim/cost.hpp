#pragma once

// Operating-cost measurement over a grid of decision variables, and the
// weighted min-cost search over the measured surface.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "epitrace/contracts.hpp"
#include "epitrace/sim/config.hpp"
#include "epitrace/sim/scenario.hpp"
#include "epitrace/sim/stats.hpp"

namespace epitrace::sim {

/// One point of the decision grid. `n_requests` sets the user population of a
/// one-hour window at one check-in per user per hour, so the expected request
/// count equals n_requests.
struct CostArgs {
  std::size_t n_contracts = 3;
  std::size_t n_requests = 100;
  std::size_t queue_capacity = 50;
  std::size_t block_capacity = 1000;
  Seconds rotation_period = 900.0;
  double service_rate = 5.0;

  auto operator<=>(const CostArgs&) const = default;

  ScenarioConfig apply(ScenarioConfig base) const {
    base.n_locations = static_cast<std::uint32_t>(n_contracts);
    base.n_cities = std::min<std::uint32_t>(base.n_cities, base.n_locations);
    base.n_users = static_cast<std::uint32_t>(n_requests);
    base.queue_capacity = queue_capacity;
    base.block_capacity = block_capacity;
    base.rotation_period = rotation_period;
    base.service_rate = service_rate;
    return base;
  }
};

/// Check-in-only workload: one hour, one check-in per user, no contacts,
/// queries or infections.
inline ScenarioConfig sweep_base_config(ScenarioConfig base = {}) {
  base.checkin_rate = 1.0;
  base.contact_rate = 0.0;
  base.query_rate = 0.0;
  base.infected_seed_users = 0;
  base.clean_events.clear();
  base.duration = kHour;
  return base;
}

inline std::vector<CostArgs> make_grid(const std::vector<std::size_t>& contracts,
                                       const std::vector<std::size_t>& requests, const ScenarioConfig& base) {
  std::vector<CostArgs> grid;
  for (auto c : contracts)
    for (auto r : requests)
      grid.push_back({c, r, base.queue_capacity, base.block_capacity, base.rotation_period, base.service_rate});
  return grid;
}

enum class SeedPolicy {
  PerRound,  // round k runs with seed base.seed + k
  Shared,    // every round reuses base.seed
};

struct RoundResult {
  std::uint64_t seed = 0;
  ScenarioMetrics metrics;
};

struct SurfacePoint {
  CostArgs args;
  std::vector<RoundResult> rounds;
  double avg_cost_mean = 0.0;
  double avg_cost_variance = 0.0;
  double total_gas_mean = 0.0;
  double total_gas_variance = 0.0;

  double avg_cost_stddev() const { return std::sqrt(avg_cost_variance); }
};

struct CostSurface {
  std::vector<SurfacePoint> points;

  const SurfacePoint* find(std::size_t contracts, std::size_t requests) const {
    for (const auto& p : points)
      if (p.args.n_contracts == contracts && p.args.n_requests == requests) return &p;
    return nullptr;
  }
};

inline CostSurface measure_cost_surface(const std::vector<CostArgs>& grid, const ScenarioConfig& base, int rounds,
                                        SeedPolicy policy = SeedPolicy::PerRound) {
  if (rounds < 2) throw std::invalid_argument("measure_cost_surface: rounds must be >= 2");
  CostSurface surface;
  surface.points.reserve(grid.size());
  for (const auto& args : grid) {
    SurfacePoint point;
    point.args = args;
    std::vector<double> avg, total;
    for (int k = 0; k < rounds; ++k) {
      auto cfg = args.apply(base);
      if (policy == SeedPolicy::PerRound) cfg.seed = base.seed + static_cast<std::uint64_t>(k);
      auto m = run_scenario(cfg);
      avg.push_back(m.avg_request_cost);
      total.push_back(static_cast<double>(m.total_gas));
      point.rounds.push_back({cfg.seed, std::move(m)});
    }
    point.avg_cost_mean = stats::mean(avg);
    point.avg_cost_variance = stats::sample_variance(avg);
    point.total_gas_mean = stats::mean(total);
    point.total_gas_variance = stats::sample_variance(total);
    surface.points.push_back(std::move(point));
  }
  return surface;
}

struct PenaltyWeights {
  double avg = 0.5;
  double var = 0.5;
};

/// zeta = w.avg * norm(mean avg cost) + w.var * norm(variance), with min-max
/// normalization over the surface (a constant column normalizes to 0).
inline double penalty(const CostSurface& s, const SurfacePoint& p, PenaltyWeights w) {
  double lo_a = std::numeric_limits<double>::infinity(), hi_a = -lo_a, lo_v = lo_a, hi_v = -lo_a;
  for (const auto& q : s.points) {
    lo_a = std::min(lo_a, q.avg_cost_mean);
    hi_a = std::max(hi_a, q.avg_cost_mean);
    lo_v = std::min(lo_v, q.avg_cost_variance);
    hi_v = std::max(hi_v, q.avg_cost_variance);
  }
  auto norm = [](double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 0.0; };
  return w.avg * norm(p.avg_cost_mean, lo_a, hi_a) + w.var * norm(p.avg_cost_variance, lo_v, hi_v);
}

/// Grid point minimizing the penalty; ties go to the lexicographically
/// smallest args.
inline CostArgs optimize_cost(const CostSurface& s, PenaltyWeights w = {}) {
  if (s.points.empty()) throw std::invalid_argument("optimize_cost: empty surface");
  const SurfacePoint* best = nullptr;
  double best_z = 0.0;
  for (const auto& p : s.points) {
    const double z = penalty(s, p, w);
    if (!best || z < best_z || (z == best_z && p.args < best->args)) {
      best = &p;
      best_z = z;
    }
  }
  return best->args;
}

}  // namespace epitrace::sim
