#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "epitrace/sim/cost.hpp"
#include "support/oracles.hpp"

using namespace epitrace;
using namespace epitrace::sim;

namespace {

const SweepSpec kDefault;

const CostSurface& default_surface() {
  static const CostSurface s = [] {
    const auto base = sweep_base_config();
    return measure_cost_surface(make_grid(kDefault.contracts, kDefault.requests, base), base, kDefault.rounds);
  }();
  return s;
}

SurfacePoint synthetic(std::size_t c, std::size_t r, double mean, double var) {
  SurfacePoint p;
  p.args.n_contracts = c;
  p.args.n_requests = r;
  p.avg_cost_mean = mean;
  p.avg_cost_variance = var;
  return p;
}

}  // namespace

TEST(Grid, CartesianProductInOrder) {
  const auto g = make_grid({3, 9}, {100, 200, 300}, sweep_base_config());
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0].n_contracts, 3u);
  EXPECT_EQ(g[2].n_requests, 300u);
  EXPECT_EQ(g[3].n_contracts, 9u);
  const auto cfg = g[4].apply(sweep_base_config());
  EXPECT_EQ(cfg.n_locations, 9u);
  EXPECT_EQ(cfg.n_users, 200u);
  EXPECT_EQ(cfg.contact_rate, 0.0);
  EXPECT_EQ(cfg.duration, kHour);
}

TEST(Surface, RoundsBelowTwoRejected) {
  const auto base = sweep_base_config();
  EXPECT_THROW(measure_cost_surface(make_grid({3}, {100}, base), base, 1), std::invalid_argument);
}

TEST(Surface, SharedSeedHasZeroVariance) {
  const auto base = sweep_base_config();
  const auto s = measure_cost_surface(make_grid({3}, {100}, base), base, 3, SeedPolicy::Shared);
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0].avg_cost_variance, 0.0);
  EXPECT_EQ(s.points[0].total_gas_variance, 0.0);
  for (const auto& r : s.points[0].rounds) EXPECT_EQ(r.seed, base.seed);
}

TEST(Surface, PerRoundSeedsAndSummaryOracle) {
  const auto base = sweep_base_config();
  const auto s = measure_cost_surface(make_grid({9}, {200}, base), base, 4);
  const auto& p = s.points[0];
  std::vector<double> avg, total;
  for (std::size_t k = 0; k < p.rounds.size(); ++k) {
    EXPECT_EQ(p.rounds[k].seed, base.seed + k);
    const auto& m = p.rounds[k].metrics;
    EXPECT_DOUBLE_EQ(m.avg_request_cost,
                     static_cast<double>(m.total_gas) / static_cast<double>(m.requests_completed));
    avg.push_back(m.avg_request_cost);
    total.push_back(static_cast<double>(m.total_gas));
  }
  EXPECT_NEAR(p.avg_cost_mean, oracle::mean(avg), 1e-9 * oracle::mean(avg));
  EXPECT_NEAR(p.avg_cost_variance, oracle::sample_var(avg), 1e-6 * (1.0 + oracle::sample_var(avg)));
  EXPECT_NEAR(p.total_gas_mean, oracle::mean(total), 1e-9 * oracle::mean(total));
}

TEST(Surface, DefaultGridShape) {
  const auto& s = default_surface();
  ASSERT_EQ(s.points.size(), 18u);
  for (const auto& p : s.points) EXPECT_EQ(p.rounds.size(), 10u);
}

TEST(Surface, TotalGasGrowsWithRequests) {
  const auto& s = default_surface();
  for (auto c : kDefault.contracts)
    for (std::size_t i = 1; i < kDefault.requests.size(); ++i)
      EXPECT_GT(s.find(c, kDefault.requests[i])->total_gas_mean, s.find(c, kDefault.requests[i - 1])->total_gas_mean)
          << "contracts " << c;
}

TEST(Surface, AverageCostNonIncreasingInRequests) {
  const auto& s = default_surface();
  for (auto c : kDefault.contracts)
    for (std::size_t i = 1; i < kDefault.requests.size(); ++i)
      EXPECT_LE(s.find(c, kDefault.requests[i])->avg_cost_mean, s.find(c, kDefault.requests[i - 1])->avg_cost_mean)
          << "contracts " << c << " requests " << kDefault.requests[i];
}

TEST(Surface, StddevShrinksWithRequests) {
  const auto& s = default_surface();
  for (auto c : kDefault.contracts)
    EXPECT_GE(s.find(c, 100)->avg_cost_stddev() / s.find(c, 600)->avg_cost_stddev(), 3.0) << "contracts " << c;
}

TEST(Surface, TotalGasLinearInRequests) {
  const auto& s = default_surface();
  for (auto c : kDefault.contracts) {
    std::vector<double> x, y;
    for (auto r : kDefault.requests) {
      x.push_back(static_cast<double>(r));
      y.push_back(s.find(c, r)->total_gas_mean);
    }
    EXPECT_GE(stats::linear_fit(x, y).r2, 0.95) << "contracts " << c;
  }
}

TEST(Optimize, SinglePoint) {
  CostSurface s;
  s.points.push_back(synthetic(9, 300, 1.0, 2.0));
  EXPECT_EQ(optimize_cost(s).n_requests, 300u);
  EXPECT_EQ(penalty(s, s.points[0], {}), 0.0);
  EXPECT_THROW(optimize_cost(CostSurface{}), std::invalid_argument);
}

TEST(Optimize, VarianceOnlyWeightPicksLowerVariance) {
  CostSurface s;
  s.points.push_back(synthetic(3, 100, 1.0, 50.0));
  s.points.push_back(synthetic(3, 200, 9.0, 5.0));
  EXPECT_EQ(optimize_cost(s, {0.0, 1.0}).n_requests, 200u);
  EXPECT_EQ(optimize_cost(s, {1.0, 0.0}).n_requests, 100u);
}

TEST(Optimize, TiesBreakLexicographically) {
  CostSurface s;
  s.points.push_back(synthetic(9, 100, 1.0, 1.0));
  s.points.push_back(synthetic(3, 600, 1.0, 1.0));
  s.points.push_back(synthetic(3, 200, 1.0, 1.0));
  const auto best = optimize_cost(s);
  EXPECT_EQ(best.n_contracts, 3u);
  EXPECT_EQ(best.n_requests, 200u);
}

TEST(Optimize, MatchesBruteForceOnDefaultSurface) {
  const auto& s = default_surface();
  for (PenaltyWeights w : {PenaltyWeights{}, PenaltyWeights{1, 0}, PenaltyWeights{0, 1}, PenaltyWeights{0.2, 0.8}}) {
    double lo_a = std::numeric_limits<double>::infinity(), hi_a = -lo_a, lo_v = lo_a, hi_v = -lo_a;
    for (const auto& p : s.points) {
      lo_a = std::min(lo_a, p.avg_cost_mean);
      hi_a = std::max(hi_a, p.avg_cost_mean);
      lo_v = std::min(lo_v, p.avg_cost_variance);
      hi_v = std::max(hi_v, p.avg_cost_variance);
    }
    std::size_t best = 0;
    double best_z = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto& p = s.points[i];
      const double z = w.avg * (p.avg_cost_mean - lo_a) / (hi_a - lo_a) + w.var * (p.avg_cost_variance - lo_v) / (hi_v - lo_v);
      if (z < best_z) {
        best_z = z;
        best = i;
      }
    }
    EXPECT_EQ(optimize_cost(s, w), s.points[best].args);
  }
}
