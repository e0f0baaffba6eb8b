#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "epitrace/sim/config.hpp"
#include "epitrace/sim/events.hpp"
#include "epitrace/sim/scenario.hpp"
#include "epitrace/sim/stats.hpp"
#include "support/oracles.hpp"

using namespace epitrace;
using namespace epitrace::sim;

namespace {

// Check-in-only workload at `per_second` arrivals network-wide.
ScenarioConfig checkin_load(double per_second, Seconds duration, std::uint32_t users = 500) {
  ScenarioConfig c;
  c.n_users = users;
  c.checkin_rate = per_second * kHour / users;
  c.contact_rate = 0.0;
  c.duration = duration;
  c.n_locations = 3;
  return c;
}

std::size_t count_kind(const std::vector<Event>& ev, EventKind k) {
  return static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [k](const Event& e) { return e.kind == k; }));
}

}  // namespace

TEST(Config, DefaultsAreValid) { EXPECT_NO_THROW(ScenarioConfig{}.validate()); }

TEST(Config, ParsesKeysAndRejectsUnknown) {
  const auto cf = parse_config(
      "# comment\n n_users = 7\ncheckin_rate=2.5\nsurfaces = Plastic, Copper\nclean = 1@3600, 0@7200\n"
      "gas.checkin_op = 123\nrebate.enabled = false\nsweep.requests = 10,20\nrounds = 3\nfit.sign = as_written\n");
  EXPECT_EQ(cf.scenario.n_users, 7u);
  EXPECT_EQ(cf.scenario.checkin_rate, 2.5);
  ASSERT_EQ(cf.scenario.surfaces.size(), 2u);
  EXPECT_EQ(cf.scenario.surfaces[1], health::MaterialSurface::Copper);
  ASSERT_EQ(cf.scenario.clean_events.size(), 2u);
  EXPECT_EQ(cf.scenario.clean_events[0].location, 1u);
  EXPECT_EQ(cf.scenario.clean_events[0].time, 3600.0);
  EXPECT_EQ(cf.scenario.gas.checkin_op, 123);
  EXPECT_FALSE(cf.scenario.rebate_enabled);
  EXPECT_EQ(cf.sweep.requests, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(cf.sweep.rounds, 3);
  EXPECT_EQ(cf.fit.sign, health::SignConvention::AsWritten);
  EXPECT_THROW(parse_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("n_users = many\n"), ConfigError);
  EXPECT_THROW(parse_config("packet_loss_rate = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("n_users = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("checkin_rate = -1\n"), ConfigError);
}

TEST(Events, ZeroCheckinRate) {
  ScenarioConfig c;
  c.checkin_rate = 0;
  std::mt19937_64 rng(1);
  EXPECT_EQ(count_kind(generate_events(c, rng), EventKind::Checkin), 0u);
}

TEST(Events, PoissonCountsAcrossSeeds) {
  ScenarioConfig c;
  c.n_users = 100;
  c.checkin_rate = 1.0;
  c.contact_rate = 0.0;
  c.duration = 10 * kHour;
  std::vector<double> counts;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const double n = static_cast<double>(count_kind(generate_events(c, rng), EventKind::Checkin));
    counts.push_back(n);
    if (std::abs(n - 1000.0) <= 3.0 * std::sqrt(1000.0)) ++within;
  }
  EXPECT_GE(within, 98);
  EXPECT_NEAR(oracle::mean(counts), 1000.0, 3.0 * std::sqrt(1000.0) / 10.0);
  EXPECT_NEAR(oracle::sample_var(counts), 1000.0, 400.0);
}

TEST(Events, SameSeedSameStream) {
  ScenarioConfig c;
  c.infected_seed_users = 3;
  c.query_rate = 0.2;
  std::mt19937_64 a(5), b(5);
  const auto x = generate_events(c, a), y = generate_events(c, b);
  ASSERT_EQ(x.size(), y.size());
  std::string sx, sy;
  for (const auto& e : x) sx += to_string(e) + '\n';
  for (const auto& e : y) sy += to_string(e) + '\n';
  EXPECT_EQ(sx, sy);
}

TEST(Events, OrderedAndWellFormed) {
  ScenarioConfig c;
  c.n_users = 50;
  c.infected_seed_users = 5;
  c.clean_events = {{2, 100.0}};
  std::mt19937_64 rng(3);
  const auto ev = generate_events(c, rng);
  EXPECT_EQ(count_kind(ev, EventKind::Report), 5u);
  EXPECT_EQ(count_kind(ev, EventKind::Clean), 1u);
  for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_FALSE(event_before(ev[i], ev[i - 1]));
  std::unordered_set<std::uint32_t> reporters;
  for (const auto& e : ev) {
    EXPECT_GE(e.time, 0.0);
    EXPECT_LT(e.time, c.duration);
    if (e.kind == EventKind::Encounter) {
      EXPECT_NE(e.partner, e.user);
      EXPECT_GT(e.distance_m, 0.5);
      EXPECT_LE(e.distance_m, c.encounter.detection_range_m);
    }
    if (e.kind == EventKind::Checkin) {
      EXPECT_LT(e.location, c.n_locations);
    }
    if (e.kind == EventKind::Report) {
      EXPECT_TRUE(reporters.insert(e.user).second);
    }
  }
}

TEST(Run, LightLoadNoDropsThroughputTracksArrivals) {
  const auto c = checkin_load(2.0, 3600.0);
  const auto m = run_scenario(c);
  EXPECT_EQ(m.drops(), 0u);
  EXPECT_EQ(m.requests_completed, m.requests_submitted);
  // Everything except the final partial block interval lands in the window.
  const double arrivals = static_cast<double>(m.requests_submitted) / c.duration;
  EXPECT_NEAR(m.throughput, arrivals, arrivals * c.block_interval / c.duration + 1e-9);
  EXPECT_NEAR(arrivals, 2.0, 3.0 * std::sqrt(7200.0) / 3600.0);
}

TEST(Run, SaturationPlateausAtServiceCapacity) {
  const auto c = checkin_load(30.0, 2000.0);  // 3 leaves x 5/s = 15/s capacity
  const auto m = run_scenario(c);
  EXPECT_NEAR(m.throughput, 15.0, 0.05 * 15.0);
  EXPECT_GT(m.drops_queue, 0u);
}

TEST(Run, SaturationPlateausAtBandwidth) {
  auto c = checkin_load(16.0, 2000.0);
  c.n_locations = 9;  // 45/s service, so the link binds
  c.bandwidth = 10.0;
  c.packet_loss_rate = 0.2;
  const auto m = run_scenario(c);
  EXPECT_NEAR(m.throughput, 8.0, 0.05 * 8.0);
  EXPECT_GT(m.drops(), 0u);
}

TEST(Run, HalfPacketLossHalvesThroughput) {
  auto c = checkin_load(2.0, 3600.0);
  c.packet_loss_rate = 0.5;
  const auto m = run_scenario(c);
  const double n = static_cast<double>(m.requests_submitted);
  EXPECT_NEAR(static_cast<double>(m.requests_completed), 0.5 * n, 3.0 * std::sqrt(n * 0.25));
  EXPECT_EQ(m.drops_loss + m.requests_completed, m.requests_submitted);
}

TEST(Run, QueueDropsChargeResyncPenalty) {
  auto c = checkin_load(30.0, 600.0);
  c.queue_capacity = 2;
  c.resync_penalty = 60.0;
  const auto m = run_scenario(c);
  ASSERT_GT(m.drops_queue, 0u);
  const auto penalized = std::count_if(m.latencies.begin(), m.latencies.end(), [](double l) { return l >= 60.0; });
  EXPECT_GE(static_cast<std::size_t>(penalized), m.drops_queue);
  EXPECT_EQ(m.latencies.size(), m.requests_completed + m.drops_queue);
}

TEST(Run, FullScenarioSealsValidChain) {
  ScenarioConfig c;
  c.n_users = 60;
  c.infected_seed_users = 2;
  c.query_rate = 0.5;
  c.clean_events = {{0, 3600.0}};
  Scenario s(c);
  const auto& m = s.run();
  EXPECT_TRUE(s.ledger().verify_chain());
  EXPECT_EQ(s.ledger().pending_size(), 0u);
  EXPECT_EQ(m.infections_reported, 2u);
  EXPECT_GT(m.gas[contracts::GasCategory::Heal], 0);
  EXPECT_GT(m.gas[contracts::GasCategory::Bt], 0);
  EXPECT_EQ(m.contracts, s.contracts().contract_count());
  EXPECT_EQ(m.tree_height, 3);
  // Every sender identity was a MAC of some device at that time, or the last
  // MAC while silent.
  std::unordered_map<MacAddr, const proximity::DeviceState*> owner;
  for (const auto& u : s.users())
    for (const auto& iv : u.history.device.mac_history) owner[iv.mac] = &u.history.device;
  s.ledger().for_each_sealed([&](const Transaction& tx) {
    const auto it = owner.find(tx.sender_vid);
    ASSERT_NE(it, owner.end());
    const auto& dev = *it->second;
    const auto at = dev.mac_at(tx.timestamp);
    if (at) {
      EXPECT_EQ(*at, tx.sender_vid);
    }
  });
}

TEST(Property, DeterministicMetrics) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ScenarioConfig c;
    c.n_users = 80;
    c.seed = seed;
    c.infected_seed_users = 1;
    c.packet_loss_rate = 0.1;
    const auto a = run_scenario(c), b = run_scenario(c);
    EXPECT_EQ(a.latencies, b.latencies);
    EXPECT_EQ(a.gas, b.gas);
    EXPECT_EQ(a.requests_completed, b.requests_completed);
    EXPECT_EQ(a.drops_loss, b.drops_loss);
  }
}

TEST(Property, GasAccountingIdentity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ScenarioConfig c;
    c.n_users = 40;
    c.seed = seed;
    c.infected_seed_users = 2;
    c.query_rate = 0.3;
    const auto m = run_scenario(c);
    Wei sum = 0;
    for (auto cat : contracts::kAllCategories) sum += m.gas[cat];
    EXPECT_EQ(m.total_gas, sum);
  }
}

TEST(Property, MoreLoadWeaklyRaisesLatency) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    double prev = 0.0;
    for (double rate : {5.0, 10.0, 20.0, 40.0}) {
      auto c = checkin_load(rate, 600.0);
      c.seed = seed;
      const auto m = run_scenario(c);
      EXPECT_GE(m.mean_latency(), prev - 1e-9) << "seed " << seed << " rate " << rate;
      prev = m.mean_latency();
    }
  }
}

TEST(Property, LongerQueueWeaklyFewerDrops) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (std::size_t q : {1u, 5u, 20u, 80u, 400u}) {
      auto c = checkin_load(20.0, 600.0);
      c.seed = seed;
      c.queue_capacity = q;
      const auto m = run_scenario(c);
      EXPECT_LE(m.drops_queue, prev) << "seed " << seed << " queue " << q;
      prev = m.drops_queue;
    }
  }
}

TEST(Property, SmallerBlocksWeaklyRaiseSealingDelay) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    double prev = 0.0;
    for (std::size_t b : {1000u, 200u, 60u, 20u}) {
      auto c = checkin_load(3.0, 1200.0);
      c.seed = seed;
      c.block_capacity = b;
      const auto m = run_scenario(c);
      EXPECT_GE(m.mean_sealing_delay, prev - 1e-9) << "seed " << seed << " block " << b;
      prev = m.mean_sealing_delay;
    }
  }
}

TEST(Property, ThroughputNeverExceedsCapacity) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (double rate : {5.0, 20.0, 60.0}) {
      auto c = checkin_load(rate, 900.0);
      c.seed = seed;
      c.bandwidth = 25.0;
      c.packet_loss_rate = 0.1;
      const auto m = run_scenario(c);
      const double cap = std::min(25.0 * 0.9, 3 * c.service_rate);
      EXPECT_LE(m.throughput, 1.05 * cap);
    }
  }
}

TEST(Stats, LinearFitExact) {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto f = stats::linear_fit(x, y);
  EXPECT_DOUBLE_EQ(f.slope, 2.0);
  EXPECT_DOUBLE_EQ(f.intercept, 1.0);
  EXPECT_DOUBLE_EQ(f.r2, 1.0);
  EXPECT_DOUBLE_EQ(stats::sample_variance(y), oracle::sample_var(y));
}
