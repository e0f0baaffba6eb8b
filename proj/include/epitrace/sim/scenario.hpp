#pragma once

// End-to-end scenario execution.
//
// Request path: user -> network link (FIFO rate limiter at `bandwidth`, then
// Bernoulli loss) -> contract leaf queue (check-ins, queries) -> ledger pool
// -> block sealed at the next `block_interval` tick. A request completes when
// its transaction is sealed (queries complete when the leaf serves them).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epitrace/contracts.hpp"
#include "epitrace/exposure.hpp"
#include "epitrace/ledger.hpp"
#include "epitrace/proximity.hpp"
#include "epitrace/sim/config.hpp"
#include "epitrace/sim/events.hpp"

namespace epitrace::sim {

struct ScenarioMetrics {
  std::vector<double> latencies;  // one per completed request, plus one per queue drop
  double throughput = 0.0;        // requests completed within [0, duration] per second
  std::size_t requests_submitted = 0;
  std::size_t requests_completed = 0;
  std::size_t completed_in_window = 0;
  std::size_t drops_loss = 0;
  std::size_t drops_queue = 0;
  std::size_t encounters_lost = 0;  // a device was silent
  std::size_t infections_reported = 0;
  contracts::GasMeter gas;
  Wei total_gas = 0;
  double avg_request_cost = 0.0;  // total_gas / requests_completed
  double cost_stddev_over_rounds = 0.0;
  Wei rebates = 0;
  double mean_sealing_delay = 0.0;  // seal time - time the tx reached the pool
  std::size_t blocks = 0;
  std::size_t contracts = 0;
  int tree_height = 0;

  std::size_t drops() const { return drops_loss + drops_queue; }

  double mean_latency() const {
    if (latencies.empty()) return 0.0;
    return std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
  }

  double latency_quantile(double q) const {
    if (latencies.empty()) return 0.0;
    auto v = latencies;
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
    return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
  }
};

struct ReportRecord {
  std::uint32_t user = 0;
  Seconds time = 0.0;
  bool delivered = false;
  TxId tx;
  HealthStatusUpdate update;
};

struct UserState {
  health::UserHistory history;
  HealthStatus status = HealthStatus::Normal;
  std::unordered_set<std::uint32_t> known_locations;
};

class Scenario {
 public:
  explicit Scenario(ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        ledger_((cfg_.validate(), cfg_.block_capacity)),
        group_(cfg_.group_config()),
        layout_(cfg_.layout()) {
    std::seed_seq runtime_seed{cfg_.seed, std::uint64_t{0x5eed}};
    runtime_rng_.seed(runtime_seed);
  }

  const ScenarioMetrics& run() {
    if (ran_) return metrics_;
    ran_ = true;
    std::mt19937_64 event_rng(cfg_.seed);
    const auto events = generate_events(cfg_, event_rng);

    users_.resize(cfg_.n_users);
    for (std::uint32_t u = 0; u < cfg_.n_users; ++u)
      users_[u].history.device = proximity::make_device(u, macs_, runtime_rng_, 0.0, cfg_.rotation_period,
                                                        cfg_.silent_period);

    next_tick_ = cfg_.block_interval;
    for (const auto& e : events) {
      advance_to(e.time);
      handle(e);
    }
    advance_to(cfg_.duration);
    while (!in_flight_.empty() || ledger_.pending_size() > 0) tick();

    metrics_.throughput = static_cast<double>(metrics_.completed_in_window) / cfg_.duration;
    metrics_.total_gas = metrics_.gas.total();
    metrics_.avg_request_cost = metrics_.requests_completed
                                    ? static_cast<double>(metrics_.total_gas) /
                                          static_cast<double>(metrics_.requests_completed)
                                    : 0.0;
    metrics_.rebates = group_.rebates_paid();
    metrics_.mean_sealing_delay = sealed_count_ ? sealing_delay_sum_ / static_cast<double>(sealed_count_) : 0.0;
    metrics_.blocks = ledger_.blocks().size();
    metrics_.contracts = group_.contract_count();
    metrics_.tree_height = group_.tree_height();
    return metrics_;
  }

  const ScenarioConfig& config() const { return cfg_; }
  const ScenarioMetrics& metrics() const { return metrics_; }
  const ledger::Ledger& ledger() const { return ledger_; }
  const contracts::ContractGroup& contracts() const { return group_; }
  const std::vector<UserState>& users() const { return users_; }
  const std::vector<ReportRecord>& reports() const { return reports_; }
  const std::vector<GeoPath>& layout() const { return layout_; }

  health::MaterialSurface surface_of(const GeoPath& geo) const {
    for (std::size_t i = 0; i < layout_.size(); ++i)
      if (layout_[i] == geo) return cfg_.surfaces[i % cfg_.surfaces.size()];
    return health::MaterialSurface::Other;
  }

  health::SurfaceLookup surface_lookup() const {
    return [this](const GeoPath& g) { return surface_of(g); };
  }

 private:
  struct InFlight {
    Seconds ready;
    Transaction tx;
  };
  struct LaterFirst {
    bool operator()(const InFlight& a, const InFlight& b) const {
      return a.ready != b.ready ? a.ready > b.ready : a.tx.id > b.tx.id;
    }
  };
  struct Timing {
    Seconds submitted;
    Seconds ready;
  };

  TxId next_id() { return TxId{next_tx_++}; }

  /// Passes a request through the link. Returns false if the packet is lost.
  bool transmit(Seconds t, Seconds& delivered) {
    delivered = t;
    if (cfg_.bandwidth > 0.0) {
      delivered = std::max(t, link_free_);
      link_free_ = delivered + 1.0 / cfg_.bandwidth;
    }
    if (cfg_.packet_loss_rate > 0.0 && std::bernoulli_distribution(cfg_.packet_loss_rate)(runtime_rng_)) {
      ++metrics_.drops_loss;
      return false;
    }
    return true;
  }

  void enqueue_tx(Transaction tx, Seconds submitted, Seconds ready) {
    timing_[tx.id] = {submitted, ready};
    in_flight_.push({ready, std::move(tx)});
  }

  void complete(Seconds submitted, Seconds at) {
    ++metrics_.requests_completed;
    if (at <= cfg_.duration) ++metrics_.completed_in_window;
    metrics_.latencies.push_back(at - submitted);
  }

  void advance_to(Seconds t) {
    while (next_tick_ <= t) tick();
  }

  void tick() {
    const Seconds now = next_tick_;
    next_tick_ += cfg_.block_interval;
    while (!in_flight_.empty() && in_flight_.top().ready <= now) {
      ledger_.submit(in_flight_.top().tx);
      in_flight_.pop();
    }
    if (ledger_.pending_size() == 0) return;
    const auto& block = ledger_.seal_block(now);
    for (const auto& tx : block.txs) {
      const auto it = timing_.find(tx.id);
      complete(it->second.submitted, now);
      sealing_delay_sum_ += now - it->second.ready;
      ++sealed_count_;
      timing_.erase(it);
    }
  }

  UserState& user_at(std::uint32_t u, Seconds t) {
    auto& user = users_[u];
    proximity::advance(user.history.device, t, macs_, runtime_rng_);
    return user;
  }

  void handle(const Event& e) {
    switch (e.kind) {
      case EventKind::Checkin: on_checkin(e); break;
      case EventKind::StatusQuery: on_query(e); break;
      case EventKind::Encounter: on_encounter(e); break;
      case EventKind::Report: on_report(e); break;
      case EventKind::Clean: {
        const auto& geo = layout_[e.location];
        if (group_.find_leaf(geo)) group_.apply_operator_event(geo, contracts::StateEvent::LocationIsCleaned, e.time);
        break;
      }
    }
  }

  void on_checkin(const Event& e) {
    auto& user = user_at(e.user, e.time);
    ++metrics_.requests_submitted;
    Seconds at = 0.0;
    if (!transmit(e.time, at)) return;
    const auto& geo = layout_[e.location];
    const CheckinRecord rec{geo, e.time, user.status};
    const bool cached = cfg_.cache_contract_addresses && user.known_locations.contains(e.location);
    const auto receipt = group_.route_request(geo, rec, at, cached);
    metrics_.gas += receipt.charged;
    if (!receipt.accepted) {
      ++metrics_.drops_queue;
      metrics_.latencies.push_back(at - e.time + cfg_.resync_penalty);
      return;
    }
    user.known_locations.insert(e.location);
    user.history.visits.push_back({geo, e.time});
    enqueue_tx(Transaction{next_id(), user.history.device.identity(), rec, e.time, receipt.gas_charged}, e.time,
               receipt.completed_at);
  }

  void on_query(const Event& e) {
    auto& user = user_at(e.user, e.time);
    ++metrics_.requests_submitted;
    Seconds at = 0.0;
    if (!transmit(e.time, at)) return;
    const bool cached = cfg_.cache_contract_addresses && user.known_locations.contains(e.location);
    const auto receipt = group_.route_request(layout_[e.location], contracts::StatusQuery{}, at, cached);
    metrics_.gas += receipt.charged;
    if (!receipt.accepted) {
      ++metrics_.drops_queue;
      metrics_.latencies.push_back(at - e.time + cfg_.resync_penalty);
      return;
    }
    user.known_locations.insert(e.location);
    complete(e.time, receipt.completed_at);
  }

  void on_encounter(const Event& e) {
    auto& a = user_at(e.user, e.time);
    auto& b = user_at(e.partner, e.time);
    if (a.history.device.silent() || b.history.device.silent() ||
        e.distance_m > cfg_.encounter.detection_range_m) {
      ++metrics_.encounters_lost;
      return;
    }
    const auto enc = proximity::record_encounter(a.history.device, b.history.device, e.distance_m, e.duration, e.time,
                                                 cfg_.encounter, runtime_rng_);
    const auto ida = next_id();
    const auto idb = next_id();
    auto [ta, tb] = proximity::encounter_transactions(enc, ida, idb, cfg_.gas.contact_record_op);
    for (auto* tx : {&ta, &tb}) {
      ++metrics_.requests_submitted;
      Seconds at = 0.0;
      if (!transmit(e.time, at)) continue;
      metrics_.gas.charge(contracts::GasCategory::Bt, cfg_.gas.contact_record_op);
      enqueue_tx(std::move(*tx), e.time, at);
    }
  }

  void on_report(const Event& e) {
    auto& user = user_at(e.user, e.time);
    user.status = HealthStatus::Infected;
    ++metrics_.requests_submitted;
    ++metrics_.infections_reported;
    ReportRecord rec{e.user, e.time, false, next_id(), health::build_infection_update(user.history, e.time)};
    Seconds at = 0.0;
    if (transmit(e.time, at)) {
      std::vector<Visit> live;
      for (const auto& v : rec.update.recent_visits)
        if (v.checkin_time >= at - kFourteenDays) live.push_back(v);
      contracts::GasMeter charged;
      group_.apply_retroactive_infection(live, at, &charged);
      charged.charge(contracts::GasCategory::Heal, cfg_.gas.health_broadcast_op);
      metrics_.gas += charged;
      enqueue_tx(Transaction{rec.tx, user.history.device.identity(), rec.update, e.time, charged.total()}, e.time, at);
      rec.delivered = true;
    }
    reports_.push_back(std::move(rec));
  }

  ScenarioConfig cfg_;
  ledger::Ledger ledger_;
  contracts::ContractGroup group_;
  std::vector<GeoPath> layout_;
  std::vector<UserState> users_;
  std::vector<ReportRecord> reports_;
  proximity::MacAllocator macs_;
  std::mt19937_64 runtime_rng_;
  std::priority_queue<InFlight, std::vector<InFlight>, LaterFirst> in_flight_;
  std::unordered_map<TxId, Timing> timing_;
  ScenarioMetrics metrics_;
  Seconds next_tick_ = 0.0;
  Seconds link_free_ = 0.0;
  double sealing_delay_sum_ = 0.0;
  std::size_t sealed_count_ = 0;
  std::uint64_t next_tx_ = 1;
  bool ran_ = false;
};

inline ScenarioMetrics run_scenario(const ScenarioConfig& cfg) {
  Scenario s(cfg);
  return s.run();
}

}  // namespace epitrace::sim
