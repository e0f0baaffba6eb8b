#pragma once

// Hierarchical smart-contract group: state -> county -> city -> location.
//
// Each location leaf runs the Empty/Infected/Clean state machine and serves
// requests from a bounded FIFO at a fixed rate. Status transitions are
// committed in FIFO order at admission, stamped with the request's service
// start time; the queue determines timing and overflow, not ordering.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "epitrace/types.hpp"

namespace epitrace::contracts {

enum class ContractErrc { UndefinedTransition, UnknownLocation, InvalidRoute };

class ContractError : public std::runtime_error {
 public:
  ContractError(ContractErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ContractErrc code() const noexcept { return code_; }

 private:
  ContractErrc code_;
};

enum class StatusKind : std::uint8_t { Empty, Infected, Clean };

struct LocationStatus {
  StatusKind kind = StatusKind::Empty;
  Seconds since = 0.0;  // time of the most recent infecting event; Infected only

  static constexpr LocationStatus empty() { return {StatusKind::Empty, 0.0}; }
  static constexpr LocationStatus clean() { return {StatusKind::Clean, 0.0}; }
  static constexpr LocationStatus infected(Seconds t) { return {StatusKind::Infected, t}; }

  bool is_infected() const { return kind == StatusKind::Infected; }
  bool operator==(const LocationStatus& o) const {
    return kind == o.kind && (kind != StatusKind::Infected || since == o.since);
  }
};

inline const char* to_string(StatusKind k) {
  switch (k) {
    case StatusKind::Empty: return "Empty";
    case StatusKind::Infected: return "Infected";
    case StatusKind::Clean: return "Clean";
  }
  return "?";
}

enum class StateEvent : std::uint8_t {
  GenerateContract,
  NormalUserCheckin,
  InfectedUserCheckin,
  InfectedUserUpdate,
  LocationIsCleaned,
  Wait14Days,
};

inline constexpr std::array<StateEvent, 6> kAllEvents{
    StateEvent::GenerateContract,   StateEvent::NormalUserCheckin, StateEvent::InfectedUserCheckin,
    StateEvent::InfectedUserUpdate, StateEvent::LocationIsCleaned, StateEvent::Wait14Days,
};

inline const char* to_string(StateEvent e) {
  switch (e) {
    case StateEvent::GenerateContract: return "GenerateContract";
    case StateEvent::NormalUserCheckin: return "NormalUserCheckin";
    case StateEvent::InfectedUserCheckin: return "InfectedUserCheckin";
    case StateEvent::InfectedUserUpdate: return "InfectedUserUpdate";
    case StateEvent::LocationIsCleaned: return "LocationIsCleaned";
    case StateEvent::Wait14Days: return "Wait14Days";
  }
  return "?";
}

/// Location infection automaton. `current` is nullopt while no contract exists.
inline LocationStatus step_location_state(std::optional<LocationStatus> current, StateEvent e, Seconds now) {
  auto undefined = [&]() -> ContractError {
    return ContractError(ContractErrc::UndefinedTransition,
                         std::string("undefined transition: ") +
                             (current ? to_string(current->kind) : "NoContract") + " + " + to_string(e));
  };
  if (!current) {
    if (e == StateEvent::GenerateContract) return LocationStatus::empty();
    throw undefined();
  }
  switch (current->kind) {
    case StatusKind::Empty:
      if (e == StateEvent::NormalUserCheckin) return LocationStatus::clean();
      if (e == StateEvent::InfectedUserCheckin) return LocationStatus::infected(now);
      break;
    case StatusKind::Clean:
      if (e == StateEvent::NormalUserCheckin) return LocationStatus::clean();
      if (e == StateEvent::InfectedUserCheckin || e == StateEvent::InfectedUserUpdate)
        return LocationStatus::infected(now);
      break;
    case StatusKind::Infected:
      switch (e) {
        case StateEvent::LocationIsCleaned: return LocationStatus::clean();
        case StateEvent::Wait14Days:
          if (now - current->since >= kFourteenDays) return LocationStatus::clean();
          break;
        case StateEvent::NormalUserCheckin: return *current;
        case StateEvent::InfectedUserCheckin:
        case StateEvent::InfectedUserUpdate: return LocationStatus::infected(now);
        default: break;
      }
      break;
  }
  throw undefined();
}

/// Gas charged per operation, in wei.
struct GasTable {
  Wei contract_setup = 1'900'000;
  Wei routing_hop = 5'000;
  Wei checkin_op = 380'000;
  Wei status_query_op = 20'000;
  Wei retroactive_update_op = 50'000;
  Wei health_broadcast_op = 30'000;
  Wei contact_record_op = 15'000;
};

enum class GasCategory : std::uint8_t { Loc, Bt, Heal, Setup, Op };
inline constexpr std::array<GasCategory, 5> kAllCategories{GasCategory::Loc, GasCategory::Bt, GasCategory::Heal,
                                                           GasCategory::Setup, GasCategory::Op};

inline const char* to_string(GasCategory c) {
  static constexpr const char* kNames[] = {"loc", "bt", "heal", "setup", "op"};
  return kNames[static_cast<int>(c)];
}

struct GasMeter {
  std::array<Wei, 5> by_category{};

  void charge(GasCategory c, Wei amount) { by_category[static_cast<std::size_t>(c)] += amount; }
  Wei operator[](GasCategory c) const { return by_category[static_cast<std::size_t>(c)]; }
  Wei total() const {
    Wei t = 0;
    for (auto v : by_category) t += v;
    return t;
  }
  GasMeter& operator+=(const GasMeter& o) {
    for (std::size_t i = 0; i < by_category.size(); ++i) by_category[i] += o.by_category[i];
    return *this;
  }
  bool operator==(const GasMeter&) const = default;
};

/// Bounded FIFO with deterministic service time. Tracks the service start
/// times of requests still waiting; the one in service is not counted.
class LeafQueue {
 public:
  struct Slot {
    Seconds start;
    Seconds completion;
  };

  /// Admits an arrival at `now`, or returns nullopt when `capacity` requests
  /// are already waiting.
  std::optional<Slot> admit(Seconds now, Seconds service_time, std::size_t capacity) {
    release(now);
    const Seconds start = std::max(now, busy_until_);
    if (start > now && waiting_.size() >= capacity) return std::nullopt;
    busy_until_ = start + service_time;
    if (start > now) waiting_.push_back(start);
    return Slot{start, busy_until_};
  }

  std::size_t length(Seconds now) const {
    return static_cast<std::size_t>(
        std::count_if(waiting_.begin(), waiting_.end(), [now](Seconds s) { return s > now; }));
  }

  Seconds busy_until() const { return busy_until_; }

 private:
  void release(Seconds now) {
    while (!waiting_.empty() && waiting_.front() <= now) waiting_.pop_front();
  }

  std::deque<Seconds> waiting_;
  Seconds busy_until_ = 0.0;
};

enum class Level : std::uint8_t { State, County, City, Location };

struct ContractNode {
  Level level = Level::State;
  std::string name;
  std::map<std::string, std::unique_ptr<ContractNode>> children;
  std::optional<LocationStatus> status;  // Location level only
  LeafQueue queue;                       // Location level only
  GasMeter gas;

  /// Edges on the longest path from this node down to a leaf.
  int height() const {
    int h = 0;
    for (const auto& [_, child] : children) h = std::max(h, 1 + child->height());
    return h;
  }

  std::size_t node_count() const {
    std::size_t n = 1;
    for (const auto& [_, child] : children) n += child->node_count();
    return n;
  }
};

struct GroupConfig {
  GasTable gas;
  std::size_t queue_capacity = 50;
  double service_rate = 5.0;  // requests per simulated second, per leaf
  bool rebate_enabled = true;
  Wei rebate_bonus = 100;
};

struct StatusQuery {};
using Request = std::variant<CheckinRecord, StatusQuery>;

struct Receipt {
  bool accepted = false;
  LocationStatus status_after;
  Wei gas_charged = 0;
  Wei rebate = 0;
  Seconds completed_at = 0.0;
  GasMeter charged;  // gas_charged split by category
  std::size_t contracts_created = 0;
};

class ContractGroup {
 public:
  explicit ContractGroup(GroupConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.service_rate > 0.0)) throw std::invalid_argument("contracts: service_rate must be > 0");
  }

  const GroupConfig& config() const { return cfg_; }

  /// Routes a check-in or status query down the tree, creating missing
  /// contracts, and queues it at the location leaf.
  Receipt route_request(const GeoPath& geo, const Request& req, Seconds now, bool cached_address = false) {
    Receipt r;
    ContractNode& leaf = ensure_path(geo, r.charged, r.contracts_created);
    const auto slot = leaf.queue.admit(now, 1.0 / cfg_.service_rate, cfg_.queue_capacity);
    if (!slot) {
      ++drops_;
      r.accepted = false;
      r.status_after = *leaf.status;
      r.completed_at = now;
      r.gas_charged = r.charged.total();
      gas_ += r.charged;
      return r;
    }
    r.accepted = true;
    r.completed_at = slot->completion;
    expire(leaf, slot->start);

    if (!cached_address) {
      // state->county, county->city, city->location
      for (ContractNode* hop : path_nodes(geo)) {
        hop->gas.charge(GasCategory::Loc, cfg_.gas.routing_hop);
        r.charged.charge(GasCategory::Loc, cfg_.gas.routing_hop);
      }
    }
    Wei op = 0;
    if (const auto* checkin = std::get_if<CheckinRecord>(&req)) {
      const auto e = checkin->health_status == HealthStatus::Infected ? StateEvent::InfectedUserCheckin
                                                                      : StateEvent::NormalUserCheckin;
      leaf.status = step_location_state(leaf.status, e, slot->start);
      op = cfg_.gas.checkin_op;
    } else {
      op = cfg_.gas.status_query_op;
    }
    leaf.gas.charge(GasCategory::Op, op);
    r.charged.charge(GasCategory::Op, op);
    r.status_after = *leaf.status;
    r.gas_charged = r.charged.total();
    if (cfg_.rebate_enabled) {
      r.rebate = r.gas_charged + cfg_.rebate_bonus;
      rebates_ += r.rebate;
    }
    gas_ += r.charged;
    return r;
  }

  /// Reads a location's status, applying lazy 14-day expiry first. Creates
  /// the leaf (and any missing ancestors) when it does not exist yet.
  LocationStatus get_location_status(const GeoPath& geo, Seconds now) {
    GasMeter charged;
    std::size_t created = 0;
    ContractNode& leaf = ensure_path(geo, charged, created);
    gas_ += charged;
    expire(leaf, now);
    return *leaf.status;
  }

  /// Marks every visited location infected as of `now`. Returns the locations
  /// whose status changed to Infected (first occurrence order); already
  /// infected locations only get `since` refreshed.
  std::vector<GeoPath> apply_retroactive_infection(std::span<const Visit> visits, Seconds now,
                                                   GasMeter* charged = nullptr) {
    std::vector<ContractNode*> leaves;
    leaves.reserve(visits.size());
    for (const auto& v : visits) {
      if (v.checkin_time < now - kFourteenDays)
        throw std::invalid_argument("contracts: visit older than the 14-day window");
      ContractNode* leaf = find_leaf(v.geo);
      if (!leaf)
        throw ContractError(ContractErrc::UnknownLocation, "contracts: no contract for " + v.geo.to_string());
      leaves.push_back(leaf);
    }
    std::vector<GeoPath> changed;
    for (std::size_t i = 0; i < visits.size(); ++i) {
      ContractNode& leaf = *leaves[i];
      expire(leaf, now);
      const bool was_infected = leaf.status->is_infected();
      leaf.status = step_location_state(leaf.status, StateEvent::InfectedUserUpdate, now);
      leaf.gas.charge(GasCategory::Heal, cfg_.gas.retroactive_update_op);
      gas_.charge(GasCategory::Heal, cfg_.gas.retroactive_update_op);
      if (charged) charged->charge(GasCategory::Heal, cfg_.gas.retroactive_update_op);
      if (!was_infected && std::find(changed.begin(), changed.end(), visits[i].geo) == changed.end())
        changed.push_back(visits[i].geo);
    }
    return changed;
  }

  /// Injects an operator event (LocationIsCleaned) at an existing leaf.
  /// Returns false when the event is not defined for the current status.
  bool apply_operator_event(const GeoPath& geo, StateEvent e, Seconds now) {
    ContractNode* leaf = find_leaf(geo);
    if (!leaf) throw ContractError(ContractErrc::UnknownLocation, "contracts: no contract for " + geo.to_string());
    expire(*leaf, now);
    try {
      leaf->status = step_location_state(leaf->status, e, now);
    } catch (const ContractError&) {
      return false;
    }
    return true;
  }

  /// Status without lazy expiry or creation; nullopt if no contract exists.
  std::optional<LocationStatus> peek_status(const GeoPath& geo) const {
    const ContractNode* leaf = find_leaf(geo);
    return leaf ? leaf->status : std::nullopt;
  }

  std::size_t queue_length(const GeoPath& geo, Seconds now) const {
    const ContractNode* leaf = find_leaf(geo);
    return leaf ? leaf->queue.length(now) : 0;
  }

  int tree_height() const {
    int h = 0;
    for (const auto& [_, root] : roots_) h = std::max(h, root->height());
    return h;
  }

  std::size_t contract_count() const {
    std::size_t n = 0;
    for (const auto& [_, root] : roots_) n += root->node_count();
    return n;
  }

  const ContractNode* root(const std::string& state) const {
    const auto it = roots_.find(state);
    return it == roots_.end() ? nullptr : it->second.get();
  }

  const GasMeter& gas() const { return gas_; }
  Wei rebates_paid() const { return rebates_; }
  std::size_t drops() const { return drops_; }

  ContractNode* find_leaf(const GeoPath& geo) {
    return const_cast<ContractNode*>(std::as_const(*this).find_leaf(geo));
  }

  const ContractNode* find_leaf(const GeoPath& geo) const {
    const auto it = roots_.find(geo.state);
    if (it == roots_.end()) return nullptr;
    const ContractNode* node = it->second.get();
    for (const auto* part : {&geo.county, &geo.city, &geo.location}) {
      const auto c = node->children.find(*part);
      if (c == node->children.end()) return nullptr;
      node = c->second.get();
    }
    return node;
  }

 private:
  ContractNode& ensure_path(const GeoPath& geo, GasMeter& charged, std::size_t& created) {
    if (!geo.complete())
      throw ContractError(ContractErrc::InvalidRoute, "contracts: incomplete geo path '" + geo.to_string() + "'");
    auto make = [&](Level level, const std::string& name) {
      auto node = std::make_unique<ContractNode>();
      node->level = level;
      node->name = name;
      node->gas.charge(GasCategory::Setup, cfg_.gas.contract_setup);
      charged.charge(GasCategory::Setup, cfg_.gas.contract_setup);
      ++created;
      return node;
    };
    auto& root = roots_[geo.state];
    if (!root) root = make(Level::State, geo.state);
    ContractNode* node = root.get();
    const std::array<std::pair<Level, const std::string*>, 3> below{
        {{Level::County, &geo.county}, {Level::City, &geo.city}, {Level::Location, &geo.location}}};
    for (const auto& [level, name] : below) {
      auto& child = node->children[*name];
      if (!child) {
        child = make(level, *name);
        if (level == Level::Location) child->status = step_location_state(std::nullopt, StateEvent::GenerateContract, 0.0);
      }
      node = child.get();
    }
    return *node;
  }

  /// The three forwarding contracts (state, county, city) on the path to geo.
  std::array<ContractNode*, 3> path_nodes(const GeoPath& geo) {
    ContractNode* s = roots_.at(geo.state).get();
    ContractNode* c = s->children.at(geo.county).get();
    ContractNode* t = c->children.at(geo.city).get();
    return {s, c, t};
  }

  static void expire(ContractNode& leaf, Seconds now) {
    if (leaf.status && leaf.status->is_infected() && now - leaf.status->since >= kFourteenDays)
      leaf.status = step_location_state(leaf.status, StateEvent::Wait14Days, now);
  }

  GroupConfig cfg_;
  std::map<std::string, std::unique_ptr<ContractNode>> roots_;
  GasMeter gas_;
  Wei rebates_ = 0;
  std::size_t drops_ = 0;
};

}  // namespace epitrace::contracts
