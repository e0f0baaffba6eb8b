#pragma once

// Scenario configuration and its key = value text format (see docs/formats.md).

#include <cstdint>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "epitrace/contracts.hpp"
#include "epitrace/health.hpp"
#include "epitrace/proximity.hpp"
#include "epitrace/text.hpp"
#include "epitrace/types.hpp"

namespace epitrace::sim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CleanEvent {
  std::uint32_t location = 0;  // index into the location layout
  Seconds time = 0.0;
};

struct ScenarioConfig {
  // workload
  std::uint32_t n_users = 100;
  double checkin_rate = 1.0;  // per user per simulated hour
  double contact_rate = 0.5;  // encounters initiated per user per hour
  double query_rate = 0.0;    // status queries per user per hour
  Seconds duration = kDay;
  std::uint32_t infected_seed_users = 0;
  std::uint64_t seed = 1;

  // geography
  std::uint32_t n_locations = 9;
  std::uint32_t n_cities = 1;
  std::string state = "CA";
  std::string county = "Yolo";
  std::vector<health::MaterialSurface> surfaces{health::kAllSurfaces.begin(), health::kAllSurfaces.end()};
  std::vector<CleanEvent> clean_events;

  // ledger
  std::size_t block_capacity = 1000;
  Seconds block_interval = 15.0;

  // contracts
  std::size_t queue_capacity = 50;
  double service_rate = 5.0;
  contracts::GasTable gas;
  bool rebate_enabled = true;
  Wei rebate_bonus = 100;
  bool cache_contract_addresses = false;

  // network
  double bandwidth = 1000.0;  // requests/s; 0 disables the limit
  double packet_loss_rate = 0.0;
  Seconds resync_penalty = 60.0;

  // proximity
  Seconds rotation_period = 900.0;
  Seconds silent_period = 10.0;
  proximity::EncounterParams encounter;

  void validate() const {
    auto fail = [](const std::string& why) { throw ConfigError("config: " + why); };
    if (n_users < 1) fail("n_users must be >= 1");
    if (checkin_rate < 0 || contact_rate < 0 || query_rate < 0) fail("rates must be >= 0");
    if (contact_rate > 0 && n_users < 2) fail("contacts need at least two users");
    if (!(duration > 0)) fail("duration must be > 0");
    if (infected_seed_users > n_users) fail("infected_seed_users exceeds n_users");
    if (n_locations < 1) fail("n_locations must be >= 1");
    if (n_cities < 1 || n_cities > n_locations) fail("n_cities must be in [1, n_locations]");
    if (state.empty() || county.empty()) fail("state and county must be nonempty");
    if (surfaces.empty()) fail("surfaces must be nonempty");
    for (const auto& c : clean_events)
      if (c.location >= n_locations) fail("clean event references unknown location");
    if (block_capacity < 1) fail("block_capacity must be >= 1");
    if (!(block_interval > 0)) fail("block_interval must be > 0");
    if (!(service_rate > 0)) fail("service_rate must be > 0");
    if (bandwidth < 0) fail("bandwidth must be >= 0");
    if (!(packet_loss_rate >= 0 && packet_loss_rate < 1)) fail("packet_loss_rate must be in [0, 1)");
    if (resync_penalty < 0) fail("resync_penalty must be >= 0");
    if (!(rotation_period > silent_period) || silent_period < 0) fail("need rotation_period > silent_period >= 0");
    if (encounter.rssi_samples < 1) fail("rssi.samples must be >= 1");
    if (!(encounter.detection_range_m > 0.5)) fail("detection_range must be > 0.5 m");
    try {
      encounter.rssi.validate();
    } catch (const std::exception& e) {
      fail(e.what());
    }
    for (Wei w : {gas.contract_setup, gas.routing_hop, gas.checkin_op, gas.status_query_op, gas.retroactive_update_op,
                  gas.health_broadcast_op, gas.contact_record_op})
      if (w < 0) fail("gas costs must be >= 0");
  }

  contracts::GroupConfig group_config() const {
    contracts::GroupConfig g;
    g.gas = gas;
    g.queue_capacity = queue_capacity;
    g.service_rate = service_rate;
    g.rebate_enabled = rebate_enabled;
    g.rebate_bonus = rebate_bonus;
    return g;
  }

  /// Locations "loc-NN", dealt round-robin over cities "city-N".
  std::vector<GeoPath> layout() const {
    std::vector<GeoPath> out;
    out.reserve(n_locations);
    for (std::uint32_t i = 0; i < n_locations; ++i) {
      char loc[32];
      std::snprintf(loc, sizeof loc, "loc-%02u", i);
      out.push_back({state, county, "city-" + std::to_string(i % n_cities), loc});
    }
    return out;
  }
};

struct SweepSpec {
  std::vector<std::size_t> contracts{3, 9, 18};
  std::vector<std::size_t> requests{100, 200, 300, 400, 500, 600};
  int rounds = 10;
  double avg_weight = 0.5;
  double var_weight = 0.5;
};

struct FitSpec {
  std::string data;
  double tol = 1e-8;
  int max_iter = 100;
  health::SignConvention sign = health::SignConvention::StandardLogit;
};

struct ConfigFile {
  ScenarioConfig scenario;
  SweepSpec sweep;
  FitSpec fit;
};

namespace detail {

template <typename T>
T number(std::string_view key, std::string_view v) {
  if constexpr (std::is_floating_point_v<T>) {
    if (auto d = text::parse_double(v)) return static_cast<T>(*d);
  } else {
    if (auto i = text::parse_int<T>(v)) return *i;
  }
  throw ConfigError("config: bad value for " + std::string(key) + ": '" + std::string(v) + "'");
}

inline bool boolean(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

template <typename T>
std::vector<T> number_list(std::string_view key, std::string_view v) {
  std::vector<T> out;
  for (auto part : text::split(v, ',')) out.push_back(number<T>(key, text::trim(part)));
  return out;
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
inline ConfigFile parse_config(std::istream& is) {
  using detail::number;
  ConfigFile cf;
  auto& s = cf.scenario;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = text::trim(line.substr(0, eq));
    const auto v = text::trim(line.substr(eq + 1));

    if (key == "n_users") s.n_users = number<std::uint32_t>(key, v);
    else if (key == "checkin_rate") s.checkin_rate = number<double>(key, v);
    else if (key == "contact_rate") s.contact_rate = number<double>(key, v);
    else if (key == "query_rate") s.query_rate = number<double>(key, v);
    else if (key == "duration") s.duration = number<double>(key, v);
    else if (key == "infected_seed_users") s.infected_seed_users = number<std::uint32_t>(key, v);
    else if (key == "seed") s.seed = number<std::uint64_t>(key, v);
    else if (key == "n_locations") s.n_locations = number<std::uint32_t>(key, v);
    else if (key == "n_cities") s.n_cities = number<std::uint32_t>(key, v);
    else if (key == "state") s.state = std::string(v);
    else if (key == "county") s.county = std::string(v);
    else if (key == "surfaces") {
      s.surfaces.clear();
      for (auto part : text::split(v, ',')) {
        const auto ms = health::parse_surface(text::trim(part));
        if (!ms) throw ConfigError("config: unknown surface '" + std::string(text::trim(part)) + "'");
        s.surfaces.push_back(*ms);
      }
    } else if (key == "clean") {
      s.clean_events.clear();
      for (auto part : text::split(v, ',')) {
        const auto item = text::trim(part);
        const auto at = item.find('@');
        if (at == std::string_view::npos) throw ConfigError("config: clean entries are <location>@<time>");
        s.clean_events.push_back({number<std::uint32_t>(key, item.substr(0, at)), number<double>(key, item.substr(at + 1))});
      }
    } else if (key == "block_capacity") s.block_capacity = number<std::size_t>(key, v);
    else if (key == "block_interval") s.block_interval = number<double>(key, v);
    else if (key == "queue_capacity") s.queue_capacity = number<std::size_t>(key, v);
    else if (key == "service_rate") s.service_rate = number<double>(key, v);
    else if (key == "gas.contract_setup") s.gas.contract_setup = number<Wei>(key, v);
    else if (key == "gas.routing_hop") s.gas.routing_hop = number<Wei>(key, v);
    else if (key == "gas.checkin_op") s.gas.checkin_op = number<Wei>(key, v);
    else if (key == "gas.status_query_op") s.gas.status_query_op = number<Wei>(key, v);
    else if (key == "gas.retroactive_update_op") s.gas.retroactive_update_op = number<Wei>(key, v);
    else if (key == "gas.health_broadcast_op") s.gas.health_broadcast_op = number<Wei>(key, v);
    else if (key == "gas.contact_record_op") s.gas.contact_record_op = number<Wei>(key, v);
    else if (key == "rebate.enabled") s.rebate_enabled = detail::boolean(key, v);
    else if (key == "rebate.bonus") s.rebate_bonus = number<Wei>(key, v);
    else if (key == "cache_contract_addresses") s.cache_contract_addresses = detail::boolean(key, v);
    else if (key == "bandwidth") s.bandwidth = number<double>(key, v);
    else if (key == "packet_loss_rate") s.packet_loss_rate = number<double>(key, v);
    else if (key == "resync_penalty") s.resync_penalty = number<double>(key, v);
    else if (key == "rotation_period") s.rotation_period = number<double>(key, v);
    else if (key == "silent_period") s.silent_period = number<double>(key, v);
    else if (key == "detection_range") s.encounter.detection_range_m = number<double>(key, v);
    else if (key == "rssi.ref_power") s.encounter.rssi.ref_power_1m = number<double>(key, v);
    else if (key == "rssi.path_loss_exponent") s.encounter.rssi.path_loss_exponent = number<double>(key, v);
    else if (key == "rssi.noise_sigma") s.encounter.rssi.noise_sigma = number<double>(key, v);
    else if (key == "rssi.lpf_alpha") s.encounter.rssi.lpf_alpha = number<double>(key, v);
    else if (key == "rssi.samples") s.encounter.rssi_samples = number<int>(key, v);
    else if (key == "sweep.contracts") cf.sweep.contracts = detail::number_list<std::size_t>(key, v);
    else if (key == "sweep.requests") cf.sweep.requests = detail::number_list<std::size_t>(key, v);
    else if (key == "rounds") cf.sweep.rounds = number<int>(key, v);
    else if (key == "penalty.avg_weight") cf.sweep.avg_weight = number<double>(key, v);
    else if (key == "penalty.var_weight") cf.sweep.var_weight = number<double>(key, v);
    else if (key == "fit.data") cf.fit.data = std::string(v);
    else if (key == "fit.tol") cf.fit.tol = number<double>(key, v);
    else if (key == "fit.max_iter") cf.fit.max_iter = number<int>(key, v);
    else if (key == "fit.sign") {
      if (v == "standard") cf.fit.sign = health::SignConvention::StandardLogit;
      else if (v == "as_written") cf.fit.sign = health::SignConvention::AsWritten;
      else throw ConfigError("config: fit.sign must be standard or as_written");
    } else {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  cf.scenario.validate();
  if (cf.sweep.rounds < 2) throw ConfigError("config: rounds must be >= 2");
  if (cf.sweep.contracts.empty() || cf.sweep.requests.empty()) throw ConfigError("config: empty sweep axis");
  return cf;
}

inline ConfigFile parse_config(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

}  // namespace epitrace::sim
