#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "epitrace/sim/config.hpp"
#include "epitrace/text.hpp"

namespace epitrace::sim {

enum class EventKind : std::uint8_t { Checkin, StatusQuery, Encounter, Report, Clean };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Checkin: return "checkin";
    case EventKind::StatusQuery: return "query";
    case EventKind::Encounter: return "encounter";
    case EventKind::Report: return "report";
    case EventKind::Clean: return "clean";
  }
  return "?";
}

inline constexpr std::uint32_t kOperator = std::numeric_limits<std::uint32_t>::max();

struct Event {
  Seconds time = 0.0;
  std::uint32_t user = 0;  // kOperator for operator-injected events
  EventKind kind = EventKind::Checkin;
  std::uint32_t location = 0;  // Checkin, StatusQuery, Clean
  std::uint32_t partner = 0;   // Encounter
  double distance_m = 0.0;     // Encounter
  Seconds duration = 0.0;      // Encounter

  bool operator==(const Event&) const = default;
};

inline bool event_before(const Event& a, const Event& b) {
  return std::tie(a.time, a.user, a.kind) < std::tie(b.time, b.user, b.kind);
}

inline std::string to_string(const Event& e) {
  std::string s = text::format_double(e.time) + ' ' + std::to_string(e.user) + ' ' + to_string(e.kind);
  switch (e.kind) {
    case EventKind::Checkin:
    case EventKind::StatusQuery:
    case EventKind::Clean: s += ' ' + std::to_string(e.location); break;
    case EventKind::Encounter:
      s += ' ' + std::to_string(e.partner) + ' ' + text::format_double(e.distance_m) + ' ' +
           text::format_double(e.duration);
      break;
    case EventKind::Report: break;
  }
  return s;
}

/// Independent per-user Poisson streams over [0, duration), merged and sorted
/// by (time, user, kind). Encounter partners are uniform over the other users,
/// distances uniform in (0.5 m, detection range], durations uniform in
/// [60 s, 1800 s). Seeded infections report once at a uniform time.
template <std::uniform_random_bit_generator Rng>
std::vector<Event> generate_events(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Event> out;
  std::uniform_int_distribution<std::uint32_t> pick_location(0, cfg.n_locations - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto poisson_times = [&](double per_hour, auto&& emit) {
    if (per_hour <= 0.0) return;
    std::exponential_distribution<double> gap(per_hour / kHour);
    for (Seconds t = gap(rng); t < cfg.duration; t += gap(rng)) emit(t);
  };

  for (std::uint32_t u = 0; u < cfg.n_users; ++u) {
    poisson_times(cfg.checkin_rate, [&](Seconds t) {
      out.push_back({t, u, EventKind::Checkin, pick_location(rng)});
    });
    poisson_times(cfg.query_rate, [&](Seconds t) {
      out.push_back({t, u, EventKind::StatusQuery, pick_location(rng)});
    });
    if (cfg.n_users >= 2) {
      std::uniform_int_distribution<std::uint32_t> pick_other(0, cfg.n_users - 2);
      const double range = cfg.encounter.detection_range_m;
      poisson_times(cfg.contact_rate, [&](Seconds t) {
        Event e{t, u, EventKind::Encounter};
        const auto other = pick_other(rng);
        e.partner = other >= u ? other + 1 : other;
        e.distance_m = 0.5 + (range - 0.5) * (1.0 - unit(rng));
        e.duration = 60.0 + 1740.0 * unit(rng);
        out.push_back(e);
      });
    }
  }

  if (cfg.infected_seed_users > 0) {
    std::vector<std::uint32_t> ids(cfg.n_users);
    std::iota(ids.begin(), ids.end(), 0u);
    for (std::uint32_t i = 0; i < cfg.infected_seed_users; ++i) {
      std::uniform_int_distribution<std::uint32_t> pick(i, cfg.n_users - 1);
      std::swap(ids[i], ids[pick(rng)]);
      out.push_back({cfg.duration * unit(rng), ids[i], EventKind::Report});
    }
  }

  for (const auto& c : cfg.clean_events)
    if (c.time >= 0.0 && c.time < cfg.duration) out.push_back({c.time, kOperator, EventKind::Clean, c.location});

  std::stable_sort(out.begin(), out.end(), event_before);
  return out;
}

}  // namespace epitrace::sim
