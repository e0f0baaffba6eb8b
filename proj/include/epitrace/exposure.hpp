#pragma once

// Health-tracing service: infected-status broadcast with retroactive location
// updates, and exposure matching on the receiving side.

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_set>
#include <variant>
#include <vector>

#include "epitrace/contracts.hpp"
#include "epitrace/health.hpp"
#include "epitrace/ledger.hpp"
#include "epitrace/proximity.hpp"
#include "epitrace/types.hpp"

namespace epitrace::health {

/// What a user's phone knows about its own past: MAC rotation history and
/// accepted check-ins.
struct UserHistory {
  proximity::DeviceState device;
  std::vector<Visit> visits;
};

/// The 14-day broadcast payload for a user reporting infection at `now`.
inline HealthStatusUpdate build_infection_update(const UserHistory& user, Seconds now,
                                                 Seconds lookback = kFourteenDays) {
  const TimeWindow window{now - lookback, now};
  HealthStatusUpdate u;
  u.new_status = HealthStatus::Infected;
  u.recent_macs = user.device.macs_in(window);
  for (const auto& v : user.visits)
    if (window.contains(v.checkin_time)) u.recent_visits.push_back(v);
  return u;
}

struct ReportOutcome {
  Transaction broadcast;
  std::vector<GeoPath> newly_infected;
  contracts::GasMeter charged;
};

/// Marks the user's recent locations infected and submits the broadcast
/// transaction. The broadcast fee covers the broadcast and every retroactive
/// location update.
inline ReportOutcome report_infected(const UserHistory& user, ledger::Ledger& led,
                                     contracts::ContractGroup& group, Seconds now, TxId id) {
  ReportOutcome out;
  auto update = build_infection_update(user, now);
  out.newly_infected = group.apply_retroactive_infection(update.recent_visits, now, &out.charged);
  const auto& gas = group.config().gas;
  out.charged.charge(contracts::GasCategory::Heal, gas.health_broadcast_op);
  out.broadcast = Transaction{id, user.device.identity(), std::move(update), now, out.charged.total()};
  led.submit(out.broadcast);
  return out;
}

enum class ExposureKind { Direct, Indirect };

struct IndirectEvidence {
  GeoPath geo;
  Seconds receiver_checkin = 0.0;
  Seconds infected_checkin = 0.0;
  Seconds delta_t_c = 0.0;
  MaterialSurface ms = MaterialSurface::Other;
};

struct Exposure {
  ExposureKind kind = ExposureKind::Direct;
  std::variant<ledger::SealedContact, IndirectEvidence> evidence;
  double probability = 0.0;
};

struct ExposureReport {
  std::vector<Exposure> exposures;

  std::size_t count(ExposureKind k) const {
    return static_cast<std::size_t>(
        std::count_if(exposures.begin(), exposures.end(), [k](const Exposure& e) { return e.kind == k; }));
  }
};

using SurfaceLookup = std::function<MaterialSurface(const GeoPath&)>;

struct MatchOptions {
  Seconds lookback = kFourteenDays;
  Seconds exposure_window = beta4(MaterialSurface::Plastic) * kHour;  // 72 h
};

/// Scores the receiver's exposures to an infected user's broadcast.
///
/// Direct: sealed contact records authored by one of the receiver's MACs
/// whose peer is one of the broadcast MACs, timestamped in [now - lookback, now].
/// Indirect: receiver check-ins in the same window at a location the infected
/// user visited, with |t_i - t_j| <= exposure_window.
inline ExposureReport match_exposure(const UserHistory& receiver, const ledger::Ledger& led,
                                     const HealthStatusUpdate& update, const ModelParams& params,
                                     const SurfaceLookup& surface_of, Seconds now, const MatchOptions& opt = {}) {
  if (update.new_status != HealthStatus::Infected)
    throw HealthError(HealthErrc::InvalidUpdate, "health: update does not report an infection");
  const TimeWindow window{now - opt.lookback, now};
  ExposureReport report;

  std::unordered_set<MacAddr> own;
  for (const auto& iv : receiver.device.mac_history) own.insert(iv.mac);
  const std::unordered_set<MacAddr> infected(update.recent_macs.begin(), update.recent_macs.end());

  for (auto& hit : led.query_contacts_by_macs(infected, window)) {
    if (!own.contains(hit.author)) continue;
    const ExposureFeatures f{hit.record.rssi, hit.record.delta_t_b, 0.0, MaterialSurface::Aerosol};
    const double p = infection_probability(f, params);
    report.exposures.push_back({ExposureKind::Direct, std::move(hit), p});
  }

  for (const auto& mine : receiver.visits) {
    if (!window.contains(mine.checkin_time)) continue;
    for (const auto& theirs : update.recent_visits) {
      if (theirs.geo != mine.geo) continue;
      const Seconds gap = std::abs(mine.checkin_time - theirs.checkin_time);
      if (gap > opt.exposure_window) continue;
      const auto ms = surface_of(mine.geo);
      const ExposureFeatures f{0.0, 0.0, gap, ms};
      report.exposures.push_back({ExposureKind::Indirect,
                                  IndirectEvidence{mine.geo, mine.checkin_time, theirs.checkin_time, gap, ms},
                                  infection_probability(f, params)});
    }
  }
  return report;
}

}  // namespace epitrace::health
