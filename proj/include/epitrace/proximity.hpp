#pragma once

// Bluetooth-style encounter simulation: periodic MAC rotation with a silent
// gap, log-distance RSSI with exponential low-pass smoothing, and symmetric
// contact records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "epitrace/ledger.hpp"
#include "epitrace/types.hpp"

namespace epitrace::proximity {

enum class ProximityErrc { DomainError, OutOfRange, DeviceSilent };

class ProximityError : public std::runtime_error {
 public:
  ProximityError(ProximityErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ProximityErrc code() const noexcept { return code_; }

 private:
  ProximityErrc code_;
};

/// Draws 48-bit MACs, rejecting any value already handed out in this scenario.
class MacAllocator {
 public:
  template <std::uniform_random_bit_generator Rng>
  MacAddr draw(Rng& rng) {
    std::uniform_int_distribution<std::uint64_t> dist(1, MacAddr::kMask);
    while (true) {
      const MacAddr m{dist(rng)};
      if (used_.insert(m).second) return m;
    }
  }

  std::size_t issued() const { return used_.size(); }

 private:
  std::unordered_set<MacAddr> used_;
};

struct MacInterval {
  MacAddr mac;
  Seconds active_from = 0.0;
  Seconds active_to = 0.0;  // exclusive; scheduled end for the current MAC
};

/// Rotation schedule is anchored at `epoch`: MAC k covers
/// [epoch + k*period + silent, epoch + (k+1)*period), the first MAC starts at
/// epoch itself, and each boundary is followed by `silent_period` of silence.
struct DeviceState {
  std::uint32_t owner = 0;
  std::optional<MacAddr> current_mac;  // nullopt while silent
  std::vector<MacInterval> mac_history;
  Seconds rotation_period = 900.0;
  Seconds silent_period = 10.0;
  std::string device_type = "phone";
  Seconds epoch = 0.0;

  bool silent() const { return !current_mac.has_value(); }

  /// Most recent MAC adopted so far, used as the virtual identity for
  /// submissions made while the radio is silent.
  MacAddr identity() const { return mac_history.back().mac; }

  std::optional<MacAddr> mac_at(Seconds t) const {
    for (const auto& iv : mac_history)
      if (t >= iv.active_from && t < iv.active_to) return iv.mac;
    return std::nullopt;
  }

  /// MACs whose active interval intersects the closed window.
  std::vector<MacAddr> macs_in(TimeWindow w) const {
    std::vector<MacAddr> out;
    for (const auto& iv : mac_history)
      if (iv.active_from <= w.end && iv.active_to > w.begin) out.push_back(iv.mac);
    return out;
  }
};

template <std::uniform_random_bit_generator Rng>
DeviceState make_device(std::uint32_t owner, MacAllocator& macs, Rng& rng, Seconds epoch = 0.0,
                        Seconds rotation_period = 900.0, Seconds silent_period = 10.0,
                        std::string device_type = "phone") {
  if (!(rotation_period > silent_period) || silent_period < 0.0)
    throw ProximityError(ProximityErrc::DomainError, "proximity: need rotation_period > silent_period >= 0");
  DeviceState d;
  d.owner = owner;
  d.rotation_period = rotation_period;
  d.silent_period = silent_period;
  d.device_type = std::move(device_type);
  d.epoch = epoch;
  const MacAddr first = macs.draw(rng);
  d.mac_history.push_back({first, epoch, epoch + rotation_period});
  d.current_mac = first;
  return d;
}

/// Advances the device to `now`, adopting one fresh MAC per elapsed period.
template <std::uniform_random_bit_generator Rng>
void advance(DeviceState& dev, Seconds now, MacAllocator& macs, Rng& rng) {
  while (true) {
    const Seconds boundary = dev.mac_history.back().active_to;
    if (now < boundary) {
      dev.current_mac = dev.mac_history.back().mac;
      return;
    }
    if (now < boundary + dev.silent_period) {
      dev.current_mac.reset();
      return;
    }
    dev.mac_history.push_back({macs.draw(rng), boundary + dev.silent_period, boundary + dev.rotation_period});
  }
}

template <std::uniform_random_bit_generator Rng>
DeviceState rotate_mac(DeviceState dev, Seconds now, MacAllocator& macs, Rng& rng) {
  advance(dev, now, macs, rng);
  return dev;
}

struct RssiModel {
  double ref_power_1m = -59.0;     // A, dBm at 1 m
  double path_loss_exponent = 2.0; // n
  double noise_sigma = 4.0;        // dB
  double lpf_alpha = 0.2;

  void validate() const {
    if (!(path_loss_exponent > 0.0))
      throw ProximityError(ProximityErrc::DomainError, "proximity: path_loss_exponent must be > 0");
    if (!(lpf_alpha > 0.0 && lpf_alpha <= 1.0))
      throw ProximityError(ProximityErrc::DomainError, "proximity: lpf_alpha must be in (0, 1]");
    if (!(noise_sigma >= 0.0))
      throw ProximityError(ProximityErrc::DomainError, "proximity: noise_sigma must be >= 0");
  }

  double mean_rssi(double distance_m) const {
    return ref_power_1m - 10.0 * path_loss_exponent * std::log10(distance_m);
  }
};

/// Exponentially smoothed RSSI over `samples` noisy log-distance readings.
template <std::uniform_random_bit_generator Rng>
double smoothed_rssi(const RssiModel& model, double distance_m, int samples, Rng& rng) {
  model.validate();
  if (!(distance_m > 0.0) || !std::isfinite(distance_m))
    throw ProximityError(ProximityErrc::DomainError, "proximity: distance must be > 0");
  if (samples < 1) throw ProximityError(ProximityErrc::DomainError, "proximity: need at least one sample");
  const double mean = model.mean_rssi(distance_m);
  std::normal_distribution<double> noise(0.0, model.noise_sigma);
  auto draw = [&] { return model.noise_sigma > 0.0 ? mean + noise(rng) : mean; };
  double y = draw();
  for (int i = 1; i < samples; ++i) y = model.lpf_alpha * draw() + (1.0 - model.lpf_alpha) * y;
  return y;
}

struct EncounterParams {
  RssiModel rssi;
  int rssi_samples = 8;
  double detection_range_m = 10.0;
};

/// Records seen by each side: `a_view.peer_mac` is b's MAC and vice versa.
struct Encounter {
  MacAddr a_mac;
  MacAddr b_mac;
  ContactRecord a_view;
  ContactRecord b_view;
};

/// Both devices must already be advanced to `now`.
template <std::uniform_random_bit_generator Rng>
Encounter record_encounter(const DeviceState& a, const DeviceState& b, double distance_m, Seconds duration_s,
                           Seconds now, const EncounterParams& params, Rng& rng) {
  if (!(duration_s > 0.0))
    throw ProximityError(ProximityErrc::DomainError, "proximity: encounter duration must be > 0");
  if (!(distance_m > 0.0)) throw ProximityError(ProximityErrc::DomainError, "proximity: distance must be > 0");
  if (distance_m > params.detection_range_m)
    throw ProximityError(ProximityErrc::OutOfRange, "proximity: peer beyond detection range");
  if (a.silent() || b.silent())
    throw ProximityError(ProximityErrc::DeviceSilent, "proximity: device in silent period");
  Encounter e;
  e.a_mac = *a.current_mac;
  e.b_mac = *b.current_mac;
  const double rssi_a = std::min(0.0, smoothed_rssi(params.rssi, distance_m, params.rssi_samples, rng));
  const double rssi_b = std::min(0.0, smoothed_rssi(params.rssi, distance_m, params.rssi_samples, rng));
  e.a_view = ContactRecord{e.b_mac, duration_s, rssi_a, b.device_type, now};
  e.b_view = ContactRecord{e.a_mac, duration_s, rssi_b, a.device_type, now};
  return e;
}

/// Wraps both views as transactions authored by their recording device.
inline std::pair<Transaction, Transaction> encounter_transactions(const Encounter& e, TxId a_id, TxId b_id,
                                                                  Wei fee) {
  Transaction ta{a_id, e.a_mac, e.a_view, e.a_view.observed_at, fee};
  Transaction tb{b_id, e.b_mac, e.b_view, e.b_view.observed_at, fee};
  return {std::move(ta), std::move(tb)};
}

/// Records an encounter and submits both transactions to the ledger.
template <std::uniform_random_bit_generator Rng>
Encounter submit_encounter(ledger::Ledger& led, const DeviceState& a, const DeviceState& b, double distance_m,
                           Seconds duration_s, Seconds now, const EncounterParams& params, Rng& rng, TxId a_id,
                           TxId b_id, Wei fee) {
  auto e = record_encounter(a, b, distance_m, duration_s, now, params, rng);
  auto [ta, tb] = encounter_transactions(e, a_id, b_id, fee);
  led.submit(std::move(ta));
  led.submit(std::move(tb));
  return e;
}

}  // namespace epitrace::proximity
