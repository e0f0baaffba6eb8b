#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace epitrace {

/// Simulated time in seconds since scenario start.
using Seconds = double;
/// Gas amounts. Signed so malformed (negative) fees can be represented and rejected.
using Wei = std::int64_t;

inline constexpr Seconds kHour = 3600.0;
inline constexpr Seconds kDay = 24.0 * kHour;
inline constexpr Seconds kFourteenDays = 14.0 * kDay;

/// Closed time interval [begin, end].
struct TimeWindow {
  Seconds begin = 0.0;
  Seconds end = 0.0;

  constexpr bool contains(Seconds t) const { return t >= begin && t <= end; }
};

/// 48-bit Bluetooth MAC address used as a user's virtual identity.
struct MacAddr {
  std::uint64_t value = 0;

  static constexpr std::uint64_t kMask = 0xFFFF'FFFF'FFFFULL;

  constexpr auto operator<=>(const MacAddr&) const = default;

  /// Six colon-separated lowercase hex octets, most significant first.
  std::string to_string() const {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(17);
    for (int i = 5; i >= 0; --i) {
      const auto octet = static_cast<unsigned>((value >> (8 * i)) & 0xFF);
      out.push_back(kHex[octet >> 4]);
      out.push_back(kHex[octet & 0xF]);
      if (i != 0) out.push_back(':');
    }
    return out;
  }

  static std::optional<MacAddr> parse(std::string_view text) {
    if (text.size() != 17) return std::nullopt;
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 17; ++i) {
      const char c = text[i];
      if (i % 3 == 2) {
        if (c != ':') return std::nullopt;
        continue;
      }
      unsigned nibble = 0;
      if (c >= '0' && c <= '9') nibble = static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') nibble = static_cast<unsigned>(c - 'a' + 10);
      else return std::nullopt;
      v = (v << 4) | nibble;
    }
    return MacAddr{v};
  }
};

/// Administrative address of a location: state / county / city / location.
struct GeoPath {
  std::string state;
  std::string county;
  std::string city;
  std::string location;

  auto operator<=>(const GeoPath&) const = default;

  bool complete() const {
    return !state.empty() && !county.empty() && !city.empty() && !location.empty();
  }

  std::string to_string() const { return state + "/" + county + "/" + city + "/" + location; }
};

enum class HealthStatus : std::uint8_t { Normal = 0, Infected = 1 };

struct CheckinRecord {
  GeoPath geo;
  Seconds checkin_time = 0.0;
  HealthStatus health_status = HealthStatus::Normal;

  bool operator==(const CheckinRecord&) const = default;
};

/// One Bluetooth encounter as seen by the recording device.
struct ContactRecord {
  MacAddr peer_mac;
  Seconds delta_t_b = 0.0;  // detection duration
  double rssi = 0.0;        // smoothed dBm
  std::string device_type;
  Seconds observed_at = 0.0;

  bool operator==(const ContactRecord&) const = default;
};

struct Visit {
  GeoPath geo;
  Seconds checkin_time = 0.0;

  bool operator==(const Visit&) const = default;
};

struct HealthStatusUpdate {
  HealthStatus new_status = HealthStatus::Infected;
  std::vector<MacAddr> recent_macs;
  std::vector<Visit> recent_visits;

  bool operator==(const HealthStatusUpdate&) const = default;
};

using Payload = std::variant<CheckinRecord, ContactRecord, HealthStatusUpdate>;

struct TxId {
  std::uint64_t value = 0;
  constexpr auto operator<=>(const TxId&) const = default;
};

struct Transaction {
  TxId id;
  MacAddr sender_vid;
  Payload payload;
  Seconds timestamp = 0.0;
  Wei fee = 0;

  bool operator==(const Transaction&) const = default;
};

}  // namespace epitrace

template <>
struct std::hash<epitrace::MacAddr> {
  std::size_t operator()(const epitrace::MacAddr& m) const noexcept {
    return std::hash<std::uint64_t>{}(m.value);
  }
};

template <>
struct std::hash<epitrace::TxId> {
  std::size_t operator()(const epitrace::TxId& t) const noexcept {
    return std::hash<std::uint64_t>{}(t.value);
  }
};

template <>
struct std::hash<epitrace::GeoPath> {
  std::size_t operator()(const epitrace::GeoPath& g) const noexcept {
    std::size_t h = std::hash<std::string>{}(g.state);
    for (const auto* s : {&g.county, &g.city, &g.location})
      h ^= std::hash<std::string>{}(*s) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};
