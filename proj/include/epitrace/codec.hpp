#pragma once

// Canonical binary encoding of transactions. The layout is an external
// interface (documented byte-for-byte in docs/formats.md) and feeds the block
// digest, so it must never change within a major version.
//
// All integers are little-endian, doubles are their IEEE-754 bit pattern as a
// little-endian u64, MAC addresses are six octets in textual order, strings are
// a u32 byte length followed by raw bytes. Decoding is strict: any input that
// decodes re-encodes to the identical bytes.

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epitrace/types.hpp"

namespace epitrace::codec {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kKindCheckin = 1;
inline constexpr std::uint8_t kKindContact = 2;
inline constexpr std::uint8_t kKindHealth = 3;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void mac(MacAddr m) {
    for (int i = 5; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>((m.value >> (8 * i)) & 0xFF));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  Bytes take() && { return std::move(out_); }
  const Bytes& view() const { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  MacAddr mac() {
    need(6);
    std::uint64_t v = 0;
    for (int i = 0; i < 6; ++i) v = (v << 8) | in_[pos_++];
    return MacAddr{v};
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CodecError("codec: truncated input");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

namespace detail {

inline void put_geo(Writer& w, const GeoPath& g) {
  w.str(g.state);
  w.str(g.county);
  w.str(g.city);
  w.str(g.location);
}

inline GeoPath get_geo(Reader& r) {
  GeoPath g;
  g.state = r.str();
  g.county = r.str();
  g.city = r.str();
  g.location = r.str();
  return g;
}

inline HealthStatus get_status(Reader& r) {
  const auto v = r.u8();
  if (v > 1) throw CodecError("codec: invalid health status byte");
  return static_cast<HealthStatus>(v);
}

inline Bytes encode_payload(const Payload& p) {
  Writer w;
  if (const auto* c = std::get_if<CheckinRecord>(&p)) {
    put_geo(w, c->geo);
    w.f64(c->checkin_time);
    w.u8(static_cast<std::uint8_t>(c->health_status));
  } else if (const auto* k = std::get_if<ContactRecord>(&p)) {
    w.mac(k->peer_mac);
    w.f64(k->delta_t_b);
    w.f64(k->rssi);
    w.str(k->device_type);
    w.f64(k->observed_at);
  } else {
    const auto& h = std::get<HealthStatusUpdate>(p);
    w.u8(static_cast<std::uint8_t>(h.new_status));
    w.u32(static_cast<std::uint32_t>(h.recent_macs.size()));
    for (auto m : h.recent_macs) w.mac(m);
    w.u32(static_cast<std::uint32_t>(h.recent_visits.size()));
    for (const auto& v : h.recent_visits) {
      put_geo(w, v.geo);
      w.f64(v.checkin_time);
    }
  }
  return std::move(w).take();
}

}  // namespace detail

inline std::uint8_t payload_kind(const Payload& p) {
  switch (p.index()) {
    case 0: return kKindCheckin;
    case 1: return kKindContact;
    default: return kKindHealth;
  }
}

inline Bytes encode(const Transaction& tx) {
  Writer w;
  w.u64(tx.id.value);
  w.mac(tx.sender_vid);
  w.f64(tx.timestamp);
  w.i64(tx.fee);
  w.u8(payload_kind(tx.payload));
  const auto body = detail::encode_payload(tx.payload);
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.bytes(body);
  return std::move(w).take();
}

inline Transaction decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Transaction tx;
  tx.id = TxId{r.u64()};
  tx.sender_vid = r.mac();
  tx.timestamp = r.f64();
  tx.fee = r.i64();
  const auto kind = r.u8();
  const auto len = r.u32();
  if (r.remaining() != len) throw CodecError("codec: payload length mismatch");
  switch (kind) {
    case kKindCheckin: {
      CheckinRecord c;
      c.geo = detail::get_geo(r);
      c.checkin_time = r.f64();
      c.health_status = detail::get_status(r);
      tx.payload = std::move(c);
      break;
    }
    case kKindContact: {
      ContactRecord k;
      k.peer_mac = r.mac();
      k.delta_t_b = r.f64();
      k.rssi = r.f64();
      k.device_type = r.str();
      k.observed_at = r.f64();
      tx.payload = std::move(k);
      break;
    }
    case kKindHealth: {
      HealthStatusUpdate h;
      h.new_status = detail::get_status(r);
      const auto n_macs = r.u32();
      if (n_macs > r.remaining() / 6) throw CodecError("codec: mac count exceeds input");
      h.recent_macs.reserve(n_macs);
      for (std::uint32_t i = 0; i < n_macs; ++i) h.recent_macs.push_back(r.mac());
      const auto n_visits = r.u32();
      if (n_visits > r.remaining() / 24) throw CodecError("codec: visit count exceeds input");
      for (std::uint32_t i = 0; i < n_visits; ++i) {
        Visit v;
        v.geo = detail::get_geo(r);
        v.checkin_time = r.f64();
        h.recent_visits.push_back(std::move(v));
      }
      tx.payload = std::move(h);
      break;
    }
    default:
      throw CodecError("codec: unknown payload kind");
  }
  if (r.remaining() != 0) throw CodecError("codec: trailing bytes");
  return tx;
}

}  // namespace epitrace::codec
