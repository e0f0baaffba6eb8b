#pragma once

// Append-only hash-chained transaction store.
//
// Transactions are admitted into a pending pool and moved, oldest first, into
// blocks of at most `block_capacity` entries. Each block stores the canonical
// encoding of its transactions (the bytes that are hashed) next to the decoded
// form used by queries; verify_chain checks both against the stored digests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epitrace/codec.hpp"
#include "epitrace/digest.hpp"
#include "epitrace/text.hpp"
#include "epitrace/types.hpp"

namespace epitrace::ledger {

enum class LedgerErrc { DuplicateTxId, MalformedPayload, EmptyPool, Corrupt };

class LedgerError : public std::runtime_error {
 public:
  LedgerError(LedgerErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  LedgerErrc code() const noexcept { return code_; }

 private:
  LedgerErrc code_;
};

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  Digest this_hash{};
  Seconds sealed_at = 0.0;
  std::vector<codec::Bytes> encoded;  // canonical bytes, hashed
  std::vector<Transaction> txs;       // decoded view of `encoded`
};

/// H(prev_hash || u32 n || (u32 len || tx bytes)* || u64 height || f64 sealed_at).
inline Digest compute_block_hash(const Digest& prev, std::span<const codec::Bytes> encoded,
                                 std::uint64_t height, Seconds sealed_at) {
  codec::Writer w;
  w.u32(static_cast<std::uint32_t>(encoded.size()));
  Sha256 h;
  h.update(prev);
  h.update(w.view());
  for (const auto& tx : encoded) {
    codec::Writer len;
    len.u32(static_cast<std::uint32_t>(tx.size()));
    h.update(len.view());
    h.update(tx);
  }
  codec::Writer tail;
  tail.u64(height);
  tail.f64(sealed_at);
  h.update(tail.view());
  return h.finish();
}

/// Throws MalformedPayload if the transaction violates a well-formedness rule.
inline void validate(const Transaction& tx) {
  auto bad = [](const char* why) { throw LedgerError(LedgerErrc::MalformedPayload, why); };
  if (tx.fee < 0) bad("ledger: negative fee");
  if (!std::isfinite(tx.timestamp)) bad("ledger: non-finite timestamp");
  if (tx.sender_vid.value > MacAddr::kMask) bad("ledger: sender MAC exceeds 48 bits");
  if (const auto* c = std::get_if<CheckinRecord>(&tx.payload)) {
    if (!c->geo.complete()) bad("ledger: check-in geo path incomplete");
    if (!std::isfinite(c->checkin_time)) bad("ledger: non-finite check-in time");
  } else if (const auto* k = std::get_if<ContactRecord>(&tx.payload)) {
    if (!(k->delta_t_b > 0.0) || !std::isfinite(k->delta_t_b)) bad("ledger: contact duration must be > 0");
    if (!(k->rssi <= 0.0) || !std::isfinite(k->rssi)) bad("ledger: rssi must be finite and <= 0 dBm");
    if (k->peer_mac.value > MacAddr::kMask) bad("ledger: peer MAC exceeds 48 bits");
  } else {
    const auto& h = std::get<HealthStatusUpdate>(tx.payload);
    for (const auto& v : h.recent_visits)
      if (!v.geo.complete()) bad("ledger: visit geo path incomplete");
  }
}

struct SealedContact {
  TxId tx_id;
  MacAddr author;
  Seconds timestamp = 0.0;
  ContactRecord record;
};

struct SealedCheckin {
  TxId tx_id;
  MacAddr author;
  CheckinRecord record;
};

struct SealedHealthUpdate {
  TxId tx_id;
  MacAddr author;
  Seconds timestamp = 0.0;
  HealthStatusUpdate update;
};

class Ledger {
 public:
  explicit Ledger(std::size_t block_capacity = 1000) : capacity_(block_capacity) {
    if (capacity_ == 0) throw std::invalid_argument("ledger: block capacity must be >= 1");
  }

  std::size_t block_capacity() const { return capacity_; }

  TxId submit(Transaction tx) {
    validate(tx);
    if (!ids_.insert(tx.id).second)
      throw LedgerError(LedgerErrc::DuplicateTxId, "ledger: duplicate tx id " + std::to_string(tx.id.value));
    const auto id = tx.id;
    pending_.push_back(std::move(tx));
    return id;
  }

  /// Moves up to block_capacity oldest pending transactions into a new block.
  const Block& seal_block(Seconds now) {
    if (pending_.empty()) throw LedgerError(LedgerErrc::EmptyPool, "ledger: nothing to seal");
    Block b;
    b.height = blocks_.size();
    b.prev_hash = blocks_.empty() ? Digest{} : blocks_.back().this_hash;
    b.sealed_at = now;
    const auto n = std::min(capacity_, pending_.size());
    b.txs.reserve(n);
    b.encoded.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      b.encoded.push_back(codec::encode(pending_.front()));
      b.txs.push_back(std::move(pending_.front()));
      pending_.pop_front();
    }
    b.this_hash = compute_block_hash(b.prev_hash, b.encoded, b.height, b.sealed_at);
    blocks_.push_back(std::move(b));
    index_block(blocks_.size() - 1);
    return blocks_.back();
  }

  bool verify_chain() const {
    Digest prev{};
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& b = blocks_[i];
      if (b.height != i || b.prev_hash != prev) return false;
      if (b.encoded.size() > capacity_ || b.encoded.size() != b.txs.size()) return false;
      if (compute_block_hash(b.prev_hash, b.encoded, b.height, b.sealed_at) != b.this_hash) return false;
      for (std::size_t j = 0; j < b.txs.size(); ++j)
        if (codec::encode(b.txs[j]) != b.encoded[j]) return false;
      prev = b.this_hash;
    }
    return true;
  }

  /// Sealed contact records whose peer MAC is in `macs` and whose timestamp lies
  /// in `window`, ordered by (timestamp, tx id).
  std::vector<SealedContact> query_contacts_by_macs(const std::unordered_set<MacAddr>& macs,
                                                    TimeWindow window) const {
    std::vector<SealedContact> out;
    for (const auto& mac : macs) {
      const auto it = contacts_by_peer_.find(mac);
      if (it == contacts_by_peer_.end()) continue;
      for (const auto& ref : it->second) {
        const auto& tx = at(ref);
        if (!window.contains(tx.timestamp)) continue;
        out.push_back({tx.id, tx.sender_vid, tx.timestamp, std::get<ContactRecord>(tx.payload)});
      }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.tx_id < b.tx_id;
    });
    return out;
  }

  /// Sealed check-ins at exactly `geo` with checkin_time in `window`.
  std::vector<SealedCheckin> query_checkins_by_geo(const GeoPath& geo, TimeWindow window) const {
    std::vector<SealedCheckin> out;
    const auto it = checkins_by_geo_.find(geo);
    if (it == checkins_by_geo_.end()) return out;
    for (const auto& ref : it->second) {
      const auto& tx = at(ref);
      const auto& rec = std::get<CheckinRecord>(tx.payload);
      if (window.contains(rec.checkin_time)) out.push_back({tx.id, tx.sender_vid, rec});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.record.checkin_time != b.record.checkin_time ? a.record.checkin_time < b.record.checkin_time
                                                            : a.tx_id < b.tx_id;
    });
    return out;
  }

  std::vector<SealedHealthUpdate> query_health_updates(TimeWindow window) const {
    std::vector<SealedHealthUpdate> out;
    for (const auto& ref : health_) {
      const auto& tx = at(ref);
      if (window.contains(tx.timestamp))
        out.push_back({tx.id, tx.sender_vid, tx.timestamp, std::get<HealthStatusUpdate>(tx.payload)});
    }
    return out;
  }

  template <typename Fn>
  void for_each_sealed(Fn&& fn) const {
    for (const auto& b : blocks_)
      for (const auto& tx : b.txs) fn(tx);
  }

  const std::vector<Block>& blocks() const { return blocks_; }
  /// Direct block access for fault-injection tests. Indices are not rebuilt.
  std::span<Block> blocks_for_fault_injection() { return blocks_; }

  std::size_t pending_size() const { return pending_.size(); }
  const std::deque<Transaction>& pending() const { return pending_; }
  std::size_t sealed_size() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.txs.size();
    return n;
  }
  bool contains(TxId id) const { return ids_.contains(id); }
  Digest tip_hash() const { return blocks_.empty() ? Digest{} : blocks_.back().this_hash; }

  // Text dump, one record per line:
  //   epitrace-ledger 1
  //   capacity <n>
  //   block <height> <sealed_at> <prev_hash hex> <this_hash hex> <tx count>
  //   tx <canonical tx bytes hex>          (tx count lines follow each block)
  //   pending <canonical tx bytes hex>
  void dump(std::ostream& os) const {
    os << "epitrace-ledger 1\n";
    os << "capacity " << capacity_ << "\n";
    for (const auto& b : blocks_) {
      os << "block " << b.height << ' ' << text::format_double(b.sealed_at) << ' ' << text::to_hex(b.prev_hash)
         << ' ' << text::to_hex(b.this_hash) << ' ' << b.encoded.size() << "\n";
      for (const auto& e : b.encoded) os << "tx " << text::to_hex(e) << "\n";
    }
    for (const auto& tx : pending_) os << "pending " << text::to_hex(codec::encode(tx)) << "\n";
  }

  /// Rebuilds a ledger from a dump without re-hashing, so tampered dumps load
  /// and are then caught by verify_chain. Undecodable lines throw Corrupt.
  static Ledger restore(std::istream& is) {
    auto corrupt = [](const std::string& why) -> LedgerError {
      return LedgerError(LedgerErrc::Corrupt, "ledger restore: " + why);
    };
    std::string line;
    if (!std::getline(is, line) || line != "epitrace-ledger 1") throw corrupt("bad header");
    if (!std::getline(is, line) || line.rfind("capacity ", 0) != 0) throw corrupt("missing capacity");
    const auto cap = text::parse_int<std::size_t>(line.substr(9));
    if (!cap || *cap == 0) throw corrupt("bad capacity");
    Ledger led(*cap);

    auto decode_hex = [&](std::string_view hex) {
      const auto bytes = text::from_hex(hex);
      if (!bytes) throw corrupt("bad hex");
      return *bytes;
    };
    auto digest_hex = [&](std::string_view hex) {
      const auto bytes = decode_hex(hex);
      if (bytes.size() != 32) throw corrupt("bad digest length");
      Digest d{};
      std::copy(bytes.begin(), bytes.end(), d.begin());
      return d;
    };

    std::size_t expect_txs = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line.rfind("block ", 0) == 0) {
        if (expect_txs != 0) throw corrupt("block truncated");
        const auto parts = text::split(std::string_view(line).substr(6), ' ');
        if (parts.size() != 5) throw corrupt("bad block line");
        Block b;
        const auto h = text::parse_int<std::uint64_t>(parts[0]);
        const auto t = text::parse_double(parts[1]);
        const auto n = text::parse_int<std::size_t>(parts[4]);
        if (!h || !t || !n) throw corrupt("bad block fields");
        b.height = *h;
        b.sealed_at = *t;
        b.prev_hash = digest_hex(parts[2]);
        b.this_hash = digest_hex(parts[3]);
        led.blocks_.push_back(std::move(b));
        expect_txs = *n;
      } else if (line.rfind("tx ", 0) == 0) {
        if (expect_txs == 0 || led.blocks_.empty()) throw corrupt("unexpected tx line");
        auto bytes = decode_hex(std::string_view(line).substr(3));
        Transaction tx;
        try {
          tx = codec::decode(bytes);
        } catch (const codec::CodecError& e) {
          throw corrupt(e.what());
        }
        led.ids_.insert(tx.id);
        led.blocks_.back().encoded.push_back(std::move(bytes));
        led.blocks_.back().txs.push_back(std::move(tx));
        if (--expect_txs == 0) led.index_block(led.blocks_.size() - 1);
      } else if (line.rfind("pending ", 0) == 0) {
        if (expect_txs != 0) throw corrupt("block truncated");
        const auto bytes = decode_hex(std::string_view(line).substr(8));
        try {
          led.submit(codec::decode(bytes));
        } catch (const codec::CodecError& e) {
          throw corrupt(e.what());
        }
      } else {
        throw corrupt("unknown record '" + line.substr(0, 16) + "'");
      }
    }
    if (expect_txs != 0) throw corrupt("block truncated");
    return led;
  }

 private:
  struct TxRef {
    std::size_t block;
    std::size_t index;
  };

  const Transaction& at(TxRef r) const { return blocks_[r.block].txs[r.index]; }

  void index_block(std::size_t bi) {
    const auto& b = blocks_[bi];
    for (std::size_t i = 0; i < b.txs.size(); ++i) {
      const auto& tx = b.txs[i];
      if (const auto* c = std::get_if<ContactRecord>(&tx.payload)) {
        contacts_by_peer_[c->peer_mac].push_back({bi, i});
      } else if (const auto* k = std::get_if<CheckinRecord>(&tx.payload)) {
        checkins_by_geo_[k->geo].push_back({bi, i});
      } else {
        health_.push_back({bi, i});
      }
    }
  }

  std::size_t capacity_;
  std::vector<Block> blocks_;
  std::deque<Transaction> pending_;
  std::unordered_set<TxId> ids_;
  std::unordered_map<MacAddr, std::vector<TxRef>> contacts_by_peer_;
  std::unordered_map<GeoPath, std::vector<TxRef>> checkins_by_geo_;
  std::vector<TxRef> health_;
};

}  // namespace epitrace::ledger
