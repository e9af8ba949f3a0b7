#pragma once

// Hash-chained block ledger held by every node.
//
// Each block header commits to its predecessor (prev_hash = digest of the
// previous header) and to its transactions (txn_root = binary Merkle root
// over transaction digests, odd levels padded by repeating the last node).
// A ledger always starts at the shared genesis block.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "blockaudit/error.hpp"
#include "blockaudit/hash.hpp"
#include "blockaudit/txn_codec.hpp"

namespace blockaudit {

using NodeId = std::uint32_t;

struct BlockHeader {
  std::uint64_t height = 0;
  Hash256 prev_hash;
  Hash256 txn_root;
  std::int64_t timestamp = 0;  // ms
  NodeId proposer = 0;

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> txns;

  std::size_t payload_bytes() const {
    std::size_t total = 0;
    for (const auto& t : txns) total += t.encoded_size();
    return total;
  }
};

inline Hash256 merkle_root(std::span<const Hash256> leaves) {
  if (leaves.empty()) return Hash256::zero();
  std::vector<Hash256> level(leaves.begin(), leaves.end());
  while (level.size() > 1) {
    if (level.size() % 2 == 1) level.push_back(level.back());
    std::vector<Hash256> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) next.push_back(sha256_pair(level[i], level[i + 1]));
    level = std::move(next);
  }
  return level.front();
}

// Root over the cached per-transaction digests.
inline Hash256 txn_root(std::span<const Transaction> txns) {
  std::vector<Hash256> leaves;
  leaves.reserve(txns.size());
  for (const auto& t : txns) leaves.push_back(t.digest());
  return merkle_root(leaves);
}

// Root over digests re-derived from transaction content.
inline Hash256 recompute_txn_root(std::span<const Transaction> txns) {
  std::vector<Hash256> leaves;
  leaves.reserve(txns.size());
  for (const auto& t : txns) leaves.push_back(t.recompute_digest());
  return merkle_root(leaves);
}

inline std::string canonical_header(const BlockHeader& h) {
  return "{\"height\":" + std::to_string(h.height) + ",\"prev_hash\":\"" + h.prev_hash.hex() +
         "\",\"proposer\":" + std::to_string(h.proposer) +
         ",\"timestamp\":" + std::to_string(h.timestamp) + ",\"txn_root\":\"" + h.txn_root.hex() +
         "\"}";
}

inline Hash256 block_digest(const BlockHeader& h) { return sha256(canonical_header(h)); }
inline Hash256 block_digest(const Block& b) { return block_digest(b.header); }

inline Block genesis() { return Block{}; }

// Structural problems of a block taken on its own: empty, duplicate ids or
// digests, or a transaction that is not encodable.
inline std::optional<ErrorCode> check_block_txns(const Block& block) {
  if (block.txns.empty()) return ErrorCode::EmptyBlock;
  std::unordered_set<Uuid> ids;
  std::unordered_set<Hash256> digests;
  for (const auto& t : block.txns) {
    if (!t || t->details.empty()) return ErrorCode::EmptyDetails;
    if (t->event_type < 0 || t->event_type > 2) return ErrorCode::UnknownEventType;
    if (!ids.insert(t->id).second || !digests.insert(t.digest()).second)
      return ErrorCode::DuplicateTransaction;
  }
  return std::nullopt;
}

inline Block build_block(std::vector<Transaction> pending, const Block& prev, NodeId proposer,
                         std::int64_t now_ms) {
  Block b;
  b.txns = std::move(pending);
  if (auto err = check_block_txns(b)) throw Error(*err, "cannot build block");
  b.header.height = prev.header.height + 1;
  b.header.prev_hash = block_digest(prev);
  b.header.txn_root = txn_root(b.txns);
  b.header.timestamp = now_ms;
  b.header.proposer = proposer;
  return b;
}

// Would `next` be a valid successor of `prev`? Uses cached digests.
inline std::optional<ErrorCode> validate_successor(const Block& prev, const Block& next) {
  if (next.header.height != prev.header.height + 1) return ErrorCode::WrongHeight;
  if (next.header.prev_hash != block_digest(prev)) return ErrorCode::WrongPrevHash;
  if (auto err = check_block_txns(next)) return err;
  if (next.header.txn_root != txn_root(next.txns)) return ErrorCode::WrongTxnRoot;
  return std::nullopt;
}

class Ledger {
 public:
  Ledger() { blocks_.push_back(genesis()); }

  // Wraps blocks exactly as given, with no checks. This is how a ledger
  // read back from untrusted storage is represented before verify_chain.
  static Ledger from_blocks_unchecked(std::vector<Block> blocks) {
    Ledger l;
    l.blocks_ = std::move(blocks);
    return l;
  }

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& head() const { return blocks_.back(); }
  std::uint64_t head_height() const { return blocks_.back().header.height; }
  std::size_t size() const { return blocks_.size(); }

  void append(Block block) {
    if (auto err = validate_successor(head(), block))
      throw Error(*err, "block at height " + std::to_string(block.header.height) +
                            " does not extend head " + std::to_string(head_height()));
    blocks_.push_back(std::move(block));
  }

 private:
  std::vector<Block> blocks_;
};

inline void append_block(Ledger& ledger, Block block) { ledger.append(std::move(block)); }

enum class VerifyCause { HashMismatch, RootMismatch, HeightGap, TxnInvalid, RecordMalformed };

inline const char* to_string(VerifyCause c) {
  switch (c) {
    case VerifyCause::HashMismatch: return "HashMismatch";
    case VerifyCause::RootMismatch: return "RootMismatch";
    case VerifyCause::HeightGap: return "HeightGap";
    case VerifyCause::TxnInvalid: return "TxnInvalid";
    case VerifyCause::RecordMalformed: return "RecordMalformed";
  }
  return "?";
}

struct VerificationReport {
  bool ok = true;
  std::optional<std::uint64_t> first_bad_height;
  std::optional<VerifyCause> cause;

  static VerificationReport failure(std::uint64_t height, VerifyCause cause) {
    return {false, height, cause};
  }

  // Keeps whichever failure is at the lower height.
  VerificationReport merge(const VerificationReport& other) const {
    if (ok) return other;
    if (other.ok) return *this;
    return *other.first_bad_height < *first_bad_height ? other : *this;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["ok"] = ok;
    j["first_bad_height"] = first_bad_height ? nlohmann::json(*first_bad_height) : nlohmann::json();
    j["cause"] = cause ? nlohmann::json(to_string(*cause)) : nlohmann::json();
    return j;
  }
};

// Recomputes every link and every Merkle root from content and reports the
// lowest failing height.
inline VerificationReport verify_chain(const Ledger& ledger) {
  const auto& blocks = ledger.blocks();
  if (blocks.empty()) return VerificationReport::failure(0, VerifyCause::HeightGap);
  const Block& g = blocks.front();
  if (!g.txns.empty()) return VerificationReport::failure(0, VerifyCause::TxnInvalid);
  if (block_digest(g) != block_digest(genesis()))
    return VerificationReport::failure(0, VerifyCause::HashMismatch);

  for (std::size_t i = 1; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    if (b.header.height != i) return VerificationReport::failure(i, VerifyCause::HeightGap);
    if (b.header.prev_hash != block_digest(blocks[i - 1]))
      return VerificationReport::failure(i, VerifyCause::HashMismatch);
    if (check_block_txns(b)) return VerificationReport::failure(i, VerifyCause::TxnInvalid);
    if (b.header.txn_root != recompute_txn_root(b.txns))
      return VerificationReport::failure(i, VerifyCause::RootMismatch);
  }
  return {};
}

// Lowest height at which the two chains hold different blocks, comparing
// both header digests and content roots. Absent when one chain is a prefix
// of the other.
inline std::optional<std::uint64_t> diff_against_peer(const Ledger& local, const Ledger& remote) {
  const auto& a = local.blocks();
  const auto& b = remote.blocks();
  if (a.empty() || b.empty() || block_digest(a.front()) != block_digest(b.front()) ||
      !a.front().txns.empty() || !b.front().txns.empty())
    throw Error(ErrorCode::GenesisMismatch, "ledgers do not share a genesis block");
  const std::size_t common = std::min(a.size(), b.size());
  for (std::size_t i = 1; i < common; ++i) {
    if (block_digest(a[i]) != block_digest(b[i])) return i;
    if (recompute_txn_root(a[i].txns) != recompute_txn_root(b[i].txns)) return i;
  }
  return std::nullopt;
}

inline std::vector<Transaction> query_history(const Ledger& ledger, std::string_view entity_name,
                                              std::int64_t entity_id) {
  std::vector<Transaction> out;
  for (const auto& block : ledger.blocks())
    for (const auto& t : block.txns)
      if (t->entity_id == entity_id && t->class_name == entity_name) out.push_back(t);
  return out;
}

struct RestoredState {
  std::map<std::string, std::optional<std::string>> values;
  bool deleted = false;
  // Set when the history does not start with an Insert; the values are then
  // only the properties the later events touched.
  bool incomplete_history = false;
  std::size_t events_applied = 0;

  friend bool operator==(const RestoredState&, const RestoredState&) = default;

  std::string to_canonical_json() const {
    nlohmann::json vals = nlohmann::json::object();
    for (const auto& [k, v] : values) vals[k] = v ? nlohmann::json(*v) : nlohmann::json();
    nlohmann::json j;
    j["deleted"] = deleted;
    j["events_applied"] = events_applied;
    j["incomplete_history"] = incomplete_history;
    j["values"] = std::move(vals);
    return j.dump();
  }
};

// Replays transactions in order: inserts set values, updates overwrite with
// NewValue, deletes mark the object deleted but keep its last values.
inline RestoredState replay_history(std::span<const Transaction> history) {
  RestoredState state;
  for (const auto& t : history) {
    const EventKind kind = event_kind_from_code(t->event_type);
    if (state.events_applied == 0 && kind != EventKind::Insert) state.incomplete_history = true;
    switch (kind) {
      case EventKind::Insert:
        state.values.clear();
        state.deleted = false;
        for (const auto& d : t->details) state.values[d.property_name] = d.new_value;
        break;
      case EventKind::Update:
        for (const auto& d : t->details) state.values[d.property_name] = d.new_value;
        break;
      case EventKind::Delete:
        state.deleted = true;
        break;
    }
    ++state.events_applied;
  }
  return state;
}

inline RestoredState restore_state(const Ledger& ledger, std::string_view entity_name,
                                   std::int64_t entity_id) {
  auto history = query_history(ledger, entity_name, entity_id);
  return replay_history(history);
}

}  // namespace blockaudit
