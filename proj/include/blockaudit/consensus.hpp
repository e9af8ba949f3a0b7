#pragma once

// Three-phase (pre-prepare / prepare / commit) Byzantine agreement on blocks.
//
// View 0 only: node 0 is the primary for the whole run. The primary builds
// the next block on its head and broadcasts it in a PrePrepare. Every
// replica (the primary included) that accepts the block broadcasts a
// Prepare for its digest; once it holds 2f+1 matching Prepares (own vote
// included) it broadcasts a Commit, and once it holds 2f+1 matching Commits
// it appends the block to its ledger.
//
// A ReplicaState is a deterministic value: the same inputs in the same
// order always produce the same outputs, and copies evolve independently.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockaudit/error.hpp"
#include "blockaudit/hash.hpp"
#include "blockaudit/ledger.hpp"
#include "blockaudit/ledger_file.hpp"

namespace blockaudit {

inline std::uint32_t max_faults(std::uint32_t n) { return n == 0 ? 0 : (n - 1) / 3; }

// 2f+1. At n = 3f+1 any two quorums share an honest replica. For other n
// the overlap is 4f+2-n replicas, so a Byzantine primary can only be
// outvoted while at most 4f+1-n replicas are faulty.
inline std::uint32_t quorum_size(std::uint32_t n) { return 2 * max_faults(n) + 1; }

struct ConsensusConfig {
  std::uint32_t n = 1;
  std::uint32_t f = 0;
  std::uint32_t quorum = 1;

  static ConsensusConfig for_replicas(std::uint32_t n) {
    if (n == 0) throw Error(ErrorCode::BadConfig, "need at least one replica");
    return {n, max_faults(n), quorum_size(n)};
  }

  void validate() const {
    if (n < 3 * f + 1 || quorum != 2 * f + 1)
      throw Error(ErrorCode::BadConfig, "require n >= 3f+1 and quorum = 2f+1");
  }
};

enum class MessageKind { PrePrepare, Prepare, Commit };

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::PrePrepare: return "PrePrepare";
    case MessageKind::Prepare: return "Prepare";
    case MessageKind::Commit: return "Commit";
  }
  return "?";
}

struct ConsensusMessage {
  MessageKind kind = MessageKind::Prepare;
  std::uint64_t view = 0;
  std::uint64_t height = 0;
  Hash256 block_digest;
  NodeId sender = 0;
  std::optional<Block> block;  // PrePrepare only
};

// Bytes a message occupies on a link: a fixed envelope plus, for a
// PrePrepare, the block header and the canonical size of its transactions.
inline std::size_t wire_size(const ConsensusMessage& m) {
  constexpr std::size_t kEnvelope = 192;
  if (!m.block) return kEnvelope;
  return kEnvelope + 256 + m.block->payload_bytes();
}

inline nlohmann::json to_json(const ConsensusMessage& m) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["view"] = m.view;
  j["height"] = m.height;
  j["digest"] = m.block_digest.hex();
  j["sender"] = m.sender;
  if (m.block) j["block"] = nlohmann::json::parse(encode_block_json(*m.block, block_digest(*m.block)));
  return j;
}

inline ConsensusMessage message_from_json(const nlohmann::json& j) {
  ConsensusMessage m;
  auto kind = detail::require_string(j, "kind");
  if (kind == "PrePrepare") m.kind = MessageKind::PrePrepare;
  else if (kind == "Prepare") m.kind = MessageKind::Prepare;
  else if (kind == "Commit") m.kind = MessageKind::Commit;
  else throw Error(ErrorCode::MalformedJson, "unknown message kind " + kind);
  m.view = detail::require_uint(j, "view");
  m.height = detail::require_uint(j, "height");
  m.block_digest = detail::require_hash(j, "digest");
  m.sender = static_cast<NodeId>(detail::require_uint(j, "sender"));
  if (auto it = j.find("block"); it != j.end()) m.block = detail::decode_block_json(it->dump()).block;
  return m;
}

// `to` empty means broadcast to every other replica.
struct Outbound {
  std::optional<NodeId> to;
  ConsensusMessage msg;
};

struct StepResult {
  std::vector<Outbound> outbound;
  std::vector<Block> committed;
  std::optional<std::string> rejected;  // reason the input was refused
};

class ReplicaState {
 public:
  // Future heights further than this past the head are dropped.
  static constexpr std::uint64_t kDefaultWindow = 4;

  ReplicaState(NodeId id, ConsensusConfig config, std::uint64_t window = kDefaultWindow)
      : id_(id), config_(config), window_(window) {
    config_.validate();
    if (id >= config_.n) throw Error(ErrorCode::UnknownNode, "replica id out of range");
  }

  NodeId id() const { return id_; }
  const ConsensusConfig& config() const { return config_; }
  std::uint64_t view() const { return view_; }
  NodeId primary() const { return static_cast<NodeId>(view_ % config_.n); }
  bool is_primary() const { return primary() == id_; }
  const Ledger& ledger() const { return ledger_; }

  // True when no block of ours is waiting to commit at head+1.
  bool can_propose() const {
    auto it = slots_.find(ledger_.head_height() + 1);
    return is_primary() && (it == slots_.end() || !it->second.block);
  }

  StepResult propose(std::vector<Transaction> pending, std::int64_t now_ms) {
    if (!is_primary())
      throw Error(ErrorCode::NotPrimary, "replica " + std::to_string(id_) + " is not the primary");
    if (pending.empty()) throw Error(ErrorCode::EmptyBlock, "nothing to propose");
    if (!can_propose())
      throw Error(ErrorCode::InvalidArgument, "a proposal is already in flight");
    Block block = build_block(std::move(pending), ledger_.head(), id_, now_ms);
    ConsensusMessage pp{MessageKind::PrePrepare, view_, block.header.height, block_digest(block),
                        id_, block};
    StepResult result;
    result.outbound.push_back({std::nullopt, pp});
    Slot& slot = slots_[pp.height];
    slot.preprepare_seen = true;
    slot.pending_preprepare = std::move(pp);
    advance(result);
    return result;
  }

  StepResult handle_message(const ConsensusMessage& msg) {
    StepResult result;
    if (msg.sender >= config_.n) {
      result.rejected = "unknown sender";
      return result;
    }
    const bool is_pp = msg.kind == MessageKind::PrePrepare;
    if (is_pp != msg.block.has_value()) {
      result.rejected = "block must accompany PrePrepare and only PrePrepare";
      return result;
    }
    if (msg.view != view_) return result;
    const std::uint64_t head = ledger_.head_height();
    if (msg.height <= head || msg.height > head + window_) return result;

    Slot& slot = slots_[msg.height];
    switch (msg.kind) {
      case MessageKind::PrePrepare:
        if (msg.sender != primary()) {
          result.rejected = "PrePrepare from non-primary";
          return result;
        }
        if (slot.preprepare_seen) return result;
        slot.preprepare_seen = true;
        if (msg.block->header.height != msg.height || block_digest(*msg.block) != msg.block_digest) {
          result.rejected = "PrePrepare digest or height does not match its block";
          return result;
        }
        slot.pending_preprepare = msg;
        break;
      case MessageKind::Prepare:
        slot.prepares.try_emplace(msg.sender, msg.block_digest);
        break;
      case MessageKind::Commit:
        slot.commits.try_emplace(msg.sender, msg.block_digest);
        break;
    }
    advance(result);
    return result;
  }

  // True when handling `msg` now or at any later point cannot change this
  // replica: its height is committed, or the sender's vote (or the
  // primary's proposal) for that height has already been taken.
  bool is_redundant(const ConsensusMessage& msg) const {
    if (msg.view != view_ || msg.height <= ledger_.head_height()) return true;
    auto it = slots_.find(msg.height);
    if (it == slots_.end()) return false;
    const Slot& slot = it->second;
    switch (msg.kind) {
      case MessageKind::PrePrepare: return slot.preprepare_seen;
      case MessageKind::Prepare: return slot.prepares.contains(msg.sender);
      case MessageKind::Commit: return slot.commits.contains(msg.sender);
    }
    return false;
  }

  // Canonical serialization of the full protocol state; equal states give
  // equal bytes. Used to deduplicate states when exploring interleavings.
  std::string state_bytes() const {
    std::string out;
    auto put_u64 = [&out](std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
    out += head_digest_.view();
    put_u64(ledger_.size());
    for (const auto& [h, slot] : slots_) {
      put_u64(h);
      out += static_cast<char>((slot.preprepare_seen ? 1 : 0) | (slot.block ? 2 : 0) |
                               (slot.sent_prepare ? 4 : 0) | (slot.sent_commit ? 8 : 0) |
                               (slot.rejected ? 16 : 0) | (slot.pending_preprepare ? 32 : 0));
      if (slot.pending_preprepare) out += slot.pending_preprepare->block_digest.view();
      if (slot.block) out += slot.digest.view();
      for (const auto* votes : {&slot.prepares, &slot.commits}) {
        put_u64(votes->size());
        for (const auto& [who, d] : *votes) {
          put_u64(who);
          out += d.view();
        }
      }
    }
    return out;
  }

  Hash256 fingerprint() const { return sha256(state_bytes()); }

 private:
  struct Slot {
    bool preprepare_seen = false;
    std::optional<ConsensusMessage> pending_preprepare;  // accepted but not yet validated
    bool rejected = false;
    std::optional<Block> block;
    Hash256 digest;
    std::map<NodeId, Hash256> prepares;  // first vote per sender
    std::map<NodeId, Hash256> commits;
    bool sent_prepare = false;
    bool sent_commit = false;
  };

  std::size_t votes_for(const std::map<NodeId, Hash256>& votes, const Hash256& d) const {
    std::size_t n = 0;
    for (const auto& [_, v] : votes)
      if (v == d) ++n;
    return n;
  }

  void broadcast(StepResult& r, MessageKind kind, std::uint64_t height, const Hash256& digest) {
    r.outbound.push_back({std::nullopt, ConsensusMessage{kind, view_, height, digest, id_, {}}});
  }

  // Moves the slot at head+1 as far as its collected messages allow, and
  // keeps going while blocks commit.
  void advance(StepResult& r) {
    while (true) {
      const std::uint64_t h = ledger_.head_height() + 1;
      auto it = slots_.find(h);
      if (it == slots_.end()) return;
      Slot& slot = it->second;

      if (slot.pending_preprepare && !slot.block && !slot.rejected) {
        const Block& candidate = *slot.pending_preprepare->block;
        if (auto err = validate_successor(ledger_.head(), candidate)) {
          slot.rejected = true;
          r.rejected = std::string("invalid block: ") + to_string(*err);
        } else {
          slot.block = candidate;
          slot.digest = slot.pending_preprepare->block_digest;
        }
        slot.pending_preprepare.reset();
      }
      if (!slot.block) return;

      if (!slot.sent_prepare) {
        slot.sent_prepare = true;
        slot.prepares.try_emplace(id_, slot.digest);
        broadcast(r, MessageKind::Prepare, h, slot.digest);
      }
      if (!slot.sent_commit && votes_for(slot.prepares, slot.digest) >= config_.quorum) {
        slot.sent_commit = true;
        slot.commits.try_emplace(id_, slot.digest);
        broadcast(r, MessageKind::Commit, h, slot.digest);
      }
      if (!slot.sent_commit || votes_for(slot.commits, slot.digest) < config_.quorum) return;

      Block block = std::move(*slot.block);
      const Hash256 slot_digest = slot.digest;
      slots_.erase(it);
      ledger_.append(block);
      head_digest_ = slot_digest;
      r.committed.push_back(std::move(block));
      // Slots behind the new head are stale.
      slots_.erase(slots_.begin(), slots_.upper_bound(ledger_.head_height()));
    }
  }

  NodeId id_;
  ConsensusConfig config_;
  std::uint64_t window_;
  std::uint64_t view_ = 0;
  Ledger ledger_;
  Hash256 head_digest_ = block_digest(genesis());
  std::map<std::uint64_t, Slot> slots_;
};

}  // namespace blockaudit
