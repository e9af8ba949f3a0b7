#pragma once

// Exhaustive exploration of message delivery orders for one consensus round
// among four replicas, one of them Byzantine.
//
// Honest replicas run ReplicaState. The Byzantine replica's traffic is
// scripted up front: every message it might send to each honest replica is
// placed in the pool, including conflicting ones, so exploring all delivery
// orders also covers every choice of which conflicting message a replica
// sees first (only the first per sender counts). Messages addressed to the
// Byzantine replica are discarded.

#include <algorithm>
#include <array>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "blockaudit/consensus.hpp"
#include "support/generators.hpp"

namespace testsupport {

using namespace blockaudit;

enum class Adversary {
  SilentReplica,         // a replica that sends nothing
  EquivocatingReplica,   // a replica voting for the real and a bogus digest
  InvalidPrimary,        // the primary proposes a block with a wrong Merkle root
  MixedPrimary,          // the primary sends a valid block to some, an invalid one to others
  EquivocatingPrimary,   // the primary proposes two different valid blocks
};

inline const char* to_string(Adversary a) {
  switch (a) {
    case Adversary::SilentReplica: return "silent replica";
    case Adversary::EquivocatingReplica: return "equivocating replica";
    case Adversary::InvalidPrimary: return "invalid-block primary";
    case Adversary::MixedPrimary: return "mixed valid/invalid primary";
    case Adversary::EquivocatingPrimary: return "equivocating primary";
  }
  return "?";
}

struct ModelResult {
  std::size_t states = 0;        // distinct states visited
  std::size_t terminal = 0;      // distinct states with nothing left to deliver
  std::size_t violations = 0;    // honest replicas committed different blocks at one height
  std::size_t invalid_commits = 0;
  std::size_t stuck_terminals = 0;  // terminal states where some honest replica has not committed
  bool truncated = false;
  std::string first_violation;
};

class BftModel {
 public:
  static constexpr std::uint32_t kN = 4;

  BftModel(Adversary adversary, NodeId byzantine, std::size_t state_limit = 5'000'000)
      : adversary_(adversary), byz_(byzantine), limit_(state_limit) {
    auto cfg = ConsensusConfig::for_replicas(kN);
    for (NodeId i = 0; i < kN; ++i) replicas_.emplace_back(i, cfg);
    Gen g(77);
    good_ = build_block({Transaction(g.transaction()), Transaction(g.transaction())}, genesis(), 0, 1000);
  }

  const Block& good_block() const { return good_; }

  ModelResult run() {
    State s{replicas_, {}, {}};
    if (byz_ == 0) script_primary(s);
    else {
      auto step = s.replicas[0].propose(good_.txns, good_.header.timestamp);
      route(s, 0, step);
      script_replica(s);
    }
    for (const auto& r : s.replicas) s.bytes.push_back(r.state_bytes());
    prune(s.pending, s.replicas);
    explore(s, key(s.bytes, s.pending));
    return result_;
  }

 private:
  struct Envelope {
    NodeId to;
    std::shared_ptr<const ConsensusMessage> msg;
  };
  struct State {
    std::vector<ReplicaState> replicas;
    std::vector<Envelope> pending;
    std::vector<std::string> bytes;  // state_bytes() of each replica
  };

  static ConsensusMessage vote(MessageKind kind, NodeId from, const Hash256& d) {
    return {kind, 0, 1, d, from, std::nullopt};
  }

  static ConsensusMessage preprepare(const Block& b) {
    return {MessageKind::PrePrepare, 0, 1, block_digest(b), 0, b};
  }

  void post(std::vector<Envelope>& pending, NodeId to, ConsensusMessage m) const {
    if (to == byz_) return;
    pending.push_back({to, std::make_shared<const ConsensusMessage>(std::move(m))});
  }
  void post(State& s, NodeId to, ConsensusMessage m) const { post(s.pending, to, std::move(m)); }

  void route(std::vector<Envelope>& pending, NodeId from, const StepResult& step) const {
    for (const auto& out : step.outbound)
      for (NodeId to = 0; to < kN; ++to)
        if (to != from && (!out.to || *out.to == to)) post(pending, to, out.msg);
  }
  void route(State& s, NodeId from, const StepResult& step) const { route(s.pending, from, step); }

  void script_replica(State& s) {
    if (adversary_ == Adversary::SilentReplica) return;
    const Hash256 real = block_digest(good_);
    const Hash256 bogus = sha256("bogus");
    for (NodeId to = 0; to < kN; ++to) {
      if (to == byz_) continue;
      for (const auto& d : {real, bogus}) {
        post(s, to, vote(MessageKind::Prepare, byz_, d));
        post(s, to, vote(MessageKind::Commit, byz_, d));
      }
    }
  }

  void script_primary(State& s) {
    std::vector<Block> offered;
    Block bad = good_;
    bad.header.txn_root = sha256("wrong root");
    Block other = good_;
    other.header.timestamp += 1;
    switch (adversary_) {
      case Adversary::InvalidPrimary: offered = {bad}; break;
      case Adversary::MixedPrimary: offered = {good_, bad}; break;
      case Adversary::EquivocatingPrimary: offered = {good_, other}; break;
      default: offered = {good_}; break;
    }
    if (adversary_ == Adversary::InvalidPrimary || adversary_ == Adversary::MixedPrimary)
      invalid_.insert(block_digest(bad));
    for (NodeId to = 1; to < kN; ++to)
      for (const auto& b : offered) {
        post(s, to, preprepare(b));
        post(s, to, vote(MessageKind::Prepare, 0, block_digest(b)));
        post(s, to, vote(MessageKind::Commit, 0, block_digest(b)));
      }
  }

  // 128-bit compaction of the full state: replica states plus the multiset
  // of undelivered messages.
  using Key = std::pair<std::size_t, std::size_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept { return k.first ^ (k.second * 0x9e3779b97f4a7c15ull); }
  };

  Key key(const std::vector<std::string>& replica_bytes, const std::vector<Envelope>& pending) const {
    std::string bytes;
    for (NodeId i = 0; i < kN; ++i)
      if (i != byz_) bytes += replica_bytes[i];
    std::vector<std::array<char, 35>> msgs(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const auto& m = *pending[i].msg;
      msgs[i][0] = static_cast<char>(pending[i].to);
      msgs[i][1] = static_cast<char>(m.kind);
      msgs[i][2] = static_cast<char>(m.sender);
      std::copy(m.block_digest.bytes.begin(), m.block_digest.bytes.end(), msgs[i].begin() + 3);
    }
    std::sort(msgs.begin(), msgs.end());
    for (const auto& m : msgs) bytes.append(m.data(), m.size());
    const std::size_t h1 = std::hash<std::string_view>{}(bytes);
    bytes += '\x5a';
    return {h1, std::hash<std::string_view>{}(bytes)};
  }

  void check(const State& s) {
    std::optional<Hash256> at1;
    bool all_committed = true;
    for (NodeId i = 0; i < kN; ++i) {
      if (i == byz_) continue;
      const auto& l = s.replicas[i].ledger();
      if (l.head_height() < 1) {
        all_committed = false;
        continue;
      }
      auto d = block_digest(l.blocks()[1]);
      if (invalid_.contains(d)) ++result_.invalid_commits;
      if (at1 && *at1 != d) {
        if (result_.violations++ == 0)
          result_.first_violation = "replica " + std::to_string(i) + " committed a different block";
      }
      at1 = d;
    }
    if (s.pending.empty()) {
      ++result_.terminal;
      if (!all_committed) ++result_.stuck_terminals;
    }
  }

  // Drops messages their recipient would ignore whenever delivered.
  static void prune(std::vector<Envelope>& pending, const std::vector<ReplicaState>& replicas) {
    std::erase_if(pending, [&](const Envelope& e) { return replicas[e.to].is_redundant(*e.msg); });
  }

  // Depth-first over delivery choices. Only the recipient changes on a
  // delivery, so successors are keyed before the full state is copied.
  void explore(const State& s, const Key& k) {
    if (!seen_.insert(k).second) return;
    ++result_.states;
    check(s);
    if (result_.states >= limit_) {
      result_.truncated = true;
      return;
    }
    for (std::size_t i = 0; i < s.pending.size(); ++i) {
      // Identical messages to the same replica lead to the same successor.
      bool duplicate = false;
      for (std::size_t j = 0; j < i && !duplicate; ++j)
        duplicate = s.pending[j].to == s.pending[i].to && s.pending[j].msg->kind == s.pending[i].msg->kind &&
                    s.pending[j].msg->sender == s.pending[i].msg->sender &&
                    s.pending[j].msg->block_digest == s.pending[i].msg->block_digest;
      if (duplicate) continue;
      const Envelope& e = s.pending[i];
      ReplicaState target = s.replicas[e.to];
      auto step = target.handle_message(*e.msg);
      std::vector<Envelope> pending;
      pending.reserve(s.pending.size() + 2 * kN);
      for (std::size_t j = 0; j < s.pending.size(); ++j)
        if (j != i) pending.push_back(s.pending[j]);
      route(pending, e.to, step);
      std::erase_if(pending, [&](const Envelope& m) {
        return (m.to == e.to ? target : s.replicas[m.to]).is_redundant(*m.msg);
      });
      auto bytes = s.bytes;
      bytes[e.to] = target.state_bytes();
      auto k2 = key(bytes, pending);
      if (seen_.contains(k2)) continue;
      State next{s.replicas, std::move(pending), std::move(bytes)};
      next.replicas[e.to] = std::move(target);
      explore(next, k2);
      if (result_.truncated) return;
    }
  }

  Adversary adversary_;
  NodeId byz_;
  std::size_t limit_;
  std::vector<ReplicaState> replicas_;
  Block good_;
  std::unordered_set<Hash256> invalid_;
  std::unordered_set<Key, KeyHash> seen_;
  ModelResult result_;
};

}  // namespace testsupport
