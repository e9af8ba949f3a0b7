#pragma once

// Deterministic discrete-event simulation of a full-mesh peer network in
// which every node runs a ReplicaState, gossips transactions and keeps its
// own ledger.
//
// Time is integer microseconds. Each directed link serializes its messages
// FIFO at `bandwidth`; an optional shared switching fabric additionally
// serializes every message in the network at `fabric_bandwidth`. A message
// of b bytes sent at `now` over an idle link with no fabric arrives at
//
//   now + link_latency + ceil(b / bandwidth)
//
// and jitter scales that whole delay by a factor drawn uniformly from
// [1 - jitter, 1 + jitter). Events fire in (time, sequence) order.

#include <algorithm>
#include <array>
#include <deque>
#include <limits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "blockaudit/consensus.hpp"
#include "blockaudit/error.hpp"
#include "blockaudit/hash.hpp"
#include "blockaudit/ledger.hpp"
#include "blockaudit/txn_codec.hpp"
#include "blockaudit/uuid.hpp"

namespace blockaudit {

using SimTime = std::int64_t;  // microseconds

inline SimTime ms_to_sim(double ms) { return static_cast<SimTime>(std::llround(ms * 1000.0)); }
inline double sim_to_ms(SimTime t) { return static_cast<double>(t) / 1000.0; }

struct SimConfig {
  std::uint32_t n_nodes = 4;
  double link_latency_ms = 1.0;
  double bandwidth = 12'500.0;  // bytes per ms per directed link
  double jitter_fraction = 0.0;
  std::uint64_t rng_seed = 1;
  double fabric_bandwidth = 0.0;  // bytes per ms shared by all links; 0 = unlimited
  std::size_t block_max_bytes = 1'000'000;
  double block_timeout_ms = 50.0;
  bool relay_transactions = true;  // receivers re-broadcast first-seen transactions
  std::uint64_t consensus_window = ReplicaState::kDefaultWindow;

  void validate() const {
    if (n_nodes < 1) throw Error(ErrorCode::BadConfig, "n_nodes must be >= 1");
    if (!(link_latency_ms >= 0)) throw Error(ErrorCode::BadConfig, "latency must be >= 0");
    if (!(bandwidth > 0)) throw Error(ErrorCode::BadConfig, "bandwidth must be > 0");
    if (!(jitter_fraction >= 0 && jitter_fraction < 1))
      throw Error(ErrorCode::BadConfig, "jitter_fraction must be in [0,1)");
    if (!(fabric_bandwidth >= 0)) throw Error(ErrorCode::BadConfig, "fabric_bandwidth must be >= 0");
    if (block_max_bytes == 0) throw Error(ErrorCode::BadConfig, "block_max_bytes must be > 0");
    if (!(block_timeout_ms >= 0)) throw Error(ErrorCode::BadConfig, "block timeout must be >= 0");
  }
};

// Attacker capabilities. Tampering and forged writes leave consensus
// behavior intact; the other three make the node Byzantine.
struct TamperLocalLedger {
  std::uint64_t height = 1;
  std::size_t byte_offset = 0;  // into the Url of the block's first transaction
  std::uint8_t mask = 0x01;     // XORed into that byte; low 7 bits only
};
struct Equivocate {};
struct DropOutbound {
  double fraction = 1.0;
};
struct InvalidBlock {};
struct ForgeAppWrite {
  std::string entity_name;
  std::int64_t entity_id = 0;
  std::string property;
  std::optional<std::string> old_value;
  std::string value;
  std::int64_t user_id = 0;  // the identity the attacker presents
  std::string url = "/forged";
};

using FaultBehavior = std::variant<TamperLocalLedger, Equivocate, DropOutbound, InvalidBlock, ForgeAppWrite>;

struct FaultSpec {
  NodeId target = 0;
  FaultBehavior behavior;
};

struct TxnTiming {
  Uuid id;
  SimTime generated = 0;                          // t_g
  std::vector<std::optional<SimTime>> committed;  // per node
};

struct SimReport {
  bool quiescent = true;
  SimTime end_time = 0;
  std::vector<TxnTiming> txns;  // in order of first submission
  std::vector<Hash256> head_digests;
  std::vector<std::uint64_t> head_heights;
  std::vector<bool> honest;
  std::uint64_t preprepare_deliveries = 0;
  std::uint64_t prepare_deliveries = 0;
  std::uint64_t commit_deliveries = 0;
  std::uint64_t txn_deliveries = 0;
  std::uint64_t dropped = 0;
  Hash256 trace_digest;

  // Latest commit time of `t` over honest nodes; absent if some honest
  // node has not committed it.
  std::optional<SimTime> all_honest_commit(const TxnTiming& t) const {
    SimTime latest = 0;
    for (std::size_t i = 0; i < t.committed.size(); ++i) {
      if (!honest[i]) continue;
      if (!t.committed[i]) return std::nullopt;
      latest = std::max(latest, *t.committed[i]);
    }
    return latest;
  }

  bool all_committed() const {
    for (const auto& t : txns)
      if (!all_honest_commit(t)) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["quiescent"] = quiescent;
    j["end_time_us"] = end_time;
    j["trace_digest"] = trace_digest.hex();
    j["messages"] = {{"preprepare", preprepare_deliveries}, {"prepare", prepare_deliveries},
                     {"commit", commit_deliveries},         {"transaction", txn_deliveries},
                     {"dropped", dropped}};
    auto nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < head_digests.size(); ++i)
      nodes.push_back({{"id", i}, {"honest", static_cast<bool>(honest[i])},
                       {"head_height", head_heights[i]}, {"head_digest", head_digests[i].hex()}});
    j["nodes"] = std::move(nodes);
    auto tx = nlohmann::json::array();
    for (const auto& t : txns) {
      auto commits = nlohmann::json::array();
      for (const auto& c : t.committed) commits.push_back(c ? nlohmann::json(*c) : nlohmann::json());
      tx.push_back({{"id", t.id.str()}, {"t_g_us", t.generated}, {"t_c_us", commits}});
    }
    j["txns"] = std::move(tx);
    return j;
  }
};

class SimNetwork {
 public:
  explicit SimNetwork(SimConfig config)
      : config_(std::move(config)), rng_(config_.rng_seed), ids_(config_.rng_seed ^ 0x9e3779b97f4a7c15ull) {
    config_.validate();
    const auto consensus = ConsensusConfig::for_replicas(config_.n_nodes);
    nodes_.reserve(config_.n_nodes);
    for (NodeId i = 0; i < config_.n_nodes; ++i)
      nodes_.push_back(Node{ReplicaState(i, consensus, config_.consensus_window)});
    link_free_.assign(static_cast<std::size_t>(config_.n_nodes) * config_.n_nodes, 0);
  }

  const SimConfig& config() const { return config_; }
  std::uint32_t size() const { return config_.n_nodes; }
  std::size_t link_count() const {
    return static_cast<std::size_t>(config_.n_nodes) * (config_.n_nodes - 1);
  }
  SimTime now() const { return now_; }
  std::size_t pending_events() const { return queue_.size(); }

  const ReplicaState& replica(NodeId id) const { return node(id).replica; }

  // The node's persisted chain: its committed ledger unless the storage
  // was tampered with.
  const Ledger& stored_ledger(NodeId id) const {
    const Node& n = node(id);
    return n.tampered ? *n.tampered : n.replica.ledger();
  }

  // Overwrites the persisted chain, e.g. with a copy fetched from honest
  // peers during recovery.
  void replace_stored_ledger(NodeId id, const Ledger& ledger) {
    Node& n = node(id);
    if (block_digest(ledger.head()) == block_digest(n.replica.ledger().head()) &&
        ledger.size() == n.replica.ledger().size() && !diff_against_peer(ledger, n.replica.ledger()))
      n.tampered.reset();
    else
      n.tampered = ledger;
  }

  bool is_honest(NodeId id) const { return !node(id).byzantine(); }

  // Does the node already know this transaction id (pending or committed)?
  bool knows(NodeId id, const Uuid& txn) const { return node(id).known.contains(txn); }
  bool has_committed(NodeId id, const Uuid& txn) const {
    return node(id).committed_ids.contains(txn);
  }

  void set_trace(std::ostream* out) { trace_ = out; }

  // Hands `txn` to node `at` at simulated time `when` (never earlier than
  // now). Returns false when the node already knows the transaction id.
  bool submit_transaction(NodeId at, Transaction txn, SimTime when) {
    Node& n = node(at);
    when = std::max(when, now_);
    if (n.known.contains(txn->id) || n.scheduled_submissions.contains(txn->id)) return false;
    n.scheduled_submissions.insert(txn->id);
    push(when, SubmitEvent{at, std::move(txn)});
    return true;
  }

  bool submit_transaction(NodeId at, Transaction txn) {
    return submit_transaction(at, std::move(txn), now_);
  }

  void inject_fault(const FaultSpec& spec) {
    Node& n = node(spec.target);
    std::visit(
        [&](const auto& b) {
          using B = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<B, TamperLocalLedger>) {
            tamper(spec.target, b);
          } else if constexpr (std::is_same_v<B, Equivocate>) {
            n.equivocate = true;
          } else if constexpr (std::is_same_v<B, DropOutbound>) {
            if (!(b.fraction >= 0 && b.fraction <= 1))
              throw Error(ErrorCode::InvalidArgument, "drop fraction must be in [0,1]");
            n.drop_fraction = b.fraction;
          } else if constexpr (std::is_same_v<B, InvalidBlock>) {
            n.invalid_blocks = true;
          } else if constexpr (std::is_same_v<B, ForgeAppWrite>) {
            submit_transaction(spec.target, forge(b), now_);
          }
        },
        spec.behavior);
  }

  // Builds the transaction a ForgeAppWrite would submit, without submitting it.
  Transaction forge(const ForgeAppWrite& w) {
    AuditTransaction t;
    t.class_name = w.entity_name;
    t.created_date = WireDate{now_ / 1000, 0};
    t.entity_id = w.entity_id;
    t.event_type = event_type_code(EventKind::Update);
    t.id = ids_.next();
    t.session_id = ids_.next();
    t.url = w.url;
    t.user_id = w.user_id;
    t.details.push_back({ids_.next(), w.value, w.old_value, w.property});
    return Transaction(std::move(t));
  }

  SimReport run_until_quiescent(SimTime deadline = std::numeric_limits<SimTime>::max()) {
    while (!queue_.empty() && queue_.top().time <= deadline) {
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      std::visit([&](auto& e) { dispatch(e, ev.seq); }, ev.action);
    }
    return report(queue_.empty());
  }

  SimReport report(bool quiescent) const {
    SimReport r;
    r.quiescent = quiescent;
    r.end_time = now_;
    for (const auto& id : txn_order_) r.txns.push_back(timings_.at(id));
    for (NodeId i = 0; i < config_.n_nodes; ++i) {
      r.head_digests.push_back(block_digest(nodes_[i].replica.ledger().head()));
      r.head_heights.push_back(nodes_[i].replica.ledger().head_height());
      r.honest.push_back(is_honest(i));
    }
    r.preprepare_deliveries = counts_[0];
    r.prepare_deliveries = counts_[1];
    r.commit_deliveries = counts_[2];
    r.txn_deliveries = counts_[3];
    r.dropped = dropped_;
    Sha256Stream copy = trace_hash_;
    r.trace_digest = copy.finish();
    return r;
  }

 private:
  struct Node {
    ReplicaState replica;
    std::deque<Transaction> mempool;  // only drained by the primary
    std::size_t mempool_bytes = 0;
    std::unordered_set<Uuid> known;
    std::unordered_set<Uuid> committed_ids;
    std::unordered_set<Uuid> scheduled_submissions;
    bool timer_armed = false;
    std::optional<Ledger> tampered;
    bool equivocate = false;
    double drop_fraction = 0.0;
    bool invalid_blocks = false;

    bool byzantine() const { return equivocate || drop_fraction > 0 || invalid_blocks; }
  };

  using MessagePtr = std::shared_ptr<const ConsensusMessage>;

  struct SubmitEvent {
    NodeId at;
    Transaction txn;
  };
  struct DeliverMessage {
    NodeId from, to;
    MessagePtr msg;
  };
  struct DeliverTxn {
    NodeId from, to;
    Transaction txn;
  };
  struct BlockTimer {
    NodeId at;
  };

  struct Event {
    SimTime time;
    std::uint64_t seq;
    std::variant<SubmitEvent, DeliverMessage, DeliverTxn, BlockTimer> action;

    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  Node& node(NodeId id) {
    if (id >= nodes_.size()) throw Error(ErrorCode::UnknownNode, "node " + std::to_string(id));
    return nodes_[id];
  }
  const Node& node(NodeId id) const {
    if (id >= nodes_.size()) throw Error(ErrorCode::UnknownNode, "node " + std::to_string(id));
    return nodes_[id];
  }

  template <class A>
  void push(SimTime t, A action) {
    queue_.push(Event{t, seq_++, std::move(action)});
  }

  double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  SimTime transmit_time(std::size_t bytes, double rate) const {
    return static_cast<SimTime>(std::ceil(static_cast<double>(bytes) * 1000.0 / rate));
  }

  // Reserves the link (and fabric) and returns the arrival time.
  SimTime schedule_transfer(NodeId from, NodeId to, std::size_t bytes) {
    SimTime& link_free = link_free_[static_cast<std::size_t>(from) * config_.n_nodes + to];
    SimTime exit = std::max(now_, link_free) + transmit_time(bytes, config_.bandwidth);
    link_free = exit;
    if (config_.fabric_bandwidth > 0) {
      fabric_free_ = std::max(exit, fabric_free_) + transmit_time(bytes, config_.fabric_bandwidth);
      exit = fabric_free_;
    }
    SimTime arrival = exit + ms_to_sim(config_.link_latency_ms);
    if (config_.jitter_fraction > 0) {
      double factor = 1.0 + config_.jitter_fraction * (2.0 * uniform01() - 1.0);
      arrival = now_ + static_cast<SimTime>(std::llround(static_cast<double>(arrival - now_) * factor));
    }
    return arrival;
  }

  bool drop(Node& n) { return n.drop_fraction > 0 && uniform01() < n.drop_fraction; }

  void send_txn(NodeId from, NodeId to, const Transaction& txn) {
    if (drop(nodes_[from])) {
      ++dropped_;
      return;
    }
    push(schedule_transfer(from, to, txn.encoded_size() + 64), DeliverTxn{from, to, txn});
  }

  void send_message(NodeId from, NodeId to, MessagePtr msg) {
    if (drop(nodes_[from])) {
      ++dropped_;
      return;
    }
    const SimTime arrival = schedule_transfer(from, to, wire_size(*msg));
    push(arrival, DeliverMessage{from, to, std::move(msg)});
  }

  // Applies the sender's Byzantine behavior to one outbound message.
  void emit(NodeId from, const Outbound& out) {
    Node& n = nodes_[from];
    auto honest = std::make_shared<const ConsensusMessage>(out.msg);
    MessagePtr variant;
    if (out.msg.kind == MessageKind::PrePrepare && (n.equivocate || n.invalid_blocks)) {
      ConsensusMessage alt = out.msg;
      if (n.invalid_blocks) {
        alt.block->header.txn_root = sha256(alt.block->header.txn_root.hex());
      } else {
        alt.block->header.timestamp += 1;
      }
      alt.block_digest = block_digest(*alt.block);
      variant = std::make_shared<const ConsensusMessage>(std::move(alt));
      if (n.invalid_blocks) honest = variant;
    } else if (out.msg.kind != MessageKind::PrePrepare && n.equivocate) {
      ConsensusMessage alt = out.msg;
      alt.block_digest = sha256("equivocate:" + out.msg.block_digest.hex());
      variant = std::make_shared<const ConsensusMessage>(std::move(alt));
    }
    std::uint32_t k = 0;
    for (NodeId to = 0; to < config_.n_nodes; ++to) {
      if (to == from || (out.to && *out.to != to)) continue;
      // Equivocators show every other peer a different digest.
      bool flip = n.equivocate && variant && (k++ % 2 == 1);
      send_message(from, to, flip ? variant : honest);
    }
  }

  void apply(NodeId at, StepResult& step) {
    for (const auto& out : step.outbound) emit(at, out);
    for (const auto& block : step.committed) on_commit(at, block);
  }

  void learn(NodeId at, const Transaction& txn, std::optional<NodeId> from) {
    Node& n = nodes_[at];
    if (n.known.contains(txn->id)) return;
    n.known.insert(txn->id);
    if (!timings_.contains(txn->id)) {
      timings_.emplace(txn->id, TxnTiming{txn->id, now_, std::vector<std::optional<SimTime>>(config_.n_nodes)});
      txn_order_.push_back(txn->id);
    }
    if (n.replica.is_primary() && !n.committed_ids.contains(txn->id)) {
      n.mempool.push_back(txn);
      n.mempool_bytes += txn.encoded_size();
    }
    if (!from || config_.relay_transactions)
      for (NodeId to = 0; to < config_.n_nodes; ++to)
        if (to != at && (!from || to != *from)) send_txn(at, to, txn);
    maybe_propose(at);
  }

  void on_commit(NodeId at, const Block& block) {
    Node& n = nodes_[at];
    for (const auto& t : block.txns) {
      n.committed_ids.insert(t->id);
      n.known.insert(t->id);
      auto it = timings_.find(t->id);
      if (it == timings_.end()) {
        it = timings_.emplace(t->id, TxnTiming{t->id, now_, std::vector<std::optional<SimTime>>(config_.n_nodes)}).first;
        txn_order_.push_back(t->id);
      }
      it->second.committed[at] = now_;
    }
    if (n.tampered) {
      auto blocks = n.tampered->blocks();
      blocks.push_back(block);
      n.tampered = Ledger::from_blocks_unchecked(std::move(blocks));
    }
    maybe_propose(at);
  }

  std::vector<Transaction> take_batch(Node& n) {
    std::vector<Transaction> batch;
    std::size_t bytes = 0;
    while (!n.mempool.empty()) {
      Transaction t = n.mempool.front();
      if (n.committed_ids.contains(t->id)) {
        n.mempool.pop_front();
        n.mempool_bytes -= t.encoded_size();
        continue;
      }
      if (!batch.empty() && bytes + t.encoded_size() > config_.block_max_bytes) break;
      n.mempool.pop_front();
      n.mempool_bytes -= t.encoded_size();
      bytes += t.encoded_size();
      batch.push_back(std::move(t));
    }
    return batch;
  }

  void propose_now(NodeId at) {
    Node& n = nodes_[at];
    auto batch = take_batch(n);
    if (batch.empty()) return;
    auto step = n.replica.propose(std::move(batch), now_ / 1000);
    apply(at, step);
  }

  // Block formation: cut as soon as the pending bytes reach the block size,
  // otherwise when the timeout armed by the first pending transaction fires.
  void maybe_propose(NodeId at) {
    Node& n = nodes_[at];
    if (!n.replica.can_propose() || n.mempool.empty()) return;
    if (n.mempool_bytes >= config_.block_max_bytes) {
      propose_now(at);
    } else if (!n.timer_armed) {
      n.timer_armed = true;
      push(now_ + ms_to_sim(config_.block_timeout_ms), BlockTimer{at});
    }
  }

  void trace_event(std::uint64_t seq, NodeId from, NodeId to, std::uint64_t kind, const Hash256& what) {
    trace_hash_.update_u64(static_cast<std::uint64_t>(now_));
    trace_hash_.update_u64(seq);
    trace_hash_.update_u64((static_cast<std::uint64_t>(from) << 32) | to);
    trace_hash_.update_u64(kind);
    trace_hash_.update(std::string_view(reinterpret_cast<const char*>(what.bytes.data()), 32));
  }

  void dispatch(SubmitEvent& e, std::uint64_t seq) {
    nodes_[e.at].scheduled_submissions.erase(e.txn->id);
    trace_event(seq, e.at, e.at, 10, e.txn.digest());
    learn(e.at, e.txn, std::nullopt);
  }

  void dispatch(DeliverTxn& e, std::uint64_t seq) {
    ++counts_[3];
    trace_event(seq, e.from, e.to, 11, e.txn.digest());
    learn(e.to, e.txn, e.from);
  }

  void dispatch(DeliverMessage& e, std::uint64_t seq) {
    const auto& msg = *e.msg;
    ++counts_[static_cast<int>(msg.kind)];
    trace_event(seq, e.from, e.to, static_cast<std::uint64_t>(msg.kind), msg.block_digest);
    if (trace_)
      *trace_ << nlohmann::json{{"t", now_}, {"seq", seq}, {"from", e.from}, {"to", e.to},
                                {"msg", to_json(msg)}}
                     .dump()
              << '\n';
    auto step = nodes_[e.to].replica.handle_message(msg);
    apply(e.to, step);
  }

  void dispatch(BlockTimer& e, std::uint64_t seq) {
    trace_event(seq, e.at, e.at, 12, Hash256::zero());
    nodes_[e.at].timer_armed = false;
    if (nodes_[e.at].replica.can_propose()) propose_now(e.at);
  }

  void tamper(NodeId id, const TamperLocalLedger& t) {
    Node& n = nodes_[id];
    std::vector<Block> blocks = stored_ledger(id).blocks();
    if (t.height == 0 || t.height >= blocks.size())
      throw Error(ErrorCode::InvalidArgument, "no committed block at height " + std::to_string(t.height));
    std::uint8_t mask = t.mask & 0x7f;
    if (mask == 0) mask = 0x01;
    Block& b = blocks[t.height];
    AuditTransaction txn = b.txns.front().get();
    if (txn.url.empty()) txn.url = " ";
    // Flip an ASCII byte so the text stays encodable.
    std::size_t pos = t.byte_offset % txn.url.size();
    for (std::size_t k = 0; k < txn.url.size(); ++k) {
      std::size_t i = (pos + k) % txn.url.size();
      if (static_cast<unsigned char>(txn.url[i]) < 0x80) {
        txn.url[i] = static_cast<char>(txn.url[i] ^ mask);
        break;
      }
    }
    b.txns.front() = Transaction(std::move(txn));
    n.tampered = Ledger::from_blocks_unchecked(std::move(blocks));
  }

  SimConfig config_;
  std::mt19937_64 rng_;
  UuidSource ids_;
  std::vector<Node> nodes_;
  std::vector<SimTime> link_free_;
  SimTime fabric_free_ = 0;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::unordered_map<Uuid, TxnTiming> timings_;
  std::vector<Uuid> txn_order_;
  std::array<std::uint64_t, 4> counts_{};
  std::uint64_t dropped_ = 0;
  Sha256Stream trace_hash_;
  std::ostream* trace_ = nullptr;
};

inline SimNetwork spawn_network(const SimConfig& config) { return SimNetwork(config); }

}  // namespace blockaudit
