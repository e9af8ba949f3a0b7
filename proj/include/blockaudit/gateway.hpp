#pragma once

// Application-facing edge of one node: createAudit submissions, history and
// chain verification queries. Requests are serialized through one mutex so
// the node's event loop only ever sees one caller at a time. The gateway
// can only submit transactions; ledgers change solely through consensus.

#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "blockaudit/error.hpp"
#include "blockaudit/ledger.hpp"
#include "blockaudit/net_sim.hpp"
#include "blockaudit/txn_codec.hpp"

namespace blockaudit {

enum class SubmitStatus { Accepted, Duplicate, Rejected };

inline const char* to_string(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::Accepted: return "Accepted";
    case SubmitStatus::Duplicate: return "Duplicate";
    case SubmitStatus::Rejected: return "Rejected";
  }
  return "?";
}

struct SubmitReceipt {
  std::optional<Uuid> txn_id;
  std::optional<TxnDigest> digest;
  SubmitStatus status = SubmitStatus::Rejected;
  std::string reason;   // machine-readable code when not Accepted
  std::string message;  // human-readable detail

  int http_status() const {
    switch (status) {
      case SubmitStatus::Accepted: return 202;
      case SubmitStatus::Duplicate: return 409;
      case SubmitStatus::Rejected: return 400;
    }
    return 500;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["id"] = txn_id ? nlohmann::json(txn_id->str()) : nlohmann::json();
    j["digest"] = digest ? nlohmann::json(digest->hex()) : nlohmann::json();
    j["status"] = to_string(status);
    if (status != SubmitStatus::Accepted) {
      j["reason"] = reason;
      j["message"] = message;
    }
    return j;
  }
};

class Gateway {
 public:
  // With `drive_network`, every submission runs the simulated network
  // until it is quiescent before returning, so the transaction is committed
  // by the time the receipt is handed out (used by the HTTP server).
  Gateway(SimNetwork& network, NodeId node, bool drive_network = false)
      : network_(network), node_(node), drive_(drive_network) {
    network_.stored_ledger(node_);  // throws for unknown nodes
  }

  NodeId node() const { return node_; }

  SubmitReceipt create_audit(std::string_view body) {
    SubmitReceipt receipt;
    Transaction txn;
    try {
      txn = Transaction(decode_transaction(body));
    } catch (const Error& e) {
      receipt.reason = to_string(e.code());
      receipt.message = e.what();
      return receipt;
    }
    receipt.txn_id = txn->id;
    receipt.digest = txn.digest();
    std::lock_guard lock(mu_);
    if (!network_.submit_transaction(node_, txn, network_.now())) {
      receipt.status = SubmitStatus::Duplicate;
      receipt.reason = to_string(ErrorCode::DuplicateTransaction);
      receipt.message = "transaction " + txn->id.str() + " already known to node " + std::to_string(node_);
      return receipt;
    }
    receipt.status = SubmitStatus::Accepted;
    if (drive_) network_.run_until_quiescent();
    return receipt;
  }

  std::vector<Transaction> get_history(std::string_view entity_name, std::int64_t entity_id) {
    std::lock_guard lock(mu_);
    return query_history(network_.stored_ledger(node_), entity_name, entity_id);
  }

  VerificationReport get_verification() {
    std::lock_guard lock(mu_);
    return verify_chain(network_.stored_ledger(node_));
  }

 private:
  SimNetwork& network_;
  NodeId node_;
  bool drive_;
  std::mutex mu_;
};

// JSON array of wire-encoded (Legacy) transactions.
inline std::string history_to_json(const std::vector<Transaction>& history) {
  std::string out = "[";
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) out += ',';
    out += encode_transaction(history[i].get());
  }
  out += ']';
  return out;
}

}  // namespace blockaudit
