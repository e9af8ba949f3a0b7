#pragma once

#include <stdexcept>
#include <string>

namespace blockaudit {

enum class ErrorCode {
  InvalidArgument,
  MalformedJson,
  MissingField,
  UnknownField,
  EmptyDetails,
  BadDate,
  BadUuid,
  UnknownEventType,
  EmptyBlock,
  DuplicateTransaction,
  WrongPrevHash,
  WrongHeight,
  WrongTxnRoot,
  GenesisMismatch,
  NotPrimary,
  UnknownNode,
  BadConfig,
  MalformedRecord,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::MalformedJson: return "malformed_json";
    case ErrorCode::MissingField: return "missing_field";
    case ErrorCode::UnknownField: return "unknown_field";
    case ErrorCode::EmptyDetails: return "empty_details";
    case ErrorCode::BadDate: return "bad_date";
    case ErrorCode::BadUuid: return "bad_uuid";
    case ErrorCode::UnknownEventType: return "unknown_event_type";
    case ErrorCode::EmptyBlock: return "empty_block";
    case ErrorCode::DuplicateTransaction: return "duplicate_transaction";
    case ErrorCode::WrongPrevHash: return "wrong_prev_hash";
    case ErrorCode::WrongHeight: return "wrong_height";
    case ErrorCode::WrongTxnRoot: return "wrong_txn_root";
    case ErrorCode::GenesisMismatch: return "genesis_mismatch";
    case ErrorCode::NotPrimary: return "not_primary";
    case ErrorCode::UnknownNode: return "unknown_node";
    case ErrorCode::BadConfig: return "bad_config";
    case ErrorCode::MalformedRecord: return "malformed_record";
  }
  return "unknown";
}

// All library failures surface as this exception; `code()` is the
// machine-readable reason that the gateway forwards to clients.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace blockaudit
