#pragma once

// JSON wire format for audit transactions.
//
// The wire document mirrors the .NET DataContractJsonSerializer output the
// audit log application produces:
//
//   {"ClassName":..,"CreatedDate":"\/Date(..)\/","EntityId":..,"EventType":..,
//    "Id":..,"SessionId":..,"Url":..,"UserId":..,
//    "Details":[{"Id":..,"NewValue":..,"OldValue":..,"PropertyName":..}, ..]}
//
// Legacy mode escapes every '/' as "\/" (as that serializer does) and renders
// dates as `\/Date(ms+-HHMM)\/`. Iso8601 mode leaves '/' bare and renders
// dates as ISO-8601 local time with offset.
//
// The canonical form used for hashing sorts keys lexicographically at every
// level, has no whitespace, and uses Legacy escaping and dates.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "blockaudit/audit_capture.hpp"
#include "blockaudit/error.hpp"
#include "blockaudit/hash.hpp"
#include "blockaudit/uuid.hpp"
#include "blockaudit/wire_date.hpp"

namespace blockaudit {

enum class DateMode { Legacy, Iso8601 };

struct TxnDetail {
  Uuid id;
  std::optional<std::string> new_value;
  std::optional<std::string> old_value;
  std::string property_name;

  friend bool operator==(const TxnDetail&, const TxnDetail&) = default;
};

struct AuditTransaction {
  std::string class_name;
  WireDate created_date;
  std::int64_t entity_id = 0;
  int event_type = 0;
  Uuid id;
  Uuid session_id;
  std::string url;
  std::int64_t user_id = 0;
  std::vector<TxnDetail> details;

  friend bool operator==(const AuditTransaction&, const AuditTransaction&) = default;
};

using TxnDigest = Hash256;

inline int event_type_code(EventKind kind) {
  switch (kind) {
    case EventKind::Insert: return 0;
    case EventKind::Update: return 1;
    case EventKind::Delete: return 2;
  }
  throw Error(ErrorCode::UnknownEventType, "bad EventKind");
}

inline EventKind event_kind_from_code(std::int64_t code) {
  switch (code) {
    case 0: return EventKind::Insert;
    case 1: return EventKind::Update;
    case 2: return EventKind::Delete;
    default: throw Error(ErrorCode::UnknownEventType, "event type code " + std::to_string(code));
  }
}

inline AuditTransaction to_transaction(const AuditLogEntry& entry) {
  if (entry.details.empty())
    throw Error(ErrorCode::EmptyDetails, "audit entry " + entry.audit_id.str() + " has no details");
  AuditTransaction t;
  t.class_name = entry.entity_name;
  t.created_date = entry.created_date;
  t.entity_id = entry.entity_id;
  t.event_type = event_type_code(entry.event_type);
  t.id = entry.audit_id;
  t.session_id = entry.session_id;
  t.url = entry.url;
  t.user_id = entry.user_id;
  t.details.reserve(entry.details.size());
  for (const auto& d : entry.details)
    t.details.push_back({d.detail_id, d.new_value, d.old_value, d.property_name});
  return t;
}

namespace detail {

// JSON string literal for `s`. With `escape_slash`, '/' is written as "\/";
// a bare '/' never occurs inside another escape sequence, so a plain
// substitution over the escaped text is exact.
inline void append_json_string(std::string& out, std::string_view s, bool escape_slash) {
  // Printable ASCII other than '"' and '\' is emitted verbatim.
  if (std::all_of(s.begin(), s.end(), [](char c) { return c >= 0x20 && c < 0x7f && c != '"' && c != '\\'; })) {
    out += '"';
    std::size_t from = 0;
    for (std::size_t slash; escape_slash && (slash = s.find('/', from)) != s.npos; from = slash + 1) {
      out.append(s.substr(from, slash - from));
      out += "\\/";
    }
    out.append(s.substr(from));
    out += '"';
    return;
  }
  std::string quoted;
  try {
    quoted = nlohmann::json(std::string(s)).dump();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("string is not valid UTF-8: ") + e.what());
  }
  if (!escape_slash) {
    out += quoted;
    return;
  }
  for (char c : quoted) {
    if (c == '/') out += "\\/";
    else out.push_back(c);
  }
}

inline void append_optional_string(std::string& out, const std::optional<std::string>& s,
                                   bool escape_slash) {
  if (s) append_json_string(out, *s, escape_slash);
  else out += "null";
}

inline std::string render_date(const WireDate& d, DateMode mode) {
  return mode == DateMode::Legacy ? render_legacy(d) : render_iso8601(d);
}

inline void append_details(std::string& out, const std::vector<TxnDetail>& details, bool esc) {
  out += '[';
  bool first = true;
  for (const auto& d : details) {
    if (!first) out += ',';
    first = false;
    out += "{\"Id\":";
    append_json_string(out, d.id.str(), esc);
    out += ",\"NewValue\":";
    append_optional_string(out, d.new_value, esc);
    out += ",\"OldValue\":";
    append_optional_string(out, d.old_value, esc);
    out += ",\"PropertyName\":";
    append_json_string(out, d.property_name, esc);
    out += '}';
  }
  out += ']';
}

inline void check_encodable(const AuditTransaction& t) {
  if (t.details.empty())
    throw Error(ErrorCode::EmptyDetails, "transaction " + t.id.str() + " has no details");
  event_kind_from_code(t.event_type);
}

}  // namespace detail

// Wire encoding, compact, keys in the serializer's order (Details last).
inline std::string encode_transaction(const AuditTransaction& t, DateMode mode = DateMode::Legacy) {
  detail::check_encodable(t);
  const bool esc = mode == DateMode::Legacy;
  std::string out;
  out.reserve(256 + t.details.size() * 128);
  out += "{\"ClassName\":";
  detail::append_json_string(out, t.class_name, esc);
  out += ",\"CreatedDate\":";
  detail::append_json_string(out, detail::render_date(t.created_date, mode), esc);
  out += ",\"EntityId\":" + std::to_string(t.entity_id);
  out += ",\"EventType\":" + std::to_string(t.event_type);
  out += ",\"Id\":";
  detail::append_json_string(out, t.id.str(), esc);
  out += ",\"SessionId\":";
  detail::append_json_string(out, t.session_id.str(), esc);
  out += ",\"Url\":";
  detail::append_json_string(out, t.url, esc);
  out += ",\"UserId\":" + std::to_string(t.user_id);
  out += ",\"Details\":";
  detail::append_details(out, t.details, esc);
  out += '}';
  return out;
}

inline std::string encode_transaction(const AuditLogEntry& entry, DateMode mode = DateMode::Legacy) {
  return encode_transaction(to_transaction(entry), mode);
}

// Sorted keys, no whitespace, Legacy dates and escaping.
inline std::string canonical_encoding(const AuditTransaction& t) {
  detail::check_encodable(t);
  std::string out;
  out.reserve(256 + t.details.size() * 128);
  out += "{\"ClassName\":";
  detail::append_json_string(out, t.class_name, true);
  out += ",\"CreatedDate\":";
  detail::append_json_string(out, render_legacy(t.created_date), true);
  out += ",\"Details\":";
  detail::append_details(out, t.details, true);
  out += ",\"EntityId\":" + std::to_string(t.entity_id);
  out += ",\"EventType\":" + std::to_string(t.event_type);
  out += ",\"Id\":";
  detail::append_json_string(out, t.id.str(), true);
  out += ",\"SessionId\":";
  detail::append_json_string(out, t.session_id.str(), true);
  out += ",\"Url\":";
  detail::append_json_string(out, t.url, true);
  out += ",\"UserId\":" + std::to_string(t.user_id);
  out += '}';
  return out;
}

inline TxnDigest txn_digest(const AuditTransaction& t) { return sha256(canonical_encoding(t)); }

namespace detail {

using Json = nlohmann::json;

inline const Json& require(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MissingField, std::string("missing field ") + key);
  return *it;
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::UnknownField, "unknown field " + key);
  }
}

inline std::string require_string(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (!v.is_string()) throw Error(ErrorCode::MalformedJson, std::string(key) + " must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> require_nullable_string(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string())
    throw Error(ErrorCode::MalformedJson, std::string(key) + " must be a string or null");
  return v.get<std::string>();
}

inline std::int64_t require_int(const Json& obj, const char* key) {
  const Json& v = require(obj, key);
  if (!v.is_number_integer())
    throw Error(ErrorCode::MalformedJson, std::string(key) + " must be an integer");
  return v.get<std::int64_t>();
}

inline Uuid require_uuid(const Json& obj, const char* key) {
  auto text = require_string(obj, key);
  auto u = Uuid::parse(text);
  if (!u) throw Error(ErrorCode::BadUuid, std::string(key) + " is not a UUID: " + text);
  return *u;
}

inline AuditTransaction transaction_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::MalformedJson, "transaction must be a JSON object");
  reject_unknown(doc, {"ClassName", "CreatedDate", "Details", "EntityId", "EventType", "Id",
                       "SessionId", "Url", "UserId"});
  AuditTransaction t;
  t.class_name = require_string(doc, "ClassName");
  t.created_date = parse_wire_date(require_string(doc, "CreatedDate"));
  t.entity_id = require_int(doc, "EntityId");
  auto code = require_int(doc, "EventType");
  event_kind_from_code(code);
  t.event_type = static_cast<int>(code);
  t.id = require_uuid(doc, "Id");
  t.session_id = require_uuid(doc, "SessionId");
  t.url = require_string(doc, "Url");
  t.user_id = require_int(doc, "UserId");
  const Json& details = require(doc, "Details");
  if (!details.is_array()) throw Error(ErrorCode::MalformedJson, "Details must be an array");
  if (details.empty()) throw Error(ErrorCode::EmptyDetails, "Details is empty");
  for (const auto& d : details) {
    if (!d.is_object()) throw Error(ErrorCode::MalformedJson, "detail must be an object");
    reject_unknown(d, {"Id", "NewValue", "OldValue", "PropertyName"});
    TxnDetail detail{require_uuid(d, "Id"), require_nullable_string(d, "NewValue"),
                     require_nullable_string(d, "OldValue"), require_string(d, "PropertyName")};
    if (detail.property_name.empty())
      throw Error(ErrorCode::MalformedJson, "PropertyName must be non-empty");
    t.details.push_back(std::move(detail));
  }
  return t;
}

inline Json parse_json(std::string_view bytes) {
  try {
    return Json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {  // syntax errors and number overflow
    throw Error(ErrorCode::MalformedJson, e.what());
  }
}

}  // namespace detail

// Accepts Legacy and ISO-8601 dates and any whitespace. Unknown fields,
// missing fields, empty Details and bad dates are errors. NewValue/OldValue
// must be present but may be null.
inline AuditTransaction decode_transaction(std::string_view bytes) {
  return detail::transaction_from_json(detail::parse_json(bytes));
}

// Immutable, shareable transaction with its digest and canonical size
// computed once. Blocks and simulated messages pass these around so that a
// multi-megabyte payload is neither copied nor re-hashed per replica.
class Transaction {
 public:
  Transaction() = default;

  explicit Transaction(AuditTransaction txn) {
    auto canonical = canonical_encoding(txn);
    data_ = std::make_shared<const Data>(
        Data{std::move(txn), sha256(canonical), canonical.size()});
  }

  const AuditTransaction& get() const { return data_->txn; }
  const AuditTransaction* operator->() const { return &data_->txn; }
  const TxnDigest& digest() const { return data_->digest; }
  std::size_t encoded_size() const { return data_->encoded_size; }

  // Hashes the content again instead of trusting the cached digest.
  TxnDigest recompute_digest() const { return txn_digest(data_->txn); }

  explicit operator bool() const { return data_ != nullptr; }

  friend bool operator==(const Transaction& a, const Transaction& b) {
    return a.data_ == b.data_ || (a.data_ && b.data_ && a.data_->txn == b.data_->txn);
  }

 private:
  struct Data {
    AuditTransaction txn;
    TxnDigest digest;
    std::size_t encoded_size;
  };
  std::shared_ptr<const Data> data_;
};

}  // namespace blockaudit
