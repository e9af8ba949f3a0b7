#pragma once

// Audit-entry generation from ORM post-insert/update/delete notifications.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "blockaudit/error.hpp"
#include "blockaudit/uuid.hpp"
#include "blockaudit/wire_date.hpp"

namespace blockaudit {

enum class EventKind { Insert, Update, Delete };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Insert: return "Insert";
    case EventKind::Update: return "Update";
    case EventKind::Delete: return "Delete";
  }
  return "?";
}

struct PropertyDelta {
  std::string property_name;
  std::optional<std::string> old_value;
  std::optional<std::string> new_value;

  friend bool operator==(const PropertyDelta&, const PropertyDelta&) = default;
};

struct EntityChangeEvent {
  std::string entity_name;
  std::int64_t entity_id = 0;
  EventKind kind = EventKind::Insert;
  std::vector<PropertyDelta> properties;  // every mapped property, declaration order
  Uuid session_id;
  std::int64_t user_id = 0;
  std::string url;
  WireDate timestamp;
};

struct AuditDetail {
  Uuid detail_id;
  std::string property_name;
  std::optional<std::string> old_value;
  std::optional<std::string> new_value;

  friend bool operator==(const AuditDetail&, const AuditDetail&) = default;
};

struct AuditLogEntry {
  Uuid audit_id;
  Uuid session_id;
  std::string entity_name;
  std::int64_t entity_id = 0;
  EventKind event_type = EventKind::Insert;
  WireDate created_date;
  std::int64_t user_id = 0;
  std::string url;
  std::vector<AuditDetail> details;

  friend bool operator==(const AuditLogEntry&, const AuditLogEntry&) = default;
};

// Names of the tables that hold the audit log itself. Changes to them are
// never audited, otherwise saving an entry would recursively audit itself.
inline constexpr std::string_view kAuditLogTable = "AuditLog";
inline constexpr std::string_view kAuditLogDetailTable = "AuditLogDetail";

inline bool is_audit_table(std::string_view entity_name) {
  return entity_name == kAuditLogTable || entity_name == kAuditLogDetailTable;
}

class AuditPolicy {
 public:
  AuditPolicy() = default;

  AuditPolicy& mark_auditable(std::string entity) {
    auditable_.insert(std::move(entity));
    return *this;
  }

  AuditPolicy& suppress(const std::string& entity, std::string property) {
    if (!auditable_.contains(entity))
      throw Error(ErrorCode::BadConfig,
                  "cannot suppress '" + property + "' on non-auditable entity '" + entity + "'");
    suppressed_[entity].insert(std::move(property));
    return *this;
  }

  bool is_suppressed(const std::string& entity, const std::string& property) const {
    auto it = suppressed_.find(entity);
    return it != suppressed_.end() && it->second.contains(property);
  }

  const std::set<std::string>& auditable_entities() const { return auditable_; }
  const std::map<std::string, std::set<std::string>>& suppressed_properties() const {
    return suppressed_;
  }

  // Line-oriented config:
  //
  //   # comment
  //   auditable <EntityName>
  //   suppress  <EntityName> <PropertyName> [<PropertyName> ...]
  //
  // A `suppress` line must name an entity declared auditable earlier.
  static AuditPolicy parse(std::string_view text) {
    AuditPolicy policy;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream words(line);
      std::string keyword;
      if (!(words >> keyword)) continue;
      std::string entity;
      if (!(words >> entity))
        throw Error(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": missing entity");
      if (keyword == "auditable") {
        std::string extra;
        if (words >> extra)
          throw Error(ErrorCode::BadConfig,
                      "line " + std::to_string(lineno) + ": trailing text after entity");
        policy.mark_auditable(entity);
      } else if (keyword == "suppress") {
        std::string property;
        int count = 0;
        while (words >> property) {
          policy.suppress(entity, property);
          ++count;
        }
        if (count == 0)
          throw Error(ErrorCode::BadConfig,
                      "line " + std::to_string(lineno) + ": suppress needs a property");
      } else {
        throw Error(ErrorCode::BadConfig,
                    "line " + std::to_string(lineno) + ": unknown keyword '" + keyword + "'");
      }
    }
    return policy;
  }

  static AuditPolicy load(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw Error(ErrorCode::BadConfig, "cannot open policy file " + path);
    std::stringstream buf;
    buf << file.rdbuf();
    return parse(buf.str());
  }

 private:
  std::set<std::string> auditable_;
  std::map<std::string, std::set<std::string>> suppressed_;
};

inline bool is_auditable(std::string_view entity_name, const AuditPolicy& policy) {
  if (is_audit_table(entity_name)) return false;
  return policy.auditable_entities().contains(std::string(entity_name));
}

namespace detail {

template <class IdGen>
std::optional<AuditLogEntry> capture(const EntityChangeEvent& e, EventKind kind,
                                     const AuditPolicy& policy, IdGen& next_id) {
  if (e.kind != kind)
    throw Error(ErrorCode::InvalidArgument,
                std::string("expected a ") + to_string(kind) + " event, got " + to_string(e.kind));
  if (!is_auditable(e.entity_name, policy)) return std::nullopt;

  std::vector<const PropertyDelta*> audited;
  for (const auto& p : e.properties) {
    if (policy.is_suppressed(e.entity_name, p.property_name)) continue;
    if (kind == EventKind::Update && p.old_value == p.new_value) continue;
    audited.push_back(&p);
  }
  if (audited.empty()) return std::nullopt;

  AuditLogEntry entry{next_id(), e.session_id, e.entity_name, e.entity_id, kind,
                      e.timestamp,  e.user_id,  e.url,         {}};
  for (const PropertyDelta* p : audited) {
    AuditDetail d{next_id(), p->property_name, p->old_value, p->new_value};
    if (kind == EventKind::Insert) d.old_value.reset();
    if (kind == EventKind::Delete) d.new_value.reset();
    entry.details.push_back(std::move(d));
  }
  return entry;
}

}  // namespace detail

// `next_id` is any callable returning a fresh Uuid; it is invoked once for
// the entry and once per emitted detail, and not at all when no entry is
// produced.
template <class IdGen>
std::optional<AuditLogEntry> on_post_insert(const EntityChangeEvent& event,
                                            const AuditPolicy& policy, IdGen&& next_id) {
  return detail::capture(event, EventKind::Insert, policy, next_id);
}

// Only properties whose value actually changed produce a detail. A null on
// exactly one side counts as a change.
template <class IdGen>
std::optional<AuditLogEntry> on_post_update(const EntityChangeEvent& event,
                                            const AuditPolicy& policy, IdGen&& next_id) {
  return detail::capture(event, EventKind::Update, policy, next_id);
}

template <class IdGen>
std::optional<AuditLogEntry> on_post_delete(const EntityChangeEvent& event,
                                            const AuditPolicy& policy, IdGen&& next_id) {
  return detail::capture(event, EventKind::Delete, policy, next_id);
}

// Dispatches on event.kind.
template <class IdGen>
std::optional<AuditLogEntry> on_post_event(const EntityChangeEvent& event,
                                           const AuditPolicy& policy, IdGen&& next_id) {
  return detail::capture(event, event.kind, policy, next_id);
}

}  // namespace blockaudit
