#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "support/generators.hpp"

using namespace blockaudit;
using testsupport::Gen;

namespace {

struct CountingIds {
  UuidSource src{42};
  std::vector<Uuid> issued;
  Uuid operator()() {
    issued.push_back(src.next());
    return issued.back();
  }
};

EntityChangeEvent permit_update() {
  EntityChangeEvent e;
  e.entity_name = "PermitInspection";
  e.entity_id = 161031;
  e.kind = EventKind::Update;
  e.user_id = 666;
  e.url = "/SAGE/Building/Inspection/InspectionReport.aspx";
  e.timestamp = WireDate{1532366360155, -240};
  e.properties = {{"DBVersion", "9", "10"},
                  {"RequestComments", "after 2:00 pm", "after 1:00 pm"},
                  {"InspectorName", "Ann", "Ann"},
                  {"LastUpdateDate", "7/23/2018 1:18:07 PM", "7/23/2018 1:19:20 PM"}};
  return e;
}

}  // namespace

TEST_CASE("update records only changed properties, in property order") {
  AuditPolicy policy;
  policy.mark_auditable("PermitInspection");
  CountingIds ids;
  auto entry = on_post_update(permit_update(), policy, ids);
  REQUIRE(entry);
  REQUIRE(entry->details.size() == 3);
  CHECK(entry->details[0].property_name == "DBVersion");
  CHECK(entry->details[0].old_value == "9");
  CHECK(entry->details[0].new_value == "10");
  CHECK(entry->details[1].property_name == "RequestComments");
  CHECK(entry->details[2].property_name == "LastUpdateDate");
  CHECK(entry->event_type == EventKind::Update);
  CHECK(entry->entity_id == 161031);
  CHECK(entry->user_id == 666);
  CHECK(entry->created_date == WireDate{1532366360155, -240});
  // Entry id first, then one id per detail.
  REQUIRE(ids.issued.size() == 4);
  CHECK(entry->audit_id == ids.issued[0]);
  CHECK(entry->details[2].detail_id == ids.issued[3]);
}

TEST_CASE("suppressed properties never appear") {
  AuditPolicy policy;
  policy.mark_auditable("PermitInspection").suppress("PermitInspection", "DBVersion");
  CountingIds ids;
  auto entry = on_post_update(permit_update(), policy, ids);
  REQUIRE(entry);
  for (const auto& d : entry->details) CHECK(d.property_name != "DBVersion");
  CHECK(entry->details.size() == 2);
}

TEST_CASE("no entry when nothing changed or everything is suppressed") {
  AuditPolicy policy;
  policy.mark_auditable("PermitInspection");
  auto e = permit_update();
  for (auto& p : e.properties) p.new_value = p.old_value;
  CountingIds ids;
  CHECK_FALSE(on_post_update(e, policy, ids));
  CHECK(ids.issued.empty());

  auto insert = permit_update();
  insert.kind = EventKind::Insert;
  for (auto& p : insert.properties) policy.suppress("PermitInspection", p.property_name);
  CHECK_FALSE(on_post_insert(insert, policy, ids));

  insert.properties.clear();
  AuditPolicy open;
  open.mark_auditable("PermitInspection");
  CHECK_FALSE(on_post_insert(insert, open, ids));
}

TEST_CASE("audit tables are never audited, even if marked") {
  AuditPolicy policy;
  policy.mark_auditable("AuditLog").mark_auditable("AuditLogDetail");
  CountingIds ids;
  for (const char* table : {"AuditLog", "AuditLogDetail"}) {
    auto e = permit_update();
    e.entity_name = table;
    CHECK_FALSE(on_post_update(e, policy, ids));
    e.kind = EventKind::Insert;
    CHECK_FALSE(on_post_insert(e, policy, ids));
    e.kind = EventKind::Delete;
    CHECK_FALSE(on_post_delete(e, policy, ids));
  }
  CHECK(ids.issued.empty());
}

TEST_CASE("entities without the auditable mark are ignored") {
  AuditPolicy policy;
  CountingIds ids;
  CHECK_FALSE(on_post_update(permit_update(), policy, ids));
}

TEST_CASE("insert and delete record every property; null vs empty string differ") {
  AuditPolicy policy;
  policy.mark_auditable("PermitInspection");
  CountingIds ids;
  auto e = permit_update();
  e.kind = EventKind::Insert;
  auto ins = on_post_insert(e, policy, ids);
  REQUIRE(ins);
  CHECK(ins->details.size() == 4);
  for (const auto& d : ins->details) CHECK_FALSE(d.old_value);
  CHECK(ins->details[2].new_value == "Ann");

  e.kind = EventKind::Delete;
  auto del = on_post_delete(e, policy, ids);
  REQUIRE(del);
  CHECK(del->details.size() == 4);
  for (const auto& d : del->details) CHECK_FALSE(d.new_value);
  CHECK(del->details[0].old_value == "9");

  auto u = permit_update();
  u.properties = {{"Notes", std::nullopt, ""}};
  auto upd = on_post_update(u, policy, ids);
  REQUIRE(upd);
  CHECK(upd->details.front().new_value == "");
}

TEST_CASE("hook kind must match the event") {
  AuditPolicy policy;
  policy.mark_auditable("PermitInspection");
  CountingIds ids;
  auto e = permit_update();
  CHECK_THROWS_AS(on_post_insert(e, policy, ids), Error);
  e.kind = EventKind::Delete;
  CHECK(on_post_event(e, policy, ids)->event_type == EventKind::Delete);
}

TEST_CASE("capture agrees with the reference model on random events") {
  Gen g(GENERATE(1u, 2u, 3u));
  for (int i = 0; i < 1000; ++i) {
    auto policy = g.policy();
    auto event = g.event();
    CountingIds ids;
    auto got = on_post_event(event, policy, ids);
    auto want = testsupport::oracle_capture(event, policy);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) {
      CHECK(ids.issued.empty());
      continue;
    }
    std::vector<testsupport::ExpectedDetail> seen;
    std::set<Uuid> distinct{got->audit_id};
    for (const auto& d : got->details) {
      seen.push_back({d.property_name, d.old_value, d.new_value});
      distinct.insert(d.detail_id);
    }
    REQUIRE(seen == *want);
    CHECK(distinct.size() == got->details.size() + 1);
    CHECK(got->entity_name == event.entity_name);
    CHECK(got->session_id == event.session_id);
    CHECK(got->event_type == event.kind);
  }
}

TEST_CASE("policy config parsing") {
  auto p = AuditPolicy::parse(
      "# permits\n"
      "auditable PermitInspection\n"
      "suppress PermitInspection Notes  LastUpdateDate   # noisy\n"
      "\n"
      "auditable Payment\n");
  CHECK(is_auditable("PermitInspection", p));
  CHECK(is_auditable("Payment", p));
  CHECK_FALSE(is_auditable("Invoice", p));
  CHECK(p.is_suppressed("PermitInspection", "Notes"));
  CHECK(p.is_suppressed("PermitInspection", "LastUpdateDate"));
  CHECK_FALSE(p.is_suppressed("Payment", "Notes"));

  auto code_of = [](const char* text) {
    try {
      AuditPolicy::parse(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of("suppress Payment Notes\n") == ErrorCode::BadConfig);
  CHECK(code_of("auditable\n") == ErrorCode::BadConfig);
  CHECK(code_of("auditable A B\n") == ErrorCode::BadConfig);
  CHECK(code_of("audit A\n") == ErrorCode::BadConfig);
  CHECK(code_of("auditable A\nsuppress A\n") == ErrorCode::BadConfig);

  auto path = std::filesystem::temp_directory_path() / "blockaudit_policy_test.cfg";
  std::ofstream(path) << "auditable Invoice\n";
  CHECK(is_auditable("Invoice", AuditPolicy::load(path.string())));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(AuditPolicy::load("/nonexistent/policy.cfg"), Error);
}
