#include <catch_amalgamated.hpp>

#include "support/generators.hpp"

using namespace blockaudit;
using testsupport::Gen;

namespace {

// Level-by-level reduction, odd nodes paired with themselves.
Hash256 oracle_merkle(std::vector<Hash256> level) {
  if (level.empty()) return Hash256{};
  while (level.size() > 1) {
    std::vector<Hash256> up;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      const Hash256& r = i + 1 < level.size() ? level[i + 1] : level[i];
      std::string cat(reinterpret_cast<const char*>(level[i].bytes.data()), 32);
      cat.append(reinterpret_cast<const char*>(r.bytes.data()), 32);
      up.push_back(sha256(cat));
    }
    level = std::move(up);
  }
  return level.front();
}

Transaction make_txn(Gen& g) { return Transaction(g.transaction()); }

Transaction edited(const Transaction& t, const std::function<void(AuditTransaction&)>& f) {
  auto copy = t.get();
  f(copy);
  return Transaction(std::move(copy));
}

}  // namespace

TEST_CASE("merkle root matches reference reduction") {
  Gen g(1);
  CHECK(merkle_root({}).is_zero());
  for (std::size_t n = 1; n <= 33; ++n) {
    std::vector<Hash256> leaves;
    for (std::size_t i = 0; i < n; ++i) leaves.push_back(sha256(std::to_string(g.rng())));
    INFO(n);
    CHECK(merkle_root(leaves) == oracle_merkle(leaves));
  }
  auto a = sha256("a"), b = sha256("b");
  CHECK(merkle_root(std::vector{a}) == a);
  CHECK(merkle_root(std::vector{a, b}) != merkle_root(std::vector{b, a}));
}

TEST_CASE("blocks chain onto their predecessor") {
  Gen g(2);
  Ledger ledger;
  CHECK(ledger.head_height() == 0);
  CHECK(verify_chain(ledger).ok);
  CHECK(block_digest(ledger.head()) == block_digest(genesis()));

  auto b1 = build_block({make_txn(g), make_txn(g)}, ledger.head(), 0, 1000);
  CHECK(b1.header.height == 1);
  CHECK(b1.header.prev_hash == block_digest(genesis()));
  CHECK(b1.header.txn_root == oracle_merkle({b1.txns[0].digest(), b1.txns[1].digest()}));
  ledger.append(b1);
  CHECK(ledger.head_height() == 1);
  CHECK(canonical_header(b1.header).find("\"height\":1") != std::string::npos);

  auto code = [&](Block b) {
    try {
      ledger.append(std::move(b));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  auto good = build_block({make_txn(g)}, ledger.head(), 0, 2000);
  auto wrong_height = good;
  wrong_height.header.height = 3;
  CHECK(code(wrong_height) == ErrorCode::WrongHeight);
  auto wrong_prev = good;
  wrong_prev.header.prev_hash = sha256("x");
  CHECK(code(wrong_prev) == ErrorCode::WrongPrevHash);
  auto wrong_root = good;
  wrong_root.header.txn_root = sha256("y");
  CHECK(code(wrong_root) == ErrorCode::WrongTxnRoot);
  auto empty = good;
  empty.txns.clear();
  CHECK(code(empty) == ErrorCode::EmptyBlock);
  auto dup = good;
  dup.txns.push_back(good.txns[0]);
  CHECK(code(dup) == ErrorCode::DuplicateTransaction);
  // Same id, different content.
  auto same_id = good;
  same_id.txns.push_back(edited(good.txns[0], [](auto& t) { t.user_id += 1; }));
  CHECK(code(same_id) == ErrorCode::DuplicateTransaction);
  CHECK(ledger.head_height() == 1);
  append_block(ledger, good);
  CHECK(ledger.head_height() == 2);

  CHECK_THROWS_AS(build_block({}, ledger.head(), 0, 0), Error);
}

TEST_CASE("content edits are caught at the edited height") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ledger = testsupport::random_ledger(seed, 10);
    Gen g(seed + 100);
    auto blocks = ledger.blocks();
    std::uint64_t h = 1 + g.below(10);
    auto& b = blocks[h];
    std::size_t i = g.below(b.txns.size());
    b.txns[i] = edited(b.txns[i], [&](AuditTransaction& t) {
      switch (g.below(4)) {
        case 0: t.url += "!"; break;
        case 1: t.user_id ^= 1; break;
        case 2: t.details.back().new_value = "forged"; break;
        default: t.created_date.epoch_ms -= 1; break;
      }
    });
    auto report = verify_chain(Ledger::from_blocks_unchecked(blocks));
    INFO("seed " << seed << " height " << h);
    REQUIRE_FALSE(report.ok);
    CHECK(*report.first_bad_height == h);
    CHECK(*report.cause == VerifyCause::RootMismatch);
  }
}

TEST_CASE("header edits are caught at or before the successor") {
  auto ledger = testsupport::random_ledger(5, 10);
  for (std::uint64_t h = 1; h < 10; ++h) {
    for (int field = 0; field < 5; ++field) {
      auto blocks = ledger.blocks();
      auto& hd = blocks[h].header;
      VerifyCause expect = VerifyCause::HashMismatch;
      switch (field) {
        case 0: hd.height += 1; expect = VerifyCause::HeightGap; break;
        case 1: hd.prev_hash.bytes[0] ^= 1; break;
        case 2: hd.txn_root.bytes[31] ^= 1; expect = VerifyCause::RootMismatch; break;
        case 3: hd.timestamp += 1; break;
        case 4: hd.proposer += 1; break;
      }
      auto report = verify_chain(Ledger::from_blocks_unchecked(blocks));
      INFO("height " << h << " field " << field);
      REQUIRE_FALSE(report.ok);
      CHECK(*report.first_bad_height <= h + 1);
      if (field <= 2) CHECK(*report.first_bad_height == h);
      CHECK(*report.cause == expect);
    }
  }
}

TEST_CASE("structural damage") {
  auto ledger = testsupport::random_ledger(6, 4);
  auto blocks = ledger.blocks();
  blocks.erase(blocks.begin() + 2);
  auto r = verify_chain(Ledger::from_blocks_unchecked(blocks));
  CHECK(*r.first_bad_height == 2);
  CHECK(*r.cause == VerifyCause::HeightGap);

  blocks = ledger.blocks();
  blocks[3].txns.push_back(blocks[3].txns.front());
  r = verify_chain(Ledger::from_blocks_unchecked(blocks));
  CHECK(*r.first_bad_height == 3);
  CHECK(*r.cause == VerifyCause::TxnInvalid);

  blocks = ledger.blocks();
  blocks[0].header.timestamp = 1;
  r = verify_chain(Ledger::from_blocks_unchecked(blocks));
  CHECK(*r.first_bad_height == 0);

  CHECK_FALSE(verify_chain(Ledger::from_blocks_unchecked({})).ok);

  auto a = VerificationReport::failure(5, VerifyCause::HashMismatch);
  auto b = VerificationReport::failure(3, VerifyCause::RootMismatch);
  CHECK(*a.merge(b).first_bad_height == 3);
  CHECK(*b.merge(a).first_bad_height == 3);
  CHECK(VerificationReport{}.merge(a).first_bad_height == 5u);
  CHECK(a.to_json().dump() == R"({"cause":"HashMismatch","first_bad_height":5,"ok":false})");
}

TEST_CASE("peer diff finds the fork point") {
  auto ledger = testsupport::random_ledger(7, 6);
  CHECK_FALSE(diff_against_peer(ledger, ledger));
  auto shorter = Ledger::from_blocks_unchecked({ledger.blocks().begin(), ledger.blocks().begin() + 4});
  CHECK_FALSE(diff_against_peer(ledger, shorter));

  auto blocks = ledger.blocks();
  blocks[4].txns[0] = edited(blocks[4].txns[0], [](auto& t) { t.url = "/elsewhere"; });
  CHECK(diff_against_peer(ledger, Ledger::from_blocks_unchecked(blocks)) == 4u);

  auto other = testsupport::random_ledger(8, 6);
  CHECK(diff_against_peer(ledger, other) == 1u);

  blocks = ledger.blocks();
  blocks[0].header.timestamp = 9;
  CHECK_THROWS_AS(diff_against_peer(ledger, Ledger::from_blocks_unchecked(blocks)), Error);
}

TEST_CASE("history and replay") {
  UuidSource ids(3);
  auto txn = [&](int kind, std::vector<std::pair<std::string, std::optional<std::string>>> vals,
                 std::int64_t entity = 1, std::string cls = "Permit") {
    AuditTransaction t;
    t.class_name = cls;
    t.entity_id = entity;
    t.event_type = kind;
    t.id = ids.next();
    t.session_id = ids.next();
    for (auto& [k, v] : vals) t.details.push_back({ids.next(), v, std::nullopt, k});
    return Transaction(t);
  };
  Ledger l;
  l.append(build_block({txn(0, {{"A", "1"}, {"B", "x"}}), txn(0, {{"A", "9"}}, 2)}, l.head(), 0, 1));
  l.append(build_block({txn(1, {{"A", "2"}}), txn(1, {{"A", "7"}}, 1, "Other")}, l.head(), 0, 2));
  l.append(build_block({txn(1, {{"B", std::nullopt}})}, l.head(), 0, 3));

  auto hist = query_history(l, "Permit", 1);
  REQUIRE(hist.size() == 3);
  CHECK(hist[0]->event_type == 0);
  auto s = restore_state(l, "Permit", 1);
  CHECK(s.values.at("A") == "2");
  CHECK_FALSE(s.values.at("B"));
  CHECK_FALSE(s.deleted);
  CHECK_FALSE(s.incomplete_history);
  CHECK(s.events_applied == 3);
  CHECK(s.to_canonical_json() ==
        R"({"deleted":false,"events_applied":3,"incomplete_history":false,"values":{"A":"2","B":null}})");

  l.append(build_block({txn(2, {{"A", std::nullopt}})}, l.head(), 0, 4));
  s = restore_state(l, "Permit", 1);
  CHECK(s.deleted);
  CHECK(s.values.at("A") == "2");

  CHECK(restore_state(l, "Permit", 99).events_applied == 0);
  auto tail = std::vector<Transaction>(hist.begin() + 1, hist.end());
  CHECK(replay_history(tail).incomplete_history);

  // Replay is a prefix fold: restoring a prefix equals replaying the prefix.
  for (std::size_t k = 0; k <= hist.size(); ++k) {
    std::vector<Transaction> prefix(hist.begin(), hist.begin() + k);
    CHECK(replay_history(prefix).events_applied == k);
  }
}
