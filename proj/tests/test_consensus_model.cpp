#include <catch_amalgamated.hpp>

#include "support/bft_model.hpp"
#include "support/bft_random.hpp"

using namespace testsupport;

TEST_CASE("all delivery orders: silent replica") {
  auto r = BftModel(Adversary::SilentReplica, 3).run();
  CHECK_FALSE(r.truncated);
  CHECK(r.violations == 0);
  CHECK(r.stuck_terminals == 0);
  CHECK(r.terminal >= 1);
}

TEST_CASE("all delivery orders: equivocating replica") {
  auto r = BftModel(Adversary::EquivocatingReplica, 2).run();
  INFO(r.states << " states");
  CHECK_FALSE(r.truncated);
  CHECK(r.violations == 0);
  CHECK(r.stuck_terminals == 0);
}

TEST_CASE("all delivery orders: primary proposing an invalid block") {
  auto r = BftModel(Adversary::InvalidPrimary, 0).run();
  CHECK_FALSE(r.truncated);
  CHECK(r.violations == 0);
  CHECK(r.invalid_commits == 0);
  // Nobody accepts the block, and with a fixed primary nothing else commits.
  CHECK(r.stuck_terminals == r.terminal);
}

TEST_CASE("a quorum below 2f+1 is refused") {
  CHECK_THROWS_AS(ReplicaState(0, ConsensusConfig{4, 1, 2}), Error);
}

TEST_CASE("random runs: f faulty replicas, honest primary") {
  for (std::uint32_t n : {4u, 7u, 10u}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto r = random_bft_run(n, 1000 * n + seed);
      INFO("n=" << n << " seed=" << seed << " " << r.detail);
      REQUIRE(r.quiescent);
      REQUIRE(r.identical);
      REQUIRE(r.live);
      CHECK(r.height > 0);
    }
  }
}

TEST_CASE("random runs: faulty primary never splits honest replicas") {
  for (std::uint32_t n : {4u, 7u}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto r = random_bft_run(n, 5000 * n + seed, true);
      INFO("n=" << n << " seed=" << seed << " " << r.detail);
      REQUIRE(r.quiescent);
      REQUIRE(r.prefix_consistent);
    }
  }
}
