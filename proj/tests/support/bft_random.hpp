#pragma once

// Randomized consensus runs on the simulated network with f Byzantine
// replicas.

#include <random>
#include <string>
#include <vector>

#include "blockaudit/net_sim.hpp"
#include "support/generators.hpp"

namespace testsupport {

using namespace blockaudit;

struct RandomRunResult {
  bool quiescent = false;
  bool identical = false;          // every honest ledger is the same chain
  bool prefix_consistent = false;  // honest ledgers never disagree at a common height
  bool live = false;               // every transaction submitted at an honest node committed
  std::uint64_t height = 0;
  std::string detail;
};

// Faults go to f distinct replicas; the primary is among them only when
// `faulty_primary` is set.
inline RandomRunResult random_bft_run(std::uint32_t n, std::uint64_t seed, bool faulty_primary = false) {
  Gen g(seed);
  SimConfig cfg;
  cfg.n_nodes = n;
  cfg.rng_seed = seed;
  cfg.jitter_fraction = 0.5;
  cfg.link_latency_ms = 1.0;
  cfg.bandwidth = 125'000.0;
  cfg.block_max_bytes = 2'000;
  cfg.block_timeout_ms = 3.0;
  SimNetwork net(cfg);

  std::vector<NodeId> candidates;
  for (NodeId i = faulty_primary ? 0 : 1; i < n; ++i) candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), g.rng);
  std::vector<NodeId> faulty(candidates.begin(), candidates.begin() + max_faults(n));
  if (faulty_primary && max_faults(n) > 0 && std::find(faulty.begin(), faulty.end(), 0u) == faulty.end())
    faulty.front() = 0;
  for (NodeId id : faulty) {
    FaultBehavior b;
    switch (g.below(id == 0 ? 4 : 3)) {
      case 0: b = Equivocate{}; break;
      case 1: b = DropOutbound{1.0}; break;
      case 2: b = DropOutbound{0.2 + 0.6 * std::uniform_real_distribution<double>(0, 1)(g.rng)}; break;
      default: b = InvalidBlock{}; break;
    }
    net.inject_fault({id, b});
  }

  std::vector<Uuid> honest_submitted;
  const std::size_t txns = 20 + g.below(20);
  for (std::size_t i = 0; i < txns; ++i) {
    NodeId at = static_cast<NodeId>(g.below(n));
    Transaction t(g.transaction(2));
    if (net.is_honest(at)) honest_submitted.push_back(t->id);
    net.submit_transaction(at, t, ms_to_sim(static_cast<double>(g.below(40))));
  }
  auto report = net.run_until_quiescent(ms_to_sim(600'000.0));

  RandomRunResult r;
  r.quiescent = report.quiescent;
  r.identical = r.prefix_consistent = true;
  std::optional<NodeId> ref;
  for (NodeId i = 0; i < n; ++i) {
    if (!net.is_honest(i)) continue;
    if (!ref) {
      ref = i;
      r.height = net.replica(i).ledger().head_height();
      continue;
    }
    const auto& a = net.replica(*ref).ledger();
    const auto& b = net.replica(i).ledger();
    if (diff_against_peer(a, b)) {
      r.prefix_consistent = r.identical = false;
      r.detail = "honest nodes " + std::to_string(*ref) + " and " + std::to_string(i) + " diverge";
    } else if (a.size() != b.size()) {
      r.identical = false;
      if (r.detail.empty())
        r.detail = "honest nodes at heights " + std::to_string(a.head_height()) + " and " +
                   std::to_string(b.head_height());
    }
  }
  r.live = true;
  for (const auto& id : honest_submitted)
    for (NodeId i = 0; i < n; ++i)
      if (net.is_honest(i) && !net.has_committed(i, id)) r.live = false;
  if (!r.live && r.detail.empty()) r.detail = "a transaction submitted at an honest node did not commit";
  return r;
}

}  // namespace testsupport
