#include <doctest.h>

#include <map>
#include <stdexcept>
#include <set>

#include "tlfuzz/netsim.hpp"
#include "tlfuzz/raftlite.hpp"

using namespace tlfuzz;

namespace {

struct Response {
  bool ok = false;
  std::int64_t value = 0;
  std::string reason;
};

// Simulator + replicas + direct client injection, no workload driver.
struct RaftSim {
  SimConfig cfg;
  std::unique_ptr<Simulator> sim;
  std::map<std::uint64_t, Response> responses;
  std::uint64_t next_req = 0;
  std::vector<Event> all_events;

  explicit RaftSim(int nodes, std::uint64_t seed, RaftBugs bugs = {}) {
    cfg.node_count = nodes;
    cfg.rng_seed = seed;
    RaftTuning tuning;
    tuning.bugs = bugs;
    sim = std::make_unique<Simulator>(cfg, [nodes, tuning](NodeId id) {
      return std::make_unique<RaftNode>(id, nodes, tuning);
    });
    sim->set_response_handler([this](std::uint64_t id, bool ok, std::int64_t value,
                                     const std::string& reason) {
      responses[id] = Response{ok, value, reason};
    });
  }

  RaftNode& node(NodeId n) { return static_cast<RaftNode&>(sim->sut(n)); }

  void run(std::int64_t ns) {
    auto events = sim->run_window(ns);
    all_events.insert(all_events.end(), events.begin(), events.end());
  }

  NodeId leader() {
    for (NodeId n = 0; n < cfg.node_count; ++n) {
      if (sim->status(n) == NodeStatus::Running && node(n).role() == Role::Leader) {
        return n;
      }
    }
    return -1;
  }

  NodeId await_leader(int max_windows = 20) {
    for (int i = 0; i < max_windows; ++i) {
      NodeId l = leader();
      if (l >= 0) return l;
      run(500'000'000);
    }
    return leader();
  }

  std::uint64_t submit(NodeId target, const ClientOp& op) {
    std::uint64_t id = ++next_req;
    sim->submit_client_request(target, id, op.label(), op.encode());
    return id;
  }

  ClientOp write_op(std::int32_t key, std::int64_t value) {
    ClientOp op;
    op.kind = ClientOp::Kind::Write;
    op.key = key;
    op.value = value;
    return op;
  }
  ClientOp read_op(std::int32_t key) {
    ClientOp op;
    op.kind = ClientOp::Kind::Read;
    op.key = key;
    return op;
  }
  ClientOp remove_op(NodeId n) {
    ClientOp op;
    op.kind = ClientOp::Kind::RemoveNode;
    op.node = n;
    return op;
  }

  void enact(FaultAction::Tag tag, NodeId target) {
    EnactRecord rec;
    rec.tag = tag;
    rec.target = target;
    sim->enact_concrete(rec);
  }
  void partition(std::vector<NodeId> a, std::vector<NodeId> b) {
    EnactRecord rec;
    rec.tag = FaultAction::Tag::PartitionRandomHalves;
    rec.half_a = std::move(a);
    rec.half_b = std::move(b);
    sim->enact_concrete(rec);
  }
  void heal() {
    EnactRecord rec;
    rec.tag = FaultAction::Tag::HealNetwork;
    sim->enact_concrete(rec);
  }

  int count_code_events(NodeId n, std::uint32_t code_id) const {
    int count = 0;
    for (const Event& ev : all_events) {
      if (ev.node == n && ev.kind.tag == EventKind::Tag::CodeEvent &&
          ev.kind.code_id == code_id) {
        ++count;
      }
    }
    return count;
  }
};

}  // namespace

TEST_CASE("instrumentation registry rejects duplicates and exports json") {
  InstrumentationRegistry reg = InstrumentationRegistry::standard();
  CHECK(reg.label(code::kBecomeLeader) == "BecomeLeader");
  CHECK_THROWS_AS(reg.add(code::kBecomeLeader, "Again"), std::invalid_argument);
  CHECK_THROWS_AS(reg.add(99, "BecomeLeader"), std::invalid_argument);
  CHECK(reg.to_json().find("\"5\":\"TakeSnapshot\"") != std::string::npos);
  CHECK(reg.label_for(EventKind::client_request("write")) == "Req(write)");
}

TEST_CASE("a healthy cluster elects exactly one leader per term") {
  RaftSim s(5, 42);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  s.run(2'000'000'000);
  std::map<std::int64_t, std::set<NodeId>> leaders_by_term;
  for (const LeadershipRecord& rec : s.sim->drain_leadership()) {
    leaders_by_term[rec.term].insert(rec.node);
  }
  for (const auto& [term, nodes] : leaders_by_term) CHECK(nodes.size() == 1);
  int live_leaders = 0;
  for (NodeId n = 0; n < 5; ++n) {
    if (s.node(n).role() == Role::Leader) ++live_leaders;
  }
  CHECK(live_leaders == 1);
}

TEST_CASE("a partitioned minority candidate never wins") {
  RaftSim s(5, 7);
  REQUIRE(s.await_leader() >= 0);
  s.partition({0}, {1, 2, 3, 4});
  for (int w = 0; w < 8; ++w) {
    s.run(500'000'000);
    CHECK(s.node(0).role() != Role::Leader);
  }
  // Yet it keeps trying: its term has moved past the cluster's stable term.
  CHECK(s.node(0).failed_elections() > 0);
}

TEST_CASE("write then read returns the written value") {
  RaftSim s(5, 11);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  auto w = s.submit(l, s.write_op(3, 99));
  s.run(500'000'000);
  REQUIRE(s.responses.count(w));
  CHECK(s.responses[w].ok);
  auto r = s.submit(l, s.read_op(3));
  s.run(500'000'000);
  REQUIRE(s.responses.count(r));
  CHECK(s.responses[r].ok);
  CHECK(s.responses[r].value == 99);
}

TEST_CASE("requests to non-leaders get no reply") {
  RaftSim s(5, 13);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  NodeId follower = (l + 1) % 5;
  auto r = s.submit(follower, s.read_op(0));
  s.run(1'000'000'000);
  CHECK_FALSE(s.responses.count(r));  // the client-side timeout covers this
}

TEST_CASE("membership change appends, commits and shrinks the config") {
  RaftSim s(5, 17);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  NodeId victim = (l + 2) % 5;
  auto m = s.submit(l, s.remove_op(victim));
  s.run(500'000'000);
  REQUIRE(s.responses.count(m));
  CHECK(s.responses[m].ok);
  CHECK(s.node(l).config().size() == 4);
  CHECK(s.node(l).uncommitted_config_index() == 0);
  CHECK(s.node(l).config_index() > 1);
  // Self-removal and double changes are refused.
  auto self = s.submit(l, s.remove_op(l));
  s.run(300'000'000);
  REQUIRE(s.responses.count(self));
  CHECK_FALSE(s.responses[self].ok);
}

TEST_CASE("snapshot compaction keeps the committed config entry reachable") {
  RaftSim s(3, 23);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  for (int i = 0; i < 5; ++i) {
    s.submit(l, s.write_op(1, i + 1));
    s.run(300'000'000);
  }
  RaftNode& leader = s.node(l);
  CHECK(leader.snapshot_index() > 0);
  CHECK(leader.log_get(leader.config_index()) != nullptr);
  CHECK(s.count_code_events(l, code::kTakeSnapshot) > 0);
  // Compaction trimmed the prefix: the first write is gone from the log.
  CHECK(leader.log_get(2) == nullptr);
}

TEST_CASE("take_snapshot enforces its precondition") {
  RaftSim s(3, 29);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  // A fresh cluster has too little log to compact.
  NodeCtx ctx(*s.sim, l);
  CHECK_THROWS_AS(s.node(l).take_snapshot(ctx), std::logic_error);
  for (int i = 0; i < 5; ++i) {
    s.submit(l, s.write_op(0, i + 1));
    s.run(300'000'000);
  }
  RaftNode& leader = s.node(l);
  std::int64_t snap = leader.snapshot_index();
  CHECK(snap > 0);
  CHECK(leader.last_index() - snap < 4);
}

TEST_CASE("log matching holds across partition churn") {
  RaftSim s(5, 31);
  REQUIRE(s.await_leader() >= 0);
  for (int round = 0; round < 3; ++round) {
    s.partition({static_cast<NodeId>(round % 5), static_cast<NodeId>((round + 1) % 5)},
                {static_cast<NodeId>((round + 2) % 5), static_cast<NodeId>((round + 3) % 5),
                 static_cast<NodeId>((round + 4) % 5)});
    NodeId l = s.leader();
    for (int i = 0; i < 3; ++i) {
      if (l >= 0) s.submit(l, s.write_op(i, round * 10 + i));
      s.run(400'000'000);
      l = s.leader();
    }
    s.heal();
    s.run(1'500'000'000);
  }
  // Settled: every pair of replicas agrees wherever (index, term) matches.
  for (NodeId a = 0; a < 5; ++a) {
    for (NodeId b = a + 1; b < 5; ++b) {
      auto ea = s.node(a).log_entries();
      auto eb = s.node(b).log_entries();
      std::map<std::int64_t, const LogEntry*> bmap;
      for (auto& [idx, e] : eb) bmap[idx] = &e;
      for (auto& [idx, e] : ea) {
        auto it = bmap.find(idx);
        if (it == bmap.end() || it->second->term != e.term) continue;
        CHECK(it->second->kind == e.kind);
        CHECK(it->second->key == e.key);
        CHECK(it->second->value == e.value);
      }
    }
  }
}

TEST_CASE("stale-term append traffic does not disturb a settled cluster") {
  RaftSim s(5, 37);
  NodeId l1 = s.await_leader();
  REQUIRE(l1 >= 0);
  // Depose the leader by isolating it while the rest move on.
  s.partition({l1}, {static_cast<NodeId>((l1 + 1) % 5), static_cast<NodeId>((l1 + 2) % 5),
                     static_cast<NodeId>((l1 + 3) % 5), static_cast<NodeId>((l1 + 4) % 5)});
  s.run(2'000'000'000);
  NodeId l2 = s.leader();
  // The isolated node may still consider itself a stale leader.
  s.heal();
  s.run(1'500'000'000);
  REQUIRE(l2 >= 0);
  std::int64_t settled_term = s.node(l2).term();
  CHECK(s.node(l1).term() >= settled_term);
  int live_leaders = 0;
  for (NodeId n = 0; n < 5; ++n) {
    if (s.node(n).role() == Role::Leader) ++live_leaders;
  }
  CHECK(live_leaders == 1);
}

TEST_CASE("membership rollback defect: the recorded scenario is fatal") {
  RaftBugs bugs;
  bugs.membership_rollback = true;
  RaftSim s(5, 1001, bugs);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  NodeId f = (l + 1) % 5;
  std::vector<NodeId> minority{l, f}, majority;
  for (NodeId n = 0; n < 5; ++n) {
    if (n != l && n != f) majority.push_back(n);
  }

  // A membership change reaches one follower only, because of the partition.
  s.partition(minority, majority);
  s.submit(l, s.remove_op(majority[0]));
  s.run(200'000'000);
  REQUIRE(s.node(f).uncommitted_config_index() > 0);

  // Stray writes pile up until the follower's snapshot threshold trips; the
  // defective compaction swallows the in-use but uncommitted config entry.
  for (int i = 0; i < 4; ++i) {
    s.submit(l, s.write_op(0, i + 1));
    s.run(200'000'000);
  }
  REQUIRE(s.node(f).snapshot_index() >= s.node(f).uncommitted_config_index());
  REQUIRE(s.node(f).log_get(s.node(f).config_index()) == nullptr);
  CHECK(s.count_code_events(f, code::kTakeSnapshot) > 0);

  // The old leader dies, the rest recover and elect a new leader.
  s.enact(FaultAction::Tag::PauseNode, f);
  s.enact(FaultAction::Tag::CrashNode, l);
  s.heal();
  s.run(3'000'000'000);
  NodeId m = s.leader();
  REQUIRE(m >= 0);
  REQUIRE(m != l);
  REQUIRE(m != f);

  // Synchronisation forces the follower to drop its conflicting suffix; the
  // rollback then reaches for a configuration entry that no longer exists.
  s.enact(FaultAction::Tag::ResumeNode, f);
  s.run(1'000'000'000);

  auto assertions = s.sim->drain_assertions();
  REQUIRE(assertions.size() == 1);
  CHECK(assertions[0].node == f);
  bool fatal_logged = false;
  for (const LogLine& line : s.sim->drain_logs()) {
    if (line.node == f && line.text.find("fatal") != std::string::npos) {
      fatal_logged = true;
    }
  }
  CHECK(fatal_logged);
  CHECK(s.count_code_events(f, code::kDeleteConflictingEntries) > 0);
  CHECK(s.count_code_events(f, code::kMembershipRollback) > 0);
  CHECK(s.sim->status(f) == NodeStatus::Crashed);
}

TEST_CASE("fixed mode survives the same scenario with a clean rollback") {
  RaftSim s(5, 1001);  // same seed, defect disabled
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  NodeId f = (l + 1) % 5;
  std::vector<NodeId> minority{l, f}, majority;
  for (NodeId n = 0; n < 5; ++n) {
    if (n != l && n != f) majority.push_back(n);
  }
  s.partition(minority, majority);
  s.submit(l, s.remove_op(majority[0]));
  s.run(200'000'000);
  for (int i = 0; i < 4; ++i) {
    s.submit(l, s.write_op(0, i + 1));
    s.run(200'000'000);
  }
  // Correct compaction never covers uncommitted entries.
  CHECK(s.node(f).snapshot_index() < s.node(f).uncommitted_config_index());
  s.enact(FaultAction::Tag::PauseNode, f);
  s.enact(FaultAction::Tag::CrashNode, l);
  s.heal();
  s.run(3'000'000'000);
  NodeId m = s.leader();
  REQUIRE(m >= 0);
  // A fresh write forces the conflict when replication reaches the follower.
  s.submit(m, s.write_op(7, 70));
  s.run(400'000'000);
  s.enact(FaultAction::Tag::ResumeNode, f);
  s.run(1'000'000'000);
  CHECK(s.sim->drain_assertions().empty());
  CHECK(s.sim->status(f) == NodeStatus::Running);
  // The follower rolled back to the full five-node configuration.
  CHECK(s.node(f).config().size() == 5);
  CHECK(s.node(f).uncommitted_config_index() == 0);
}

TEST_CASE("stale-read defect: a deposed leader serves old values") {
  RaftBugs bugs;
  bugs.stale_read = true;
  RaftSim s(5, 2002, bugs);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  auto w1 = s.submit(l, s.write_op(1, 1));
  s.run(400'000'000);
  REQUIRE(s.responses.at(w1).ok);

  NodeId f = (l + 1) % 5;
  std::vector<NodeId> minority{l, f}, majority;
  for (NodeId n = 0; n < 5; ++n) {
    if (n != l && n != f) majority.push_back(n);
  }
  s.partition(minority, majority);
  s.run(2'000'000'000);
  NodeId m = s.leader() == l ? -1 : s.leader();
  for (NodeId n : majority) {
    if (s.node(n).role() == Role::Leader) m = n;
  }
  REQUIRE(m >= 0);
  auto w2 = s.submit(m, s.write_op(1, 2));
  s.run(400'000'000);
  REQUIRE(s.responses.at(w2).ok);

  // The deposed leader still answers instantly from its stale state.
  REQUIRE(s.node(l).role() == Role::Leader);
  auto r = s.submit(l, s.read_op(1));
  s.run(200'000'000);
  REQUIRE(s.responses.count(r));
  CHECK(s.responses[r].ok);
  CHECK(s.responses[r].value == 1);  // older than the acknowledged write 2
}

TEST_CASE("fixed mode: a deposed leader cannot serve reads") {
  RaftSim s(5, 2002);
  NodeId l = s.await_leader();
  REQUIRE(l >= 0);
  auto w1 = s.submit(l, s.write_op(1, 1));
  s.run(400'000'000);
  REQUIRE(s.responses.at(w1).ok);
  NodeId f = (l + 1) % 5;
  std::vector<NodeId> minority{l, f}, majority;
  for (NodeId n = 0; n < 5; ++n) {
    if (n != l && n != f) majority.push_back(n);
  }
  s.partition(minority, majority);
  s.run(2'000'000'000);
  REQUIRE(s.node(l).role() == Role::Leader);  // deposed but unaware
  auto r = s.submit(l, s.read_op(1));
  s.run(1'500'000'000);
  CHECK_FALSE(s.responses.count(r));  // no quorum round completes
}

TEST_CASE("even-cluster quorum defect arms only after election churn") {
  RaftBugs bugs;
  bugs.even_quorum = true;
  RaftSim healthy(4, 3003, bugs);
  NodeId l = healthy.await_leader();
  REQUIRE(l >= 0);  // a calm even cluster still elects normally
  std::map<std::int64_t, std::set<NodeId>> by_term;
  for (const LeadershipRecord& rec : healthy.sim->drain_leadership()) {
    by_term[rec.term].insert(rec.node);
  }
  for (const auto& [term, nodes] : by_term) CHECK(nodes.size() == 1);

  // Quorum-less churn arms the defect; an isolated pair can then crown a
  // leader with only half the cluster.
  RaftSim s(4, 3003, bugs);
  REQUIRE(s.await_leader() >= 0);
  s.partition({0, 1}, {2, 3});
  s.run(4'000'000'000);
  int leaders = 0;
  for (NodeId n = 0; n < 4; ++n) {
    if (s.node(n).role() == Role::Leader) ++leaders;
  }
  CHECK(leaders >= 2);  // both halves elected one: split brain
}
