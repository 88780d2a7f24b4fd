#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tlfuzz/timeline.hpp"
#include "support/causality_oracle.hpp"
#include "support/trace_gen.hpp"

using namespace tlfuzz;
using namespace tlfuzz::testing;

namespace {

Event code_event(NodeId node, std::int64_t mono, std::uint64_t seq,
                 std::uint32_t code = 1) {
  Event ev;
  ev.node = node;
  ev.mono_ts = mono;
  ev.kind = EventKind::code(code);
  ev.seq_in_node = seq;
  return ev;
}

Batch batch_of(NodeId node, std::uint64_t seq_no, std::int64_t flush,
               std::vector<Event> events) {
  Batch b;
  b.node = node;
  b.epoch = 0;
  b.seq_no = seq_no;
  b.flush_mono_ts = flush;
  b.events = std::move(events);
  return b;
}

ClockRef plain_clock(NodeId n, std::int64_t skew) { return ClockRef{n, 0, 0, skew}; }

}  // namespace

TEST_CASE("out-of-order batches are held until their turn") {
  Timeline tl(1, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.ingest(batch_of(0, 0, 10, {code_event(0, 5, 1)}));
  tl.ingest(batch_of(0, 2, 30, {code_event(0, 25, 3)}));
  CHECK(tl.ingested_count(0) == 1);  // batch 2 waits for batch 1
  tl.ingest(batch_of(0, 1, 20, {code_event(0, 15, 2)}));
  CHECK(tl.ingested_count(0) == 3);
}

TEST_CASE("duplicate batch sequence numbers are rejected") {
  Timeline tl(1, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.ingest(batch_of(0, 0, 10, {}));
  CHECK_THROWS_AS(tl.ingest(batch_of(0, 0, 10, {})), std::invalid_argument);
  tl.ingest(batch_of(0, 2, 30, {}));
  CHECK_THROWS_AS(tl.ingest(batch_of(0, 2, 30, {})), std::invalid_argument);
}

TEST_CASE("heartbeat batches advance frontier and horizon") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  tl.ingest(batch_of(0, 0, 1000, {code_event(0, 500, 1)}));
  Ranges before = tl.ready_ranges();
  CHECK(before.ts == 0);  // node 1 has submitted nothing past its boot anchor
  tl.ingest(batch_of(1, 0, 1000, {}));
  Ranges after = tl.ready_ranges();
  CHECK(after.ts == 1000);
  CHECK(after.per_node[0].prefix_end == 1);  // 500 <= 1000 - 100
}

TEST_CASE("ready ranges follow the skew window") {
  // All nodes quiescent at T: prefixes end at T - skew, extensions at T + skew.
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  tl.ingest(batch_of(0, 0, 1000,
                     {code_event(0, 850, 1), code_event(0, 900, 2), code_event(0, 950, 3),
                      code_event(0, 1000, 4)}));
  tl.ingest(batch_of(1, 0, 1000, {code_event(1, 899, 1), code_event(1, 901, 2)}));
  Ranges r = tl.ready_ranges();
  CHECK(r.ts == 1000);
  CHECK(r.per_node[0].prefix_end == 2);  // 850, 900 within 1000 - 100
  CHECK(r.per_node[0].ext_end == 4);
  CHECK(r.per_node[1].prefix_end == 1);
  CHECK(r.per_node[1].ext_end == 2);
}

TEST_CASE("three-node staircase ranges match the recorded fixture") {
  std::ifstream in(std::string(TLFUZZ_TEST_DATA_DIR) + "/staircase_ranges.json");
  REQUIRE(in.good());
  nlohmann::json fixture = nlohmann::json::parse(in);
  std::int64_t skew = fixture["skew_bound_ns"].get<std::int64_t>();
  Timeline tl(static_cast<int>(fixture["nodes"].size()), skew);
  NodeId n = 0;
  for (const auto& node : fixture["nodes"]) {
    tl.announce_clock(n, 0, plain_clock(n, skew));
    std::vector<Event> events;
    std::uint64_t seq = 0;
    for (const auto& mono : node["events"]) {
      events.push_back(code_event(n, mono.get<std::int64_t>(), ++seq));
    }
    tl.ingest(batch_of(n, 0, node["flush_mono_ts"].get<std::int64_t>(), std::move(events)));
    ++n;
  }
  Ranges r = tl.ready_ranges();
  CHECK(r.ts == fixture["expected"]["ts"].get<std::int64_t>());
  std::size_t i = 0;
  for (const auto& exp : fixture["expected"]["per_node"]) {
    CHECK(r.per_node[i].begin == exp["begin"].get<std::int64_t>());
    CHECK(r.per_node[i].prefix_end == exp["prefix_end"].get<std::int64_t>());
    CHECK(r.per_node[i].ext_end == exp["ext_end"].get<std::int64_t>());
    ++i;
  }
}

TEST_CASE("a single-node chain emits program edges only") {
  Timeline tl(1, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.ingest(batch_of(0, 0, 1000,
                     {code_event(0, 10, 1), code_event(0, 20, 2), code_event(0, 30, 3)}));
  TimelineGraph g = tl.build_prefix_closed();
  CHECK(g.cut(0) == 3);
  CHECK(g.cross_edge_count() == 0);
  CHECK(g.pending().empty());
}

TEST_CASE("a matched send and receive produce one cross edge") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  PacketId pkt = make_packet_id(0, 1, 0);
  Event send = code_event(0, 100, 1);
  send.kind = EventKind::packet_send();
  send.packet = pkt;
  Event recv = code_event(1, 140, 1);
  recv.kind = EventKind::packet_recv();
  recv.packet = pkt;
  tl.ingest(batch_of(0, 0, 1000, {send}));
  tl.ingest(batch_of(1, 0, 1000, {recv}));
  TimelineGraph g = tl.build_prefix_closed();
  REQUIRE(g.cross_edge_count() == 1);
  CHECK(g.cross_edge(0).send == VertexRef{0, 0});
  CHECK(g.cross_edge(0).recv == VertexRef{1, 0});
  CHECK(g.pending().empty());
  auto anc = graph_ancestors(g);
  CHECK(anc.at({1, 0}).count({0, 0}) == 1);
}

TEST_CASE("a send without its receive points at infinity until it arrives") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  PacketId pkt = make_packet_id(0, 1, 0);
  Event send = code_event(0, 100, 1);
  send.kind = EventKind::packet_send();
  send.packet = pkt;
  tl.ingest(batch_of(0, 0, 1000, {send}));
  tl.ingest(batch_of(1, 0, 1000, {}));
  TimelineGraph g1 = tl.build_prefix_closed();
  REQUIRE(g1.pending().size() == 1);
  CHECK(g1.pending()[0].send == VertexRef{0, 0});
  CHECK(g1.cross_edge_count() == 0);

  Event recv = code_event(1, 1200, 1);
  recv.kind = EventKind::packet_recv();
  recv.packet = pkt;
  tl.ingest(batch_of(0, 1, 2000, {}));
  tl.ingest(batch_of(1, 1, 2000, {recv}));
  TimelineGraph g2 = tl.build_prefix_closed();
  CHECK(g2.pending().empty());  // re-pointed to the concrete receive
  REQUIRE(g2.cross_edge_count() == 1);
  CHECK(g2.cross_edge(0).recv == VertexRef{1, 0});
}

TEST_CASE("a receive with no send anywhere is a corruption diagnostic") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  Event recv = code_event(1, 100, 1);
  recv.kind = EventKind::packet_recv();
  recv.packet = PacketId{0xDEAD};
  tl.ingest(batch_of(0, 0, 1000, {}));
  tl.ingest(batch_of(1, 0, 1000, {recv}));
  CHECK_THROWS_AS(tl.build_prefix_closed(), std::runtime_error);
}

TEST_CASE("dead nodes stop holding the frontier back") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  tl.ingest(batch_of(0, 0, 1000, {code_event(0, 500, 1)}));
  // Node 1 went down without submitting anything.
  Ranges stalled = tl.ready_ranges();
  CHECK(stalled.per_node[0].prefix_end == 0);
  tl.set_dead(1, true);
  Ranges moving = tl.ready_ranges();
  CHECK(moving.per_node[0].prefix_end == 1);
}

TEST_CASE("successive builds only extend the graph") {
  GeneratedTrace gen = generate_trace(GenOptions{}, 4242);
  Timeline tl(5, gen.skew_bound_ns);
  for (const ClockRef& c : gen.clocks) tl.announce_clock(c.node, 0, c);
  std::vector<std::int64_t> prev_cut(5, 0);
  std::size_t prev_edges = 0;
  for (const Batch& b : gen.batches) {
    tl.ingest(b);
    TimelineGraph g = tl.build_prefix_closed();
    for (int n = 0; n < 5; ++n) {
      CHECK(g.cut(n) >= prev_cut[static_cast<std::size_t>(n)]);
      prev_cut[static_cast<std::size_t>(n)] = g.cut(n);
    }
    CHECK(g.cross_edge_count() >= prev_edges);
    prev_edges = g.cross_edge_count();
  }
}

TEST_CASE("emitted cuts are prefix-closed against the brute-force oracle") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    GenOptions opt;
    opt.events = 120;
    GeneratedTrace gen = generate_trace(opt, seed);
    TraceOracle oracle(gen.trace);
    Timeline tl(opt.nodes, gen.skew_bound_ns);
    for (const ClockRef& c : gen.clocks) tl.announce_clock(c.node, 0, c);
    for (const Batch& b : gen.batches) tl.ingest(b);
    TimelineGraph g = tl.build_prefix_closed();
    std::int64_t emitted = 0;
    for (int n = 0; n < opt.nodes; ++n) emitted += g.cut(n);
    CHECK(emitted == static_cast<std::int64_t>(gen.trace.size()));
    auto in_cut = [&](VertexRef v) { return v.pos < g.cut(v.node); };
    for (std::size_t i = 0; i < oracle.events.size(); ++i) {
      if (!in_cut(oracle.vertex[i])) continue;
      for (int a : oracle.ancestors(static_cast<int>(i))) {
        CHECK(in_cut(oracle.vertex[static_cast<std::size_t>(a)]));
      }
    }
  }
}

TEST_CASE("cross edges respect the wall-clock sanity bound") {
  GeneratedTrace gen = generate_trace(GenOptions{}, 777);
  Timeline tl(5, gen.skew_bound_ns);
  for (const ClockRef& c : gen.clocks) tl.announce_clock(c.node, 0, c);
  for (const Batch& b : gen.batches) tl.ingest(b);
  TimelineGraph g = tl.build_prefix_closed();
  for (std::size_t i = 0; i < g.cross_edge_count(); ++i) {
    const CrossEdge& e = g.cross_edge(i);
    CHECK(g.real_time_at(e.send) <= g.real_time_at(e.recv) + 2 * gen.skew_bound_ns);
  }
}

TEST_CASE("retirement keeps positions stable and spares pending sends") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  PacketId pkt = make_packet_id(0, 1, 0);
  Event send = code_event(0, 10, 1);
  send.kind = EventKind::packet_send();
  send.packet = pkt;
  tl.ingest(batch_of(0, 0, 1000, {code_event(0, 5, 0), send}));
  tl.ingest(batch_of(1, 0, 1000, {}));
  TimelineGraph g1 = tl.build_prefix_closed();
  tl.retire(g1.cut());
  // Later the receive arrives; the edge lands on original positions.
  Event recv = code_event(1, 1100, 1);
  recv.kind = EventKind::packet_recv();
  recv.packet = pkt;
  tl.ingest(batch_of(0, 1, 2000, {}));
  tl.ingest(batch_of(1, 1, 2000, {recv}));
  TimelineGraph g2 = tl.build_prefix_closed();
  REQUIRE(g2.cross_edge_count() == 1);
  CHECK(g2.cross_edge(0).send == VertexRef{0, 1});
  CHECK(g2.cross_edge(0).recv == VertexRef{1, 0});
}

TEST_CASE("dot export draws ranks, cross edges and the infinity vertex") {
  Timeline tl(2, 100);
  tl.announce_clock(0, 0, plain_clock(0, 100));
  tl.announce_clock(1, 0, plain_clock(1, 100));
  PacketId pkt = make_packet_id(0, 1, 0);
  Event send = code_event(0, 10, 1);
  send.kind = EventKind::packet_send();
  send.packet = pkt;
  tl.ingest(batch_of(0, 0, 1000, {send, code_event(0, 20, 2)}));
  tl.ingest(batch_of(1, 0, 1000, {code_event(1, 15, 1, 7)}));
  TimelineGraph g = tl.build_prefix_closed();
  std::string dot = g.to_dot([](const EventKind& k) { return k.canonical(); });
  CHECK(dot.find("digraph timeline") != std::string::npos);
  CHECK(dot.find("cluster_n0") != std::string::npos);
  CHECK(dot.find("cluster_n1") != std::string::npos);
  CHECK(dot.find("code:7") != std::string::npos);
  CHECK(dot.find("infinity") != std::string::npos);
  CHECK(dot.find("v0_0 -> v0_1") != std::string::npos);
}
