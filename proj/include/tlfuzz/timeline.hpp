#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tlfuzz/events.hpp"

namespace tlfuzz {

struct VertexRef {
  NodeId node = -1;
  std::int64_t pos = -1;  // absolute position in the node's timeline
  friend auto operator<=>(const VertexRef&, const VertexRef&) = default;
};

struct CrossEdge {
  VertexRef send;
  VertexRef recv;
  std::uint64_t packet = 0;
  friend bool operator==(const CrossEdge&, const CrossEdge&) = default;
};

struct PendingSend {
  VertexRef send;
  std::uint64_t packet = 0;
};

struct NodeRange {
  std::int64_t begin = 0;       // first unprocessed position
  std::int64_t prefix_end = 0;  // events whose predecessors are all ingested
  std::int64_t ext_end = 0;     // search window for those predecessors
};

struct Ranges {
  std::int64_t ts = 0;  // wall-clock frontier all nodes have submitted up to
  std::vector<NodeRange> per_node;
};

class Timeline;

// Immutable view of the causal graph emitted so far. Program-order edges are
// implicit between consecutive positions of one node; cross-node edges join
// matched packet sends and receives. Sends whose receive has not been
// ingested yet point at a conceptual vertex at infinity (`pending`) and are
// re-pointed when the receive arrives.
class TimelineGraph {
 public:
  int node_count() const;
  std::int64_t cut(NodeId n) const { return cut_[static_cast<std::size_t>(n)]; }
  const std::vector<std::int64_t>& cut() const { return cut_; }
  std::size_t cross_edge_count() const { return edge_count_; }
  const CrossEdge& cross_edge(std::size_t i) const;
  std::vector<PendingSend> pending() const { return pending_; }

  const Event& event_at(VertexRef v) const;
  std::int64_t real_time_at(VertexRef v) const;

  // One horizontal rank per node, cross edges drawn between ranks. The label
  // function renders an event kind into readable text.
  std::string to_dot(const std::function<std::string(const EventKind&)>& label) const;

 private:
  friend class Timeline;
  const Timeline* owner_ = nullptr;
  std::vector<std::int64_t> cut_;
  std::size_t edge_count_ = 0;
  std::vector<PendingSend> pending_;
};

// Mediator-side ingestion and prefix-closed timeline construction. Batches
// may arrive out of order; each node's events are released in batch sequence
// order, and the graph is grown in wall-clock-bounded rounds so that every
// emitted event already has all of its causal predecessors emitted.
class Timeline {
 public:
  Timeline(int node_count, std::int64_t skew_bound_ns);

  // Per-boot clock registration. Must precede the epoch's batches.
  void announce_clock(NodeId node, std::uint32_t epoch, const ClockRef& clock);

  // A dead node stops holding the frontier back.
  void set_dead(NodeId node, bool dead);

  // Throws on duplicate sequence numbers within an epoch.
  void ingest(Batch batch);

  Ranges ready_ranges() const;

  // Runs the fixpoint over the ready ranges and extends the emitted graph.
  // Returns the cumulative graph snapshot.
  TimelineGraph build_prefix_closed();

  TimelineGraph snapshot() const;

  // Drops event payloads below the given per-node positions. The caller must
  // not access retired vertices afterwards.
  void retire(const std::vector<std::int64_t>& upto);

  std::int64_t ingested_count(NodeId n) const;
  std::int64_t processed(NodeId n) const;

 private:
  friend class TimelineGraph;

  struct StoredEvent {
    Event ev;
    std::int64_t real = 0;
  };

  struct EpochState {
    ClockRef clock;
    std::uint64_t next_seq = 0;
    std::map<std::uint64_t, Batch> held;  // future batches, by seq_no
  };

  struct NodeState {
    std::deque<StoredEvent> events;
    std::int64_t base = 0;  // absolute position of events.front()
    std::map<std::uint32_t, EpochState> epochs;
    std::uint32_t current_epoch = 0;
    bool any_clock = false;
    bool dead = false;
    std::int64_t horizon = 0;     // last submitted wall-clock instant
    std::int64_t last_real = 0;   // wall-clock tag of last appended event
    std::int64_t processed = 0;   // everything below is in the graph
    std::int64_t link_scan = 0;   // send-tracking cursor
  };

  const StoredEvent& at(NodeId n, std::int64_t pos) const;
  void append_ready(NodeState& ns, EpochState& es);
  std::int64_t upper_bound_real(const NodeState& ns, std::int64_t limit) const;

  int node_count_;
  std::int64_t skew_;
  std::vector<NodeState> nodes_;
  std::map<std::uint64_t, VertexRef> links_;   // unmatched sends by packet id
  std::map<std::uint64_t, VertexRef> matched_; // matched sends by packet id
  std::vector<CrossEdge> edges_;               // append-only
  std::map<std::uint64_t, PendingSend> pending_;  // emitted, unmatched sends
};

}  // namespace tlfuzz
