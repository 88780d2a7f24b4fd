#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlfuzz/events.hpp"
#include "tlfuzz/timeline.hpp"

namespace tlfuzz {

// A timeline abstraction accumulates the causal history up to an event:
// update() incorporates a same-node successor event, merge() joins the
// information arriving over a cross-node edge. merge must be commutative,
// associative and idempotent so the fold result is independent of the
// traversal order.
template <class A>
concept TimelineAbstraction = requires(A a, const A& b, const Event& ev) {
  A{};
  a.update(ev);
  a.merge(ev, b, ev);
};

// Per-node sets of event kinds plus ordered happens-before pairs of kinds
// observed at that node. Kind identities live in a small per-value dictionary
// kept sorted, so histories compare structurally and merging saturated
// histories is a plain bitwise union.
class EventHistory {
 public:
  static constexpr std::size_t kMaxKinds = 64;

  void update(const Event& ev);
  void merge(const Event& this_ev, const EventHistory& other, const Event& other_ev);

  bool contains_kind(NodeId node, const EventKind& kind) const;
  bool contains_pair(NodeId node, const EventKind& first, const EventKind& second) const;
  std::size_t item_count() const;  // kinds + pairs over all nodes

  // Flattens the history into canonical 64-bit items for signatures.
  std::vector<std::uint64_t> items() const;

  // Canonical JSON: nodes ascending, kinds and pairs lexicographically sorted.
  std::string to_json() const;

  friend bool operator==(const EventHistory& a, const EventHistory& b);

 private:
  struct NodeHist {
    std::uint64_t kinds = 0;
    std::array<std::uint64_t, kMaxKinds> pairs{};  // pairs[b] = mask of firsts
  };

  std::size_t intern(const EventKind& kind);  // inserts sorted, renumbers masks
  int find_kind(const EventKind& kind) const;
  NodeHist& hist(NodeId node);

  std::vector<EventKind> dict_;                       // sorted ascending
  std::vector<std::pair<NodeId, NodeHist>> nodes_;    // sorted by node
};

// Reference abstraction: a textbook vector clock driven through the same
// interface, used as a correctness oracle for the fold machinery.
class VectorClock {
 public:
  void update(const Event& ev) { ++counts_[ev.node]; }
  void merge(const Event&, const VectorClock& other, const Event&) {
    for (const auto& [n, c] : other.counts_) {
      auto& mine = counts_[n];
      if (c > mine) mine = c;
    }
  }

  std::int64_t at(NodeId n) const {
    auto it = counts_.find(n);
    return it == counts_.end() ? 0 : it->second;
  }
  const std::map<NodeId, std::int64_t>& counts() const { return counts_; }
  friend bool operator==(const VectorClock&, const VectorClock&) = default;

 private:
  std::map<NodeId, std::int64_t> counts_;
};

// Incremental fold over a growing prefix-closed graph. Keeps one running
// value per node plus the values attached to sends whose receive has not
// been folded yet; emitted graph portions can be retired once consumed.
template <TimelineAbstraction A>
class AbstractionRunner {
 public:
  explicit AbstractionRunner(int node_count)
      : frontier_(static_cast<std::size_t>(node_count)),
        next_(static_cast<std::size_t>(node_count), 0),
        floor_(static_cast<std::size_t>(node_count), 0) {}

  // Folds the portion of g beyond the previously consumed cut. Throws if g
  // does not extend it.
  void extend(const TimelineGraph& g);

  // Value at an artificial sink event causally after every node's last event.
  A sink() const;

  // Forgets all accumulated state; subsequent extends fold only events beyond
  // the current cut.
  void reset();

  std::int64_t consumed(NodeId n) const { return next_[static_cast<std::size_t>(n)]; }

 private:
  struct PendingVal {
    A value;
    Event send_event;
  };

  std::vector<A> frontier_;
  std::vector<std::int64_t> next_;
  std::vector<std::int64_t> floor_;  // merges from below this are skipped (reset)
  std::map<std::uint64_t, PendingVal> pending_;
  std::map<std::pair<NodeId, std::int64_t>, VertexRef> edge_by_recv_;  // unconsumed edges
  std::size_t edge_cursor_ = 0;
};

// Single-pass fold of a whole graph snapshot in deterministic causal order.
template <TimelineAbstraction A>
A abstract_timeline(const TimelineGraph& g);

// Folds along an explicit topological order of all emitted events. Throws if
// the order is not topological. Exposes per-event values for oracle checks.
template <TimelineAbstraction A>
std::map<std::pair<NodeId, std::int64_t>, A> fold_values_in_order(
    const TimelineGraph& g, const std::vector<VertexRef>& order);

template <TimelineAbstraction A>
A fold_in_order(const TimelineGraph& g, const std::vector<VertexRef>& order);

// Deterministic topological order of the emitted cut (ascending node id among
// ready events).
std::vector<VertexRef> default_topological_order(const TimelineGraph& g);

// ---------------------------------------------------------------------------
// Template implementations.

namespace detail {

// recv position -> send, for edges within or into the window [from, cut).
inline std::map<std::pair<NodeId, std::int64_t>, VertexRef> edge_map(
    const TimelineGraph& g) {
  std::map<std::pair<NodeId, std::int64_t>, VertexRef> out;
  for (std::size_t i = 0; i < g.cross_edge_count(); ++i) {
    const CrossEdge& e = g.cross_edge(i);
    out[{e.recv.node, e.recv.pos}] = e.send;
  }
  return out;
}

inline const Event& dummy_event() {
  static const Event ev{};
  return ev;
}

}  // namespace detail

template <TimelineAbstraction A>
void AbstractionRunner<A>::extend(const TimelineGraph& g) {
  const int n_nodes = g.node_count();
  if (static_cast<std::size_t>(n_nodes) != next_.size()) {
    throw std::invalid_argument("abstraction: node count mismatch");
  }
  for (int n = 0; n < n_nodes; ++n) {
    if (g.cut(n) < next_[static_cast<std::size_t>(n)]) {
      throw std::invalid_argument("abstraction: delta does not extend the consumed cut");
    }
  }
  // Collect edges that appeared since the last extend.
  for (; edge_cursor_ < g.cross_edge_count(); ++edge_cursor_) {
    const CrossEdge& e = g.cross_edge(edge_cursor_);
    edge_by_recv_[{e.recv.node, e.recv.pos}] = e.send;
  }

  bool progress = true;
  while (progress) {
    progress = false;
    for (int n = 0; n < n_nodes; ++n) {
      auto ni = static_cast<std::size_t>(n);
      while (next_[ni] < g.cut(n)) {
        VertexRef v{n, next_[ni]};
        const Event& ev = g.event_at(v);
        if (ev.kind.tag == EventKind::Tag::PacketRecv) {
          auto eit = edge_by_recv_.find({n, v.pos});
          if (eit == edge_by_recv_.end()) {
            throw std::logic_error("abstraction: receive without a recorded edge");
          }
          VertexRef send = eit->second;
          auto sn = static_cast<std::size_t>(send.node);
          if (send.pos >= floor_[sn]) {
            if (send.pos >= next_[sn]) break;  // sender not folded yet
            auto pit = pending_.find(ev.packet.value);
            if (pit == pending_.end()) {
              throw std::logic_error("abstraction: send value missing for edge");
            }
            frontier_[ni].merge(ev, pit->second.value, pit->second.send_event);
            pending_.erase(pit);
          }
          // Sends folded before the last reset merge nothing: the summary
          // covers the current schedule only.
          edge_by_recv_.erase(eit);
        }
        frontier_[ni].update(ev);
        if (ev.kind.tag == EventKind::Tag::PacketSend) {
          pending_[ev.packet.value] = PendingVal{frontier_[ni], ev};
        }
        ++next_[ni];
        progress = true;
      }
    }
  }
  for (int n = 0; n < n_nodes; ++n) {
    if (next_[static_cast<std::size_t>(n)] != g.cut(n)) {
      throw std::logic_error("abstraction: fold stuck before reaching the cut");
    }
  }
}

template <TimelineAbstraction A>
A AbstractionRunner<A>::sink() const {
  A out;
  for (const A& f : frontier_) {
    out.merge(detail::dummy_event(), f, detail::dummy_event());
  }
  return out;
}

template <TimelineAbstraction A>
void AbstractionRunner<A>::reset() {
  for (A& f : frontier_) f = A{};
  pending_.clear();
  floor_ = next_;
}

template <TimelineAbstraction A>
std::map<std::pair<NodeId, std::int64_t>, A> fold_values_in_order(
    const TimelineGraph& g, const std::vector<VertexRef>& order) {
  auto edges = detail::edge_map(g);
  std::map<std::pair<NodeId, std::int64_t>, A> values;
  std::vector<std::int64_t> done(static_cast<std::size_t>(g.node_count()), 0);
  for (const VertexRef& v : order) {
    auto ni = static_cast<std::size_t>(v.node);
    if (v.pos != done[ni]) {
      throw std::invalid_argument("fold: order is not topological (program order)");
    }
    A val;
    if (v.pos > 0) val = values.at({v.node, v.pos - 1});
    const Event& ev = g.event_at(v);
    auto eit = edges.find({v.node, v.pos});
    if (eit != edges.end()) {
      auto sit = values.find({eit->second.node, eit->second.pos});
      if (sit == values.end()) {
        throw std::invalid_argument("fold: order is not topological (cross edge)");
      }
      val.merge(ev, sit->second, g.event_at(eit->second));
    }
    val.update(ev);
    values.emplace(std::pair<NodeId, std::int64_t>{v.node, v.pos}, std::move(val));
    done[ni] = v.pos + 1;
  }
  for (int n = 0; n < g.node_count(); ++n) {
    if (done[static_cast<std::size_t>(n)] != g.cut(n)) {
      throw std::invalid_argument("fold: order does not cover the emitted cut");
    }
  }
  return values;
}

template <TimelineAbstraction A>
A fold_in_order(const TimelineGraph& g, const std::vector<VertexRef>& order) {
  auto values = fold_values_in_order<A>(g, order);
  A out;
  for (int n = 0; n < g.node_count(); ++n) {
    if (g.cut(n) == 0) continue;
    out.merge(detail::dummy_event(), values.at({n, g.cut(n) - 1}),
              detail::dummy_event());
  }
  return out;
}

template <TimelineAbstraction A>
A abstract_timeline(const TimelineGraph& g) {
  return fold_in_order<A>(g, default_topological_order(g));
}

}  // namespace tlfuzz
