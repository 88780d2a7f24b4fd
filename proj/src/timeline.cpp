#include "tlfuzz/timeline.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tlfuzz {

int TimelineGraph::node_count() const { return owner_->node_count_; }

const CrossEdge& TimelineGraph::cross_edge(std::size_t i) const {
  if (i >= edge_count_) throw std::out_of_range("cross_edge: index beyond snapshot");
  return owner_->edges_[i];
}

const Event& TimelineGraph::event_at(VertexRef v) const {
  return owner_->at(v.node, v.pos).ev;
}

std::int64_t TimelineGraph::real_time_at(VertexRef v) const {
  return owner_->at(v.node, v.pos).real;
}

Timeline::Timeline(int node_count, std::int64_t skew_bound_ns)
    : node_count_(node_count), skew_(skew_bound_ns) {
  if (node_count <= 0) throw std::invalid_argument("timeline: node_count must be > 0");
  if (skew_bound_ns <= 0) throw std::invalid_argument("timeline: skew bound must be > 0");
  nodes_.resize(static_cast<std::size_t>(node_count));
}

const Timeline::StoredEvent& Timeline::at(NodeId n, std::int64_t pos) const {
  const NodeState& ns = nodes_.at(static_cast<std::size_t>(n));
  std::int64_t rel = pos - ns.base;
  if (rel < 0) throw std::logic_error("timeline: access to retired event");
  if (rel >= static_cast<std::int64_t>(ns.events.size())) {
    throw std::out_of_range("timeline: event position beyond ingested data");
  }
  return ns.events[static_cast<std::size_t>(rel)];
}

void Timeline::announce_clock(NodeId node, std::uint32_t epoch, const ClockRef& clock) {
  NodeState& ns = nodes_.at(static_cast<std::size_t>(node));
  if (ns.epochs.count(epoch)) {
    throw std::invalid_argument("timeline: duplicate clock announcement for epoch");
  }
  if (ns.any_clock && epoch <= ns.current_epoch) {
    throw std::invalid_argument("timeline: epoch announced out of order");
  }
  EpochState es;
  es.clock = clock;
  ns.epochs.emplace(epoch, std::move(es));
  ns.current_epoch = epoch;
  ns.any_clock = true;
  ns.horizon = std::max(ns.horizon, clock.real_anchor);
}

void Timeline::set_dead(NodeId node, bool dead) {
  nodes_.at(static_cast<std::size_t>(node)).dead = dead;
}

void Timeline::ingest(Batch batch) {
  NodeState& ns = nodes_.at(static_cast<std::size_t>(batch.node));
  auto eit = ns.epochs.find(batch.epoch);
  if (eit == ns.epochs.end()) {
    throw std::invalid_argument("timeline: batch for unannounced epoch");
  }
  if (batch.epoch != ns.current_epoch) {
    throw std::invalid_argument("timeline: batch for a closed boot epoch");
  }
  EpochState& es = eit->second;
  if (batch.seq_no < es.next_seq || es.held.count(batch.seq_no)) {
    throw std::invalid_argument("timeline: duplicate batch sequence number");
  }
  es.held.emplace(batch.seq_no, std::move(batch));
  append_ready(ns, es);
}

void Timeline::append_ready(NodeState& ns, EpochState& es) {
  while (!es.held.empty() && es.held.begin()->first == es.next_seq) {
    Batch b = std::move(es.held.begin()->second);
    es.held.erase(es.held.begin());
    ++es.next_seq;
    for (Event& ev : b.events) {
      std::int64_t real = mono_to_real(es.clock, ev.mono_ts);
      if (real < ns.last_real) {
        throw std::runtime_error("timeline: wall-clock regression within a node");
      }
      ns.last_real = real;
      ns.events.push_back(StoredEvent{std::move(ev), real});
    }
    std::int64_t flush_real = mono_to_real(es.clock, b.flush_mono_ts);
    ns.horizon = std::max(ns.horizon, flush_real);
  }
}

std::int64_t Timeline::upper_bound_real(const NodeState& ns, std::int64_t limit) const {
  // First position at or after `processed` whose wall-clock tag exceeds limit.
  std::int64_t lo = ns.processed;
  std::int64_t hi = ns.base + static_cast<std::int64_t>(ns.events.size());
  while (lo < hi) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (ns.events[static_cast<std::size_t>(mid - ns.base)].real > limit) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

Ranges Timeline::ready_ranges() const {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  Ranges out;
  out.ts = kInf;
  bool all_dead = true;
  for (const NodeState& ns : nodes_) {
    if (!ns.any_clock) {
      throw std::logic_error("timeline: ready_ranges before all clocks announced");
    }
    if (ns.dead) continue;
    all_dead = false;
    out.ts = std::min(out.ts, ns.horizon);
  }
  if (all_dead) out.ts = kInf;
  out.per_node.reserve(nodes_.size());
  for (const NodeState& ns : nodes_) {
    NodeRange r;
    r.begin = ns.processed;
    if (out.ts == kInf) {
      r.prefix_end = r.ext_end = ns.base + static_cast<std::int64_t>(ns.events.size());
    } else {
      r.prefix_end = upper_bound_real(ns, out.ts - skew_);
      std::int64_t ext_limit = out.ts > kInf - skew_ ? kInf : out.ts + skew_;
      r.ext_end = upper_bound_real(ns, ext_limit);
    }
    out.per_node.push_back(r);
  }
  return out;
}

TimelineGraph Timeline::build_prefix_closed() {
  Ranges ranges = ready_ranges();

  // Track inter-node link sources within the extension ranges.
  for (int n = 0; n < node_count_; ++n) {
    NodeState& ns = nodes_[static_cast<std::size_t>(n)];
    const NodeRange& r = ranges.per_node[static_cast<std::size_t>(n)];
    for (std::int64_t pos = std::max(ns.link_scan, ns.processed); pos < r.ext_end; ++pos) {
      const StoredEvent& se = at(n, pos);
      if (se.ev.kind.tag == EventKind::Tag::PacketSend) {
        std::uint64_t pkt = se.ev.packet.value;
        if (links_.count(pkt) || matched_.count(pkt)) {
          throw std::runtime_error("timeline: duplicate packet send identifier");
        }
        links_.emplace(pkt, VertexRef{n, pos});
      }
    }
    ns.link_scan = std::max(ns.link_scan, r.ext_end);
  }

  // Fixpoint: walk each node forward, pulling in senders of observed receives
  // until every cursor meets its last-needed bound.
  std::vector<std::int64_t> rw(static_cast<std::size_t>(node_count_));
  std::vector<std::int64_t> ln(static_cast<std::size_t>(node_count_));
  for (int n = 0; n < node_count_; ++n) {
    rw[static_cast<std::size_t>(n)] = ranges.per_node[static_cast<std::size_t>(n)].begin;
    ln[static_cast<std::size_t>(n)] = ranges.per_node[static_cast<std::size_t>(n)].prefix_end;
  }
  bool any;
  do {
    any = false;
    for (int n = 0; n < node_count_; ++n) {
      auto ni = static_cast<std::size_t>(n);
      while (rw[ni] < ln[ni]) {
        any = true;
        const StoredEvent& se = at(n, rw[ni]);
        if (se.ev.kind.tag == EventKind::Tag::PacketRecv) {
          std::uint64_t pkt = se.ev.packet.value;
          auto it = links_.find(pkt);
          if (it != links_.end()) {
            VertexRef send = it->second;
            edges_.push_back(CrossEdge{send, VertexRef{n, rw[ni]}, pkt});
            matched_.emplace(pkt, send);
            links_.erase(it);
            pending_.erase(pkt);
            auto si = static_cast<std::size_t>(send.node);
            ln[si] = std::max(ln[si], send.pos + 1);
          } else if (matched_.count(pkt)) {
            throw std::runtime_error("timeline: second receive for one packet");
          } else {
            throw std::runtime_error(
                "timeline: receive without a matching send in ingested history "
                "(packet " + std::to_string(pkt) + ")");
          }
        } else if (se.ev.kind.tag == EventKind::Tag::PacketSend) {
          std::uint64_t pkt = se.ev.packet.value;
          if (!matched_.count(pkt)) {
            pending_[pkt] = PendingSend{VertexRef{n, rw[ni]}, pkt};
          }
        }
        ++rw[ni];
      }
    }
  } while (any);

  for (int n = 0; n < node_count_; ++n) {
    nodes_[static_cast<std::size_t>(n)].processed = ln[static_cast<std::size_t>(n)];
  }
  return snapshot();
}

TimelineGraph Timeline::snapshot() const {
  TimelineGraph g;
  g.owner_ = this;
  g.cut_.reserve(nodes_.size());
  for (const NodeState& ns : nodes_) g.cut_.push_back(ns.processed);
  g.edge_count_ = edges_.size();
  g.pending_.reserve(pending_.size());
  for (const auto& [pkt, ps] : pending_) g.pending_.push_back(ps);
  return g;
}

void Timeline::retire(const std::vector<std::int64_t>& upto) {
  for (int n = 0; n < node_count_; ++n) {
    NodeState& ns = nodes_[static_cast<std::size_t>(n)];
    std::int64_t target = std::min(upto.at(static_cast<std::size_t>(n)), ns.processed);
    while (ns.base < target && !ns.events.empty()) {
      ns.events.pop_front();
      ++ns.base;
    }
  }
}

std::int64_t Timeline::ingested_count(NodeId n) const {
  const NodeState& ns = nodes_.at(static_cast<std::size_t>(n));
  return ns.base + static_cast<std::int64_t>(ns.events.size());
}

std::int64_t Timeline::processed(NodeId n) const {
  return nodes_.at(static_cast<std::size_t>(n)).processed;
}

std::string TimelineGraph::to_dot(
    const std::function<std::string(const EventKind&)>& label) const {
  std::ostringstream os;
  os << "digraph timeline {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n";
  bool any_pending = !pending_.empty();
  for (int n = 0; n < node_count(); ++n) {
    const auto& ns = owner_->nodes_[static_cast<std::size_t>(n)];
    os << "  subgraph cluster_n" << n << " {\n    label=\"node " << n
       << "\";\n    rank=same;\n";
    for (std::int64_t pos = ns.base; pos < cut_[static_cast<std::size_t>(n)]; ++pos) {
      const Event& ev = owner_->at(n, pos).ev;
      os << "    v" << n << "_" << pos << " [label=\"" << label(ev.kind) << "\"];\n";
    }
    os << "  }\n";
    for (std::int64_t pos = ns.base; pos + 1 < cut_[static_cast<std::size_t>(n)]; ++pos) {
      os << "  v" << n << "_" << pos << " -> v" << n << "_" << pos + 1 << ";\n";
    }
  }
  for (std::size_t i = 0; i < edge_count_; ++i) {
    const CrossEdge& e = owner_->edges_[i];
    if (e.send.pos < owner_->nodes_[static_cast<std::size_t>(e.send.node)].base ||
        e.recv.pos < owner_->nodes_[static_cast<std::size_t>(e.recv.node)].base) {
      continue;  // retired
    }
    os << "  v" << e.send.node << "_" << e.send.pos << " -> v" << e.recv.node << "_"
       << e.recv.pos << " [color=blue, constraint=false];\n";
  }
  if (any_pending) {
    os << "  infinity [label=\"...\", shape=circle];\n";
    for (const PendingSend& p : pending_) {
      if (p.send.pos < owner_->nodes_[static_cast<std::size_t>(p.send.node)].base) continue;
      os << "  v" << p.send.node << "_" << p.send.pos
         << " -> infinity [style=dashed, constraint=false];\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace tlfuzz
