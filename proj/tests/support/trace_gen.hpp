#pragma once

// Randomized synthetic traces for exercising the mediator pipeline without
// the simulator: skewed per-node clocks, interleaved code events and matched
// packet pairs, batched with flush anchors.

#include <algorithm>
#include <cstdint>
#include <queue>
#include <vector>

#include "tlfuzz/events.hpp"
#include "tlfuzz/rng.hpp"

namespace tlfuzz::testing {

struct GenOptions {
  int nodes = 5;
  int events = 200;
  std::int64_t skew_bound_ns = 100'000'000;
  std::int64_t batch_interval_ns = 100'000'000;
  std::int64_t max_step_ns = 40'000'000;   // true-time gap between events
  std::int64_t max_latency_ns = 30'000'000;
  double send_fraction = 0.4;
};

struct GeneratedTrace {
  std::vector<Event> trace;          // global true-time order
  std::vector<ClockRef> clocks;      // one per node, epoch 0
  std::vector<Batch> batches;        // in-order per node
  std::int64_t skew_bound_ns = 0;
};

inline GeneratedTrace generate_trace(const GenOptions& opt, std::uint64_t seed) {
  Rng rng(seed, 0x7e577ace);
  GeneratedTrace out;
  out.skew_bound_ns = opt.skew_bound_ns;
  std::vector<std::int64_t> offset(static_cast<std::size_t>(opt.nodes));
  for (int n = 0; n < opt.nodes; ++n) {
    offset[static_cast<std::size_t>(n)] =
        rng.range_i64(-opt.skew_bound_ns / 2, opt.skew_bound_ns / 2);
    out.clocks.push_back(ClockRef{n, 0, offset[static_cast<std::size_t>(n)],
                                  opt.skew_bound_ns});
  }

  struct PendingRecv {
    std::int64_t at;
    NodeId node;
    std::uint64_t packet;
    bool operator>(const PendingRecv& o) const { return at > o.at; }
  };
  std::priority_queue<PendingRecv, std::vector<PendingRecv>, std::greater<>> inflight;
  std::vector<std::uint64_t> seq(static_cast<std::size_t>(opt.nodes), 0);
  std::int64_t now = 0;
  std::int64_t next_packet_seq = 0;

  auto push_event = [&](NodeId n, EventKind kind, PacketId packet) {
    Event ev;
    ev.node = n;
    ev.mono_ts = now;  // all nodes boot at true time zero
    ev.kind = std::move(kind);
    ev.packet = packet;
    ev.seq_in_node = ++seq[static_cast<std::size_t>(n)];
    out.trace.push_back(std::move(ev));
  };

  int emitted = 0;
  while (emitted < opt.events || !inflight.empty()) {
    bool take_recv = !inflight.empty() &&
                     (emitted >= opt.events || inflight.top().at <= now);
    if (take_recv) {
      PendingRecv r = inflight.top();
      inflight.pop();
      now = std::max(now, r.at);
      push_event(r.node, EventKind::packet_recv(), PacketId{r.packet});
      continue;
    }
    now += 1 + rng.range_i64(0, opt.max_step_ns);
    NodeId n = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(opt.nodes)));
    if (opt.nodes > 1 && rng.next_double() < opt.send_fraction) {
      NodeId dst = n;
      while (dst == n) {
        dst = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(opt.nodes)));
      }
      PacketId packet = make_packet_id(n, dst, next_packet_seq++);
      push_event(n, EventKind::packet_send(), packet);
      inflight.push(PendingRecv{now + rng.range_i64(1, opt.max_latency_ns), dst,
                                packet.value});
    } else {
      push_event(n, EventKind::code(1 + static_cast<std::uint32_t>(rng.below(6))), {});
    }
    ++emitted;
  }

  // Batch per node at fixed flush boundaries; one final far-future heartbeat
  // closes the frontier past every event.
  std::int64_t horizon = now + opt.skew_bound_ns + opt.batch_interval_ns;
  for (int n = 0; n < opt.nodes; ++n) {
    std::vector<Event> mine;
    for (const Event& ev : out.trace) {
      if (ev.node == n) mine.push_back(ev);
    }
    std::uint64_t seq_no = 0;
    std::size_t i = 0;
    for (std::int64_t t = opt.batch_interval_ns; t - opt.batch_interval_ns <= now;
         t += opt.batch_interval_ns) {
      Batch b;
      b.node = n;
      b.epoch = 0;
      b.seq_no = seq_no++;
      b.flush_mono_ts = t;
      while (i < mine.size() && mine[i].mono_ts <= t) b.events.push_back(mine[i++]);
      out.batches.push_back(std::move(b));
    }
    Batch last;
    last.node = n;
    last.epoch = 0;
    last.seq_no = seq_no;
    last.flush_mono_ts = horizon;
    while (i < mine.size()) last.events.push_back(mine[i++]);
    out.batches.push_back(std::move(last));
  }
  return out;
}

}  // namespace tlfuzz::testing
