#include "tlfuzz/observer.hpp"

#include <stdexcept>

namespace tlfuzz {

void Observer::reset_for_boot(NodeId node, std::uint32_t epoch) {
  node_ = node;
  epoch_ = epoch;
  next_seq_ = 0;
  clock_announced_ = false;
  pending_.clear();
}

ClockRef Observer::announce_clock(std::int64_t mono_anchor, std::int64_t real_anchor,
                                  std::int64_t skew_bound_ns) {
  if (clock_announced_) {
    throw std::logic_error("observer: duplicate clock announcement in one boot");
  }
  clock_announced_ = true;
  return ClockRef{node_, mono_anchor, real_anchor, skew_bound_ns};
}

void Observer::record(const Event& ev) {
  if (!pending_.empty()) {
    const Event& prev = pending_.back();
    if (ev.seq_in_node <= prev.seq_in_node || ev.mono_ts < prev.mono_ts) {
      throw std::logic_error("observer: events out of per-node order");
    }
  }
  pending_.push_back(ev);
}

Batch Observer::flush(std::int64_t flush_mono_ts) {
  Batch b;
  b.node = node_;
  b.epoch = epoch_;
  b.seq_no = next_seq_++;
  b.flush_mono_ts = flush_mono_ts;
  b.events = std::move(pending_);
  pending_.clear();
  return b;
}

}  // namespace tlfuzz
