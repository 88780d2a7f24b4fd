#pragma once

#include <cstdint>
#include <vector>

#include "tlfuzz/events.hpp"

namespace tlfuzz {

// Per-node event tap: buffers observations in order and drains them into
// sequence-numbered batches. One instance per node; reset on every boot.
class Observer {
 public:
  void reset_for_boot(NodeId node, std::uint32_t epoch);

  // Returns the boot's clock reference. Errors on a second call in one boot.
  ClockRef announce_clock(std::int64_t mono_anchor, std::int64_t real_anchor,
                          std::int64_t skew_bound_ns);

  void record(const Event& ev);

  // Drains the pending buffer into the next consecutive batch. Empty batches
  // still carry a sequence number so the mediator's frontier can advance.
  Batch flush(std::int64_t flush_mono_ts);

  void drop_pending() { pending_.clear(); }

  std::uint32_t epoch() const { return epoch_; }
  std::size_t pending_count() const { return pending_.size(); }
  const std::vector<Event>& pending() const { return pending_; }

 private:
  NodeId node_ = -1;
  std::uint32_t epoch_ = 0;
  std::uint64_t next_seq_ = 0;
  bool clock_announced_ = false;
  std::vector<Event> pending_;
};

}  // namespace tlfuzz
