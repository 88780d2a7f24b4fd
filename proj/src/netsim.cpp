#include "tlfuzz/netsim.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tlfuzz {

void SimConfig::validate() const {
  if (node_count < 3) throw std::invalid_argument("sim.node_count: must be >= 3");
  if (min_latency_ns < 0) throw std::invalid_argument("sim.min_latency_ns: must be >= 0");
  if (max_latency_ns < min_latency_ns) {
    throw std::invalid_argument("sim.max_latency_ns: must be >= min_latency_ns");
  }
  if (skew_bound_ns <= 0) throw std::invalid_argument("sim.skew_bound_ns: must be > 0");
  if (batch_interval_ns <= 0) {
    throw std::invalid_argument("sim.batch_interval_ns: must be > 0");
  }
}

namespace {
constexpr const char* kFaultNames[] = {
    "partition_random_halves", "heal_network",  "crash_node",
    "restart_node",            "pause_node",    "resume_node",
    "isolate_node",            "request_membership_change", "no_op"};
}  // namespace

const char* FaultAction::tag_name(Tag t) {
  return kFaultNames[static_cast<std::size_t>(t)];
}

std::optional<FaultAction::Tag> FaultAction::tag_from_name(std::string_view name) {
  for (int i = 0; i < kTagCount; ++i) {
    if (name == kFaultNames[i]) return static_cast<Tag>(i);
  }
  return std::nullopt;
}

bool NetworkState::fully_connected() const {
  for (const auto& row : reachability) {
    for (bool r : row) {
      if (!r) return false;
    }
  }
  return true;
}

std::vector<std::vector<NodeId>> NetworkState::partition_sets() const {
  const int n = static_cast<int>(reachability.size());
  std::vector<int> comp(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (comp[i] != -1) continue;
    comp[i] = next;
    std::vector<int> stack{i};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (reachability[u][v] && comp[v] == -1) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  std::vector<std::vector<NodeId>> sets(next);
  for (int i = 0; i < n; ++i) sets[comp[i]].push_back(i);
  return sets;
}

std::string EnactRecord::encode() const {
  std::ostringstream os;
  os << FaultAction::tag_name(tag) << ";" << target << ";" << membership_remove << ";";
  for (std::size_t i = 0; i < half_a.size(); ++i) os << (i ? "+" : "") << half_a[i];
  os << ";";
  for (std::size_t i = 0; i < half_b.size(); ++i) os << (i ? "+" : "") << half_b[i];
  return os.str();
}

EnactRecord EnactRecord::decode(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ';') {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (parts.size() != 5) throw std::invalid_argument("fault record: bad field count");
  EnactRecord rec;
  auto tag = FaultAction::tag_from_name(parts[0]);
  if (!tag) throw std::invalid_argument("fault record: unknown tag '" + parts[0] + "'");
  rec.tag = *tag;
  rec.target = static_cast<NodeId>(std::stol(parts[1]));
  rec.membership_remove = static_cast<NodeId>(std::stol(parts[2]));
  auto parse_list = [](const std::string& t) {
    std::vector<NodeId> out;
    std::size_t b = 0;
    for (std::size_t i = 0; i <= t.size(); ++i) {
      if (i == t.size() || t[i] == '+') {
        if (i > b) out.push_back(static_cast<NodeId>(std::stol(t.substr(b, i - b))));
        b = i + 1;
      }
    }
    return out;
  };
  rec.half_a = parse_list(parts[3]);
  rec.half_b = parse_list(parts[4]);
  return rec;
}

Simulator::Simulator(SimConfig cfg, NodeFactory factory)
    : cfg_(std::move(cfg)), factory_(std::move(factory)) {
  cfg_.validate();
  const int n = cfg_.node_count;
  net_.reachability.assign(n, std::vector<bool>(n, true));
  net_.node_status.assign(n, NodeStatus::Running);
  nodes_.resize(n);
  clock_announcements_.resize(n);
  latency_rng_ = Rng(cfg_.rng_seed, 0xA11CE);
  // Fixed per-node clock offsets within +/- skew/2 keep every pairwise
  // wall-clock discrepancy within the configured bound.
  Rng skew_rng(cfg_.rng_seed, 0x5EED5);
  for (NodeId i = 0; i < n; ++i) {
    nodes_[i].clock_offset =
        skew_rng.range_i64(-cfg_.skew_bound_ns / 2, cfg_.skew_bound_ns / 2);
  }
  for (NodeId i = 0; i < n; ++i) boot_node(i, /*fresh=*/true);
}

void Simulator::push(QueueItem item) {
  item.seq = queue_seq_++;
  queue_.push(std::move(item));
}

bool Simulator::observable(NodeId n) const {
  return net_.node_status[static_cast<std::size_t>(n)] == NodeStatus::Running;
}

std::int64_t Simulator::mono_now(NodeId n) const {
  return now_ - nodes_[static_cast<std::size_t>(n)].boot_time;
}

void Simulator::record_event(NodeId n, EventKind kind, PacketId packet) {
  if (!observable(n)) return;
  auto& slot = nodes_[static_cast<std::size_t>(n)];
  Event ev;
  ev.node = n;
  ev.mono_ts = mono_now(n);
  ev.kind = std::move(kind);
  ev.packet = packet;
  ev.seq_in_node = ++slot.event_seq;
  slot.observer.record(ev);
  window_buffer_.push_back(std::move(ev));
}

void Simulator::boot_node(NodeId n, bool fresh) {
  auto& slot = nodes_[static_cast<std::size_t>(n)];
  if (fresh) {
    slot.sut = factory_(n);
    slot.epoch = 0;
  } else {
    slot.epoch += 1;
  }
  slot.boot_time = now_;
  slot.rng = Rng(cfg_.rng_seed, 0xB007ull * 1000003ull + static_cast<std::uint64_t>(n) * 131ull +
                                    slot.epoch);
  slot.frozen.clear();
  slot.event_seq = 0;
  slot.observer.reset_for_boot(n, slot.epoch);
  ClockRef ref = slot.observer.announce_clock(
      /*mono_anchor=*/0, /*real_anchor=*/now_ + slot.clock_offset, cfg_.skew_bound_ns);
  clock_announcements_[static_cast<std::size_t>(n)].emplace_back(slot.epoch, ref);
  net_.node_status[static_cast<std::size_t>(n)] = NodeStatus::Running;
  // Periodic observer flush for this boot.
  QueueItem flush;
  flush.time = now_ + cfg_.batch_interval_ns;
  flush.kind = QueueItem::Kind::Flush;
  flush.node = n;
  push(std::move(flush));
  NodeCtx ctx(*this, n);
  slot.sut->boot(ctx, fresh);
}

void Simulator::flush_node(NodeId n) {
  auto& slot = nodes_[static_cast<std::size_t>(n)];
  batches_.push_back(slot.observer.flush(mono_now(n)));
}

void Simulator::crash_node(NodeId n, bool flush_first) {
  auto& slot = nodes_[static_cast<std::size_t>(n)];
  if (flush_first) {
    flush_node(n);
  } else {
    slot.observer.drop_pending();
  }
  slot.frozen.clear();
  net_.node_status[static_cast<std::size_t>(n)] = NodeStatus::Crashed;
}

PacketId Simulator::schedule_message(NodeId src, NodeId dst,
                                     std::vector<std::uint8_t> payload) {
  auto& slot = nodes_[static_cast<std::size_t>(src)];
  if (net_.node_status[static_cast<std::size_t>(src)] != NodeStatus::Running) {
    throw std::logic_error("schedule_message: source node not running");
  }
  std::int64_t seq = slot.send_seq[dst]++;
  PacketId packet = make_packet_id(src, dst, seq);
  record_event(src, EventKind::packet_send(), packet);
  std::int64_t latency = latency_rng_.range_i64(cfg_.min_latency_ns, cfg_.max_latency_ns);
  QueueItem item;
  item.time = now_ + latency;
  item.kind = QueueItem::Kind::Delivery;
  item.node = dst;
  item.src = src;
  item.packet = packet;
  item.payload = std::move(payload);
  push(std::move(item));
  return packet;
}

void Simulator::deliver_or_freeze(QueueItem& item) {
  NodeId n = item.node;
  NodeStatus st = net_.node_status[static_cast<std::size_t>(n)];
  if (st == NodeStatus::Crashed) return;  // dropped
  if (st == NodeStatus::Paused) {
    auto& slot = nodes_[static_cast<std::size_t>(n)];
    if (item.kind == QueueItem::Kind::Delivery &&
        slot.frozen.size() >= kFrozenQueueBound) {
      return;  // queue bound exceeded; packet lost
    }
    slot.frozen.push_back(std::move(item));
    return;
  }
  NodeCtx ctx(*this, n);
  auto& slot = nodes_[static_cast<std::size_t>(n)];
  switch (item.kind) {
    case QueueItem::Kind::Delivery:
      record_event(n, EventKind::packet_recv(), item.packet);
      slot.sut->on_message(ctx, item.src, item.payload);
      break;
    case QueueItem::Kind::Timer:
      slot.sut->on_timer(ctx, item.timer_id, item.token);
      break;
    case QueueItem::Kind::ClientDeliver:
      record_event(n, EventKind::client_request(item.label), {});
      slot.sut->on_client_request(ctx, item.request_id, item.label, item.payload);
      break;
    default:
      throw std::logic_error("deliver_or_freeze: unexpected item kind");
  }
}

void Simulator::process(QueueItem& item) {
  switch (item.kind) {
    case QueueItem::Kind::Flush: {
      NodeId n = item.node;
      NodeStatus st = net_.node_status[static_cast<std::size_t>(n)];
      if (st == NodeStatus::Crashed) return;  // no further flushes this boot
      if (st == NodeStatus::Paused) {
        auto& slot = nodes_[static_cast<std::size_t>(n)];
        slot.frozen.push_back(std::move(item));
        return;
      }
      flush_node(n);
      QueueItem next;
      next.time = now_ + cfg_.batch_interval_ns;
      next.kind = QueueItem::Kind::Flush;
      next.node = n;
      push(std::move(next));
      return;
    }
    case QueueItem::Kind::Callback:
      item.fn();
      return;
    case QueueItem::Kind::Delivery: {
      // Link-level reachability is evaluated at delivery time.
      if (!net_.reachability[static_cast<std::size_t>(item.src)]
                            [static_cast<std::size_t>(item.node)]) {
        return;
      }
      deliver_or_freeze(item);
      return;
    }
    default:
      deliver_or_freeze(item);
      return;
  }
}

std::vector<Event> Simulator::run_window(std::int64_t duration_ns) {
  if (duration_ns <= 0) throw std::invalid_argument("run_window: duration must be > 0");
  const std::int64_t end = now_ + duration_ns;
  while (!queue_.empty() && queue_.top().time <= end) {
    QueueItem item = queue_.top();
    queue_.pop();
    now_ = item.time;
    process(item);
  }
  now_ = end;
  // Includes anything recorded at the boundary since the previous window.
  std::vector<Event> events = std::move(window_buffer_);
  window_buffer_.clear();
  return events;
}

void Simulator::submit_client_request(NodeId target, std::uint64_t request_id,
                                      const std::string& label,
                                      std::vector<std::uint8_t> payload) {
  open_requests_.emplace(request_id, std::make_pair(target, label));
  record_event(target, EventKind::client_request(label), {});
  // Processing is queued rather than inlined so that submission from outside
  // run_window still executes inside the event loop.
  QueueItem item;
  item.time = now_;
  item.kind = QueueItem::Kind::ClientDeliver;
  item.node = target;
  item.request_id = request_id;
  item.label = label;
  item.payload = std::move(payload);
  push(std::move(item));
}

void Simulator::respond_internal(NodeId n, std::uint64_t request_id,
                                 const std::string& label, bool ok,
                                 std::int64_t value, const std::string& reason) {
  auto it = open_requests_.find(request_id);
  if (it == open_requests_.end()) return;  // already timed out client-side
  open_requests_.erase(it);
  record_event(n, EventKind::client_response(label), {});
  if (response_handler_) response_handler_(request_id, ok, value, reason);
}

void Simulator::close_request(std::uint64_t request_id) {
  auto it = open_requests_.find(request_id);
  if (it == open_requests_.end()) return;
  auto [node, label] = it->second;
  open_requests_.erase(it);
  // The timeout is observed as a failed response at the node that held the
  // request, provided the node is still observable at all.
  record_event(node, EventKind::client_response(label), {});
  if (response_handler_) response_handler_(request_id, false, 0, "timeout");
}

void Simulator::schedule_callback(std::int64_t at_time, std::function<void()> fn) {
  QueueItem item;
  item.time = std::max(at_time, now_);
  item.kind = QueueItem::Kind::Callback;
  item.fn = std::move(fn);
  push(std::move(item));
}

EnactRecord Simulator::enact(const FaultAction& fault, Rng& rng) {
  EnactRecord rec;
  rec.tag = fault.tag;
  const int n = cfg_.node_count;
  auto pick = [&](auto pred) -> NodeId {
    std::vector<NodeId> cands;
    for (NodeId i = 0; i < n; ++i) {
      if (pred(i)) cands.push_back(i);
    }
    if (cands.empty()) return -1;
    return cands[rng.below(cands.size())];
  };
  switch (fault.tag) {
    case FaultAction::Tag::PartitionRandomHalves: {
      std::vector<NodeId> perm(n);
      for (NodeId i = 0; i < n; ++i) perm[i] = i;
      for (int i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
      }
      int cut = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
      rec.half_a.assign(perm.begin(), perm.begin() + cut);
      rec.half_b.assign(perm.begin() + cut, perm.end());
      std::sort(rec.half_a.begin(), rec.half_a.end());
      std::sort(rec.half_b.begin(), rec.half_b.end());
      break;
    }
    case FaultAction::Tag::CrashNode:
      rec.target = fault.target.value_or(
          pick([&](NodeId i) { return status(i) != NodeStatus::Crashed; }));
      break;
    case FaultAction::Tag::RestartNode:
      rec.target = fault.target.value_or(
          pick([&](NodeId i) { return status(i) == NodeStatus::Crashed; }));
      break;
    case FaultAction::Tag::PauseNode:
      rec.target = fault.target.value_or(
          pick([&](NodeId i) { return status(i) == NodeStatus::Running; }));
      break;
    case FaultAction::Tag::ResumeNode:
      rec.target = fault.target.value_or(
          pick([&](NodeId i) { return status(i) == NodeStatus::Paused; }));
      break;
    case FaultAction::Tag::IsolateNode:
      rec.target = fault.target.value_or(
          pick([&](NodeId i) { return status(i) != NodeStatus::Crashed; }));
      break;
    case FaultAction::Tag::RequestMembershipChange:
      rec.membership_remove = fault.target.value_or(
          static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n))));
      break;
    case FaultAction::Tag::HealNetwork:
    case FaultAction::Tag::NoOp:
      break;
  }
  enact_concrete(rec);
  return rec;
}

void Simulator::enact_concrete(const EnactRecord& rec) {
  const int n = cfg_.node_count;
  auto check_target = [&](NodeId t) {
    if (t < 0 || t >= n) {
      throw std::invalid_argument("enact: target node outside cluster");
    }
  };
  switch (rec.tag) {
    case FaultAction::Tag::PartitionRandomHalves: {
      for (NodeId t : rec.half_a) check_target(t);
      for (NodeId t : rec.half_b) check_target(t);
      std::vector<bool> in_a(n, false);
      for (NodeId t : rec.half_a) in_a[static_cast<std::size_t>(t)] = true;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          net_.reachability[i][j] = (i == j) || (in_a[i] == in_a[j]);
        }
      }
      break;
    }
    case FaultAction::Tag::HealNetwork:
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) net_.reachability[i][j] = true;
      }
      break;
    case FaultAction::Tag::CrashNode:
      if (rec.target >= 0) {
        check_target(rec.target);
        if (status(rec.target) != NodeStatus::Crashed) {
          crash_node(rec.target, /*flush_first=*/false);
        }
      }
      break;
    case FaultAction::Tag::RestartNode:
      if (rec.target >= 0) {
        check_target(rec.target);
        if (status(rec.target) == NodeStatus::Crashed) {
          boot_node(rec.target, /*fresh=*/false);
        }
      }
      break;
    case FaultAction::Tag::PauseNode:
      if (rec.target >= 0) {
        check_target(rec.target);
        if (status(rec.target) == NodeStatus::Running) {
          net_.node_status[static_cast<std::size_t>(rec.target)] = NodeStatus::Paused;
        }
      }
      break;
    case FaultAction::Tag::ResumeNode:
      if (rec.target >= 0) {
        check_target(rec.target);
        if (status(rec.target) == NodeStatus::Paused) {
          net_.node_status[static_cast<std::size_t>(rec.target)] = NodeStatus::Running;
          auto& slot = nodes_[static_cast<std::size_t>(rec.target)];
          // Deferred work resumes in its original order.
          while (!slot.frozen.empty()) {
            QueueItem item = std::move(slot.frozen.front());
            slot.frozen.pop_front();
            item.time = now_;
            push(std::move(item));
          }
        }
      }
      break;
    case FaultAction::Tag::IsolateNode:
      if (rec.target >= 0) {
        check_target(rec.target);
        for (int i = 0; i < n; ++i) {
          if (i != rec.target) {
            net_.reachability[static_cast<std::size_t>(rec.target)][i] = false;
            net_.reachability[i][static_cast<std::size_t>(rec.target)] = false;
          }
        }
      }
      break;
    case FaultAction::Tag::RequestMembershipChange:
      if (rec.membership_remove >= 0) {
        check_target(rec.membership_remove);
        if (membership_injector_) membership_injector_(rec.membership_remove);
      }
      break;
    case FaultAction::Tag::NoOp:
      break;
  }
  log_fault(rec);
}

void Simulator::log_fault(const EnactRecord& rec) {
  std::ostringstream os;
  os << "{\"time\":" << now_ << ",\"fault\":\"" << FaultAction::tag_name(rec.tag)
     << "\",\"target\":" << (rec.tag == FaultAction::Tag::RequestMembershipChange
                                 ? rec.membership_remove
                                 : rec.target)
     << ",\"partitions\":[";
  auto sets = net_.partition_sets();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    os << (i ? ",[" : "[");
    for (std::size_t j = 0; j < sets[i].size(); ++j) {
      os << (j ? "," : "") << sets[i][j];
    }
    os << "]";
  }
  os << "]}";
  netlog_.push_back(os.str());
}

std::vector<Batch> Simulator::drain_batches() {
  auto out = std::move(batches_);
  batches_.clear();
  return out;
}

std::vector<std::pair<std::uint32_t, ClockRef>> Simulator::drain_clock_announcements(NodeId n) {
  auto out = std::move(clock_announcements_[static_cast<std::size_t>(n)]);
  clock_announcements_[static_cast<std::size_t>(n)].clear();
  return out;
}

std::vector<LogLine> Simulator::drain_logs() {
  auto out = std::move(logs_);
  logs_.clear();
  return out;
}

std::vector<AssertionRecord> Simulator::drain_assertions() {
  auto out = std::move(assertions_);
  assertions_.clear();
  return out;
}

std::vector<LeadershipRecord> Simulator::drain_leadership() {
  auto out = std::move(leadership_);
  leadership_.clear();
  return out;
}

std::vector<std::string> Simulator::drain_netlog() {
  auto out = std::move(netlog_);
  netlog_.clear();
  return out;
}

Rng& NodeCtx::rng() { return sim_.nodes_[static_cast<std::size_t>(self_)].rng; }

std::uint64_t NodeCtx::set_timer(std::int64_t delay_ns, std::uint32_t timer_id) {
  if (delay_ns <= 0) throw std::invalid_argument("set_timer: delay must be > 0");
  std::uint64_t token = ++sim_.timer_token_seq_;
  Simulator::QueueItem item;
  item.time = sim_.now_ + delay_ns;
  item.kind = Simulator::QueueItem::Kind::Timer;
  item.node = self_;
  item.timer_id = timer_id;
  item.token = token;
  sim_.push(std::move(item));
  return token;
}

void NodeCtx::log(std::string text) {
  sim_.logs_.push_back(LogLine{self_, sim_.now_, std::move(text)});
}

void NodeCtx::notify_leader(std::int64_t term) {
  sim_.leadership_.push_back(LeadershipRecord{self_, sim_.now_, term});
}

void NodeCtx::fatal(const std::string& detail) {
  log("fatal: " + detail);
  sim_.assertions_.push_back(AssertionRecord{self_, sim_.now_, detail});
  // The process aborts; its observer survives and submits the tail of the
  // event buffer before the node goes dark.
  sim_.crash_node(self_, /*flush_first=*/true);
}

}  // namespace tlfuzz
