#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tlfuzz/events.hpp"
#include "tlfuzz/observer.hpp"
#include "tlfuzz/rng.hpp"

namespace tlfuzz {

struct SimConfig {
  NodeId node_count = 5;
  std::uint64_t rng_seed = 1;
  std::int64_t min_latency_ns = 1'000'000;
  std::int64_t max_latency_ns = 10'000'000;
  std::int64_t skew_bound_ns = 100'000'000;
  std::int64_t batch_interval_ns = 100'000'000;

  void validate() const;  // throws std::invalid_argument naming the field
};

struct FaultAction {
  enum class Tag : std::uint8_t {
    PartitionRandomHalves,
    HealNetwork,
    CrashNode,
    RestartNode,
    PauseNode,
    ResumeNode,
    IsolateNode,
    RequestMembershipChange,
    NoOp,
  };
  static constexpr int kTagCount = 9;

  Tag tag = Tag::NoOp;
  std::optional<NodeId> target;  // present iff the tag addresses one node

  static const char* tag_name(Tag t);
  static std::optional<Tag> tag_from_name(std::string_view name);
};

enum class NodeStatus : std::uint8_t { Running, Crashed, Paused };

struct NetworkState {
  std::vector<std::vector<bool>> reachability;  // symmetric, diagonal true
  std::vector<NodeStatus> node_status;

  bool fully_connected() const;
  // Connected components of the reachability graph, each sorted ascending.
  std::vector<std::vector<NodeId>> partition_sets() const;
};

// One enacted fault with all randomness resolved; enough to re-enact the
// exact same state change during replay.
struct EnactRecord {
  FaultAction::Tag tag = FaultAction::Tag::NoOp;
  NodeId target = -1;                            // -1: no single-node target
  std::vector<NodeId> half_a, half_b;            // partition only
  NodeId membership_remove = -1;                 // membership change only

  std::string encode() const;                    // compact token for CSV
  static EnactRecord decode(const std::string&); // throws on malformed input
};

struct LogLine {
  NodeId node;
  std::int64_t time;
  std::string text;
};

struct AssertionRecord {
  NodeId node;
  std::int64_t time;
  std::string detail;
};

struct LeadershipRecord {
  NodeId node;
  std::int64_t time;
  std::int64_t term;
};

class NodeCtx;

// Callbacks the simulator drives. Implemented by the replicated-log node.
class SutNode {
 public:
  virtual ~SutNode() = default;
  virtual void boot(NodeCtx& ctx, bool fresh_state) = 0;
  virtual void on_timer(NodeCtx& ctx, std::uint32_t timer_id, std::uint64_t token) = 0;
  virtual void on_message(NodeCtx& ctx, NodeId src,
                          const std::vector<std::uint8_t>& payload) = 0;
  virtual void on_client_request(NodeCtx& ctx, std::uint64_t request_id,
                                 const std::string& label,
                                 const std::vector<std::uint8_t>& payload) = 0;
};

// Deterministic discrete-event simulator: virtual nodes with skewed clocks,
// message transport with seeded latency, fault enactment, and per-node
// observers that batch events towards the mediator.
class Simulator {
 public:
  using NodeFactory = std::function<std::unique_ptr<SutNode>(NodeId)>;
  using ResponseHandler = std::function<void(std::uint64_t request_id, bool ok,
                                             std::int64_t value,
                                             const std::string& reason)>;

  Simulator(SimConfig cfg, NodeFactory factory);

  // Transport. Emits a PacketSend at src now; delivers (or drops) later.
  PacketId schedule_message(NodeId src, NodeId dst,
                            std::vector<std::uint8_t> payload);

  // Fault enactment. The Rng resolves any open choices (targets, halves);
  // enact_concrete re-applies a fully resolved record.
  EnactRecord enact(const FaultAction& fault, Rng& rng);
  void enact_concrete(const EnactRecord& rec);

  // Advances simulated time, processing everything due in the window.
  // Returns the events observed in the window, in global processing order.
  std::vector<Event> run_window(std::int64_t duration_ns);

  // Client interface. Requests route through here so request/response events
  // are observed at the serving node. close_request enforces the timeout.
  void submit_client_request(NodeId target, std::uint64_t request_id,
                             const std::string& label,
                             std::vector<std::uint8_t> payload);
  void close_request(std::uint64_t request_id);
  void set_response_handler(ResponseHandler h) { response_handler_ = std::move(h); }

  // Arbitrary deterministic callback (used by the workload driver).
  void schedule_callback(std::int64_t at_time, std::function<void()> fn);

  // Invoked when a membership-change fault is enacted; the harness routes the
  // resulting remove-node request into the SUT like any other client request.
  void set_membership_injector(std::function<void(NodeId)> fn) {
    membership_injector_ = std::move(fn);
  }

  std::int64_t now() const { return now_; }
  const SimConfig& config() const { return cfg_; }
  const NetworkState& network() const { return net_; }
  NodeStatus status(NodeId n) const { return net_.node_status.at(static_cast<std::size_t>(n)); }
  SutNode& sut(NodeId n) { return *nodes_.at(static_cast<std::size_t>(n)).sut; }

  // Mediator-side queues, drained by the harness.
  std::vector<Batch> drain_batches();
  std::vector<std::pair<std::uint32_t, ClockRef>> drain_clock_announcements(NodeId n);
  std::vector<LogLine> drain_logs();
  std::vector<AssertionRecord> drain_assertions();
  std::vector<LeadershipRecord> drain_leadership();
  std::vector<std::string> drain_netlog();

 private:
  friend class NodeCtx;

  struct QueueItem {
    std::int64_t time = 0;
    std::uint64_t seq = 0;
    enum class Kind : std::uint8_t { Delivery, Timer, Flush, ClientDeliver, Callback } kind =
        Kind::Callback;
    NodeId node = -1;  // destination / owner
    NodeId src = -1;
    PacketId packet{};
    std::vector<std::uint8_t> payload;
    std::uint32_t timer_id = 0;
    std::uint64_t token = 0;
    std::uint64_t request_id = 0;
    std::string label;
    std::function<void()> fn;
  };
  struct QueueOrder {
    bool operator()(const QueueItem& a, const QueueItem& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  struct NodeSlot {
    std::unique_ptr<SutNode> sut;
    Observer observer;
    std::int64_t boot_time = 0;
    std::int64_t clock_offset = 0;  // fixed per campaign
    std::uint32_t epoch = 0;
    Rng rng;                        // per-node stream, reseeded per boot
    std::map<NodeId, std::int64_t> send_seq;  // per-destination sequence
    std::uint64_t event_seq = 0;    // seq_in_node counter, restarts per boot
    std::deque<QueueItem> frozen;   // deferred while paused
  };

  void push(QueueItem item);
  void process(QueueItem& item);
  void deliver_or_freeze(QueueItem& item);
  void boot_node(NodeId n, bool fresh);
  void crash_node(NodeId n, bool flush_first);
  void record_event(NodeId n, EventKind kind, PacketId packet = {});
  bool observable(NodeId n) const;
  std::int64_t mono_now(NodeId n) const;
  void flush_node(NodeId n);
  void log_fault(const EnactRecord& rec);
  void respond_internal(NodeId n, std::uint64_t request_id, const std::string& label,
                        bool ok, std::int64_t value, const std::string& reason);

  SimConfig cfg_;
  NodeFactory factory_;
  std::int64_t now_ = 0;
  std::uint64_t queue_seq_ = 0;
  std::uint64_t timer_token_seq_ = 0;
  std::priority_queue<QueueItem, std::vector<QueueItem>, QueueOrder> queue_;
  std::vector<NodeSlot> nodes_;
  NetworkState net_;
  Rng latency_rng_;

  std::vector<Event> window_buffer_;  // observed since the last window drain
  std::map<std::uint64_t, std::pair<NodeId, std::string>> open_requests_;
  ResponseHandler response_handler_;
  std::function<void(NodeId)> membership_injector_;

  std::vector<Batch> batches_;
  std::vector<std::vector<std::pair<std::uint32_t, ClockRef>>> clock_announcements_;
  std::vector<LogLine> logs_;
  std::vector<AssertionRecord> assertions_;
  std::vector<LeadershipRecord> leadership_;
  std::vector<std::string> netlog_;

  static constexpr std::size_t kFrozenQueueBound = 1024;
};

// Handle a SUT node uses to act on the world from inside a callback.
class NodeCtx {
 public:
  NodeCtx(Simulator& sim, NodeId self) : sim_(sim), self_(self) {}

  NodeId self() const { return self_; }
  std::int64_t mono_now() const { return sim_.mono_now(self_); }
  Rng& rng();

  void send(NodeId dst, std::vector<std::uint8_t> payload) {
    sim_.schedule_message(self_, dst, std::move(payload));
  }
  void emit(std::uint32_t code_id) { sim_.record_event(self_, EventKind::code(code_id)); }
  std::uint64_t set_timer(std::int64_t delay_ns, std::uint32_t timer_id);
  void log(std::string text);
  void respond(std::uint64_t request_id, const std::string& label, bool ok,
               std::int64_t value, const std::string& reason) {
    sim_.respond_internal(self_, request_id, label, ok, value, reason);
  }
  void notify_leader(std::int64_t term);
  // Seeded-defect escape hatch: reports through the assertion channel and
  // halts the node, without taking the harness down.
  void fatal(const std::string& detail);

 private:
  Simulator& sim_;
  NodeId self_;
};

}  // namespace tlfuzz
