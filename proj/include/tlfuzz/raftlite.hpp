#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tlfuzz/netsim.hpp"

namespace tlfuzz {

// Instrumented code points the replica reports while it runs.
namespace code {
inline constexpr std::uint32_t kStartElection = 1;
inline constexpr std::uint32_t kBecomeLeader = 2;
inline constexpr std::uint32_t kAppendEntries = 3;
inline constexpr std::uint32_t kCommitEntry = 4;
inline constexpr std::uint32_t kTakeSnapshot = 5;
inline constexpr std::uint32_t kDeleteConflictingEntries = 6;
inline constexpr std::uint32_t kMembershipRollback = 7;
inline constexpr std::uint32_t kInstallSnapshot = 8;
}  // namespace code

// code_id -> label mapping, fixed at startup. Exported as JSON so reports and
// DOT renders show readable event names.
class InstrumentationRegistry {
 public:
  static InstrumentationRegistry standard();

  void add(std::uint32_t id, std::string label);  // throws on duplicates
  const std::string& label(std::uint32_t id) const;
  std::string label_for(const EventKind& kind) const;  // any kind, readable
  std::string to_json() const;

 private:
  std::map<std::uint32_t, std::string> labels_;
  std::set<std::string> seen_labels_;
};

// Per-defect switches. All off reproduces the fixed behaviour used by the
// protocol property tests; campaigns enable one or more.
struct RaftBugs {
  bool membership_rollback = false;  // snapshot may cover an uncommitted
                                     // config entry; rollback then asserts
  bool even_quorum = false;          // majority off-by-one for even clusters,
                                     // armed after repeated failed elections
  bool stale_read = false;           // leaders serve reads without a quorum
                                     // round; deposed leaders return old data
};

struct RaftTuning {
  std::int64_t election_timeout_min_ns = 150'000'000;
  std::int64_t election_timeout_max_ns = 300'000'000;
  std::int64_t fixed_election_timeout_ns = 200'000'000;  // armed even_quorum mode
  std::int64_t heartbeat_interval_ns = 50'000'000;
  int snapshot_threshold = 4;
  RaftBugs bugs;
};

struct LogEntry {
  enum class Kind : std::uint8_t { Write, ConfigChange };
  std::int64_t term = 0;
  Kind kind = Kind::Write;
  std::int32_t key = 0;
  std::int64_t value = 0;
  std::vector<NodeId> members;  // ConfigChange only
};

struct SnapshotState {
  std::int64_t last_index = 0;
  std::int64_t last_term = 0;
  std::map<std::int32_t, std::int64_t> kv;
  std::vector<NodeId> config;  // in use at the snapshot point
  std::int64_t committed_config_index = 0;
  // Correct compaction keeps the last committed configuration entry fetchable
  // even once its index is inside the snapshot; the seeded defect drops it.
  bool has_retained_config_entry = false;
  LogEntry retained_config_entry;
};

enum class Role : std::uint8_t { Follower, Candidate, Leader };

// Client operations, carried opaquely through the simulator.
struct ClientOp {
  enum class Kind : std::uint8_t { Write, Read, RemoveNode };
  Kind kind = Kind::Read;
  std::int32_t key = 0;
  std::int64_t value = 0;
  NodeId node = -1;

  std::vector<std::uint8_t> encode() const;
  static ClientOp decode(const std::vector<std::uint8_t>&);
  const char* label() const;
};

// A compact Raft-like replica: leader election, log replication, commit,
// snapshotting and single-node membership removal. Pure state machine driven
// by the simulator loop.
class RaftNode : public SutNode {
 public:
  RaftNode(NodeId self, int cluster_size, RaftTuning tuning);

  void boot(NodeCtx& ctx, bool fresh_state) override;
  void on_timer(NodeCtx& ctx, std::uint32_t timer_id, std::uint64_t token) override;
  void on_message(NodeCtx& ctx, NodeId src,
                  const std::vector<std::uint8_t>& payload) override;
  void on_client_request(NodeCtx& ctx, std::uint64_t request_id,
                         const std::string& label,
                         const std::vector<std::uint8_t>& payload) override;

  // Compacts the log up to the commit point (the seeded variant may take in
  // uncommitted entries; see RaftBugs). Precondition: enough entries since
  // the previous snapshot.
  void take_snapshot(NodeCtx& ctx);

  // State inspection for tests and oracles.
  Role role() const { return role_; }
  std::int64_t term() const { return current_term_; }
  std::int64_t commit_index() const { return commit_index_; }
  std::int64_t last_index() const;
  std::int64_t snapshot_index() const { return snapshot_.last_index; }
  const SnapshotState& snapshot() const { return snapshot_; }
  const std::vector<NodeId>& config() const { return config_; }
  std::int64_t config_index() const { return config_index_; }
  std::int64_t uncommitted_config_index() const { return uncommitted_config_index_; }
  const std::map<std::int32_t, std::int64_t>& kv() const { return kv_; }
  const LogEntry* log_get(std::int64_t index) const;  // nullptr if compacted/absent
  std::vector<std::pair<std::int64_t, LogEntry>> log_entries() const;
  int failed_elections() const { return failed_elections_; }

 private:
  struct PendingAck {
    std::uint64_t request_id;
    std::string label;
    std::int64_t value;  // echoed on success
  };
  struct PendingRead {
    std::uint64_t request_id;
    std::string label;
    std::int32_t key;
    std::uint64_t need_round;
  };

  bool is_member(NodeId n) const;
  std::size_t quorum() const;
  bool armed_even_quorum() const;
  std::int64_t term_at(std::int64_t index) const;
  void apply_committed(NodeCtx& ctx);
  void advance_commit_leader(NodeCtx& ctx);
  void set_commit(NodeCtx& ctx, std::int64_t new_commit);
  void become_follower(NodeCtx& ctx, std::int64_t term);
  void become_leader(NodeCtx& ctx);
  void start_election(NodeCtx& ctx);
  void arm_election_timer(NodeCtx& ctx);
  void heartbeat_round(NodeCtx& ctx);
  void send_append(NodeCtx& ctx, NodeId peer);
  void replicate_now(NodeCtx& ctx);
  void maybe_snapshot(NodeCtx& ctx);
  // Both return false when the seeded assertion fired and the node is gone.
  bool truncate_from(NodeCtx& ctx, std::int64_t first_bad);
  bool membership_rollback(NodeCtx& ctx);
  void serve_ready_reads(NodeCtx& ctx);
  void derive_config_from_state();

  // Message handlers.
  void handle_request_vote(NodeCtx& ctx, NodeId src, std::int64_t term,
                           std::int64_t last_log_index, std::int64_t last_log_term);
  void handle_vote_reply(NodeCtx& ctx, NodeId src, std::int64_t term, bool granted);
  void handle_append(NodeCtx& ctx, NodeId src, struct AppendMsg& msg);
  void handle_append_reply(NodeCtx& ctx, NodeId src, struct AppendReplyMsg& msg);
  void handle_install_snapshot(NodeCtx& ctx, NodeId src, std::int64_t term,
                               SnapshotState snap);

  NodeId self_;
  int cluster_size_;
  RaftTuning tuning_;

  // Persistent across restarts.
  std::int64_t current_term_ = 0;
  NodeId voted_for_ = -1;
  std::vector<LogEntry> log_;  // log_[i] holds index snapshot_.last_index + 1 + i
  SnapshotState snapshot_;

  // Volatile.
  Role role_ = Role::Follower;
  std::int64_t commit_index_ = 0;
  std::int64_t last_applied_ = 0;
  std::map<std::int32_t, std::int64_t> kv_;
  std::vector<NodeId> config_;
  std::int64_t config_index_ = 0;
  std::int64_t uncommitted_config_index_ = 0;
  NodeId leader_id_ = -1;
  int failed_elections_ = 0;
  std::set<NodeId> votes_;
  std::uint64_t election_token_ = 0;
  std::uint64_t heartbeat_token_ = 0;
  std::uint64_t hb_round_ = 0;
  std::map<NodeId, std::int64_t> next_index_;
  std::map<NodeId, std::int64_t> match_index_;
  std::map<NodeId, std::uint64_t> acked_round_;
  std::map<std::int64_t, PendingAck> pending_acks_;  // log index -> client
  std::vector<PendingRead> pending_reads_;
};

}  // namespace tlfuzz
