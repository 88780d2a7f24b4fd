#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlfuzz/abstraction.hpp"
#include "tlfuzz/netsim.hpp"
#include "tlfuzz/novelty.hpp"
#include "tlfuzz/policy.hpp"
#include "tlfuzz/raftlite.hpp"
#include "tlfuzz/timeline.hpp"

namespace tlfuzz {

inline constexpr const char* kToolVersion = "tlfuzz 0.1.0";

struct WorkloadSpec {
  int requests_per_window = 4;
  double write_fraction = 0.5;
  int keys = 4;
  std::int64_t request_timeout_ns = 500'000'000;
};

struct OracleSpec {
  std::vector<std::string> keywords = {"fatal", "error", "bug"};
  int leaderless_window_limit = 3;
};

struct CampaignConfig {
  SimConfig sim;
  RaftTuning raft;
  WorkloadSpec workload;
  OracleSpec oracle;
  std::vector<FaultAction::Tag> alphabet;  // empty: full alphabet
  int steps_per_schedule = 12;
  std::int64_t window_ns = 2'500'000'000;
  std::int64_t reset_ns = 5'000'000'000;
  std::int64_t budget_steps = 600;
  double epsilon = 0.70;
  std::uint32_t minhash_k = 128;
  double alpha = 0.1;
  double gamma = 0.6;
  bool emit_trace = true;
  bool stop_on_assertion = false;

  std::vector<FaultAction::Tag> effective_alphabet() const;
  void validate() const;  // throws std::invalid_argument naming the field
};

struct SessionOp {
  std::uint64_t id = 0;
  ClientOp op;
  bool ok = false;
  std::int64_t value = 0;
  std::string reason;
};

struct OracleFinding {
  enum class Kind : std::uint8_t {
    LogKeyword,
    AssertionFired,
    ConsistencyViolation,
    NoLeaderTooLong,
  };
  Kind kind = Kind::LogKeyword;
  NodeId node = -1;
  int schedule = -1;
  int step = -1;  // -1: during reset/warm-up
  std::string detail;
  // Replay reference: re-running the schedule seed with this fault prefix
  // reproduces the finding.
  std::uint64_t campaign_seed = 0;
  std::uint64_t schedule_seed = 0;
  std::vector<std::string> fault_prefix;

  static const char* kind_name(Kind k);
};

struct StepRecord {
  int schedule = 0;
  int step = 0;
  std::int64_t global_step = 0;
  StateId prior_state = 0;
  std::string fault;  // EnactRecord::encode()
  StateId next_state = 0;
  bool was_new = false;
  double reward = 0.0;
  int findings = 0;
  std::uint64_t trace_hash = 0;

  std::string csv_row() const;
  static const char* csv_header();
  static StepRecord from_csv_row(const std::string& row);
};

// Everything the per-window oracles look at.
struct WindowObservations {
  std::span<const Event> events;
  std::vector<LogLine> logs;
  std::vector<AssertionRecord> assertions;
  std::vector<LeadershipRecord> leadership;
  std::vector<SessionOp> completed_ops;
  bool fully_connected = true;
  bool quorum_alive = true;
  bool leader_exists = false;
};

// Log-keyword scan, assertion channel, single-leader-per-term check,
// leaderless-stretch check and the single-session read-your-writes check.
// State persists across the windows of one schedule.
class OracleChecker {
 public:
  explicit OracleChecker(OracleSpec spec) : spec_(std::move(spec)) {}

  std::vector<OracleFinding> check(const WindowObservations& obs, int schedule,
                                   int step);

 private:
  OracleSpec spec_;
  std::map<std::int64_t, NodeId> term_leader_;
  std::map<std::int32_t, std::int64_t> last_acked_;
  int leaderless_streak_ = 0;
};

// One schedule's world: simulator, replicas, client workload and routing.
class SutCluster {
 public:
  SutCluster(const CampaignConfig& cfg, std::uint64_t schedule_seed);

  Simulator& sim() { return *sim_; }
  RaftNode& raft(NodeId n);
  const RaftNode& raft(NodeId n) const;

  std::vector<Event> run_window(std::int64_t duration_ns);
  EnactRecord enact(FaultAction::Tag tag);
  void enact_concrete(const EnactRecord& rec);

  std::vector<SessionOp> drain_completed_ops();
  bool leader_exists() const;
  bool quorum_alive() const;
  int min_config_size() const;
  std::vector<bool> action_mask(const std::vector<FaultAction::Tag>& alphabet) const;

  // Direct client injection for scripted scenarios.
  std::uint64_t submit_op(NodeId target, const ClientOp& op);

 private:
  void issue_session_request();
  void schedule_session(std::int64_t at);
  NodeId route_target();
  void inject_membership(NodeId remove);
  void on_response(std::uint64_t id, bool ok, std::int64_t value,
                   const std::string& reason);

  const CampaignConfig& cfg_;
  std::unique_ptr<Simulator> sim_;
  Rng route_rng_;
  Rng workload_rng_;
  Rng enact_rng_;
  std::int64_t request_gap_ns_;
  std::uint64_t next_request_id_ = 0;
  std::optional<SessionOp> session_pending_;
  std::vector<SessionOp> completed_;
  std::vector<std::int64_t> next_version_;
};

enum class CampaignMode : std::uint8_t { Guided, RandomBaseline };

struct CampaignResult {
  StateRegistry registry;
  std::unique_ptr<QTable> qtable;
  std::vector<StepRecord> steps;
  std::vector<OracleFinding> findings;
  std::vector<std::string> netlog;
  std::vector<std::string> trace_lines;  // populated when emit_trace

  std::int64_t distinct_states() const {
    return static_cast<std::int64_t>(registry.size());
  }
  bool any_assertion() const;
};

// Called after every step's window with the cumulative timeline snapshot,
// before retirement; used for on-demand DOT dumps.
using WindowHook = std::function<void(int schedule, int step, const TimelineGraph&)>;

// The observe-orient-decide-act loop: schedules of S fault steps with fixed
// windows, classification and policy update after every step, full system
// reset between schedules. forced_faults, when given, bypasses selection and
// re-enacts a recorded sequence.
CampaignResult run_campaign(const CampaignConfig& cfg, std::uint64_t seed,
                            CampaignMode mode,
                            const std::vector<EnactRecord>* forced_faults = nullptr,
                            const WindowHook& window_hook = {});

// Fault-free constant-load summaries, one per window, for threshold
// calibration. Each window runs in a freshly reset system.
std::vector<EventHistory> collect_steady_summaries(const CampaignConfig& cfg,
                                                   std::uint64_t seed, int windows);

inline CampaignResult run_baseline_random(const CampaignConfig& cfg,
                                          std::uint64_t seed) {
  return run_campaign(cfg, seed, CampaignMode::RandomBaseline);
}

// Campaign directory I/O.
void write_campaign_dir(const std::string& dir, const std::string& config_json,
                        std::uint64_t seed, CampaignMode mode,
                        const CampaignResult& result);

struct ReplayOutcome {
  bool ok = false;
  bool version_mismatch = false;
  std::int64_t divergence_step = -1;
  std::string message;
};

ReplayOutcome replay_campaign_dir(const std::string& dir);

std::uint64_t hash_window_events(std::span<const Event> events);

}  // namespace tlfuzz
