#include "tlfuzz/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tlfuzz/config.hpp"

namespace tlfuzz {

namespace {

constexpr std::uint64_t kSignatureSeed = 0x7A11E57A11E57ull;

std::uint64_t fnv64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string lower(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

}  // namespace

std::vector<FaultAction::Tag> CampaignConfig::effective_alphabet() const {
  if (!alphabet.empty()) return alphabet;
  std::vector<FaultAction::Tag> all;
  for (int i = 0; i < FaultAction::kTagCount; ++i) {
    all.push_back(static_cast<FaultAction::Tag>(i));
  }
  return all;
}

void CampaignConfig::validate() const {
  sim.validate();
  if (steps_per_schedule < 1) {
    throw std::invalid_argument("schedule.steps_per_schedule: must be >= 1");
  }
  if (window_ns <= sim.max_latency_ns) {
    throw std::invalid_argument("schedule.window_ns: must exceed the maximum latency");
  }
  if (reset_ns <= 0) throw std::invalid_argument("schedule.reset_ns: must be > 0");
  if (budget_steps < 1) throw std::invalid_argument("schedule.budget_steps: must be >= 1");
  if (epsilon <= 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("learning.epsilon: must be in (0, 1]");
  }
  if (minhash_k < 1) throw std::invalid_argument("learning.minhash_k: must be >= 1");
  if (alpha <= 0.0 || alpha > 1.0) {
    throw std::invalid_argument("learning.alpha: must be in (0, 1]");
  }
  if (gamma <= 0.0 || gamma > 1.0) {
    throw std::invalid_argument("learning.gamma: must be in (0, 1]");
  }
  if (workload.requests_per_window < 1) {
    throw std::invalid_argument("workload.requests_per_window: must be >= 1");
  }
  if (workload.write_fraction < 0.0 || workload.write_fraction > 1.0) {
    throw std::invalid_argument("workload.write_fraction: must be in [0, 1]");
  }
  if (workload.keys < 1) throw std::invalid_argument("workload.keys: must be >= 1");
  if (workload.request_timeout_ns <= 0) {
    throw std::invalid_argument("workload.request_timeout_ns: must be > 0");
  }
  if (oracle.leaderless_window_limit < 1) {
    throw std::invalid_argument("oracle.leaderless_window_limit: must be >= 1");
  }
}

const char* OracleFinding::kind_name(Kind k) {
  switch (k) {
    case Kind::LogKeyword: return "log_keyword";
    case Kind::AssertionFired: return "assertion_fired";
    case Kind::ConsistencyViolation: return "consistency_violation";
    case Kind::NoLeaderTooLong: return "no_leader_too_long";
  }
  return "?";
}

const char* StepRecord::csv_header() {
  return "schedule,step,global_step,prior_state,fault,next_state,was_new,reward,"
         "findings,trace_hash";
}

std::string StepRecord::csv_row() const {
  std::ostringstream os;
  os << schedule << "," << step << "," << global_step << "," << prior_state << ","
     << fault << "," << next_state << "," << (was_new ? 1 : 0) << ","
     << static_cast<long long>(reward) << "," << findings << "," << std::hex
     << trace_hash;
  return os.str();
}

StepRecord StepRecord::from_csv_row(const std::string& row) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= row.size(); ++i) {
    if (i == row.size() || row[i] == ',') {
      parts.push_back(row.substr(start, i - start));
      start = i + 1;
    }
  }
  if (parts.size() != 10) throw std::invalid_argument("steps.csv: bad field count");
  StepRecord r;
  r.schedule = std::stoi(parts[0]);
  r.step = std::stoi(parts[1]);
  r.global_step = std::stoll(parts[2]);
  r.prior_state = std::stoll(parts[3]);
  r.fault = parts[4];
  r.next_state = std::stoll(parts[5]);
  r.was_new = parts[6] == "1";
  r.reward = std::stod(parts[7]);
  r.findings = std::stoi(parts[8]);
  r.trace_hash = std::stoull(parts[9], nullptr, 16);
  return r;
}

std::uint64_t hash_window_events(std::span<const Event> events) {
  std::uint64_t h = 0x9E3779B97F4A7C15ull;
  for (const Event& ev : events) {
    h = mix64(h ^ fnv64(event_to_jsonl(ev)));
  }
  return h;
}

// ---------------------------------------------------------------------------
// OracleChecker

std::vector<OracleFinding> OracleChecker::check(const WindowObservations& obs,
                                                int schedule, int step) {
  std::vector<OracleFinding> out;
  auto add = [&](OracleFinding::Kind kind, NodeId node, std::string detail) {
    OracleFinding f;
    f.kind = kind;
    f.node = node;
    f.schedule = schedule;
    f.step = step;
    f.detail = std::move(detail);
    out.push_back(std::move(f));
  };

  for (const LogLine& line : obs.logs) {
    std::string low = lower(line.text);
    for (const std::string& kw : spec_.keywords) {
      if (low.find(lower(kw)) != std::string::npos) {
        add(OracleFinding::Kind::LogKeyword, line.node,
            "log line matched '" + kw + "': " + line.text);
        break;
      }
    }
  }

  for (const AssertionRecord& a : obs.assertions) {
    add(OracleFinding::Kind::AssertionFired, a.node, a.detail);
  }

  for (const LeadershipRecord& l : obs.leadership) {
    auto [it, inserted] = term_leader_.try_emplace(l.term, l.node);
    if (!inserted && it->second != l.node) {
      add(OracleFinding::Kind::ConsistencyViolation, l.node,
          "two leaders in term " + std::to_string(l.term) + ": node " +
              std::to_string(it->second) + " and node " + std::to_string(l.node));
    }
  }

  if (obs.leader_exists || !obs.fully_connected || !obs.quorum_alive) {
    leaderless_streak_ = 0;
  } else {
    ++leaderless_streak_;
    if (leaderless_streak_ == spec_.leaderless_window_limit + 1) {
      add(OracleFinding::Kind::NoLeaderTooLong, -1,
          "no leader for " + std::to_string(leaderless_streak_) +
              " consecutive windows despite full connectivity");
    }
  }

  for (const SessionOp& op : obs.completed_ops) {
    if (!op.ok) continue;
    if (op.op.kind == ClientOp::Kind::Write) {
      std::int64_t& acked = last_acked_[op.op.key];
      acked = std::max(acked, op.op.value);
    } else if (op.op.kind == ClientOp::Kind::Read) {
      auto it = last_acked_.find(op.op.key);
      if (it != last_acked_.end() && op.value < it->second) {
        add(OracleFinding::Kind::ConsistencyViolation, -1,
            "stale read on key " + std::to_string(op.op.key) + ": got " +
                std::to_string(op.value) + " after acknowledged write " +
                std::to_string(it->second));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SutCluster

SutCluster::SutCluster(const CampaignConfig& cfg, std::uint64_t schedule_seed)
    : cfg_(cfg),
      route_rng_(schedule_seed, 0x2007E),
      workload_rng_(schedule_seed, 0x32C10AD),
      enact_rng_(schedule_seed, 0xE4AC7),
      next_version_(static_cast<std::size_t>(cfg.workload.keys), 0) {
  SimConfig sc = cfg.sim;
  sc.rng_seed = schedule_seed;
  RaftTuning tuning = cfg.raft;
  int n = sc.node_count;
  sim_ = std::make_unique<Simulator>(
      sc, [n, tuning](NodeId id) { return std::make_unique<RaftNode>(id, n, tuning); });
  sim_->set_response_handler(
      [this](std::uint64_t id, bool ok, std::int64_t value, const std::string& reason) {
        on_response(id, ok, value, reason);
      });
  sim_->set_membership_injector([this](NodeId remove) { inject_membership(remove); });
  request_gap_ns_ = cfg.window_ns / cfg.workload.requests_per_window;
  schedule_session(sim_->now() + request_gap_ns_);
}

RaftNode& SutCluster::raft(NodeId n) { return static_cast<RaftNode&>(sim_->sut(n)); }
const RaftNode& SutCluster::raft(NodeId n) const {
  return static_cast<const RaftNode&>(const_cast<SutCluster*>(this)->sim_->sut(n));
}

std::vector<Event> SutCluster::run_window(std::int64_t duration_ns) {
  return sim_->run_window(duration_ns);
}

EnactRecord SutCluster::enact(FaultAction::Tag tag) {
  FaultAction fault;
  fault.tag = tag;
  return sim_->enact(fault, enact_rng_);
}

void SutCluster::enact_concrete(const EnactRecord& rec) { sim_->enact_concrete(rec); }

void SutCluster::schedule_session(std::int64_t at) {
  sim_->schedule_callback(at, [this] { issue_session_request(); });
}

NodeId SutCluster::route_target() {
  std::vector<NodeId> leaders;
  std::vector<NodeId> running;
  for (NodeId n = 0; n < cfg_.sim.node_count; ++n) {
    if (sim_->status(n) != NodeStatus::Running) continue;
    running.push_back(n);
    if (raft(n).role() == Role::Leader) leaders.push_back(n);
  }
  if (!leaders.empty()) return leaders[route_rng_.below(leaders.size())];
  if (!running.empty()) return running[route_rng_.below(running.size())];
  return -1;
}

void SutCluster::issue_session_request() {
  if (session_pending_) {
    schedule_session(sim_->now() + request_gap_ns_);
    return;
  }
  NodeId target = route_target();
  if (target < 0) {
    schedule_session(sim_->now() + request_gap_ns_);
    return;
  }
  ClientOp op;
  if (workload_rng_.next_double() < cfg_.workload.write_fraction) {
    op.kind = ClientOp::Kind::Write;
    op.key = static_cast<std::int32_t>(
        workload_rng_.below(static_cast<std::uint64_t>(cfg_.workload.keys)));
    op.value = ++next_version_[static_cast<std::size_t>(op.key)];
  } else {
    op.kind = ClientOp::Kind::Read;
    op.key = static_cast<std::int32_t>(
        workload_rng_.below(static_cast<std::uint64_t>(cfg_.workload.keys)));
  }
  std::uint64_t id = ++next_request_id_;
  SessionOp rec;
  rec.id = id;
  rec.op = op;
  session_pending_ = rec;
  sim_->submit_client_request(target, id, op.label(), op.encode());
  sim_->schedule_callback(sim_->now() + cfg_.workload.request_timeout_ns,
                          [this, id] { sim_->close_request(id); });
}

std::uint64_t SutCluster::submit_op(NodeId target, const ClientOp& op) {
  std::uint64_t id = ++next_request_id_;
  sim_->submit_client_request(target, id, op.label(), op.encode());
  sim_->schedule_callback(sim_->now() + cfg_.workload.request_timeout_ns,
                          [this, id] { sim_->close_request(id); });
  return id;
}

void SutCluster::inject_membership(NodeId remove) {
  NodeId target = route_target();
  if (target < 0) return;
  ClientOp op;
  op.kind = ClientOp::Kind::RemoveNode;
  op.node = remove;
  submit_op(target, op);
}

void SutCluster::on_response(std::uint64_t id, bool ok, std::int64_t value,
                             const std::string& reason) {
  if (!session_pending_ || session_pending_->id != id) return;  // scripted op
  SessionOp done = *session_pending_;
  session_pending_.reset();
  done.ok = ok;
  done.value = value;
  done.reason = reason;
  completed_.push_back(std::move(done));
  schedule_session(sim_->now() + request_gap_ns_);
}

std::vector<SessionOp> SutCluster::drain_completed_ops() {
  auto out = std::move(completed_);
  completed_.clear();
  return out;
}

bool SutCluster::leader_exists() const {
  for (NodeId n = 0; n < cfg_.sim.node_count; ++n) {
    if (sim_->status(n) == NodeStatus::Running && raft(n).role() == Role::Leader) {
      return true;
    }
  }
  return false;
}

bool SutCluster::quorum_alive() const {
  int running = 0;
  for (NodeId n = 0; n < cfg_.sim.node_count; ++n) {
    if (sim_->status(n) == NodeStatus::Running) ++running;
  }
  return running >= cfg_.sim.node_count / 2 + 1;
}

int SutCluster::min_config_size() const {
  int best = 0;
  for (NodeId n = 0; n < cfg_.sim.node_count; ++n) {
    if (sim_->status(n) != NodeStatus::Running) continue;
    int sz = static_cast<int>(raft(n).config().size());
    if (best == 0 || sz < best) best = sz;
  }
  return best;
}

std::vector<bool> SutCluster::action_mask(
    const std::vector<FaultAction::Tag>& alphabet) const {
  int crashed = 0, paused = 0, running = 0;
  for (NodeId n = 0; n < cfg_.sim.node_count; ++n) {
    switch (sim_->status(n)) {
      case NodeStatus::Crashed: ++crashed; break;
      case NodeStatus::Paused: ++paused; break;
      case NodeStatus::Running: ++running; break;
    }
  }
  std::vector<bool> mask(alphabet.size(), true);
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    switch (alphabet[i]) {
      case FaultAction::Tag::RestartNode: mask[i] = crashed > 0; break;
      case FaultAction::Tag::ResumeNode: mask[i] = paused > 0; break;
      case FaultAction::Tag::PauseNode: mask[i] = running > 0; break;
      case FaultAction::Tag::CrashNode:
      case FaultAction::Tag::IsolateNode:
        mask[i] = crashed < cfg_.sim.node_count;
        break;
      case FaultAction::Tag::HealNetwork:
        mask[i] = !sim_->network().fully_connected();
        break;
      case FaultAction::Tag::RequestMembershipChange:
        mask[i] = running > 0 && min_config_size() > 3;
        break;
      default: break;
    }
  }
  bool any = false;
  for (bool b : mask) any = any || b;
  if (!any) mask[0] = true;  // alphabet always retains one viable action
  return mask;
}

// ---------------------------------------------------------------------------
// Campaign loop

bool CampaignResult::any_assertion() const {
  for (const OracleFinding& f : findings) {
    if (f.kind == OracleFinding::Kind::AssertionFired) return true;
  }
  return false;
}

namespace {

void sync_mediator(SutCluster& cluster, Timeline& timeline, int node_count) {
  for (NodeId n = 0; n < node_count; ++n) {
    for (auto& [epoch, clock] : cluster.sim().drain_clock_announcements(n)) {
      timeline.announce_clock(n, epoch, clock);
    }
  }
  for (Batch& b : cluster.sim().drain_batches()) timeline.ingest(std::move(b));
  for (NodeId n = 0; n < node_count; ++n) {
    timeline.set_dead(n, cluster.sim().status(n) == NodeStatus::Crashed);
  }
}

int alphabet_index(const std::vector<FaultAction::Tag>& alphabet, FaultAction::Tag t) {
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    if (alphabet[i] == t) return static_cast<int>(i);
  }
  throw std::invalid_argument("replay: fault not in the configured alphabet");
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg, std::uint64_t seed,
                            CampaignMode mode,
                            const std::vector<EnactRecord>* forced_faults,
                            const WindowHook& window_hook) {
  cfg.validate();
  const auto alphabet = cfg.effective_alphabet();
  const int node_count = cfg.sim.node_count;

  CampaignResult res;
  res.qtable = std::make_unique<QTable>(static_cast<int>(alphabet.size()), cfg.alpha,
                                        cfg.gamma);
  // State 0 is the post-reset steady state: the empty summary.
  res.registry.classify(signature(EventHistory{}, cfg.minhash_k, kSignatureSeed),
                        cfg.epsilon);
  res.registry.note_first_seen(0, -1);

  Rng policy_rng(seed, 0x90CCC);
  Rng baseline_rng(seed, 0xBA5E);

  std::int64_t global_step = 0;
  bool stop = false;
  for (int schedule = 0; !stop && global_step < cfg.budget_steps; ++schedule) {
    std::uint64_t schedule_seed =
        mix64(seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(schedule) + 1));
    SutCluster cluster(cfg, schedule_seed);
    Timeline timeline(node_count, cfg.sim.skew_bound_ns);
    AbstractionRunner<EventHistory> runner(node_count);
    OracleChecker oracle(cfg.oracle);
    std::vector<std::string> fault_prefix;

    auto attach_refs = [&](std::vector<OracleFinding>&& finds, bool* asserted) {
      for (OracleFinding& f : finds) {
        f.campaign_seed = seed;
        f.schedule_seed = schedule_seed;
        f.fault_prefix = fault_prefix;
        if (asserted && f.kind == OracleFinding::Kind::AssertionFired) {
          *asserted = true;
        }
        res.findings.push_back(std::move(f));
      }
    };

    // Reset period: the rebuilt cluster reaches a steady healthy state, then
    // the summary restarts empty.
    std::vector<Event> warm_events = cluster.run_window(cfg.reset_ns);
    sync_mediator(cluster, timeline, node_count);
    TimelineGraph warm_graph = timeline.build_prefix_closed();
    runner.extend(warm_graph);
    runner.reset();
    timeline.retire(warm_graph.cut());
    {
      WindowObservations obs;
      obs.events = warm_events;
      obs.logs = cluster.sim().drain_logs();
      obs.assertions = cluster.sim().drain_assertions();
      obs.leadership = cluster.sim().drain_leadership();
      obs.completed_ops = cluster.drain_completed_ops();
      obs.fully_connected = cluster.sim().network().fully_connected();
      obs.quorum_alive = cluster.quorum_alive();
      obs.leader_exists = cluster.leader_exists();
      attach_refs(oracle.check(obs, schedule, -1), nullptr);
    }
    for (auto& line : cluster.sim().drain_netlog()) res.netlog.push_back(line);

    StateId cur = 0;
    for (int step = 0; step < cfg.steps_per_schedule && global_step < cfg.budget_steps;
         ++step) {
      EnactRecord rec;
      int action = -1;
      if (forced_faults) {
        if (static_cast<std::size_t>(global_step) >= forced_faults->size()) {
          stop = true;
          break;
        }
        rec = (*forced_faults)[static_cast<std::size_t>(global_step)];
        action = alphabet_index(alphabet, rec.tag);
        cluster.enact_concrete(rec);
      } else if (mode == CampaignMode::Guided) {
        std::vector<bool> mask = cluster.action_mask(alphabet);
        action = res.qtable->select(cur, policy_rng, &mask);
        rec = cluster.enact(alphabet[static_cast<std::size_t>(action)]);
      } else {
        action = static_cast<int>(baseline_rng.below(alphabet.size()));
        rec = cluster.enact(alphabet[static_cast<std::size_t>(action)]);
      }
      fault_prefix.push_back(rec.encode());

      std::vector<Event> events = cluster.run_window(cfg.window_ns);
      sync_mediator(cluster, timeline, node_count);
      TimelineGraph g = timeline.build_prefix_closed();
      runner.extend(g);
      EventHistory sink = runner.sink();
      if (window_hook) window_hook(schedule, step, g);
      timeline.retire(g.cut());

      StateSignature sig = signature(sink, cfg.minhash_k, kSignatureSeed);
      Classification cls = res.registry.classify(sig, cfg.epsilon);
      if (cls.is_new) res.registry.note_first_seen(cls.id, global_step);
      double reward = QTable::reward(cur, action, cls.id, cls.is_new);
      if (mode == CampaignMode::Guided && !forced_faults) {
        res.qtable->update(cur, action, reward, cls.id);
      }

      WindowObservations obs;
      obs.events = events;
      obs.logs = cluster.sim().drain_logs();
      obs.assertions = cluster.sim().drain_assertions();
      obs.leadership = cluster.sim().drain_leadership();
      obs.completed_ops = cluster.drain_completed_ops();
      obs.fully_connected = cluster.sim().network().fully_connected();
      obs.quorum_alive = cluster.quorum_alive();
      obs.leader_exists = cluster.leader_exists();
      bool asserted = false;
      std::vector<OracleFinding> finds = oracle.check(obs, schedule, step);
      int finding_count = static_cast<int>(finds.size());
      attach_refs(std::move(finds), &asserted);

      StepRecord srec;
      srec.schedule = schedule;
      srec.step = step;
      srec.global_step = global_step;
      srec.prior_state = cur;
      srec.fault = rec.encode();
      srec.next_state = cls.id;
      srec.was_new = cls.is_new;
      srec.reward = reward;
      srec.findings = finding_count;
      srec.trace_hash = hash_window_events(events);
      res.steps.push_back(std::move(srec));

      if (cfg.emit_trace) {
        for (const Event& ev : events) res.trace_lines.push_back(event_to_jsonl(ev));
      }
      for (auto& line : cluster.sim().drain_netlog()) res.netlog.push_back(line);

      cur = cls.id;
      ++global_step;
      if (cfg.stop_on_assertion && asserted) {
        stop = true;
        break;
      }
    }
  }
  return res;
}

std::vector<EventHistory> collect_steady_summaries(const CampaignConfig& cfg,
                                                   std::uint64_t seed, int windows) {
  CampaignConfig steady = cfg;
  steady.validate();
  const int node_count = steady.sim.node_count;
  std::vector<EventHistory> out;
  out.reserve(static_cast<std::size_t>(windows));
  for (int w = 0; w < windows; ++w) {
    std::uint64_t schedule_seed =
        mix64(seed + 0xC0FFEEull + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(w));
    SutCluster cluster(steady, schedule_seed);
    Timeline timeline(node_count, steady.sim.skew_bound_ns);
    AbstractionRunner<EventHistory> runner(node_count);
    cluster.run_window(steady.reset_ns);
    sync_mediator(cluster, timeline, node_count);
    TimelineGraph warm = timeline.build_prefix_closed();
    runner.extend(warm);
    runner.reset();
    timeline.retire(warm.cut());
    cluster.run_window(steady.window_ns);
    sync_mediator(cluster, timeline, node_count);
    TimelineGraph g = timeline.build_prefix_closed();
    runner.extend(g);
    out.push_back(runner.sink());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campaign directory I/O

void write_campaign_dir(const std::string& dir, const std::string& config_json,
                        std::uint64_t seed, CampaignMode mode,
                        const CampaignResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + dir + "/" + name);
    out << content;
  };

  ParsedConfig parsed = parse_config_text(config_json);
  std::vector<std::string> action_names;
  for (FaultAction::Tag t : parsed.cfg.effective_alphabet()) {
    action_names.push_back(FaultAction::tag_name(t));
  }

  nlohmann::ordered_json meta;
  meta["version"] = kToolVersion;
  meta["seed"] = seed;
  meta["mode"] = mode == CampaignMode::Guided ? "guided" : "baseline";
  meta["steps"] = result.steps.size();
  meta["distinct_states"] = result.registry.size();
  meta["findings"] = result.findings.size();
  write_file("meta.json", meta.dump(2) + "\n");
  write_file("config.json", config_json);

  std::ostringstream steps;
  steps << StepRecord::csv_header() << "\n";
  for (const StepRecord& r : result.steps) steps << r.csv_row() << "\n";
  write_file("steps.csv", steps.str());

  write_file("states.csv", result.registry.to_csv());
  write_file("qtable.csv", result.qtable->to_csv(action_names));
  write_file("qtable_checkpoint.json",
             result.qtable->checkpoint_json(action_names) + "\n");

  nlohmann::ordered_json findings = nlohmann::ordered_json::array();
  for (const OracleFinding& f : result.findings) {
    nlohmann::ordered_json j;
    j["kind"] = OracleFinding::kind_name(f.kind);
    j["node"] = f.node;
    j["schedule"] = f.schedule;
    j["step"] = f.step;
    j["detail"] = f.detail;
    j["trigger"] = {{"campaign_seed", f.campaign_seed},
                    {"schedule_seed", f.schedule_seed},
                    {"fault_prefix", f.fault_prefix}};
    findings.push_back(std::move(j));
  }
  write_file("findings.json", findings.dump(2) + "\n");

  std::ostringstream netlog;
  for (const std::string& line : result.netlog) netlog << line << "\n";
  write_file("netlog.jsonl", netlog.str());

  if (!result.trace_lines.empty()) {
    std::ostringstream trace;
    for (const std::string& line : result.trace_lines) trace << line << "\n";
    write_file("events.jsonl", trace.str());
  }
  write_file("instrumentation.json",
             InstrumentationRegistry::standard().to_json() + "\n");
}

ReplayOutcome replay_campaign_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  auto read_file = [&](const std::string& name) {
    std::ifstream in(dir + "/" + name, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + dir + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  nlohmann::json meta = nlohmann::json::parse(read_file("meta.json"));
  ReplayOutcome out;
  if (meta["version"].get<std::string>() != kToolVersion) {
    out.version_mismatch = true;
    out.message = "campaign was recorded by '" + meta["version"].get<std::string>() +
                  "', this binary is '" + kToolVersion + "'";
    return out;
  }
  std::uint64_t seed = meta["seed"].get<std::uint64_t>();
  CampaignMode mode = meta["mode"].get<std::string>() == "guided"
                          ? CampaignMode::Guided
                          : CampaignMode::RandomBaseline;

  ParsedConfig parsed = parse_config_text(read_file("config.json"));

  std::vector<StepRecord> expected;
  std::vector<EnactRecord> forced;
  {
    std::istringstream in(read_file("steps.csv"));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      StepRecord r = StepRecord::from_csv_row(line);
      forced.push_back(EnactRecord::decode(r.fault));
      expected.push_back(std::move(r));
    }
  }

  CampaignResult rerun = run_campaign(parsed.cfg, seed, mode, &forced);

  std::size_t n = std::min(expected.size(), rerun.steps.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (expected[i].csv_row() != rerun.steps[i].csv_row()) {
      out.divergence_step = expected[i].global_step;
      out.message = "divergence at step " + std::to_string(expected[i].global_step) +
                    ": recorded [" + expected[i].csv_row() + "] replayed [" +
                    rerun.steps[i].csv_row() + "]";
      return out;
    }
  }
  if (expected.size() != rerun.steps.size()) {
    out.divergence_step = static_cast<std::int64_t>(n);
    out.message = "step count mismatch: recorded " + std::to_string(expected.size()) +
                  ", replayed " + std::to_string(rerun.steps.size());
    return out;
  }
  out.ok = true;
  out.message = "replay matched " + std::to_string(expected.size()) + " steps";
  return out;
}

}  // namespace tlfuzz
