#include "tlfuzz/raftlite.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tlfuzz {

namespace {

constexpr std::uint32_t kElectionTimer = 1;
constexpr std::uint32_t kHeartbeatTimer = 2;

enum class MsgType : std::uint8_t {
  RequestVote = 1,
  VoteReply = 2,
  Append = 3,
  AppendReply = 4,
  InstallSnapshot = 5,
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}
  std::uint8_t u8() {
    check(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    check(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    check(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

 private:
  void check(std::size_t n) {
    if (pos_ + n > buf_.size()) throw std::invalid_argument("message: truncated payload");
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

void write_entry(ByteWriter& w, const LogEntry& e) {
  w.i64(e.term);
  w.u8(static_cast<std::uint8_t>(e.kind));
  w.i32(e.key);
  w.i64(e.value);
  w.u32(static_cast<std::uint32_t>(e.members.size()));
  for (NodeId m : e.members) w.i32(m);
}

LogEntry read_entry(ByteReader& r) {
  LogEntry e;
  e.term = r.i64();
  e.kind = static_cast<LogEntry::Kind>(r.u8());
  e.key = r.i32();
  e.value = r.i64();
  std::uint32_t n = r.u32();
  e.members.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) e.members.push_back(r.i32());
  return e;
}

void write_snapshot(ByteWriter& w, const SnapshotState& s) {
  w.i64(s.last_index);
  w.i64(s.last_term);
  w.i64(s.committed_config_index);
  w.u32(static_cast<std::uint32_t>(s.kv.size()));
  for (const auto& [k, v] : s.kv) {
    w.i32(k);
    w.i64(v);
  }
  w.u32(static_cast<std::uint32_t>(s.config.size()));
  for (NodeId m : s.config) w.i32(m);
  w.u8(s.has_retained_config_entry ? 1 : 0);
  if (s.has_retained_config_entry) write_entry(w, s.retained_config_entry);
}

SnapshotState read_snapshot(ByteReader& r) {
  SnapshotState s;
  s.last_index = r.i64();
  s.last_term = r.i64();
  s.committed_config_index = r.i64();
  std::uint32_t nk = r.u32();
  for (std::uint32_t i = 0; i < nk; ++i) {
    std::int32_t k = r.i32();
    s.kv[k] = r.i64();
  }
  std::uint32_t nc = r.u32();
  for (std::uint32_t i = 0; i < nc; ++i) s.config.push_back(r.i32());
  s.has_retained_config_entry = r.u8() != 0;
  if (s.has_retained_config_entry) s.retained_config_entry = read_entry(r);
  return s;
}

}  // namespace

struct AppendMsg {
  std::int64_t term = 0;
  std::int64_t prev_index = 0;
  std::int64_t prev_term = 0;
  std::int64_t leader_commit = 0;
  std::uint64_t round = 0;
  std::vector<LogEntry> entries;
};

struct AppendReplyMsg {
  std::int64_t term = 0;
  bool success = false;
  std::int64_t match_index = 0;
  std::int64_t hint_index = 0;
  std::uint64_t round = 0;
  bool needs_snapshot = false;
};

// ---------------------------------------------------------------------------
// InstrumentationRegistry

InstrumentationRegistry InstrumentationRegistry::standard() {
  InstrumentationRegistry reg;
  reg.add(code::kStartElection, "StartElection");
  reg.add(code::kBecomeLeader, "BecomeLeader");
  reg.add(code::kAppendEntries, "AppendEntries");
  reg.add(code::kCommitEntry, "CommitEntry");
  reg.add(code::kTakeSnapshot, "TakeSnapshot");
  reg.add(code::kDeleteConflictingEntries, "DeleteConflictingEntries");
  reg.add(code::kMembershipRollback, "MembershipRollback");
  reg.add(code::kInstallSnapshot, "InstallSnapshot");
  return reg;
}

void InstrumentationRegistry::add(std::uint32_t id, std::string label) {
  if (labels_.count(id) || seen_labels_.count(label)) {
    throw std::invalid_argument("instrumentation registry: duplicate entry");
  }
  seen_labels_.insert(label);
  labels_[id] = std::move(label);
}

const std::string& InstrumentationRegistry::label(std::uint32_t id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) {
    throw std::out_of_range("instrumentation registry: unknown code id");
  }
  return it->second;
}

std::string InstrumentationRegistry::label_for(const EventKind& kind) const {
  switch (kind.tag) {
    case EventKind::Tag::PacketSend: return "Send";
    case EventKind::Tag::PacketRecv: return "Recv";
    case EventKind::Tag::ClientRequest: return "Req(" + kind.op_label + ")";
    case EventKind::Tag::ClientResponse: return "Resp(" + kind.op_label + ")";
    case EventKind::Tag::CodeEvent: {
      auto it = labels_.find(kind.code_id);
      return it == labels_.end() ? "Code#" + std::to_string(kind.code_id) : it->second;
    }
  }
  return "?";
}

std::string InstrumentationRegistry::to_json() const {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (const auto& [id, label] : labels_) {
    os << (first ? "" : ",") << "\"" << id << "\":\"" << label << "\"";
    first = false;
  }
  os << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// ClientOp

std::vector<std::uint8_t> ClientOp::encode() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  w.i32(key);
  w.i64(value);
  w.i32(node);
  return w.take();
}

ClientOp ClientOp::decode(const std::vector<std::uint8_t>& buf) {
  ByteReader r(buf);
  ClientOp op;
  op.kind = static_cast<Kind>(r.u8());
  op.key = r.i32();
  op.value = r.i64();
  op.node = r.i32();
  return op;
}

const char* ClientOp::label() const {
  switch (kind) {
    case Kind::Write: return "write";
    case Kind::Read: return "read";
    case Kind::RemoveNode: return "remove_node";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// RaftNode

RaftNode::RaftNode(NodeId self, int cluster_size, RaftTuning tuning)
    : self_(self), cluster_size_(cluster_size), tuning_(std::move(tuning)) {}

std::int64_t RaftNode::last_index() const {
  return snapshot_.last_index + static_cast<std::int64_t>(log_.size());
}

const LogEntry* RaftNode::log_get(std::int64_t index) const {
  if (index > snapshot_.last_index && index <= last_index()) {
    return &log_[static_cast<std::size_t>(index - snapshot_.last_index - 1)];
  }
  if (index == snapshot_.committed_config_index && snapshot_.has_retained_config_entry) {
    return &snapshot_.retained_config_entry;
  }
  return nullptr;
}

std::vector<std::pair<std::int64_t, LogEntry>> RaftNode::log_entries() const {
  std::vector<std::pair<std::int64_t, LogEntry>> out;
  for (std::size_t i = 0; i < log_.size(); ++i) {
    out.emplace_back(snapshot_.last_index + 1 + static_cast<std::int64_t>(i), log_[i]);
  }
  return out;
}

std::int64_t RaftNode::term_at(std::int64_t index) const {
  if (index == 0) return 0;
  if (index == snapshot_.last_index) return snapshot_.last_term;
  const LogEntry* e = log_get(index);
  if (!e) throw std::logic_error("term_at: index compacted or out of range");
  return e->term;
}

bool RaftNode::is_member(NodeId n) const {
  return std::find(config_.begin(), config_.end(), n) != config_.end();
}

bool RaftNode::armed_even_quorum() const {
  return tuning_.bugs.even_quorum && config_.size() % 2 == 0 && failed_elections_ >= 2;
}

std::size_t RaftNode::quorum() const {
  std::size_t n = config_.size();
  // Defect: majority miscomputed for even cluster sizes once elections have
  // churned, so split votes can crown two leaders in one term.
  std::size_t q = armed_even_quorum() ? n / 2 : n / 2 + 1;
  return std::max<std::size_t>(1, q);
}

void RaftNode::boot(NodeCtx& ctx, bool fresh_state) {
  if (fresh_state) {
    current_term_ = 0;
    voted_for_ = -1;
    log_.clear();
    std::vector<NodeId> all;
    for (NodeId i = 0; i < cluster_size_; ++i) all.push_back(i);
    LogEntry bootstrap;
    bootstrap.term = 0;
    bootstrap.kind = LogEntry::Kind::ConfigChange;
    bootstrap.members = all;
    log_.push_back(bootstrap);
    snapshot_ = SnapshotState{};
    snapshot_.config = all;
    snapshot_.committed_config_index = 1;
  }
  role_ = Role::Follower;
  commit_index_ = fresh_state ? 1 : snapshot_.last_index;
  last_applied_ = snapshot_.last_index;
  kv_ = snapshot_.kv;
  leader_id_ = -1;
  failed_elections_ = 0;
  votes_.clear();
  heartbeat_token_ = 0;
  hb_round_ = 0;
  next_index_.clear();
  match_index_.clear();
  acked_round_.clear();
  pending_acks_.clear();
  pending_reads_.clear();
  derive_config_from_state();
  // Re-apply committed entries beyond the snapshot.
  while (last_applied_ < commit_index_) {
    std::int64_t idx = ++last_applied_;
    const LogEntry* e = log_get(idx);
    if (!e) continue;
    if (e->kind == LogEntry::Kind::Write) {
      kv_[e->key] = e->value;
    } else {
      config_index_ = idx;
      if (uncommitted_config_index_ == idx) uncommitted_config_index_ = 0;
    }
  }
  arm_election_timer(ctx);
}

void RaftNode::derive_config_from_state() {
  config_ = snapshot_.config;
  config_index_ = snapshot_.committed_config_index;
  uncommitted_config_index_ = 0;
  for (std::size_t i = 0; i < log_.size(); ++i) {
    if (log_[i].kind != LogEntry::Kind::ConfigChange) continue;
    std::int64_t idx = snapshot_.last_index + 1 + static_cast<std::int64_t>(i);
    config_ = log_[i].members;
    if (idx <= commit_index_) {
      config_index_ = idx;
    } else {
      uncommitted_config_index_ = idx;
    }
  }
}

void RaftNode::arm_election_timer(NodeCtx& ctx) {
  std::int64_t delay =
      armed_even_quorum()
          ? tuning_.fixed_election_timeout_ns
          : ctx.rng().range_i64(tuning_.election_timeout_min_ns,
                                tuning_.election_timeout_max_ns);
  election_token_ = ctx.set_timer(delay, kElectionTimer);
}

void RaftNode::on_timer(NodeCtx& ctx, std::uint32_t timer_id, std::uint64_t token) {
  if (timer_id == kElectionTimer) {
    if (token != election_token_ || role_ == Role::Leader) return;
    if (role_ == Role::Candidate) ++failed_elections_;
    start_election(ctx);
  } else if (timer_id == kHeartbeatTimer) {
    if (token != heartbeat_token_ || role_ != Role::Leader) return;
    heartbeat_round(ctx);
    heartbeat_token_ = ctx.set_timer(tuning_.heartbeat_interval_ns, kHeartbeatTimer);
  }
}

void RaftNode::start_election(NodeCtx& ctx) {
  if (!is_member(self_)) {
    arm_election_timer(ctx);  // removed from the cluster: no candidacy
    return;
  }
  role_ = Role::Candidate;
  ++current_term_;
  voted_for_ = self_;
  votes_.clear();
  votes_.insert(self_);
  leader_id_ = -1;
  ctx.emit(code::kStartElection);
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgType::RequestVote));
  w.i64(current_term_);
  w.i64(last_index());
  w.i64(term_at(last_index()));
  auto payload = w.take();
  for (NodeId peer : config_) {
    if (peer != self_) ctx.send(peer, payload);
  }
  arm_election_timer(ctx);
  if (votes_.size() >= quorum()) become_leader(ctx);
}

void RaftNode::become_follower(NodeCtx& ctx, std::int64_t term) {
  current_term_ = term;
  role_ = Role::Follower;
  voted_for_ = -1;
  votes_.clear();
  heartbeat_token_ = 0;
  pending_acks_.clear();
  pending_reads_.clear();
  arm_election_timer(ctx);
}

void RaftNode::become_leader(NodeCtx& ctx) {
  role_ = Role::Leader;
  leader_id_ = self_;
  failed_elections_ = 0;
  ctx.emit(code::kBecomeLeader);
  ctx.notify_leader(current_term_);
  ctx.log("became leader (term=" + std::to_string(current_term_) + ")");
  next_index_.clear();
  match_index_.clear();
  acked_round_.clear();
  for (NodeId peer : config_) {
    if (peer == self_) continue;
    next_index_[peer] = last_index() + 1;
    match_index_[peer] = 0;
  }
  heartbeat_round(ctx);
  heartbeat_token_ = ctx.set_timer(tuning_.heartbeat_interval_ns, kHeartbeatTimer);
}

void RaftNode::heartbeat_round(NodeCtx& ctx) {
  ++hb_round_;
  for (NodeId peer : config_) {
    if (peer != self_) send_append(ctx, peer);
  }
  advance_commit_leader(ctx);
  serve_ready_reads(ctx);
}

void RaftNode::send_append(NodeCtx& ctx, NodeId peer) {
  std::int64_t next = last_index() + 1;
  auto it = next_index_.find(peer);
  if (it != next_index_.end()) next = it->second;
  if (next <= snapshot_.last_index) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgType::InstallSnapshot));
    w.i64(current_term_);
    write_snapshot(w, snapshot_);
    ctx.send(peer, w.take());
    return;
  }
  std::int64_t prev = next - 1;
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgType::Append));
  w.i64(current_term_);
  w.i64(prev);
  w.i64(term_at(prev));
  w.i64(commit_index_);
  w.u64(hb_round_);
  std::uint32_t count = static_cast<std::uint32_t>(last_index() - prev);
  w.u32(count);
  for (std::int64_t idx = prev + 1; idx <= last_index(); ++idx) {
    write_entry(w, *log_get(idx));
  }
  ctx.send(peer, w.take());
}

void RaftNode::replicate_now(NodeCtx& ctx) {
  for (NodeId peer : config_) {
    if (peer != self_) send_append(ctx, peer);
  }
}

void RaftNode::on_message(NodeCtx& ctx, NodeId src,
                          const std::vector<std::uint8_t>& payload) {
  ByteReader r(payload);
  MsgType type = static_cast<MsgType>(r.u8());
  switch (type) {
    case MsgType::RequestVote: {
      std::int64_t term = r.i64();
      std::int64_t lli = r.i64();
      std::int64_t llt = r.i64();
      handle_request_vote(ctx, src, term, lli, llt);
      break;
    }
    case MsgType::VoteReply: {
      std::int64_t term = r.i64();
      bool granted = r.u8() != 0;
      handle_vote_reply(ctx, src, term, granted);
      break;
    }
    case MsgType::Append: {
      AppendMsg m;
      m.term = r.i64();
      m.prev_index = r.i64();
      m.prev_term = r.i64();
      m.leader_commit = r.i64();
      m.round = r.u64();
      std::uint32_t n = r.u32();
      m.entries.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) m.entries.push_back(read_entry(r));
      handle_append(ctx, src, m);
      break;
    }
    case MsgType::AppendReply: {
      AppendReplyMsg m;
      m.term = r.i64();
      m.success = r.u8() != 0;
      m.match_index = r.i64();
      m.hint_index = r.i64();
      m.round = r.u64();
      m.needs_snapshot = r.u8() != 0;
      handle_append_reply(ctx, src, m);
      break;
    }
    case MsgType::InstallSnapshot: {
      std::int64_t term = r.i64();
      SnapshotState snap = read_snapshot(r);
      handle_install_snapshot(ctx, src, term, std::move(snap));
      break;
    }
    default:
      throw std::invalid_argument("raft: unknown message type");
  }
}

void RaftNode::handle_request_vote(NodeCtx& ctx, NodeId src, std::int64_t term,
                                   std::int64_t last_log_index,
                                   std::int64_t last_log_term) {
  if (term > current_term_) become_follower(ctx, term);
  bool grant = false;
  if (term == current_term_ && role_ == Role::Follower &&
      (voted_for_ == -1 || voted_for_ == src) && is_member(src)) {
    std::int64_t my_llt = term_at(last_index());
    if (last_log_term > my_llt ||
        (last_log_term == my_llt && last_log_index >= last_index())) {
      grant = true;
      voted_for_ = src;
      arm_election_timer(ctx);
    }
  }
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgType::VoteReply));
  w.i64(current_term_);
  w.u8(grant ? 1 : 0);
  ctx.send(src, w.take());
}

void RaftNode::handle_vote_reply(NodeCtx& ctx, NodeId src, std::int64_t term,
                                 bool granted) {
  if (term > current_term_) {
    become_follower(ctx, term);
    return;
  }
  if (role_ != Role::Candidate || term != current_term_ || !granted) return;
  votes_.insert(src);
  if (votes_.size() >= quorum()) become_leader(ctx);
}

void RaftNode::handle_append(NodeCtx& ctx, NodeId src, AppendMsg& m) {
  auto reply = [&](bool success, std::int64_t match, std::int64_t hint,
                   bool needs_snapshot) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgType::AppendReply));
    w.i64(current_term_);
    w.u8(success ? 1 : 0);
    w.i64(match);
    w.i64(hint);
    w.u64(m.round);
    w.u8(needs_snapshot ? 1 : 0);
    ctx.send(src, w.take());
  };

  if (m.term < current_term_) {
    reply(false, 0, 0, false);
    return;
  }
  if (m.term > current_term_) become_follower(ctx, m.term);
  if (role_ == Role::Candidate) role_ = Role::Follower;
  if (role_ == Role::Leader) return;  // same-term leader clash: only reachable
                                      // through the even-quorum defect
  leader_id_ = src;
  failed_elections_ = 0;
  arm_election_timer(ctx);

  if (m.prev_index > last_index()) {
    reply(false, 0, last_index() + 1, false);
    return;
  }
  if (m.prev_index < snapshot_.last_index ||
      (m.prev_index == snapshot_.last_index && m.prev_index > 0 &&
       m.prev_term != snapshot_.last_term)) {
    // The conflicting suffix reaches into the snapshot. Entries there cannot
    // be removed individually; roll back membership if an uncommitted config
    // entry is among them, then ask for a full snapshot.
    std::int64_t first_bad =
        m.prev_index < snapshot_.last_index ? m.prev_index + 1 : m.prev_index;
    ctx.emit(code::kDeleteConflictingEntries);
    if (uncommitted_config_index_ != 0 && uncommitted_config_index_ >= first_bad) {
      if (!membership_rollback(ctx)) return;  // seeded assertion fired
    }
    ctx.log("error: conflicting entries at index " + std::to_string(first_bad) +
            " are compacted into a snapshot and cannot be removed");
    log_.clear();
    reply(false, 0, 0, true);
    return;
  }
  if (m.prev_index > snapshot_.last_index && term_at(m.prev_index) != m.prev_term) {
    reply(false, 0, m.prev_index, false);
    return;
  }

  bool appended = false;
  std::size_t i = 0;
  for (; i < m.entries.size(); ++i) {
    std::int64_t idx = m.prev_index + 1 + static_cast<std::int64_t>(i);
    if (idx <= last_index()) {
      if (term_at(idx) != m.entries[i].term) {
        if (!truncate_from(ctx, idx)) return;  // seeded assertion fired
        break;
      }
    } else {
      break;
    }
  }
  for (; i < m.entries.size(); ++i) {
    std::int64_t idx = m.prev_index + 1 + static_cast<std::int64_t>(i);
    (void)idx;
    LogEntry& e = m.entries[i];
    log_.push_back(e);
    if (e.kind == LogEntry::Kind::ConfigChange) {
      config_ = e.members;
      uncommitted_config_index_ = last_index();
    }
    appended = true;
  }
  if (appended) ctx.emit(code::kAppendEntries);
  std::int64_t match = m.prev_index + static_cast<std::int64_t>(m.entries.size());
  set_commit(ctx, std::min(m.leader_commit, last_index()));
  maybe_snapshot(ctx);
  reply(true, match, 0, false);
}

bool RaftNode::truncate_from(NodeCtx& ctx, std::int64_t first_bad) {
  ctx.emit(code::kDeleteConflictingEntries);
  if (uncommitted_config_index_ != 0 && uncommitted_config_index_ >= first_bad) {
    if (!membership_rollback(ctx)) return false;
  }
  log_.resize(static_cast<std::size_t>(first_bad - snapshot_.last_index - 1));
  return true;
}

bool RaftNode::membership_rollback(NodeCtx& ctx) {
  ctx.emit(code::kMembershipRollback);
  const LogEntry* e = log_get(config_index_);
  if (e == nullptr) {
    ctx.fatal("assertion failed: membership rollback found no committed "
              "configuration entry at index " +
              std::to_string(config_index_));
    return false;
  }
  config_ = e->members;
  uncommitted_config_index_ = 0;
  return true;
}

void RaftNode::handle_append_reply(NodeCtx& ctx, NodeId src, AppendReplyMsg& m) {
  if (m.term > current_term_) {
    become_follower(ctx, m.term);
    return;
  }
  if (role_ != Role::Leader || m.term != current_term_) return;
  if (m.success) {
    std::int64_t& match = match_index_[src];
    match = std::max(match, m.match_index);
    next_index_[src] = match + 1;
    std::uint64_t& acked = acked_round_[src];
    acked = std::max(acked, m.round);
    advance_commit_leader(ctx);
    serve_ready_reads(ctx);
  } else if (m.needs_snapshot) {
    next_index_[src] = snapshot_.last_index;
    send_append(ctx, src);
  } else {
    std::int64_t hint = std::max<std::int64_t>(1, m.hint_index);
    next_index_[src] = std::min(hint, last_index() + 1);
    send_append(ctx, src);
  }
}

void RaftNode::handle_install_snapshot(NodeCtx& ctx, NodeId src, std::int64_t term,
                                       SnapshotState snap) {
  auto reply = [&](std::int64_t match) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgType::AppendReply));
    w.i64(current_term_);
    w.u8(1);
    w.i64(match);
    w.i64(0);
    w.u64(0);
    w.u8(0);
    ctx.send(src, w.take());
  };
  if (term < current_term_) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgType::AppendReply));
    w.i64(current_term_);
    w.u8(0);
    w.i64(0);
    w.i64(0);
    w.u64(0);
    w.u8(0);
    ctx.send(src, w.take());
    return;
  }
  if (term > current_term_) become_follower(ctx, term);
  if (role_ == Role::Candidate) role_ = Role::Follower;
  leader_id_ = src;
  failed_elections_ = 0;
  arm_election_timer(ctx);
  if (snap.last_index <= snapshot_.last_index) {
    reply(last_index());
    return;
  }
  snapshot_ = std::move(snap);
  log_.clear();
  commit_index_ = snapshot_.last_index;
  last_applied_ = snapshot_.last_index;
  kv_ = snapshot_.kv;
  config_ = snapshot_.config;
  config_index_ = snapshot_.committed_config_index;
  uncommitted_config_index_ = 0;
  ctx.emit(code::kInstallSnapshot);
  reply(snapshot_.last_index);
}

void RaftNode::on_client_request(NodeCtx& ctx, std::uint64_t request_id,
                                 const std::string& label,
                                 const std::vector<std::uint8_t>& payload) {
  ClientOp op = ClientOp::decode(payload);
  if (role_ != Role::Leader) return;  // client-side timeout covers this
  switch (op.kind) {
    case ClientOp::Kind::Write: {
      LogEntry e;
      e.term = current_term_;
      e.kind = LogEntry::Kind::Write;
      e.key = op.key;
      e.value = op.value;
      log_.push_back(e);
      pending_acks_[last_index()] = PendingAck{request_id, label, op.value};
      replicate_now(ctx);
      advance_commit_leader(ctx);
      maybe_snapshot(ctx);
      break;
    }
    case ClientOp::Kind::Read: {
      if (tuning_.bugs.stale_read) {
        // Defect: answers from local state without confirming leadership.
        auto it = kv_.find(op.key);
        ctx.respond(request_id, label, true, it == kv_.end() ? 0 : it->second, "");
        break;
      }
      pending_reads_.push_back(PendingRead{request_id, label, op.key, hb_round_ + 1});
      serve_ready_reads(ctx);
      break;
    }
    case ClientOp::Kind::RemoveNode: {
      if (uncommitted_config_index_ != 0) {
        ctx.respond(request_id, label, false, 0, "configuration change in progress");
        break;
      }
      if (op.node == self_) {
        ctx.respond(request_id, label, false, 0, "cannot remove self");
        break;
      }
      if (!is_member(op.node)) {
        ctx.respond(request_id, label, false, 0, "not a member");
        break;
      }
      LogEntry e;
      e.term = current_term_;
      e.kind = LogEntry::Kind::ConfigChange;
      e.members = config_;
      e.members.erase(std::find(e.members.begin(), e.members.end(), op.node));
      log_.push_back(e);
      uncommitted_config_index_ = last_index();
      config_ = e.members;
      pending_acks_[last_index()] = PendingAck{request_id, label, 0};
      replicate_now(ctx);
      advance_commit_leader(ctx);
      maybe_snapshot(ctx);
      break;
    }
  }
}

void RaftNode::advance_commit_leader(NodeCtx& ctx) {
  if (role_ != Role::Leader) return;
  for (std::int64_t idx = last_index(); idx > commit_index_; --idx) {
    if (idx <= snapshot_.last_index) break;
    if (term_at(idx) != current_term_) break;  // only current-term entries count
    std::size_t count = 1;  // self
    for (NodeId peer : config_) {
      if (peer == self_) continue;
      auto it = match_index_.find(peer);
      if (it != match_index_.end() && it->second >= idx) ++count;
    }
    if (count >= quorum()) {
      set_commit(ctx, idx);
      break;
    }
  }
}

void RaftNode::set_commit(NodeCtx& ctx, std::int64_t new_commit) {
  if (new_commit <= commit_index_) return;
  commit_index_ = new_commit;
  apply_committed(ctx);
  ctx.emit(code::kCommitEntry);
  // Acknowledge client writes that just became durable.
  for (auto it = pending_acks_.begin(); it != pending_acks_.end();) {
    if (it->first <= commit_index_) {
      ctx.respond(it->second.request_id, it->second.label, true, it->second.value, "");
      it = pending_acks_.erase(it);
    } else {
      ++it;
    }
  }
}

void RaftNode::apply_committed(NodeCtx& ctx) {
  (void)ctx;
  while (last_applied_ < commit_index_) {
    std::int64_t idx = ++last_applied_;
    const LogEntry* e = log_get(idx);
    if (!e) continue;  // covered by an installed snapshot
    if (e->kind == LogEntry::Kind::Write) {
      kv_[e->key] = e->value;
    } else {
      config_index_ = idx;
      if (uncommitted_config_index_ == idx) uncommitted_config_index_ = 0;
    }
  }
}

void RaftNode::serve_ready_reads(NodeCtx& ctx) {
  if (role_ != Role::Leader || pending_reads_.empty()) return;
  // A read is served once a quorum has acknowledged a heartbeat round started
  // after the read arrived, confirming this node still leads.
  std::vector<std::uint64_t> acked;
  for (NodeId peer : config_) {
    if (peer == self_) continue;
    auto it = acked_round_.find(peer);
    acked.push_back(it == acked_round_.end() ? 0 : it->second);
  }
  std::sort(acked.begin(), acked.end(), std::greater<>());
  std::size_t q = quorum();
  std::uint64_t confirmed = 0;
  if (q <= 1) {
    confirmed = hb_round_;
  } else if (acked.size() >= q - 1) {
    confirmed = acked[q - 2];  // highest round a full quorum has reached
  }
  if (confirmed == 0) return;
  for (auto it = pending_reads_.begin(); it != pending_reads_.end();) {
    if (it->need_round <= confirmed) {
      auto kv_it = kv_.find(it->key);
      ctx.respond(it->request_id, it->label, true,
                  kv_it == kv_.end() ? 0 : kv_it->second, "");
      it = pending_reads_.erase(it);
    } else {
      ++it;
    }
  }
}

void RaftNode::maybe_snapshot(NodeCtx& ctx) {
  if (last_index() - snapshot_.last_index < tuning_.snapshot_threshold) return;
  take_snapshot(ctx);
}

void RaftNode::take_snapshot(NodeCtx& ctx) {
  if (last_index() - snapshot_.last_index < tuning_.snapshot_threshold) {
    throw std::logic_error("take_snapshot: not enough entries since last snapshot");
  }
  std::int64_t target;
  bool defective = tuning_.bugs.membership_rollback &&
                   uncommitted_config_index_ > snapshot_.last_index;
  if (defective) {
    // Defect: compacts through the last appended entry, taking the in-use but
    // uncommitted configuration into the snapshot and discarding the last
    // committed configuration entry.
    target = last_index();
  } else {
    target = commit_index_;
  }
  if (target <= snapshot_.last_index) return;

  SnapshotState snap;
  snap.last_index = target;
  snap.last_term = term_at(target);
  snap.kv = snapshot_.kv;
  snap.config = snapshot_.config;
  snap.committed_config_index = config_index_;
  if (!defective) {
    if (config_index_ <= target) {
      const LogEntry* committed_config = log_get(config_index_);
      if (committed_config != nullptr) {
        snap.has_retained_config_entry = true;
        snap.retained_config_entry = *committed_config;
      }
    }
  }
  for (std::int64_t idx = snapshot_.last_index + 1; idx <= target; ++idx) {
    const LogEntry* e = log_get(idx);
    if (e->kind == LogEntry::Kind::Write) {
      snap.kv[e->key] = e->value;
    } else {
      snap.config = e->members;
    }
  }
  std::size_t drop = static_cast<std::size_t>(target - snapshot_.last_index);
  log_.erase(log_.begin(), log_.begin() + static_cast<std::ptrdiff_t>(drop));
  snapshot_ = std::move(snap);
  ctx.emit(code::kTakeSnapshot);
}

}  // namespace tlfuzz
