#include "tlfuzz/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tlfuzz {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& prefix,
                  const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError(prefix.empty() ? it.key() : prefix + "." + it.key(),
                        "unknown key");
    }
  }
}

template <class T>
void read(const json& obj, const std::string& prefix, const std::string& key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(prefix.empty() ? key : prefix + "." + key, "wrong type");
  }
}

}  // namespace

ParsedConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<document>", "expected a JSON object");

  require_keys(j, "", {"schema_version", "seed", "nodes", "sim", "schedule", "learning",
                       "faults", "workload", "oracle", "raft", "bugs", "emit_trace",
                       "stop_on_assertion"});
  int version = 1;
  read(j, "", "schema_version", version);
  if (version != 1) throw ConfigError("schema_version", "unsupported version");

  ParsedConfig out;
  read(j, "", "seed", out.seed);
  int nodes = out.cfg.sim.node_count;
  read(j, "", "nodes", nodes);
  out.cfg.sim.node_count = nodes;

  if (j.contains("sim")) {
    const json& s = j["sim"];
    require_keys(s, "sim", {"min_latency_ns", "max_latency_ns", "skew_bound_ns",
                            "batch_interval_ns"});
    read(s, "sim", "min_latency_ns", out.cfg.sim.min_latency_ns);
    read(s, "sim", "max_latency_ns", out.cfg.sim.max_latency_ns);
    read(s, "sim", "skew_bound_ns", out.cfg.sim.skew_bound_ns);
    read(s, "sim", "batch_interval_ns", out.cfg.sim.batch_interval_ns);
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    require_keys(s, "schedule",
                 {"steps_per_schedule", "window_ns", "reset_ns", "budget_steps"});
    read(s, "schedule", "steps_per_schedule", out.cfg.steps_per_schedule);
    read(s, "schedule", "window_ns", out.cfg.window_ns);
    read(s, "schedule", "reset_ns", out.cfg.reset_ns);
    read(s, "schedule", "budget_steps", out.cfg.budget_steps);
  }
  if (j.contains("learning")) {
    const json& s = j["learning"];
    require_keys(s, "learning", {"alpha", "gamma", "epsilon", "minhash_k"});
    read(s, "learning", "alpha", out.cfg.alpha);
    read(s, "learning", "gamma", out.cfg.gamma);
    read(s, "learning", "epsilon", out.cfg.epsilon);
    read(s, "learning", "minhash_k", out.cfg.minhash_k);
  }
  if (j.contains("faults")) {
    if (!j["faults"].is_array()) throw ConfigError("faults", "expected an array");
    out.cfg.alphabet.clear();
    std::size_t i = 0;
    for (const json& f : j["faults"]) {
      std::string key = "faults[" + std::to_string(i++) + "]";
      if (!f.is_string()) throw ConfigError(key, "expected a fault name string");
      auto tag = FaultAction::tag_from_name(f.get<std::string>());
      if (!tag) {
        throw ConfigError(key, "unknown fault '" + f.get<std::string>() + "'");
      }
      out.cfg.alphabet.push_back(*tag);
    }
    if (out.cfg.alphabet.empty()) throw ConfigError("faults", "must not be empty");
  }
  if (j.contains("workload")) {
    const json& s = j["workload"];
    require_keys(s, "workload",
                 {"requests_per_window", "write_fraction", "keys", "request_timeout_ns"});
    read(s, "workload", "requests_per_window", out.cfg.workload.requests_per_window);
    read(s, "workload", "write_fraction", out.cfg.workload.write_fraction);
    read(s, "workload", "keys", out.cfg.workload.keys);
    read(s, "workload", "request_timeout_ns", out.cfg.workload.request_timeout_ns);
  }
  if (j.contains("oracle")) {
    const json& s = j["oracle"];
    require_keys(s, "oracle", {"keywords", "leaderless_window_limit"});
    read(s, "oracle", "keywords", out.cfg.oracle.keywords);
    read(s, "oracle", "leaderless_window_limit", out.cfg.oracle.leaderless_window_limit);
  }
  if (j.contains("raft")) {
    const json& s = j["raft"];
    require_keys(s, "raft",
                 {"election_timeout_min_ns", "election_timeout_max_ns",
                  "heartbeat_interval_ns", "snapshot_threshold"});
    read(s, "raft", "election_timeout_min_ns", out.cfg.raft.election_timeout_min_ns);
    read(s, "raft", "election_timeout_max_ns", out.cfg.raft.election_timeout_max_ns);
    read(s, "raft", "heartbeat_interval_ns", out.cfg.raft.heartbeat_interval_ns);
    read(s, "raft", "snapshot_threshold", out.cfg.raft.snapshot_threshold);
  }
  if (j.contains("bugs")) {
    const json& s = j["bugs"];
    require_keys(s, "bugs", {"membership_rollback", "even_quorum", "stale_read"});
    read(s, "bugs", "membership_rollback", out.cfg.raft.bugs.membership_rollback);
    read(s, "bugs", "even_quorum", out.cfg.raft.bugs.even_quorum);
    read(s, "bugs", "stale_read", out.cfg.raft.bugs.stale_read);
  }
  read(j, "", "emit_trace", out.cfg.emit_trace);
  read(j, "", "stop_on_assertion", out.cfg.stop_on_assertion);

  try {
    out.cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    auto colon = msg.find(':');
    std::string key = colon == std::string::npos ? "<config>" : msg.substr(0, colon);
    throw ConfigError(key, colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return out;
}

ParsedConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_json(const CampaignConfig& cfg, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["nodes"] = cfg.sim.node_count;
  j["sim"] = {{"min_latency_ns", cfg.sim.min_latency_ns},
              {"max_latency_ns", cfg.sim.max_latency_ns},
              {"skew_bound_ns", cfg.sim.skew_bound_ns},
              {"batch_interval_ns", cfg.sim.batch_interval_ns}};
  j["schedule"] = {{"steps_per_schedule", cfg.steps_per_schedule},
                   {"window_ns", cfg.window_ns},
                   {"reset_ns", cfg.reset_ns},
                   {"budget_steps", cfg.budget_steps}};
  j["learning"] = {{"alpha", cfg.alpha},
                   {"gamma", cfg.gamma},
                   {"epsilon", cfg.epsilon},
                   {"minhash_k", cfg.minhash_k}};
  nlohmann::ordered_json faults = nlohmann::ordered_json::array();
  for (FaultAction::Tag t : cfg.effective_alphabet()) {
    faults.push_back(FaultAction::tag_name(t));
  }
  j["faults"] = std::move(faults);
  j["workload"] = {{"requests_per_window", cfg.workload.requests_per_window},
                   {"write_fraction", cfg.workload.write_fraction},
                   {"keys", cfg.workload.keys},
                   {"request_timeout_ns", cfg.workload.request_timeout_ns}};
  j["oracle"] = {{"keywords", cfg.oracle.keywords},
                 {"leaderless_window_limit", cfg.oracle.leaderless_window_limit}};
  j["raft"] = {{"election_timeout_min_ns", cfg.raft.election_timeout_min_ns},
               {"election_timeout_max_ns", cfg.raft.election_timeout_max_ns},
               {"heartbeat_interval_ns", cfg.raft.heartbeat_interval_ns},
               {"snapshot_threshold", cfg.raft.snapshot_threshold}};
  j["bugs"] = {{"membership_rollback", cfg.raft.bugs.membership_rollback},
               {"even_quorum", cfg.raft.bugs.even_quorum},
               {"stale_read", cfg.raft.bugs.stale_read}};
  j["emit_trace"] = cfg.emit_trace;
  j["stop_on_assertion"] = cfg.stop_on_assertion;
  return j.dump(2) + "\n";
}

}  // namespace tlfuzz
