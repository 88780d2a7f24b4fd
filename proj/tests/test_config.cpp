#include <doctest.h>

#include "tlfuzz/config.hpp"

using namespace tlfuzz;

TEST_CASE("an empty object yields the standard configuration") {
  ParsedConfig p = parse_config_text("{}");
  CHECK(p.seed == 1);
  CHECK(p.cfg.sim.node_count == 5);
  CHECK(p.cfg.steps_per_schedule == 12);
  CHECK(p.cfg.window_ns == 2'500'000'000);
  CHECK(p.cfg.reset_ns == 5'000'000'000);
  CHECK(p.cfg.epsilon == 0.70);
  CHECK(p.cfg.alpha == 0.1);
  CHECK(p.cfg.gamma == 0.6);
  CHECK(p.cfg.sim.skew_bound_ns == 100'000'000);
  CHECK(p.cfg.sim.batch_interval_ns == 100'000'000);
  CHECK(p.cfg.effective_alphabet().size() == 9);
}

TEST_CASE("unknown fault names point at the offending entry") {
  try {
    parse_config_text(R"({"faults": ["no_op", "meteor_strike"]})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "faults[1]");
    CHECK(std::string(e.what()).find("meteor_strike") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with their path") {
  try {
    parse_config_text(R"({"schedule": {"windows": 3}})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "schedule.windows");
  }
}

TEST_CASE("semantic validation names the offending field") {
  try {
    parse_config_text(R"({"nodes": 2})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "sim.node_count");
  }
  try {
    parse_config_text(R"({"learning": {"epsilon": 1.5}})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "learning.epsilon");
  }
}

TEST_CASE("malformed json is a config error") {
  CHECK_THROWS_AS(parse_config_text("{"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[]"), ConfigError);
}

TEST_CASE("serialisation round-trips the configuration") {
  ParsedConfig p = parse_config_text(R"({
    "seed": 42,
    "nodes": 7,
    "faults": ["crash_node", "heal_network"],
    "bugs": {"membership_rollback": true, "even_quorum": false, "stale_read": false},
    "learning": {"alpha": 0.2, "gamma": 0.5, "epsilon": 0.8, "minhash_k": 64},
    "emit_trace": false
  })");
  std::string text = config_to_json(p.cfg, p.seed);
  ParsedConfig back = parse_config_text(text);
  CHECK(back.seed == 42);
  CHECK(back.cfg.sim.node_count == 7);
  CHECK(back.cfg.alphabet == p.cfg.alphabet);
  CHECK(back.cfg.raft.bugs.membership_rollback);
  CHECK(back.cfg.alpha == 0.2);
  CHECK(back.cfg.minhash_k == 64);
  CHECK_FALSE(back.cfg.emit_trace);
  CHECK(config_to_json(back.cfg, back.seed) == text);
}

TEST_CASE("wrong types are reported with their key") {
  try {
    parse_config_text(R"({"seed": "abc"})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "seed");
  }
}
