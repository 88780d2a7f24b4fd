#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "tlfuzz/harness.hpp"

namespace tlfuzz {

// Configuration problems carry the offending key so the CLI can point at it.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ParsedConfig {
  CampaignConfig cfg;
  std::uint64_t seed = 1;
};

// Versioned JSON schema; unknown keys are rejected. All defaults follow the
// standard configuration (12 steps, 2.5 s windows, 5 s reset, epsilon 0.70,
// alpha 0.1, gamma 0.6, 100 ms skew and batch interval).
ParsedConfig parse_config_text(const std::string& json_text);
ParsedConfig load_config_file(const std::string& path);

std::string config_to_json(const CampaignConfig& cfg, std::uint64_t seed);

}  // namespace tlfuzz
