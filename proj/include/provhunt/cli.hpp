#pragma once

// Command-line front end: layered configuration (flags > env > file >
// defaults) and subcommand dispatch.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/core_model.hpp"
#include "provhunt/hunter.hpp"
#include "provhunt/ppg.hpp"
#include "provhunt/trainer.hpp"

namespace provhunt {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitFlagged = 2, kExitRuntime = 3 };

struct AppConfig {
  std::uint64_t seed = 7;
  std::string log_level = "info";
  std::string rules_path;  // empty: built-in rules
  std::int64_t window_ms = kDefaultWindowMs;
  PpgConfig ppg;
  HuntConfig hunt;  // sampling.k and sampling.max_nodes land in hunt.k / hunt.max_nodes
  bool exhaustive = false;
  TrainConfig train;

  std::shared_ptr<const AbstractionRules> rules;  // loaded during resolution
  std::map<std::string, std::string> origin;      // key -> "file" | "env" | "flag"; defaults absent
  nlohmann::json echo;                            // effective values plus their sources

  /// True when any key under the dotted prefix was set by a file, env or flag.
  bool overridden(const std::string& prefix) const;

  void validate() const;
  const AbstractionRules& abstraction() const { return rules ? *rules : AbstractionRules::defaults(); }
};

struct ConfigSources {
  std::optional<std::string> file;                // TOML path
  std::map<std::string, std::string> env;         // PROVHUNT_* variables
  std::map<std::string, std::string> flags;       // dotted key -> raw value
};

/// Every settable dotted key ("seed", "hunt.theta", "train.hops", ...).
std::vector<std::string> config_keys();

/// PROVHUNT_ + upper-cased key with dots as underscores, e.g. PROVHUNT_HUNT_THETA.
std::string env_name(const std::string& key);

/// Merges the layers, converts, loads the abstraction rules and validates.
/// Throws Error("config") on unknown keys, bad values or failed validation.
AppConfig resolve_config(const ConfigSources& src);

/// PROVHUNT_* entries of the process environment.
std::map<std::string, std::string> provhunt_environment();

/// {"name", "version", "ppg_format", "model_format"}
nlohmann::json version_json();

/// Entry point; returns one of ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace provhunt
