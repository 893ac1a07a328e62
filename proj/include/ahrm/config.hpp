#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahrm/env_planar.hpp"
#include "ahrm/mechanism.hpp"
#include "ahrm/ppo.hpp"

namespace ahrm {

inline constexpr int kConfigSchemaVersion = 1;

enum class Variant { kAhrm, kMhrm, kFhrm, kLs };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Everything needed to reproduce one training run.
struct RunConfig {
  Variant variant = Variant::kAhrm;
  std::uint64_t seed = 0;
  int episodes = 300;
  env::EnvConfig env;
  ppo::PpoConfig ppo;
  reward::MechanismParams mechanism;
  // Placeholder orderings; editable in the config file.
  std::vector<reward::PriorityAssignment> mhrm_assignments{
      reward::PriorityAssignment({env::kAvoid, env::kTime, env::kManipulate}),
      reward::PriorityAssignment({env::kAvoid, env::kManipulate, env::kTime}),
      reward::PriorityAssignment({env::kManipulate, env::kTime, env::kAvoid})};
  reward::PriorityAssignment fhrm_assignment{{env::kManipulate, env::kAvoid, env::kTime}};
  bool discard_constraint_episodes = false;
  // Value the learner assigns to the state after a success: the remaining
  // step budget paid at the full per-step reward. Without it every per-step
  // +1 makes finishing early a loss.
  bool success_credit = false;
  std::string output_dir = "runs";

  /// Throws std::invalid_argument on the first violated invariant.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Strict: unknown keys and type mismatches throw std::invalid_argument.
/// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& doc);

RunConfig load_run_config(const std::filesystem::path& path);

/// Applies `dotted.key=value` to a config document. The key must already
/// exist and the parsed value must have the same JSON type.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string note;
};

/// Every leaf key of the config schema with its default, for --help.
std::vector<ConfigKeyDoc> describe_config_keys();

}  // namespace ahrm
