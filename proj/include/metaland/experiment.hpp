#pragma once

#include "metaland/controller.hpp"
#include "metaland/environments.hpp"
#include "metaland/ppo.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace metaland {

enum class PolicyKind { drdv, rl, meta_rl };

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& text);

struct ExperimentSpec {
  std::string id = "nominal-mars";
  std::string description;
  EnvConfig env = MarsConfig{};
  PolicyKind policy = PolicyKind::meta_rl;
  PpoConfig ppo{};
  DrDvSettings drdv{};
  std::size_t train_episodes = 3000;
  std::size_t eval_episodes = 1000;
  std::uint64_t eval_seed = 20190101;

  Body body() const { return std::holds_alternative<MarsConfig>(env) ? Body::mars : Body::asteroid; }
  /// Sensor experiments have no classical baseline.
  bool sensor_driven() const;
  Layer2 layer2() const { return policy == PolicyKind::rl ? Layer2::dense : Layer2::gru; }
};

std::vector<std::string> preset_ids();
ExperimentSpec experiment_preset(const std::string& id);
std::vector<ExperimentSpec> experiment_presets();

/// Canonical JSON text (sorted keys, 2-space indent).
std::string experiment_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const std::string& text);
ExperimentSpec load_experiment(const std::string& path_or_id);

/// Applies "a.b.c=value" (value parsed as JSON, else taken as a string).
void apply_override(ExperimentSpec& spec, const std::string& assignment);

/// Normalizes train_episodes into ppo.iterations (one warm-up batch included).
void sync_training_budget(ExperimentSpec& spec);

}  // namespace metaland
