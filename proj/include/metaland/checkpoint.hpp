#pragma once

#include "metaland/ppo.hpp"

#include <string>

namespace metaland {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainState state;
  std::string metadata;  // JSON text, the experiment the agent was trained on
};

// Binary layout: "MLCK", version, obs_dim, act_dim, unroll, layer-2 kind, iteration,
// episodes, clip, metadata, then named f64 arrays (name, rows, cols, little-endian data).
void save_checkpoint(const std::string& path, const TrainState& state, const std::string& metadata);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace metaland
