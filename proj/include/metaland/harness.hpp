#pragma once

#include "metaland/controller.hpp"
#include "metaland/experiment.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace metaland {

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
};

MetricStats metric_stats(const std::vector<double>& values);

struct EpisodeOutcome {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double terminal_r = 0.0;
  double terminal_v = 0.0;
  double fuel = 0.0;
  double glideslope = 0.0;
  double total_reward = 0.0;
  bool success = false;
  bool faulted = false;
  FailureMode failure = FailureMode::none;
};

struct EvalStats {
  std::size_t episodes = 0;
  MetricStats r, v, fuel, glideslope;
  double success_rate = 0.0;
  double fuel_median = 0.0;
  std::size_t faults = 0;
};

EvalStats summarize(const std::vector<EpisodeOutcome>& episodes);

struct EvalResult {
  std::string experiment;
  std::string label;  // row name in comparison tables
  Body body = Body::mars;
  std::uint64_t seed = 0;
  EvalStats stats;
  std::vector<EpisodeOutcome> episodes;
};

struct TrajectoryRow {
  double t = 0.0;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 thrust = Vec3::Zero();
  double mass = 0.0;
  double reward = 0.0;
};

/// Worker count from METALAND_WORKERS (default 1).
std::size_t workers_from_env();

/// One deterministic episode; rows (if given) receive one entry per navigation step.
EpisodeOutcome run_episode(Controller& controller, Environment& env, std::uint64_t seed,
                           std::vector<TrajectoryRow>* rows = nullptr, std::size_t max_steps = 100000);

/// n episodes with seeds derived from `seed`; results are independent of the worker count.
EvalResult run_monte_carlo(const Controller& prototype, const ExperimentSpec& spec, std::size_t n,
                           std::uint64_t seed, std::size_t workers = 1,
                           std::shared_ptr<const SensorAssets> assets = nullptr);

std::string policy_label(PolicyKind kind, std::size_t unroll);

std::string report_to_json(const EvalResult& result);
EvalResult report_from_json(const std::string& text);

enum class TableFormat { text, csv };
/// Comparison tables (terminal position, terminal velocity, fuel, glideslope) over several reports.
std::string render_tables(const std::vector<EvalResult>& results, TableFormat format);

void write_trajectory_log(const std::string& path, const std::vector<TrajectoryRow>& rows);

/// Sensor characterization tables: radar altimeter error vs. elevation (Mars) or
/// LIDAR range vs. the mean-radius sphere (asteroid).
std::string sensor_check(const ExperimentSpec& spec, std::size_t samples, std::uint64_t seed);

}  // namespace metaland
