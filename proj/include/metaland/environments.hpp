#pragma once

#include "metaland/common.hpp"
#include "metaland/dynamics.hpp"
#include "metaland/rng.hpp"
#include "metaland/sensors.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>

namespace metaland {

enum class Body { mars, asteroid };
enum class FailureMode { none, downrange_capped, crossrange_capped };
enum class MarsSensing { ground_truth, biased, radar };
enum class AsteroidSensing { ground_truth, lidar };

struct RewardConfig {
  double alpha = -0.01;
  double beta = -0.05;
  double gamma_const = 0.01;
  double eta = 10.0;
  double tau1 = 20.0;
  double tau2 = 100.0;
  double v_o = 0.0;  // <= 0: use the initial speed of each episode
  double r_lim = 5.0;
  double v_lim = 2.0;
  double gs_lim = 79.0;  // deg
  bool use_glideslope = true;
  // piecewise Mars shaping field
  double aim_altitude = 15.0;
  double descent_rate_high = -2.0;
  double descent_rate_low = -1.0;
};

struct RadarSettings {
  PointingMode mode = PointingMode::velocity_averaged_down;
  RadarLayout layout = RadarLayout::ranges_doppler;
  std::uint64_t dtm_seed = 7;
  std::size_t dtm_size = 513;
  double dtm_spacing = 20.0;
  Vec3 target_map{4000.0, 4000.0, 400.0};
};

struct MarsConfig {
  Vec3 r_min{0.0, -1000.0, 2300.0};
  Vec3 r_max{2000.0, 1000.0, 2400.0};
  Vec3 v_min{-70.0, -30.0, -90.0};
  Vec3 v_max{-10.0, 30.0, -70.0};
  double mass_min = 1800.0;
  double mass_max = 2200.0;
  double a_env_max = 0.2;
  Vec3 gravity{0.0, 0.0, -3.7114};
  EngineConfig engine{};
  double failure_probability = 0.0;
  double failure_lateral_factor = 2.5;
  double failure_vertical_factor = 1.5;
  double failure_axis_max_fraction = 0.5773502691896258;  // axis_max = fraction * thrust_max
  double bias_max = 0.0;
  MarsSensing sensing = MarsSensing::ground_truth;
  RadarSettings radar{};
  RewardConfig reward{};
  double dt = 0.05;
  int substeps = 4;
  double t_max = 400.0;
  double box_xy = 5000.0;
  double box_z = 3000.0;
};

struct AsteroidConfig {
  double distance_min = 900.0;
  double distance_max = 1100.0;
  double polar_max_deg = 45.0;
  double azimuth_max_deg = 180.0;
  double heading_max_deg = 45.0;
  double speed_min = 0.05;
  double speed_max = 0.10;
  double mass_min = 450.0;
  double mass_max = 500.0;
  double omega_max = 1e-3;
  double srp_max = 1e-6;
  double body_mass_min = 2e10;
  double body_mass_max = 2e11;
  double G = 6.674e-11;
  double target_radius = 250.0;
  EngineConfig engine{225.0, 9.8, 0.0, 2.0, Vec3::Ones(), 300.0, 0.0};
  AsteroidSensing sensing = AsteroidSensing::ground_truth;
  std::uint64_t mesh_seed = 11;
  AsteroidMeshOptions mesh{};
  RewardConfig reward{-1.0, -0.05, 0.01, 10.0, 250.0, 250.0, 0.5, 1.0, 0.2, 0.0, false};
  double dt = 2.0;
  int substeps = 3;
  double t_max = 4000.0;
  double escape_distance = 3000.0;
};

using EnvConfig = std::variant<MarsConfig, AsteroidConfig>;

/// Per-episode randomization record.
struct EpisodeParams {
  Body body = Body::mars;
  MarsEnvForces mars{};
  AsteroidEnvForces asteroid{};
  EngineConfig engine{};
  FailureMode failure = FailureMode::none;
  double bias_r = 0.0;
  double bias_v = 0.0;
  double initial_mass = 0.0;
  double v_o = 0.0;
};

struct EpisodeStart {
  LanderState state;
  EpisodeParams params;
};

EpisodeStart reset_mars(const MarsConfig& config, Rng& rng);
EpisodeStart reset_asteroid(const AsteroidConfig& config, Rng& rng);

// Mars: per-axis failure caps (cap_i * axis_max) then the norm window
// [thrust_min, thrust_max]. Asteroid: per-axis clamp to +-thrust_max.
Vec3 condition_thrust(const Vec3& cmd, const EpisodeParams& params);

struct TargetVelocity {
  Vec3 v_targ = Vec3::Zero();
  double t_go = 0.0;
};

inline constexpr double kSpeedEpsilon = 1e-8;
inline constexpr double kRangeEpsilon = 1e-8;
inline constexpr double kSaturatedTgo = 1e6;

/// v_targ = -v_o * rhat/|rhat| * (1 - exp(-t_go / tau)), t_go = |rhat| / |vhat|.
TargetVelocity shaping_field(const Vec3& r_hat, const Vec3& v_hat, double v_o, double tau);
TargetVelocity target_velocity_mars(const Vec3& r, const Vec3& v, const RewardConfig& cfg);
TargetVelocity target_velocity_asteroid(const Vec3& r, const Vec3& v, const RewardConfig& cfg);

/// Angle between the velocity and the horizontal plane, degrees; 90 for v = 0.
double glideslope(const Vec3& v);

bool landing_success(const Vec3& r, const Vec3& v, double altitude, const RewardConfig& cfg);

double step_reward(const Vec3& v, const Vec3& thrust, const Vec3& v_targ, bool success, const RewardConfig& cfg,
                   double thrust_ref);

struct Termination {
  bool done = false;
  bool success = false;
};

Termination terminate_mars(const LanderState& state, const MarsConfig& config);
Termination terminate_asteroid(const LanderState& state, const AsteroidConfig& config, const EpisodeParams& params);

/// Navigation estimate handed to a classical guidance law.
struct NavEstimate {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double mass = 0.0;
};

struct StepInfo {
  LanderState state;
  Vec3 thrust = Vec3::Zero();
  double fuel_used = 0.0;
  bool success = false;
};

struct StepResult {
  VecX observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Immutable sensor assets shared by every environment of one experiment.
struct SensorAssets {
  std::shared_ptr<const TerrainMap> dtm;
  std::shared_ptr<const MeshRayCaster> mesh;

  static std::shared_ptr<const SensorAssets> build(const EnvConfig& config);
};

/// Episodic environment: reset() starts an episode, step() takes a normalized action.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t act_dim() const { return 3; }
  /// Newtons per unit of normalized action, per axis.
  virtual double action_scale() const = 0;

  virtual void seed(std::uint64_t seed) = 0;
  virtual VecX reset() = 0;
  virtual StepResult step(const VecX& action) = 0;

  virtual const LanderState& state() const = 0;
  virtual const EpisodeParams& params() const = 0;
  virtual NavEstimate nav() const = 0;
  /// Gravity model a guidance law would use by default.
  virtual Vec3 nominal_gravity() const = 0;
};

class MarsEnvironment final : public Environment {
 public:
  MarsEnvironment(MarsConfig config, std::shared_ptr<const SensorAssets> assets, std::uint64_t seed);

  std::size_t obs_dim() const override;
  double action_scale() const override { return params_.engine.thrust_max; }
  void seed(std::uint64_t seed) override { rng_ = Rng(seed); }
  VecX reset() override;
  StepResult step(const VecX& action) override;
  const LanderState& state() const override { return state_; }
  const EpisodeParams& params() const override { return params_; }
  NavEstimate nav() const override;
  Vec3 nominal_gravity() const override { return config_.gravity; }

  /// Replace the sampled episode (tests, trajectory replays).
  VecX start(const EpisodeStart& episode);
  VecX observe() const;

 private:
  MarsConfig config_;
  std::shared_ptr<const SensorAssets> assets_;
  Rng rng_;
  LanderState state_;
  EpisodeParams params_;
  RewardConfig reward_;
};

class AsteroidEnvironment final : public Environment {
 public:
  AsteroidEnvironment(AsteroidConfig config, std::shared_ptr<const SensorAssets> assets, std::uint64_t seed);

  std::size_t obs_dim() const override;
  double action_scale() const override { return config_.engine.thrust_max; }
  void seed(std::uint64_t seed) override { rng_ = Rng(seed); }
  VecX reset() override;
  StepResult step(const VecX& action) override;
  const LanderState& state() const override { return state_; }
  const EpisodeParams& params() const override { return params_; }
  NavEstimate nav() const override { return {state_.r, state_.v, state_.mass}; }
  Vec3 nominal_gravity() const override;

  VecX start(const EpisodeStart& episode);
  VecX observe();

 private:
  AsteroidConfig config_;
  std::shared_ptr<const SensorAssets> assets_;
  std::optional<LidarSensor> lidar_;
  Rng rng_;
  LanderState state_;
  EpisodeParams params_;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config, std::shared_ptr<const SensorAssets> assets,
                                              std::uint64_t seed);

/// Observation length produced by a configuration.
std::size_t observation_dim(const EnvConfig& config);

}  // namespace metaland
