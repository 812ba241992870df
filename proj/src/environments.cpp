#include "metaland/environments.hpp"

#include <algorithm>
#include <cmath>

namespace metaland {

namespace {

Vec3 uniform_vec(Rng& rng, const Vec3& lo, const Vec3& hi) {
  Vec3 out;
  for (int k = 0; k < 3; ++k) out[k] = rng.uniform(lo[k], hi[k]);
  return out;
}

Vec3 symmetric_vec(Rng& rng, double half_width) {
  return uniform_vec(rng, Vec3::Constant(-half_width), Vec3::Constant(half_width));
}

LanderState lerp(const LanderState& a, const LanderState& b, double f) {
  LanderState out;
  out.r = a.r + f * (b.r - a.r);
  out.v = a.v + f * (b.v - a.v);
  out.mass = a.mass + f * (b.mass - a.mass);
  out.t = a.t + f * (b.t - a.t);
  return out;
}

Vec3 landing_normal(const EpisodeParams& params) {
  return params.body == Body::asteroid ? params.asteroid.r_offset.normalized() : Vec3::UnitZ();
}

}  // namespace

EpisodeStart reset_mars(const MarsConfig& cfg, Rng& rng) {
  EpisodeStart ep;
  ep.state.r = uniform_vec(rng, cfg.r_min, cfg.r_max);
  ep.state.v = uniform_vec(rng, cfg.v_min, cfg.v_max);
  ep.state.mass = rng.uniform(cfg.mass_min, cfg.mass_max);
  ep.state.t = 0.0;

  EpisodeParams& p = ep.params;
  p.body = Body::mars;
  p.mars.a_env = symmetric_vec(rng, cfg.a_env_max);
  p.mars.g = cfg.gravity;
  p.engine = cfg.engine;
  p.engine.axis_max = cfg.failure_axis_max_fraction * cfg.engine.thrust_max;

  const bool failed = rng.bernoulli(cfg.failure_probability);
  const bool downrange = rng.uniform01() < 0.5;
  if (failed) {
    p.failure = downrange ? FailureMode::downrange_capped : FailureMode::crossrange_capped;
    const double lateral = 1.0 / cfg.failure_lateral_factor;
    const double vertical = 1.0 / cfg.failure_vertical_factor;
    p.engine.per_axis_caps = downrange ? Vec3(lateral, 1.0, vertical) : Vec3(1.0, lateral, vertical);
  }
  p.bias_r = rng.uniform(-cfg.bias_max, cfg.bias_max);
  p.bias_v = rng.uniform(-cfg.bias_max, cfg.bias_max);
  p.initial_mass = ep.state.mass;
  p.v_o = cfg.reward.v_o > 0.0 ? cfg.reward.v_o : ep.state.v.norm();
  return ep;
}

EpisodeStart reset_asteroid(const AsteroidConfig& cfg, Rng& rng) {
  EpisodeStart ep;
  const double distance = rng.uniform(cfg.distance_min, cfg.distance_max);
  const double polar = deg2rad(rng.uniform(0.0, cfg.polar_max_deg));
  const double azimuth = deg2rad(rng.uniform(-cfg.azimuth_max_deg, cfg.azimuth_max_deg));
  const double heading = deg2rad(rng.uniform(-cfg.heading_max_deg, cfg.heading_max_deg));
  const double heading_axis = rng.uniform(0.0, 2.0 * kPi);
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);

  ep.state.r = distance * Vec3(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar));
  const Vec3 los = -ep.state.r.normalized();
  const auto [e1, e2] = orthonormal_complement(los);
  const Vec3 k = std::cos(heading_axis) * e1 + std::sin(heading_axis) * e2;
  ep.state.v = speed * (std::cos(heading) * los + std::sin(heading) * k.cross(los));
  ep.state.mass = rng.uniform(cfg.mass_min, cfg.mass_max);

  EpisodeParams& p = ep.params;
  p.body = Body::asteroid;
  p.asteroid.omega = symmetric_vec(rng, cfg.omega_max);
  p.asteroid.a_srp = symmetric_vec(rng, cfg.srp_max);
  p.asteroid.mass = rng.uniform(cfg.body_mass_min, cfg.body_mass_max);
  p.asteroid.G = cfg.G;
  p.asteroid.r_offset = Vec3(0.0, 0.0, cfg.target_radius);
  p.engine = cfg.engine;
  p.initial_mass = ep.state.mass;
  p.v_o = cfg.reward.v_o > 0.0 ? cfg.reward.v_o : ep.state.v.norm();
  return ep;
}

Vec3 condition_thrust(const Vec3& cmd, const EpisodeParams& params) {
  const EngineConfig& e = params.engine;
  Vec3 thrust = cmd;
  if (params.body == Body::asteroid) {
    return thrust.cwiseMax(-e.thrust_max).cwiseMin(e.thrust_max);
  }
  // Caps only bind in failure episodes; a healthy engine is limited by the norm window.
  if (params.failure != FailureMode::none) {
    const double axis_max = e.axis_max > 0.0 ? e.axis_max : e.thrust_max;
    for (int k = 0; k < 3; ++k) {
      const double lim = e.per_axis_caps[k] * axis_max;
      thrust[k] = std::clamp(thrust[k], -lim, lim);
    }
  }
  const double n = thrust.norm();
  if (n > e.thrust_max) {
    thrust *= e.thrust_max / n;
  } else if (n > 0.0 && n < e.thrust_min) {
    thrust *= e.thrust_min / n;
  }
  return thrust;
}

TargetVelocity shaping_field(const Vec3& r_hat, const Vec3& v_hat, double v_o, double tau) {
  TargetVelocity out;
  const double range = r_hat.norm();
  const double speed = v_hat.norm();
  out.t_go = speed < kSpeedEpsilon ? kSaturatedTgo : range / speed;
  if (range < kRangeEpsilon) {
    out.v_targ = Vec3::Zero();
    return out;
  }
  out.v_targ = -v_o * (r_hat / range) * (1.0 - std::exp(-out.t_go / tau));
  return out;
}

TargetVelocity target_velocity_mars(const Vec3& r, const Vec3& v, const RewardConfig& cfg) {
  if (r.z() > cfg.aim_altitude) {
    return shaping_field(r - Vec3(0.0, 0.0, cfg.aim_altitude), v - Vec3(0.0, 0.0, cfg.descent_rate_high), cfg.v_o,
                         cfg.tau1);
  }
  return shaping_field(Vec3(0.0, 0.0, r.z()), v - Vec3(0.0, 0.0, cfg.descent_rate_low), cfg.v_o, cfg.tau2);
}

TargetVelocity target_velocity_asteroid(const Vec3& r, const Vec3& v, const RewardConfig& cfg) {
  return shaping_field(r, v, cfg.v_o, cfg.tau1);
}

double glideslope(const Vec3& v) {
  const double horizontal = std::hypot(v.x(), v.y());
  if (horizontal == 0.0 && v.z() == 0.0) return 90.0;
  return rad2deg(std::atan2(std::abs(v.z()), horizontal));
}

bool landing_success(const Vec3& r, const Vec3& v, double altitude, const RewardConfig& cfg) {
  const bool gs_ok = !cfg.use_glideslope || glideslope(v) > cfg.gs_lim;
  return altitude <= 0.0 && r.norm() < cfg.r_lim && v.norm() < cfg.v_lim && gs_ok;
}

double step_reward(const Vec3& v, const Vec3& thrust, const Vec3& v_targ, bool success, const RewardConfig& cfg,
                   double thrust_ref) {
  return cfg.alpha * (v - v_targ).norm() + cfg.beta * (thrust.norm() / thrust_ref) + cfg.gamma_const +
         (success ? cfg.eta : 0.0);
}

Termination terminate_mars(const LanderState& s, const MarsConfig& cfg) {
  Termination out;
  if (s.r.z() <= 0.0) {
    out.done = true;
    out.success = landing_success(s.r, s.v, s.r.z(), cfg.reward);
    return out;
  }
  out.done = s.t > cfg.t_max || std::abs(s.r.x()) > cfg.box_xy || std::abs(s.r.y()) > cfg.box_xy ||
             s.r.z() > cfg.box_z;
  return out;
}

Termination terminate_asteroid(const LanderState& s, const AsteroidConfig& cfg, const EpisodeParams& params) {
  Termination out;
  const double altitude = s.r.dot(landing_normal(params));
  if (altitude <= 0.0) {
    out.done = true;
    out.success = landing_success(s.r, s.v, altitude, cfg.reward);
    return out;
  }
  out.done = s.t > cfg.t_max || s.r.norm() > cfg.escape_distance;
  return out;
}

std::shared_ptr<const SensorAssets> SensorAssets::build(const EnvConfig& config) {
  auto assets = std::make_shared<SensorAssets>();
  if (const auto* mars = std::get_if<MarsConfig>(&config)) {
    if (mars->sensing == MarsSensing::radar) {
      DtmOptions opt;
      opt.summit_x = mars->radar.target_map.x();
      opt.summit_y = mars->radar.target_map.y();
      opt.summit_elevation = mars->radar.target_map.z() - 50.0;
      assets->dtm = std::make_shared<const TerrainMap>(
          generate_dtm(mars->radar.dtm_seed, mars->radar.dtm_size, mars->radar.dtm_spacing, opt));
    }
  } else {
    const auto& ast = std::get<AsteroidConfig>(config);
    if (ast.sensing == AsteroidSensing::lidar) {
      AsteroidMeshOptions opt = ast.mesh;
      opt.mean_radius = ast.target_radius;
      assets->mesh = std::make_shared<const MeshRayCaster>(generate_asteroid_mesh(ast.mesh_seed, opt));
    }
  }
  return assets;
}

// ---------------------------------------------------------------------------
// Mars

MarsEnvironment::MarsEnvironment(MarsConfig config, std::shared_ptr<const SensorAssets> assets, std::uint64_t seed)
    : config_(std::move(config)), assets_(std::move(assets)), rng_(seed) {
  if (config_.sensing == MarsSensing::radar && (!assets_ || !assets_->dtm)) {
    throw ConfigError("radar sensing requires a terrain map");
  }
  start(reset_mars(config_, rng_));
}

std::size_t MarsEnvironment::obs_dim() const {
  return config_.sensing == MarsSensing::radar ? radar_obs_dim(config_.radar.layout) : 5;
}

VecX MarsEnvironment::reset() { return start(reset_mars(config_, rng_)); }

VecX MarsEnvironment::start(const EpisodeStart& episode) {
  state_ = episode.state;
  params_ = episode.params;
  reward_ = config_.reward;
  reward_.v_o = params_.v_o;
  return observe();
}

NavEstimate MarsEnvironment::nav() const {
  NavEstimate nav{state_.r, state_.v, state_.mass};
  if (config_.sensing == MarsSensing::biased) {
    nav.r = state_.r + params_.bias_r * state_.r.cwiseAbs();
    nav.v = state_.v + params_.bias_v * state_.v.cwiseAbs();
  }
  return nav;
}

VecX MarsEnvironment::observe() const {
  if (config_.sensing == MarsSensing::radar) {
    return radar_observe(state_.r + config_.radar.target_map, state_.v, *assets_->dtm, config_.radar.mode,
                         config_.radar.layout, config_.radar.target_map);
  }
  const NavEstimate est = nav();
  const TargetVelocity tv = target_velocity_mars(est.r, est.v, reward_);
  VecX obs(5);
  obs << est.v - tv.v_targ, est.r.z(), tv.t_go;
  return obs;
}

StepResult MarsEnvironment::step(const VecX& action) {
  if (action.size() != 3) throw ConfigError("mars step: action must have 3 components");
  if (!action.allFinite()) throw NumericFault("mars step: non-finite action");
  const Vec3 thrust = condition_thrust(Vec3(action.head<3>()) * params_.engine.thrust_max, params_);

  const MarsEnvForces forces = params_.mars;
  const AccelFn accel = [&forces](const LanderState& s, const Vec3& t) { return mars_accel(s, t, forces); };
  const Vec3 applied = state_.mass > params_.engine.dry_mass ? thrust : Vec3::Zero();
  for (int k = 0; k < config_.substeps; ++k) {
    const LanderState prev = state_;
    state_ = rk4_step(state_, applied, accel, params_.engine, config_.dt);
    if (state_.r.z() <= 0.0) {
      state_ = lerp(prev, state_, prev.r.z() / (prev.r.z() - state_.r.z()));
      state_.r.z() = 0.0;
      break;
    }
    if (terminate_mars(state_, config_).done) break;
  }

  const Termination term = terminate_mars(state_, config_);
  const TargetVelocity tv = target_velocity_mars(state_.r, state_.v, reward_);

  StepResult out;
  out.done = term.done;
  out.reward = step_reward(state_.v, applied, tv.v_targ, term.success, reward_, params_.engine.thrust_max);
  out.info = {state_, applied, params_.initial_mass - state_.mass, term.success};
  out.observation = observe();
  return out;
}

// ---------------------------------------------------------------------------
// Asteroid

AsteroidEnvironment::AsteroidEnvironment(AsteroidConfig config, std::shared_ptr<const SensorAssets> assets,
                                         std::uint64_t seed)
    : config_(std::move(config)), assets_(std::move(assets)), rng_(seed) {
  if (config_.sensing == AsteroidSensing::lidar) {
    if (!assets_ || !assets_->mesh) throw ConfigError("lidar sensing requires an asteroid mesh");
    lidar_.emplace(assets_->mesh);
  }
  start(reset_asteroid(config_, rng_));
}

std::size_t AsteroidEnvironment::obs_dim() const { return config_.sensing == AsteroidSensing::lidar ? 10 : 4; }

Vec3 AsteroidEnvironment::nominal_gravity() const {
  const double mean_mass = 0.5 * (config_.body_mass_min + config_.body_mass_max);
  return -Vec3::UnitZ() * config_.G * mean_mass / (config_.target_radius * config_.target_radius);
}

VecX AsteroidEnvironment::reset() { return start(reset_asteroid(config_, rng_)); }

VecX AsteroidEnvironment::start(const EpisodeStart& episode) {
  state_ = episode.state;
  params_ = episode.params;
  if (lidar_) lidar_->reset(state_.v.norm() > 0.0 ? Vec3(state_.v) : Vec3(-state_.r));
  return observe();
}

VecX AsteroidEnvironment::observe() {
  if (lidar_) return lidar_->observe(state_, params_.asteroid);
  RewardConfig cfg = config_.reward;
  cfg.v_o = params_.v_o;
  const TargetVelocity tv = target_velocity_asteroid(state_.r, state_.v, cfg);
  VecX obs(4);
  obs << state_.v - tv.v_targ, tv.t_go;
  return obs;
}

StepResult AsteroidEnvironment::step(const VecX& action) {
  if (action.size() != 3) throw ConfigError("asteroid step: action must have 3 components");
  if (!action.allFinite()) throw NumericFault("asteroid step: non-finite action");
  const Vec3 thrust = condition_thrust(Vec3(action.head<3>()) * config_.engine.thrust_max, params_);

  const AsteroidEnvForces forces = params_.asteroid;
  const AccelFn accel = [&forces](const LanderState& s, const Vec3& t) { return asteroid_accel(s, t, forces); };
  const Vec3 normal = landing_normal(params_);
  const Vec3 applied = state_.mass > params_.engine.dry_mass ? thrust : Vec3::Zero();
  for (int k = 0; k < config_.substeps; ++k) {
    const LanderState prev = state_;
    state_ = rk4_step(state_, applied, accel, params_.engine, config_.dt);
    const double alt = state_.r.dot(normal);
    if (alt <= 0.0) {
      const double prev_alt = prev.r.dot(normal);
      state_ = lerp(prev, state_, prev_alt / (prev_alt - alt));
      state_.r -= state_.r.dot(normal) * normal;
      break;
    }
    if (terminate_asteroid(state_, config_, params_).done) break;
  }

  const Termination term = terminate_asteroid(state_, config_, params_);
  RewardConfig cfg = config_.reward;
  cfg.v_o = params_.v_o;
  const TargetVelocity tv = target_velocity_asteroid(state_.r, state_.v, cfg);

  StepResult out;
  out.done = term.done;
  out.reward = step_reward(state_.v, applied, tv.v_targ, term.success, cfg, config_.engine.thrust_max);
  out.info = {state_, applied, params_.initial_mass - state_.mass, term.success};
  out.observation = observe();
  return out;
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config, std::shared_ptr<const SensorAssets> assets,
                                              std::uint64_t seed) {
  if (!assets) assets = SensorAssets::build(config);
  if (const auto* mars = std::get_if<MarsConfig>(&config)) {
    return std::make_unique<MarsEnvironment>(*mars, std::move(assets), seed);
  }
  return std::make_unique<AsteroidEnvironment>(std::get<AsteroidConfig>(config), std::move(assets), seed);
}

std::size_t observation_dim(const EnvConfig& config) {
  if (const auto* mars = std::get_if<MarsConfig>(&config)) {
    return mars->sensing == MarsSensing::radar ? radar_obs_dim(mars->radar.layout) : 5;
  }
  return std::get<AsteroidConfig>(config).sensing == AsteroidSensing::lidar ? 10 : 4;
}

}  // namespace metaland
