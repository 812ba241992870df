#pragma once

#include "metaland/common.hpp"

#include <functional>

namespace metaland {

/// Translational state of the lander in the target-centered frame.
struct LanderState {
  Vec3 r = Vec3::Zero();  // m
  Vec3 v = Vec3::Zero();  // m/s
  double mass = 0.0;      // kg
  double t = 0.0;         // s since episode start
};

struct MarsEnvForces {
  Vec3 a_env = Vec3::Zero();
  Vec3 g{0.0, 0.0, -3.7114};
};

struct AsteroidEnvForces {
  Vec3 omega = Vec3::Zero();  // rad/s, asteroid-fixed frame
  double mass = 0.0;          // kg
  Vec3 a_srp = Vec3::Zero();  // m/s^2
  double G = 6.674e-11;
  Vec3 r_offset{0.0, 0.0, 250.0};  // asteroid center -> target
};

struct EngineConfig {
  double isp = 225.0;  // s
  double g_ref = 9.8;  // m/s^2
  double thrust_min = 2000.0;
  double thrust_max = 15000.0;
  Vec3 per_axis_caps = Vec3::Ones();
  double dry_mass = 200.0;  // kg, propellant exhausted below this
  double axis_max = 0.0;    // N, base of the per-axis caps; <= 0 means thrust_max
};

/// Acceleration a(state, thrust) used by the integrator.
using AccelFn = std::function<Vec3(const LanderState&, const Vec3&)>;

Vec3 mars_accel(const LanderState& state, const Vec3& thrust, const MarsEnvForces& forces);

Vec3 target_to_asteroid_frame(const Vec3& r, const AsteroidEnvForces& forces);

// Rotating-frame equation of motion: thrust, SRP, point-mass gravity about the
// asteroid center, Coriolis 2 v x w and centrifugal (w x r_a) x w.
Vec3 asteroid_accel(const LanderState& state, const Vec3& thrust, const AsteroidEnvForces& forces);

/// Propellant consumption rate |T| / (Isp g_ref), kg/s, always >= 0.
double mass_flow(const Vec3& thrust, const EngineConfig& engine);

// One RK4 step of (r, v, mass) under a zero-order-hold thrust. Once the dry mass
// floor is reached the engine produces no thrust; mass never drops below it.
LanderState rk4_step(const LanderState& state, const Vec3& thrust, const AccelFn& accel,
                     const EngineConfig& engine, double dt);

}  // namespace metaland
