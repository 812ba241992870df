#include "metaland/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace metaland {

Vec3 mars_accel(const LanderState& state, const Vec3& thrust, const MarsEnvForces& forces) {
  if (!(state.mass > 0.0)) throw InvalidStateError("mars_accel: lander mass must be positive");
  return thrust / state.mass + forces.a_env + forces.g;
}

Vec3 target_to_asteroid_frame(const Vec3& r, const AsteroidEnvForces& forces) {
  return r + forces.r_offset;
}

Vec3 asteroid_accel(const LanderState& state, const Vec3& thrust, const AsteroidEnvForces& forces) {
  if (!(state.mass > 0.0)) throw InvalidStateError("asteroid_accel: lander mass must be positive");
  const Vec3 ra = target_to_asteroid_frame(state.r, forces);
  const double dist = ra.norm();
  if (dist == 0.0) throw SingularityError("asteroid_accel: lander at asteroid center");
  const Vec3& w = forces.omega;
  const Vec3 gravity = -forces.mass * forces.G * ra / (dist * dist * dist);
  const Vec3 coriolis = 2.0 * state.v.cross(w);
  const Vec3 centrifugal = w.cross(ra).cross(w);
  return thrust / state.mass + forces.a_srp + gravity + coriolis + centrifugal;
}

double mass_flow(const Vec3& thrust, const EngineConfig& engine) {
  return thrust.norm() / (engine.isp * engine.g_ref);
}

namespace {

struct Derivative {
  Vec3 dr;
  Vec3 dv;
  double dm;
};

Derivative derivative(const LanderState& s, const Vec3& thrust, const AccelFn& accel,
                      const EngineConfig& engine) {
  return {s.v, accel(s, thrust), -mass_flow(thrust, engine)};
}

LanderState advance(const LanderState& s, const Derivative& d, double h) {
  LanderState out = s;
  out.r += h * d.dr;
  out.v += h * d.dv;
  out.mass += h * d.dm;
  out.t += h;
  return out;
}

}  // namespace

LanderState rk4_step(const LanderState& state, const Vec3& thrust, const AccelFn& accel,
                     const EngineConfig& engine, double dt) {
  const Vec3 applied = state.mass > engine.dry_mass ? thrust : Vec3::Zero();

  const Derivative k1 = derivative(state, applied, accel, engine);
  const Derivative k2 = derivative(advance(state, k1, 0.5 * dt), applied, accel, engine);
  const Derivative k3 = derivative(advance(state, k2, 0.5 * dt), applied, accel, engine);
  const Derivative k4 = derivative(advance(state, k3, dt), applied, accel, engine);

  LanderState out = state;
  out.r += dt / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
  out.v += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.mass += dt / 6.0 * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
  out.mass = std::max(out.mass, std::min(engine.dry_mass, state.mass));
  out.t = state.t + dt;
  return out;
}

}  // namespace metaland
