#include "metaland/controller.hpp"

namespace metaland {

// With t_go pinned at its floor the closed loop settles at r_aim + v_f t_go_min / 3. Aiming
// v_f t_go_min below the landing plane puts that rest point underground, so touchdown happens.
DrDvConfig drdv_config_for(const Environment& env, const DrDvSettings& settings) {
  DrDvConfig cfg;
  if (env.params().body == Body::mars) {
    cfg.g_nominal = env.nominal_gravity();
    cfg.gamma_weight = settings.gamma_mars;
    cfg.t_go_min = settings.t_go_min_mars;
    cfg.v_final = -settings.touchdown_speed_mars * Vec3::UnitZ();
  } else {
    cfg.g_nominal = settings.asteroid_gravity_scale * env.nominal_gravity();
    cfg.gamma_weight = settings.gamma_asteroid;
    cfg.t_go_min = settings.t_go_min_asteroid;
    cfg.v_final = -settings.touchdown_speed_asteroid * env.params().asteroid.r_offset.normalized();
  }
  cfg.r_aim = cfg.v_final * cfg.t_go_min;
  return cfg;
}

VecX DrDvController::act(const VecX& /*observation*/, const Environment& env) {
  const Vec3 thrust = drdv_thrust(env.nav(), env.params(), cfg_);
  return VecX(thrust / env.action_scale());
}

}  // namespace metaland
