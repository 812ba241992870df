#pragma once

#include "metaland/common.hpp"
#include "metaland/environments.hpp"

namespace metaland {

struct DrDvConfig {
  Vec3 g_nominal{0.0, 0.0, -3.7114};
  double gamma_weight = 1.0;  // time penalty in the cost-to-go
  double t_go_min = 0.5;      // s
  Vec3 v_final = Vec3::Zero();  // touchdown velocity the law steers to
  Vec3 r_aim = Vec3::Zero();    // aim point, target frame
};

/// Minimum-energy command a = -(4 v + 2 v_f)/t_go - (6/t_go^2) r - g; t_go is floored at t_go_min.
Vec3 drdv_accel(const Vec3& r, const Vec3& v, const Vec3& g, double t_go, double t_go_min = 0.0,
                const Vec3& v_final = Vec3::Zero());

/// J(t) = G t + 1/2 (c1.c1 t + c1.c2 t^2 + c2.c2 t^3 / 3), the cost-to-go of the linear-in-time control.
double drdv_cost(const Vec3& r, const Vec3& v, const DrDvConfig& cfg, double t);

/// Minimizer of drdv_cost over [t_go_min, 10 |r| / max(|v|, eps)].
double solve_tgo(const Vec3& r, const Vec3& v, const DrDvConfig& cfg);

/// Guidance thrust for a navigation estimate, conditioned like the learned agents' commands.
Vec3 drdv_thrust(const NavEstimate& nav, const EpisodeParams& params, const DrDvConfig& cfg);

}  // namespace metaland
