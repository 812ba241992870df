#include "metaland/guidance_drdv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metaland {

namespace {

constexpr int kGridPoints = 96;
constexpr int kGoldenIterations = 80;

}  // namespace

Vec3 drdv_accel(const Vec3& r, const Vec3& v, const Vec3& g, double t_go, double t_go_min, const Vec3& v_final) {
  const double t = std::max(t_go, t_go_min);
  if (!(t > 0.0)) throw ConfigError("drdv_accel: time-to-go must be positive");
  return -(4.0 * v + 2.0 * v_final) / t - (6.0 / (t * t)) * r - g;
}

double drdv_cost(const Vec3& r, const Vec3& v, const DrDvConfig& cfg, double t) {
  const Vec3 c1 = drdv_accel(r, v, cfg.g_nominal, t, 0.0, cfg.v_final);
  const Vec3 c2 = (12.0 / (t * t * t)) * r + (6.0 / (t * t)) * (v + cfg.v_final);
  return cfg.gamma_weight * t + 0.5 * (c1.dot(c1) * t + c1.dot(c2) * t * t + c2.dot(c2) * t * t * t / 3.0);
}

double solve_tgo(const Vec3& r, const Vec3& v, const DrDvConfig& cfg) {
  const double lo = cfg.t_go_min;
  const double hi = 10.0 * r.norm() / std::max(v.norm(), kSpeedEpsilon);
  if (!(hi > lo)) return lo;

  // coarse logarithmic scan, then golden-section inside the best bracket
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / (kGridPoints - 1);
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGridPoints; ++k) {
    const double c = drdv_cost(r, v, cfg, std::exp(log_lo + step * k));
    if (c < best_cost) {
      best_cost = c;
      best = k;
    }
  }
  double a = std::exp(log_lo + step * std::max(best - 1, 0));
  double b = std::exp(log_lo + step * std::min(best + 1, kGridPoints - 1));

  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = drdv_cost(r, v, cfg, x1);
  double f2 = drdv_cost(r, v, cfg, x2);
  for (int it = 0; it < kGoldenIterations; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = drdv_cost(r, v, cfg, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = drdv_cost(r, v, cfg, x2);
    }
  }
  const double t = 0.5 * (a + b);
  return std::clamp(t, lo, hi);
}

Vec3 drdv_thrust(const NavEstimate& nav, const EpisodeParams& params, const DrDvConfig& cfg) {
  const Vec3 r = nav.r - cfg.r_aim;
  const double t_go = solve_tgo(r, nav.v, cfg);
  const Vec3 a = drdv_accel(r, nav.v, cfg.g_nominal, t_go, cfg.t_go_min, cfg.v_final);
  return condition_thrust(nav.mass * a, params);
}

}  // namespace metaland
