#include "metaland/dynamics.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>

using namespace metaland;

namespace {

double rel_err(const Vec3& a, const Vec3& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

LanderState at(const Vec3& r, const Vec3& v, double mass) {
  LanderState s;
  s.r = r;
  s.v = v;
  s.mass = mass;
  return s;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("mars acceleration examples") {
    MarsEnvForces f;
    CHECK((mars_accel(at(Vec3::Zero(), Vec3::Zero(), 2000), Vec3::Zero(), f) - Vec3(0, 0, -3.7114)).norm() < 1e-15);
    CHECK(mars_accel(at(Vec3::Zero(), Vec3::Zero(), 2000), Vec3(0, 0, 7422.8), f).norm() < 1e-12);
    f.a_env = Vec3(0.1, 0, 0);
    const Vec3 a = mars_accel(at(Vec3::Zero(), Vec3::Zero(), 1000), Vec3(2000, 0, 0), f);
    CHECK((a - Vec3(2.1, 0, -3.7114)).norm() < 1e-12);
    CHECK_THROWS_AS(mars_accel(at(Vec3::Zero(), Vec3::Zero(), 0.0), Vec3::Zero(), f), InvalidStateError);
  }

  TEST_CASE("asteroid acceleration examples") {
    AsteroidEnvForces f;
    f.r_offset = Vec3::Zero();
    f.omega = Vec3(0, 0, 1e-3);
    Vec3 a = asteroid_accel(at(Vec3(1000, 0, 0), Vec3::Zero(), 450), Vec3::Zero(), f);
    CHECK((a - Vec3(1e-3, 0, 0)).norm() < 1e-15);
    a = asteroid_accel(at(Vec3(1000, 0, 0), Vec3(0, 0.1, 0), 450), Vec3::Zero(), f);
    CHECK((a - Vec3(1.2e-3, 0, 0)).norm() < 1e-15);

    AsteroidEnvForces g;
    g.r_offset = Vec3::Zero();
    g.mass = 2e10;
    a = asteroid_accel(at(Vec3(1000, 0, 0), Vec3::Zero(), 450), Vec3::Zero(), g);
    CHECK(a.x() == doctest::Approx(-1.3348e-6).epsilon(1e-12));  // M G / |r|^2
    CHECK(std::abs(a.y()) + std::abs(a.z()) == 0.0);

    g.r_offset = Vec3(0, 0, 250);
    CHECK_THROWS_AS(asteroid_accel(at(Vec3(0, 0, -250), Vec3::Zero(), 450), Vec3::Zero(), g), SingularityError);
  }

  TEST_CASE("frame translation") {
    AsteroidEnvForces f;
    CHECK(target_to_asteroid_frame(Vec3::Zero(), f) == f.r_offset);
    CHECK(target_to_asteroid_frame(-f.r_offset, f).norm() == 0.0);
    CHECK(target_to_asteroid_frame(Vec3(10, 0, 0), f) == Vec3(10, 0, 250));
  }

  TEST_CASE("mass flow") {
    EngineConfig e;
    CHECK(mass_flow(Vec3::Zero(), e) == 0.0);
    CHECK(mass_flow(Vec3(0, 0, 15000), e) == doctest::Approx(6.8027).epsilon(1e-4));
    e.isp = 37.5;
    CHECK(mass_flow(Vec3(2000, 0, 0), e) == doctest::Approx(5.4422).epsilon(1e-4));
    CHECK(mass_flow(Vec3(0, 0, -15000), e) > 0.0);
  }

  TEST_CASE("rk4 matches the ballistic closed form") {
    MarsEnvForces f;
    f.a_env = Vec3(0.13, -0.07, 0.02);
    const AccelFn acc = [&f](const LanderState& s, const Vec3& t) { return mars_accel(s, t, f); };
    EngineConfig e;
    const Vec3 r0(120.0, -40.0, 2350.0), v0(-35.0, 12.0, -80.0);
    LanderState s = at(r0, v0, 1900);
    const double dt = 0.05;
    for (int k = 0; k < 100; ++k) s = rk4_step(s, Vec3::Zero(), acc, e, dt);
    const double t = 100 * dt;
    const Vec3 g = f.a_env + f.g;
    CHECK(rel_err(s.r, r0 + v0 * t + 0.5 * g * t * t) <= 1e-9);
    CHECK(rel_err(s.v, v0 + g * t) <= 1e-9);
    CHECK(s.mass == 1900.0);
    CHECK(s.t == doctest::Approx(5.0).epsilon(1e-12));
  }

  TEST_CASE("hover holds position") {
    MarsEnvForces f;
    const AccelFn acc = [&f](const LanderState& s, const Vec3& t) { return mars_accel(s, t, f); };
    EngineConfig e;
    e.isp = 1e12;  // keep the mass fixed so the hover thrust stays exact
    LanderState s = at(Vec3(0, 0, 100), Vec3::Zero(), 2000);
    for (int k = 0; k < 20; ++k) s = rk4_step(s, Vec3(0, 0, 7422.8), acc, e, 0.05);
    CHECK((s.r - Vec3(0, 0, 100)).norm() <= 1e-6);
  }

  TEST_CASE("mass is monotone and floored") {
    MarsEnvForces f;
    const AccelFn acc = [&f](const LanderState& s, const Vec3& t) { return mars_accel(s, t, f); };
    EngineConfig e;
    LanderState s = at(Vec3(0, 0, 2000), Vec3::Zero(), 230);
    double prev = s.mass;
    for (int k = 0; k < 200; ++k) {
      s = rk4_step(s, Vec3(0, 0, 15000), acc, e, 0.05);
      CHECK(s.mass <= prev);
      CHECK(s.mass >= e.dry_mass);
      prev = s.mass;
    }
    CHECK(s.mass == e.dry_mass);
    // engine dead: pure gravity from here on
    const LanderState before = s;
    s = rk4_step(s, Vec3(0, 0, 15000), acc, e, 0.05);
    CHECK(s.v.z() == doctest::Approx(before.v.z() - 3.7114 * 0.05).epsilon(1e-12));
  }

  TEST_CASE("rotating frame agrees with inertial propagation") {
    AsteroidEnvForces f;
    f.omega = Vec3(2e-4, -3e-4, 8e-4);
    f.mass = 8e10;
    f.r_offset = Vec3(0, 0, 250);
    f.a_srp = Vec3::Zero();
    EngineConfig e;
    const AccelFn rot = [&f](const LanderState& s, const Vec3& t) { return asteroid_accel(s, t, f); };

    const Vec3 ra0(300.0, -150.0, 900.0);
    const Vec3 v_rot0(0.02, 0.05, -0.08);
    LanderState s = at(ra0 - f.r_offset, v_rot0, 480);

    // inertial frame coincides with the body frame at t = 0
    AsteroidEnvForces fi = f;
    fi.omega = Vec3::Zero();
    fi.r_offset = Vec3::Zero();
    const AccelFn inert = [&fi](const LanderState& q, const Vec3& t) { return asteroid_accel(q, t, fi); };
    LanderState q = at(ra0, v_rot0 + f.omega.cross(ra0), 480);

    const double dt = 0.5;
    for (int k = 0; k < 200; ++k) {
      s = rk4_step(s, Vec3::Zero(), rot, e, dt);
      q = rk4_step(q, Vec3::Zero(), inert, e, dt);
    }
    const double t = 100.0;
    const Eigen::AngleAxisd body(f.omega.norm() * t, f.omega.normalized());
    const Vec3 back = body.inverse() * q.r;
    CHECK((s.r + f.r_offset - back).norm() <= 1e-5);
  }

  TEST_CASE("orbital energy drift") {
    AsteroidEnvForces f;
    f.mass = 2e11;
    f.r_offset = Vec3::Zero();
    EngineConfig e;
    const AccelFn acc = [&f](const LanderState& s, const Vec3& t) { return asteroid_accel(s, t, f); };
    const double mu = f.G * f.mass;
    LanderState s = at(Vec3(1000, 0, 0), Vec3(0, 0.09, 0.03), 450);
    auto energy = [mu](const LanderState& x) { return 0.5 * x.v.squaredNorm() - mu / x.r.norm(); };
    const double e0 = energy(s);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      s = rk4_step(s, Vec3::Zero(), acc, e, 10.0);
      worst = std::max(worst, std::abs(energy(s) - e0) / std::abs(e0));
    }
    CHECK(worst < 1e-6);
  }
}
