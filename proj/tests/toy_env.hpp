#pragma once

#include "metaland/environments.hpp"
#include "metaland/rng.hpp"

#include <cmath>

namespace toy {

// 1-D double integrator x'' = u with |u| <= 1, fixed 40-step horizon.
// Reward penalizes distance and speed; the terminal position is reported as r.
class DoubleIntegrator final : public metaland::Environment {
 public:
  explicit DoubleIntegrator(std::uint64_t seed = 0) : rng_(seed) {}

  std::size_t obs_dim() const override { return 2; }
  std::size_t act_dim() const override { return 1; }
  double action_scale() const override { return 1.0; }
  void seed(std::uint64_t s) override { rng_ = metaland::Rng(s); }

  metaland::VecX reset() override {
    state_ = {};
    state_.r.x() = rng_.uniform(-1.0, 1.0);
    state_.mass = 1.0;
    k_ = 0;
    return observe();
  }

  metaland::StepResult step(const metaland::VecX& action) override {
    const double u = std::clamp(action[0], -1.0, 1.0);
    state_.r.x() += dt * state_.v.x() + 0.5 * dt * dt * u;
    state_.v.x() += dt * u;
    state_.t += dt;
    ++k_;
    metaland::StepResult res;
    res.observation = observe();
    res.reward = -(std::abs(state_.r.x()) + 0.3 * std::abs(state_.v.x()));
    res.done = k_ >= kHorizon;
    res.info.state = state_;
    res.info.success = res.done && std::abs(state_.r.x()) < 0.1;
    return res;
  }

  const metaland::LanderState& state() const override { return state_; }
  const metaland::EpisodeParams& params() const override { return params_; }
  metaland::NavEstimate nav() const override { return {state_.r, state_.v, state_.mass}; }
  metaland::Vec3 nominal_gravity() const override { return metaland::Vec3::Zero(); }

  static constexpr int kHorizon = 40;
  static constexpr double dt = 0.25;

 private:
  metaland::VecX observe() const {
    metaland::VecX o(2);
    o << state_.r.x(), state_.v.x();
    return o;
  }

  metaland::Rng rng_;
  metaland::LanderState state_;
  metaland::EpisodeParams params_;
  int k_ = 0;
};

}  // namespace toy
