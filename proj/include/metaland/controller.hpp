#pragma once

#include "metaland/environments.hpp"
#include "metaland/guidance_drdv.hpp"

#include <memory>
#include <string>

namespace metaland {

/// Closed-loop policy producing normalized actions for an Environment.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called at the start of every episode.
  virtual void reset(const Environment& env) = 0;
  virtual VecX act(const VecX& observation, const Environment& env) = 0;
  virtual std::unique_ptr<Controller> clone() const = 0;
};

struct DrDvSettings {
  double gamma_mars = 1.0;
  double gamma_asteroid = 1e-6;
  double asteroid_gravity_scale = 10.0;  // multiple of the mean environmental gravity
  double t_go_min_mars = 0.5;
  double t_go_min_asteroid = 10.0;
  // steered-to touchdown speed along the landing normal; zero would hover just above the target
  double touchdown_speed_mars = 0.5;
  double touchdown_speed_asteroid = 0.1;
};

DrDvConfig drdv_config_for(const Environment& env, const DrDvSettings& settings);

class DrDvController final : public Controller {
 public:
  explicit DrDvController(DrDvSettings settings) : settings_(settings) {}
  std::string name() const override { return "drdv"; }
  void reset(const Environment& env) override { cfg_ = drdv_config_for(env, settings_); }
  VecX act(const VecX& observation, const Environment& env) override;
  std::unique_ptr<Controller> clone() const override { return std::make_unique<DrDvController>(*this); }

 private:
  DrDvSettings settings_;
  DrDvConfig cfg_{};
};

}  // namespace metaland
