#include "metaland/sensors.hpp"

#include <cmath>

namespace metaland {

BeamSet cone_beams(const Vec3& axis, double offset_angle, int count, bool include_axis) {
  BeamSet set;
  set.axis = axis.normalized();
  const auto [e1, e2] = orthonormal_complement(set.axis);
  if (include_axis) set.beams.push_back(set.axis);
  for (int k = 0; k < count; ++k) {
    const double az = 2.0 * kPi * k / count;
    const Vec3 radial = std::cos(az) * e1 + std::sin(az) * e2;
    set.beams.push_back((std::cos(offset_angle) * set.axis + std::sin(offset_angle) * radial).normalized());
  }
  return set;
}

BeamSet radar_beam_dirs(const Vec3& v, PointingMode mode, const Vec3& lander_pos, const Vec3& target) {
  constexpr double kDegenerate = 1e-9;
  Vec3 axis = -Vec3::UnitZ();
  if (mode == PointingMode::target_pointing) {
    const Vec3 los = target - lander_pos;
    if (los.norm() > kDegenerate) axis = los;
  } else if (v.norm() > kDegenerate) {
    const Vec3 vhat = v.normalized();
    const Vec3 candidate = mode == PointingMode::velocity_aligned ? vhat : Vec3(vhat - Vec3::UnitZ());
    if (candidate.norm() > kDegenerate) axis = candidate;
  }
  return cone_beams(axis, kRadarOffsetAngle, 4, false);
}

std::size_t radar_obs_dim(RadarLayout layout) { return layout == RadarLayout::ranges ? 4 : 8; }

VecX radar_observe(const Vec3& pos_map, const Vec3& velocity, const TerrainMap& dtm, PointingMode mode,
                   RadarLayout layout, const Vec3& target_map) {
  const BeamSet set = radar_beam_dirs(velocity, mode, pos_map, target_map);
  const std::size_t n = set.beams.size();
  VecX obs = VecX::Zero(static_cast<Eigen::Index>(radar_obs_dim(layout)));
  for (std::size_t k = 0; k < n; ++k) {
    const RangeHit hit = plane_stack_range(pos_map, set.beams[k], dtm);
    obs[static_cast<Eigen::Index>(k)] = hit.hit ? hit.range : kRadarMaxRange;
    if (layout == RadarLayout::ranges_doppler) {
      obs[static_cast<Eigen::Index>(n + k)] = hit.hit ? velocity.dot(set.beams[k]) : 0.0;
    }
  }
  return obs;
}

void LidarSensor::reset(const Vec3& initial_axis) {
  beams_ = cone_beams(initial_axis, deg2rad(kLidarOffsetDeg), 4, true);
}

VecX LidarSensor::observe(const LanderState& state, const AsteroidEnvForces& forces) {
  if (state.v.norm() > 1e-12) beams_ = cone_beams(state.v, deg2rad(kLidarOffsetDeg), 4, true);
  const Vec3 origin = target_to_asteroid_frame(state.r, forces);
  const std::size_t n = beams_.beams.size();
  VecX obs = VecX::Zero(static_cast<Eigen::Index>(2 * n));
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& dir = beams_.beams[k];
    const auto range = caster_->cast(origin, dir, kLidarMaxRange);
    const auto i = static_cast<Eigen::Index>(k);
    obs[i] = range ? *range : kLidarMaxRange;
    // The surface is stationary in the asteroid-fixed frame the state lives in,
    // so the closing speed is the lander velocity projected on the beam.
    obs[static_cast<Eigen::Index>(n) + i] = range ? state.v.dot(dir) : 0.0;
  }
  return obs;
}

}  // namespace metaland
