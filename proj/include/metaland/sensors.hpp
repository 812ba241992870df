#pragma once

#include "metaland/asteroid_mesh.hpp"
#include "metaland/common.hpp"
#include "metaland/dynamics.hpp"
#include "metaland/terrain.hpp"

#include <memory>
#include <vector>

namespace metaland {

enum class PointingMode { velocity_averaged_down, target_pointing, velocity_aligned };

struct BeamSet {
  Vec3 axis = -Vec3::UnitZ();
  std::vector<Vec3> beams;  // unit vectors
};

inline constexpr double kRadarOffsetAngle = kPi / 8.0;
inline constexpr double kLidarOffsetDeg = 12.0;
inline constexpr double kLidarMaxRange = 5000.0;

// Beams at a common offset angle around `axis`, azimuthally equally spaced.
// With include_axis the axis itself is the first beam.
BeamSet cone_beams(const Vec3& axis, double offset_angle, int count, bool include_axis);

// Radar beam directions. velocity_averaged_down: axis between the velocity direction
// and straight down. target_pointing: axis from the lander toward `target`.
// Degenerate axes fall back to straight down.
BeamSet radar_beam_dirs(const Vec3& v, PointingMode mode, const Vec3& lander_pos = Vec3::Zero(),
                        const Vec3& target = Vec3::Zero());

enum class RadarLayout { ranges, ranges_doppler };

/// Radar altimeter output for a lander at map-frame position `pos_map`.
VecX radar_observe(const Vec3& pos_map, const Vec3& velocity, const TerrainMap& dtm, PointingMode mode,
                   RadarLayout layout, const Vec3& target_map);

std::size_t radar_obs_dim(RadarLayout layout);

// Five-beam Doppler LIDAR over an asteroid mesh. The central beam follows the
// velocity vector; with zero velocity the previous beam set is held. Output is
// [5 ranges, 5 closing velocities].
class LidarSensor {
 public:
  explicit LidarSensor(std::shared_ptr<const MeshRayCaster> caster) : caster_(std::move(caster)) {}

  void reset(const Vec3& initial_axis);
  VecX observe(const LanderState& state, const AsteroidEnvForces& forces);
  const BeamSet& beams() const { return beams_; }

 private:
  std::shared_ptr<const MeshRayCaster> caster_;
  BeamSet beams_ = cone_beams(-Vec3::UnitZ(), deg2rad(kLidarOffsetDeg), 4, true);
};

}  // namespace metaland
