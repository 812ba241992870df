#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace metaland {

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Raised when a physical state violates a precondition (non-positive mass, ...).
class InvalidStateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when the asteroid-centered position collapses onto the gravity singularity.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised on non-finite activations or gradients inside the learning stack.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or argument supplied by a caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Two unit vectors completing `axis` to a right-handed orthonormal basis.
// The reference vector is picked from the world axes least aligned with `axis`
// so the result is a deterministic function of the input.
inline std::pair<Vec3, Vec3> orthonormal_complement(const Vec3& axis) {
  Vec3 ref = Vec3::UnitX();
  const Vec3 a = axis.cwiseAbs();
  if (a.y() <= a.x() && a.y() <= a.z()) {
    ref = Vec3::UnitY();
  } else if (a.z() <= a.x() && a.z() <= a.y()) {
    ref = Vec3::UnitZ();
  }
  Vec3 e1 = axis.cross(ref).normalized();
  Vec3 e2 = axis.cross(e1).normalized();
  return {e1, e2};
}

}  // namespace metaland
