#pragma once

#include "metaland/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace metaland {

struct AsteroidMesh {
  std::vector<Vec3> vertices;  // m, asteroid-centered frame
  std::vector<std::array<std::uint32_t, 3>> triangles;

  void save(const std::filesystem::path& path) const;
  static AsteroidMesh load(const std::filesystem::path& path);
};

struct AsteroidMeshOptions {
  double mean_radius = 250.0;
  double edge_length = 5.0;       // target resolution; picks the subdivision level
  double relief = 0.15;           // radius stays within mean_radius * (1 +- relief)
  int harmonics = 6;              // number of smooth noise terms
  double pole_flatten_deg = 8.0;  // radius pinned to mean_radius near +z
};

// Icosphere subdivided until the mean edge is at most edge_length, with the
// radius modulated by low-order smooth noise. Closed and watertight.
AsteroidMesh generate_asteroid_mesh(std::uint64_t seed, const AsteroidMeshOptions& options = {});

/// Icosphere at a given subdivision level (perfect sphere vertices).
AsteroidMesh icosphere(double radius, int subdivisions);

/// Every undirected edge is shared by exactly two triangles with opposite orientation.
bool is_watertight(const AsteroidMesh& mesh);

/// Mean edge length over all triangle edges.
double mean_edge_length(const AsteroidMesh& mesh);

// Watertight ray/triangle test (Woop, Benthin & Wald style, shear-transformed
// edge functions): a ray through a shared edge or vertex hits at least one of
// the adjacent triangles. Returns the ray parameter.
std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                         const Vec3& c, double t_max);

/// Bounding-volume hierarchy over an immutable mesh; nearest-hit queries.
class MeshRayCaster {
 public:
  explicit MeshRayCaster(AsteroidMesh mesh);

  std::optional<double> cast(const Vec3& origin, const Vec3& dir, double max_range) const;
  const AsteroidMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    std::uint32_t first = 0;  // leaf: first triangle in order_, inner: left child
    std::uint32_t count = 0;  // leaf when > 0
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids);

  AsteroidMesh mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace metaland
