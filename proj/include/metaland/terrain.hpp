#pragma once

#include "metaland/common.hpp"
#include "metaland/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace metaland {

/// Regular elevation grid. Node (i, j) sits at (origin_x + i*spacing, origin_y + j*spacing).
struct TerrainMap {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double spacing = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double seam_x = 0.0;  // mirror line of a reflection-doubled map (0 when not doubled)
  std::vector<double> elevation;  // row-major: j * nx + i
  double elev_min = 0.0;  // cached by refresh_bounds()
  double elev_max = 0.0;

  double at(std::size_t i, std::size_t j) const { return elevation[j * nx + i]; }
  double& at(std::size_t i, std::size_t j) { return elevation[j * nx + i]; }

  double x_max() const { return origin_x + static_cast<double>(nx - 1) * spacing; }
  double y_max() const { return origin_y + static_cast<double>(ny - 1) * spacing; }
  bool contains(double x, double y) const {
    return x >= origin_x && x <= x_max() && y >= origin_y && y <= y_max();
  }

  void refresh_bounds();

  /// Elevation of the grid node closest to (x, y); nullopt outside the map.
  std::optional<double> nearest(double x, double y) const;
  /// Bilinear surface through the grid nodes; nullopt outside the map.
  std::optional<double> bilinear(double x, double y) const;

  void save(const std::filesystem::path& path) const;
  static TerrainMap load(const std::filesystem::path& path);
};

struct DtmOptions {
  double elevation_max = 380.0;  // elevations span [0, elevation_max]
  double summit_elevation = 350.0;
  double summit_x = 4000.0;  // map frame
  double summit_y = 4000.0;
  double summit_radius = 300.0;  // blend length of the planted hill
  double roughness = 0.55;       // amplitude decay per octave
  bool reflect = true;
};

// Diamond-square surface of size x size nodes (size = 2^k + 1), rescaled to
// [0, elevation_max] with a planted summit, then reflection-doubled along x.
TerrainMap generate_dtm(std::uint64_t seed, std::size_t size = 513, double spacing = 20.0,
                        const DtmOptions& options = {});

/// Flat map at constant elevation; test fixture and calibration aid.
TerrainMap flat_dtm(std::size_t nx, std::size_t ny, double spacing, double elevation,
                    double origin_x = 0.0, double origin_y = 0.0);

struct RangeHit {
  double range = 0.0;
  bool hit = false;
};

inline constexpr double kRadarMaxRange = 10000.0;

// Fast altimeter model: intersect the beam with a stack of horizontal planes
// spanning the map's elevations (spacing plane_spacing), index the nearest DTM
// node at each crossing and keep the crossing whose plane height is closest to
// that node's elevation. Reproduces the far-side errors of the original model.
RangeHit plane_stack_range(const Vec3& pos, const Vec3& dir, const TerrainMap& dtm,
                           double plane_spacing = 1.0);

// Exact first intersection of the ray with the bilinear surface, by grid-cell
// traversal and an analytic quadratic root in each cell. Ground-truth oracle.
RangeHit exact_terrain_range(const Vec3& pos, const Vec3& dir, const TerrainMap& dtm);

struct AltimeterErrorRow {
  double elevation = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  double miss_percent = 0.0;
  std::size_t samples = 0;
};

enum class RangeModel { plane_stack, exact };

// For each elevation: pick n random map nodes, place the lander at that
// elevation with a random horizontal offset (uniform disk, horizontal_radius),
// aim at the node, and compare the model range with the exact range.
std::vector<AltimeterErrorRow> altimeter_error_stats(const TerrainMap& dtm,
                                                     const std::vector<double>& elevations,
                                                     std::size_t n, Rng& rng,
                                                     RangeModel model = RangeModel::plane_stack,
                                                     double horizontal_radius = 1000.0);

}  // namespace metaland
