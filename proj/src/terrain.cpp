#include "metaland/terrain.hpp"

#include "metaland/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace metaland {

void TerrainMap::refresh_bounds() {
  if (elevation.empty()) {
    elev_min = elev_max = 0.0;
    return;
  }
  const auto [lo, hi] = std::minmax_element(elevation.begin(), elevation.end());
  elev_min = *lo;
  elev_max = *hi;
}

std::optional<double> TerrainMap::nearest(double x, double y) const {
  if (!contains(x, y)) return std::nullopt;
  const auto i = static_cast<std::size_t>(std::lround((x - origin_x) / spacing));
  const auto j = static_cast<std::size_t>(std::lround((y - origin_y) / spacing));
  return at(std::min(i, nx - 1), std::min(j, ny - 1));
}

std::optional<double> TerrainMap::bilinear(double x, double y) const {
  if (!contains(x, y)) return std::nullopt;
  const double gx = (x - origin_x) / spacing;
  const double gy = (y - origin_y) / spacing;
  const auto i = std::min(static_cast<std::size_t>(gx), nx - 2);
  const auto j = std::min(static_cast<std::size_t>(gy), ny - 2);
  const double u = gx - static_cast<double>(i);
  const double w = gy - static_cast<double>(j);
  return at(i, j) * (1 - u) * (1 - w) + at(i + 1, j) * u * (1 - w) + at(i, j + 1) * (1 - u) * w +
         at(i + 1, j + 1) * u * w;
}

namespace {
constexpr char kDtmMagic[5] = "MLDT";
constexpr std::uint32_t kDtmVersion = 1;
}  // namespace

void TerrainMap::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kDtmMagic, 4);
  binio::put_u32(os, kDtmVersion);
  binio::put_u64(os, nx);
  binio::put_u64(os, ny);
  binio::put_f64(os, spacing);
  binio::put_f64(os, origin_x);
  binio::put_f64(os, origin_y);
  binio::put_f64(os, seam_x);
  for (double e : elevation) binio::put_f64(os, e);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

TerrainMap TerrainMap::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  binio::expect_magic(is, kDtmMagic);
  const std::uint32_t version = binio::get_u32(is);
  if (version != kDtmVersion) throw std::runtime_error("unsupported terrain version");
  TerrainMap map;
  map.nx = binio::get_u64(is);
  map.ny = binio::get_u64(is);
  if (map.nx < 2 || map.ny < 2 || map.nx * map.ny > (1ULL << 28)) throw std::runtime_error("bad terrain size");
  map.spacing = binio::get_f64(is);
  map.origin_x = binio::get_f64(is);
  map.origin_y = binio::get_f64(is);
  map.seam_x = binio::get_f64(is);
  map.elevation.resize(map.nx * map.ny);
  for (double& e : map.elevation) e = binio::get_f64(is);
  map.refresh_bounds();
  return map;
}

TerrainMap flat_dtm(std::size_t nx, std::size_t ny, double spacing, double elevation,
                    double origin_x, double origin_y) {
  TerrainMap map;
  map.nx = nx;
  map.ny = ny;
  map.spacing = spacing;
  map.origin_x = origin_x;
  map.origin_y = origin_y;
  map.elevation.assign(nx * ny, elevation);
  map.refresh_bounds();
  return map;
}

TerrainMap generate_dtm(std::uint64_t seed, std::size_t size, double spacing, const DtmOptions& opt) {
  if (size < 3 || ((size - 1) & (size - 2)) != 0) {
    throw ConfigError("generate_dtm: size must be 2^k + 1");
  }
  const std::size_t n = size - 1;
  Rng rng(seed);
  std::vector<double> h(size * size, 0.0);
  auto H = [&](std::size_t i, std::size_t j) -> double& { return h[j * size + i]; };

  H(0, 0) = rng.uniform(-1, 1);
  H(n, 0) = rng.uniform(-1, 1);
  H(0, n) = rng.uniform(-1, 1);
  H(n, n) = rng.uniform(-1, 1);

  double amplitude = 1.0;
  for (std::size_t step = n; step > 1; step /= 2) {
    const std::size_t half = step / 2;
    // diamond step: square centers
    for (std::size_t j = half; j < size; j += step) {
      for (std::size_t i = half; i < size; i += step) {
        const double avg =
            0.25 * (H(i - half, j - half) + H(i + half, j - half) + H(i - half, j + half) + H(i + half, j + half));
        H(i, j) = avg + amplitude * rng.uniform(-1, 1);
      }
    }
    // square step: edge midpoints, averaging the neighbours that exist
    for (std::size_t j = 0; j < size; j += half) {
      for (std::size_t i = ((j / half) % 2 == 0) ? half : 0; i < size; i += step) {
        double sum = 0.0;
        int count = 0;
        if (i >= half) sum += H(i - half, j), ++count;
        if (i + half < size) sum += H(i + half, j), ++count;
        if (j >= half) sum += H(i, j - half), ++count;
        if (j + half < size) sum += H(i, j + half), ++count;
        H(i, j) = sum / count + amplitude * rng.uniform(-1, 1);
      }
    }
    amplitude *= opt.roughness;
  }

  TerrainMap map;
  map.nx = size;
  map.ny = size;
  map.spacing = spacing;
  map.elevation = std::move(h);

  // Rescale using only nodes outside the summit blend so the planted hill cannot
  // remove the extrema.
  const double support = 3.0 * opt.summit_radius;
  auto dist_to_summit = [&](std::size_t i, std::size_t j) {
    return std::hypot(static_cast<double>(i) * spacing - opt.summit_x, static_cast<double>(j) * spacing - opt.summit_y);
  };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < size; ++j) {
    for (std::size_t i = 0; i < size; ++i) {
      if (dist_to_summit(i, j) <= support) continue;
      lo = std::min(lo, map.at(i, j));
      hi = std::max(hi, map.at(i, j));
    }
  }
  if (!(hi > lo)) throw ConfigError("generate_dtm: summit blend covers the whole map");
  for (std::size_t j = 0; j < size; ++j) {
    for (std::size_t i = 0; i < size; ++i) {
      double e = std::clamp((map.at(i, j) - lo) / (hi - lo) * opt.elevation_max, 0.0, opt.elevation_max);
      const double d = dist_to_summit(i, j);
      if (d <= support) {
        const double w = std::exp(-(d * d) / (opt.summit_radius * opt.summit_radius));
        const double hill = opt.summit_elevation * std::exp(-0.5 * (d * d) / (4.0 * opt.summit_radius * opt.summit_radius));
        e = (1.0 - w) * e + w * hill;
      }
      map.at(i, j) = e;
    }
  }

  if (opt.reflect) {
    TerrainMap doubled;
    doubled.nx = 2 * size - 1;
    doubled.ny = size;
    doubled.spacing = spacing;
    doubled.seam_x = static_cast<double>(n) * spacing;
    doubled.elevation.resize(doubled.nx * doubled.ny);
    for (std::size_t j = 0; j < size; ++j) {
      for (std::size_t i = 0; i < doubled.nx; ++i) {
        const std::size_t src = i < size ? i : 2 * n - i;
        doubled.at(i, j) = map.at(src, j);
      }
    }
    map = std::move(doubled);
  }
  map.refresh_bounds();
  return map;
}

RangeHit plane_stack_range(const Vec3& pos, const Vec3& dir, const TerrainMap& dtm, double plane_spacing) {
  RangeHit out{kRadarMaxRange, false};
  if (!(dir.z() < 0.0)) return out;
  const double zmin = dtm.elev_min;
  const auto planes = static_cast<long>(std::floor((dtm.elev_max - zmin) / plane_spacing + 1e-9));
  double best = std::numeric_limits<double>::infinity();
  for (long k = planes; k >= 0; --k) {
    const double z = zmin + static_cast<double>(k) * plane_spacing;
    const double t = (z - pos.z()) / dir.z();
    if (t < 0.0) continue;
    const auto elev = dtm.nearest(pos.x() + t * dir.x(), pos.y() + t * dir.y());
    if (!elev) continue;
    const double err = std::abs(z - *elev);
    if (err < best) {
      best = err;
      out = {t, true};
    }
  }
  return out;
}

namespace {

// Smallest root of a*s^2 + b*s + c in [0, s_max], given c > 0.
std::optional<double> first_root(double a, double b, double c, double s_max) {
  constexpr double kTiny = 1e-300;
  std::optional<double> best;
  auto consider = [&](double s) {
    if (s >= 0.0 && s <= s_max && (!best || s < *best)) best = s;
  };
  if (std::abs(a) < 1e-14 * (std::abs(b) + std::abs(c) + kTiny)) {
    if (b != 0.0) consider(-c / b);
    return best;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return best;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  if (q != 0.0) {
    consider(q / a);
    consider(c / q);
  }
  return best;
}

}  // namespace

RangeHit exact_terrain_range(const Vec3& pos, const Vec3& dir, const TerrainMap& dtm) {
  RangeHit miss{kRadarMaxRange, false};
  const double inf = std::numeric_limits<double>::infinity();

  // Parametric window in which the ray is over the map and inside the elevation band.
  double t0 = 0.0;
  double t1 = inf;
  auto clip = [&](double p, double d, double lo, double hi) {
    if (d == 0.0) {
      if (p < lo || p > hi) t1 = -inf;
      return;
    }
    double a = (lo - p) / d;
    double b = (hi - p) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  clip(pos.x(), dir.x(), dtm.origin_x, dtm.x_max());
  clip(pos.y(), dir.y(), dtm.origin_y, dtm.y_max());
  constexpr double kBandSlack = 1e-6;
  clip(pos.z(), dir.z(), dtm.elev_min - kBandSlack, dtm.elev_max + kBandSlack);
  if (!(t0 <= t1) || t1 == inf) return miss;

  const double s = dtm.spacing;
  const long last_i = static_cast<long>(dtm.nx) - 2;
  const long last_j = static_cast<long>(dtm.ny) - 2;
  auto cell_of = [&](double g, long last) { return std::clamp(static_cast<long>(std::floor(g)), 0L, last); };

  double t = t0;
  Vec3 p = pos + t * dir;
  long ci = cell_of((p.x() - dtm.origin_x) / s, last_i);
  long cj = cell_of((p.y() - dtm.origin_y) / s, last_j);
  const long step_i = dir.x() > 0 ? 1 : -1;
  const long step_j = dir.y() > 0 ? 1 : -1;

  while (t <= t1) {
    // exit parameter of the current cell
    const double bx = dtm.origin_x + static_cast<double>(ci + (dir.x() > 0 ? 1 : 0)) * s;
    const double by = dtm.origin_y + static_cast<double>(cj + (dir.y() > 0 ? 1 : 0)) * s;
    const double tx = dir.x() != 0.0 ? (bx - pos.x()) / dir.x() : inf;
    const double ty = dir.y() != 0.0 ? (by - pos.y()) / dir.y() : inf;
    const double t_exit = std::min({tx, ty, t1});

    p = pos + t * dir;
    const double h00 = dtm.at(ci, cj), h10 = dtm.at(ci + 1, cj);
    const double h01 = dtm.at(ci, cj + 1), h11 = dtm.at(ci + 1, cj + 1);
    const double u0 = (p.x() - dtm.origin_x) / s - static_cast<double>(ci);
    const double w0 = (p.y() - dtm.origin_y) / s - static_cast<double>(cj);
    const double du = dir.x() / s;
    const double dw = dir.y() / s;
    const double b = h10 - h00, c = h01 - h00, e = h00 - h10 - h01 + h11;
    // f(s) = z(s) - h(u(s), w(s)) as a quadratic in the local parameter
    const double qa = -e * du * dw;
    const double qb = dir.z() - (b * du + c * dw + e * (u0 * dw + w0 * du));
    const double qc = p.z() - (h00 + b * u0 + c * w0 + e * u0 * w0);
    if (qc <= 0.0) return {t, true};
    if (auto root = first_root(qa, qb, qc, t_exit - t)) return {t + *root, true};

    if (t_exit >= t1) break;
    t = t_exit;
    if (tx <= ty) ci += step_i;
    if (ty <= tx) cj += step_j;
    if (ci < 0 || cj < 0 || ci > last_i || cj > last_j) break;
  }
  return miss;
}

std::vector<AltimeterErrorRow> altimeter_error_stats(const TerrainMap& dtm, const std::vector<double>& elevations,
                                                     std::size_t n, Rng& rng, RangeModel model,
                                                     double horizontal_radius) {
  std::vector<AltimeterErrorRow> rows;
  for (double elevation : elevations) {
    std::vector<double> errors;
    errors.reserve(n);
    std::size_t misses = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = std::min(static_cast<std::size_t>(rng.uniform01() * static_cast<double>(dtm.nx)), dtm.nx - 1);
      const auto j = std::min(static_cast<std::size_t>(rng.uniform01() * static_cast<double>(dtm.ny)), dtm.ny - 1);
      const Vec3 ground{dtm.origin_x + static_cast<double>(i) * dtm.spacing,
                        dtm.origin_y + static_cast<double>(j) * dtm.spacing, dtm.at(i, j)};
      const double radius = horizontal_radius * std::sqrt(rng.uniform01());
      const double angle = 2.0 * kPi * rng.uniform01();
      const Vec3 lander{ground.x() + radius * std::cos(angle), ground.y() + radius * std::sin(angle), elevation};
      const Vec3 dir = (ground - lander).normalized();

      const RangeHit truth_hit = exact_terrain_range(lander, dir, dtm);
      const double truth = truth_hit.hit ? truth_hit.range : (ground - lander).norm();
      const RangeHit measured =
          model == RangeModel::plane_stack ? plane_stack_range(lander, dir, dtm) : truth_hit;
      if (!measured.hit) {
        ++misses;
        continue;
      }
      errors.push_back(std::abs(measured.range - truth));
    }
    AltimeterErrorRow row;
    row.elevation = elevation;
    row.samples = n;
    row.miss_percent = n ? 100.0 * static_cast<double>(misses) / static_cast<double>(n) : 0.0;
    if (!errors.empty()) {
      double sum = 0.0;
      for (double e : errors) sum += e;
      row.mean = sum / static_cast<double>(errors.size());
      double var = 0.0;
      for (double e : errors) var += (e - row.mean) * (e - row.mean);
      row.std = std::sqrt(var / static_cast<double>(errors.size()));
      row.max = *std::max_element(errors.begin(), errors.end());
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace metaland
