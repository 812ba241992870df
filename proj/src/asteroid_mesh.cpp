#include "metaland/asteroid_mesh.hpp"

#include "metaland/binary_io.hpp"
#include "metaland/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

namespace metaland {

AsteroidMesh icosphere(double radius, int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  AsteroidMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                   {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                    {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                    {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : mesh.vertices) v.normalize();

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
      const std::uint32_t ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(next);
  }
  for (auto& v : mesh.vertices) v *= radius;
  return mesh;
}

AsteroidMesh generate_asteroid_mesh(std::uint64_t seed, const AsteroidMeshOptions& opt) {
  // icosahedron edge / circumradius = 1 / sin(2 pi / 5)
  const double base_edge = opt.mean_radius / std::sin(2.0 * kPi / 5.0);
  int level = 0;
  while (base_edge / std::pow(2.0, level) > opt.edge_length && level < 10) ++level;
  AsteroidMesh mesh = icosphere(1.0, level);

  // Noise terms cos(k * pi * (u . d) + phase); amplitudes sum to relief / 2 so the
  // difference against the pole value stays inside +-relief.
  Rng rng(seed);
  struct Term {
    Vec3 dir;
    double freq;
    double phase;
    double amp;
  };
  std::vector<Term> terms;
  double amp_total = 0.0;
  for (int k = 0; k < opt.harmonics; ++k) {
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    d.normalize();
    const double amp = rng.uniform(0.5, 1.0) / (1.0 + k);
    terms.push_back({d, 1.0 + (k % 3), rng.uniform(0.0, 2.0 * kPi), amp});
    amp_total += amp;
  }
  for (auto& t : terms) t.amp *= 0.5 * opt.relief / amp_total;
  auto noise = [&](const Vec3& u) {
    double s = 0.0;
    for (const auto& t : terms) s += t.amp * std::cos(t.freq * kPi * u.dot(t.dir) + t.phase);
    return s;
  };
  const double pole = noise(Vec3::UnitZ());
  const double flatten = deg2rad(opt.pole_flatten_deg);
  for (auto& v : mesh.vertices) {
    const double polar = std::acos(std::clamp(v.z(), -1.0, 1.0));
    const double keep = 1.0 - std::exp(-(polar * polar) / (flatten * flatten));
    v *= opt.mean_radius * (1.0 + keep * (noise(v) - pole));
  }
  return mesh;
}

bool is_watertight(const AsteroidMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const auto key = std::make_pair(t[e], t[(e + 1) % 3]);
      if (++directed[key] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (directed.find({edge.second, edge.first}) == directed.end()) return false;
  }
  return !mesh.triangles.empty();
}

double mean_edge_length(const AsteroidMesh& mesh) {
  double sum = 0.0;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) sum += (mesh.vertices[t[e]] - mesh.vertices[t[(e + 1) % 3]]).norm();
  }
  return sum / (3.0 * static_cast<double>(mesh.triangles.size()));
}

namespace {
constexpr char kMeshMagic[5] = "MLMS";
constexpr std::uint32_t kMeshVersion = 1;
}  // namespace

void AsteroidMesh::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMeshMagic, 4);
  binio::put_u32(os, kMeshVersion);
  binio::put_u64(os, vertices.size());
  binio::put_u64(os, triangles.size());
  for (const auto& v : vertices) {
    for (int k = 0; k < 3; ++k) binio::put_f64(os, v[k]);
  }
  for (const auto& t : triangles) {
    for (auto idx : t) binio::put_u32(os, idx);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

AsteroidMesh AsteroidMesh::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  binio::expect_magic(is, kMeshMagic);
  if (binio::get_u32(is) != kMeshVersion) throw std::runtime_error("unsupported mesh version");
  const std::uint64_t nv = binio::get_u64(is);
  const std::uint64_t nt = binio::get_u64(is);
  if (nv > (1ULL << 26) || nt > (1ULL << 27)) throw std::runtime_error("mesh too large");
  AsteroidMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) {
    for (int k = 0; k < 3; ++k) v[k] = binio::get_f64(is);
  }
  mesh.triangles.resize(nt);
  for (auto& t : mesh.triangles) {
    for (auto& idx : t) {
      idx = binio::get_u32(is);
      if (idx >= nv) throw std::runtime_error("mesh index out of range");
    }
  }
  return mesh;
}

std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                         const Vec3& c, double t_max) {
  int kz = 0;
  dir.cwiseAbs().maxCoeff(&kz);
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (dir[kz] < 0.0) std::swap(kx, ky);
  const double sx = dir[kx] / dir[kz];
  const double sy = dir[ky] / dir[kz];
  const double sz = 1.0 / dir[kz];

  const Vec3 A = a - origin, B = b - origin, C = c - origin;
  const double ax = A[kx] - sx * A[kz], ay = A[ky] - sy * A[kz];
  const double bx = B[kx] - sx * B[kz], by = B[ky] - sy * B[kz];
  const double cx = C[kx] - sx * C[kz], cy = C[ky] - sy * C[kz];

  const double u = cx * by - cy * bx;
  const double v = ax * cy - ay * cx;
  const double w = bx * ay - by * ax;
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return std::nullopt;
  const double det = u + v + w;
  if (det == 0.0) return std::nullopt;

  const double t_scaled = u * sz * A[kz] + v * sz * B[kz] + w * sz * C[kz];
  const double t = t_scaled / det;
  if (!(t > 0.0) || t > t_max) return std::nullopt;
  return t;
}

MeshRayCaster::MeshRayCaster(AsteroidMesh mesh) : mesh_(std::move(mesh)) {
  order_.resize(mesh_.triangles.size());
  std::iota(order_.begin(), order_.end(), 0U);
  std::vector<Vec3> centroids(mesh_.triangles.size());
  for (std::size_t i = 0; i < mesh_.triangles.size(); ++i) {
    const auto& t = mesh_.triangles[i];
    centroids[i] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  nodes_.reserve(2 * mesh_.triangles.size() / 4 + 1);
  if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()), centroids);
}

std::uint32_t MeshRayCaster::build(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t k = first; k < first + count; ++k) {
    for (auto vi : mesh_.triangles[order_[k]]) {
      lo = lo.cwiseMin(mesh_.vertices[vi]);
      hi = hi.cwiseMax(mesh_.vertices[vi]);
    }
  }
  nodes_[index].lo = lo;
  nodes_[index].hi = hi;
  if (count <= 4) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const auto begin = order_.begin() + first;
  const auto middle = begin + count / 2;
  std::nth_element(begin, middle, begin + count,
                   [&](std::uint32_t x, std::uint32_t y) { return centroids[x][axis] < centroids[y][axis]; });
  const std::uint32_t left = build(first, count / 2, centroids);
  const std::uint32_t right = build(first + count / 2, count - count / 2, centroids);
  nodes_[index].first = left;
  nodes_[index].right = right;
  return index;
}

std::optional<double> MeshRayCaster::cast(const Vec3& origin, const Vec3& dir, double max_range) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv = dir.cwiseInverse();
  auto slab = [&](const Node& n, double t_best) {
    double t0 = 0.0, t1 = t_best;
    for (int k = 0; k < 3; ++k) {
      double a = (n.lo[k] - origin[k]) * inv[k];
      double b = (n.hi[k] - origin[k]) * inv[k];
      if (a > b) std::swap(a, b);
      // NaN from 0 * inf (ray in the slab plane) must not reject the box
      if (!(a <= t1) && !std::isnan(a)) return false;
      if (!(b >= t0) && !std::isnan(b)) return false;
      if (a > t0) t0 = a;
      if (b < t1) t1 = b;
    }
    return t0 <= t1 * (1.0 + 1e-12) + 1e-9;
  };

  std::optional<double> best;
  double t_best = max_range;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (!slab(n, t_best)) continue;
    if (n.count > 0) {
      for (std::uint32_t k = n.first; k < n.first + n.count; ++k) {
        const auto& t = mesh_.triangles[order_[k]];
        if (auto hit = intersect_triangle(origin, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                          mesh_.vertices[t[2]], t_best)) {
          t_best = *hit;
          best = *hit;
        }
      }
    } else if (top + 2 <= 128) {
      stack[top++] = n.right;
      stack[top++] = n.first;
    }
  }
  return best;
}

}  // namespace metaland
