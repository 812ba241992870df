#include "metaland/asteroid_mesh.hpp"
#include "metaland/environments.hpp"
#include "metaland/sensors.hpp"
#include "metaland/terrain.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace metaland;

namespace {

// Nearest root of |o + t d| = R with t > 0.
double sphere_hit(const Vec3& o, const Vec3& d, double R) {
  const double b = o.dot(d);
  const double c = o.squaredNorm() - R * R;
  return -b - std::sqrt(b * b - c);
}

// Splits the triangle the ray crosses into three around p (which lies on the ray).
void insert_vertex(AsteroidMesh& mesh, const Vec3& origin, const Vec3& dir, const Vec3& p) {
  double best = 1e300;
  std::size_t hit = mesh.triangles.size();
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
    const auto& t = mesh.triangles[k];
    const auto s = intersect_triangle(origin, dir, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], 1e9);
    if (s && *s < best) {
      best = *s;
      hit = k;
    }
  }
  REQUIRE(hit < mesh.triangles.size());
  const auto t = mesh.triangles[hit];
  const auto v = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(p);
  mesh.triangles[hit] = {t[0], t[1], v};
  mesh.triangles.push_back({t[1], t[2], v});
  mesh.triangles.push_back({t[2], t[0], v});
}

TerrainMap experiment_dtm() {
  MarsConfig cfg;
  cfg.sensing = MarsSensing::radar;
  return *SensorAssets::build(cfg)->dtm;
}

}  // namespace

TEST_SUITE("sensors") {
  TEST_CASE("synthetic terrain statistics") {
    DtmOptions opt;
    opt.summit_x = 1200.0;
    opt.summit_y = 1300.0;
    const TerrainMap a = generate_dtm(7, 129, 20.0, opt);
    CHECK(a.elev_min == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a.elev_max == doctest::Approx(380.0));
    const auto at_target = a.bilinear(opt.summit_x, opt.summit_y);
    REQUIRE(at_target);
    CHECK(*at_target == doctest::Approx(350.0).epsilon(1e-9));
    const TerrainMap b = generate_dtm(7, 129, 20.0, opt);
    CHECK(a.elevation == b.elevation);
    CHECK(generate_dtm(8, 129, 20.0, opt).elevation != a.elevation);

    // mirror symmetry about the seam
    REQUIRE(a.seam_x > a.origin_x);
    for (std::size_t j = 0; j < a.ny; j += 7) {
      for (std::size_t i = 0; i < a.nx; ++i) {
        const double x = a.origin_x + static_cast<double>(i) * a.spacing;
        const double xm = 2.0 * a.seam_x - x;
        if (xm < a.origin_x || xm > a.x_max()) continue;
        const double y = a.origin_y + static_cast<double>(j) * a.spacing;
        CHECK(*a.nearest(x, y) == *a.nearest(xm, y));
      }
    }
  }

  TEST_CASE("terrain round trip") {
    const TerrainMap a = generate_dtm(3, 65, 20.0);
    const auto path = std::filesystem::temp_directory_path() / "metaland_dtm_roundtrip.bin";
    a.save(path);
    const TerrainMap b = TerrainMap::load(path);
    std::filesystem::remove(path);
    CHECK(a.elevation == b.elevation);
    CHECK(a.spacing == b.spacing);
    CHECK(a.nx == b.nx);
  }

  TEST_CASE("radar beam geometry") {
    BeamSet s = radar_beam_dirs(Vec3(0, 0, -10), PointingMode::velocity_averaged_down);
    CHECK((s.axis - Vec3(0, 0, -1)).norm() < 1e-15);
    REQUIRE(s.beams.size() == 4);
    for (const Vec3& b : s.beams) {
      CHECK(b.norm() == doctest::Approx(1.0));
      CHECK(b.dot(s.axis) == doctest::Approx(std::cos(kPi / 8)));
    }
    s = radar_beam_dirs(Vec3(10, 0, 0), PointingMode::velocity_averaged_down);
    CHECK((s.axis - Vec3(1, 0, -1).normalized()).norm() < 1e-12);
    s = radar_beam_dirs(Vec3(5, 5, -1), PointingMode::target_pointing, Vec3(100, 200, 900), Vec3(100, 200, 400));
    CHECK((s.axis - Vec3(0, 0, -1)).norm() < 1e-12);
    s = radar_beam_dirs(Vec3::Zero(), PointingMode::velocity_averaged_down);
    CHECK((s.axis - Vec3(0, 0, -1)).norm() < 1e-15);
    s = radar_beam_dirs(Vec3(0, 0, 3), PointingMode::velocity_averaged_down);  // degenerate axis
    CHECK((s.axis - Vec3(0, 0, -1)).norm() < 1e-15);

    const BeamSet l = cone_beams(Vec3(0.3, -0.2, -1.0), deg2rad(kLidarOffsetDeg), 4, true);
    REQUIRE(l.beams.size() == 5);
    CHECK((l.beams[0] - l.axis).norm() < 1e-15);
    for (std::size_t k = 1; k < 5; ++k) CHECK(l.beams[k].dot(l.axis) == doctest::Approx(std::cos(deg2rad(12.0))));
  }

  TEST_CASE("plane stack on flat terrain") {
    for (double elev : {0.0, 37.25, 212.0}) {
      const TerrainMap flat = flat_dtm(101, 101, 20.0, elev);
      const Vec3 pos(1000.3, 999.1, elev + 100.0);
      RangeHit h = plane_stack_range(pos, Vec3(0, 0, -1), flat);
      CHECK(h.hit);
      CHECK(std::abs(h.range - 100.0) <= 1e-6);
      for (double theta : {0.1, 0.4, 0.9}) {
        const Vec3 dir(std::sin(theta), 0.3 * std::sin(theta), -std::cos(theta));
        const Vec3 d = dir.normalized();
        h = plane_stack_range(pos, d, flat);
        const RangeHit e = exact_terrain_range(pos, d, flat);
        REQUIRE(h.hit);
        REQUIRE(e.hit);
        CHECK(std::abs(h.range - 100.0 / -d.z()) <= 1e-6);
        CHECK(std::abs(h.range - e.range) <= 1e-6);
      }
    }
    const TerrainMap flat = flat_dtm(11, 11, 20.0, 0.0);
    const RangeHit miss = plane_stack_range(Vec3(100, 100, 50), Vec3(1, 0, -0.01).normalized(), flat);
    CHECK_FALSE(miss.hit);
  }

  TEST_CASE("altimeter error table") {
    const TerrainMap dtm = experiment_dtm();
    Rng rng(5);
    const auto rows = altimeter_error_stats(dtm, {500.0, 600.0, 700.0, 800.0}, 2000, rng);
    REQUIRE(rows.size() == 4);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      INFO("elevation " << rows[k].elevation << " mean " << rows[k].mean);
      CHECK(rows[k].miss_percent >= 0.0);
      CHECK(rows[k].miss_percent <= 100.0);
      if (k > 0) CHECK(rows[k].mean < rows[k - 1].mean);
    }
    Rng rng2(5);
    for (const auto& r : altimeter_error_stats(dtm, {500.0, 800.0}, 1000, rng2, RangeModel::exact)) {
      CHECK(r.mean == 0.0);
      CHECK(r.max == 0.0);
    }
  }

  TEST_CASE("radar observations") {
    const TerrainMap flat = flat_dtm(201, 201, 20.0, 0.0);
    const Vec3 pos(2000, 2000, 600);
    VecX o = radar_observe(pos, Vec3::Zero(), flat, PointingMode::velocity_averaged_down, RadarLayout::ranges_doppler,
                           Vec3::Zero());
    REQUIRE(o.size() == 8);
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(o[k] - 600.0 / std::cos(kPi / 8)) <= 1e-6);
      CHECK(o[4 + k] == 0.0);
    }
    o = radar_observe(pos, Vec3(0, 0, -12), flat, PointingMode::velocity_averaged_down, RadarLayout::ranges_doppler,
                      Vec3::Zero());
    for (int k = 0; k < 4; ++k) CHECK(o[4 + k] == doctest::Approx(12.0 * std::cos(kPi / 8)));
    o = radar_observe(pos, Vec3(0, 0, -12), flat, PointingMode::velocity_averaged_down, RadarLayout::ranges,
                      Vec3::Zero());
    CHECK(o.size() == 4);
  }

  TEST_CASE("asteroid mesh") {
    const AsteroidMesh m = generate_asteroid_mesh(11);
    CHECK(is_watertight(m));
    CHECK(mean_edge_length(m) <= 5.0);
    double rmin = 1e9, rmax = 0;
    for (const Vec3& v : m.vertices) {
      rmin = std::min(rmin, v.norm());
      rmax = std::max(rmax, v.norm());
    }
    CHECK(rmin >= 212.5);
    CHECK(rmax <= 287.5);
    CHECK(generate_asteroid_mesh(11).vertices == m.vertices);

    const auto path = std::filesystem::temp_directory_path() / "metaland_mesh_roundtrip.bin";
    m.save(path);
    const AsteroidMesh b = AsteroidMesh::load(path);
    std::filesystem::remove(path);
    CHECK(b.vertices == m.vertices);
    CHECK(b.triangles == m.triangles);

    AsteroidMesh broken = icosphere(1.0, 1);
    broken.triangles.pop_back();
    CHECK_FALSE(is_watertight(broken));
  }

  TEST_CASE("ray caster against closed-form sphere hits") {
    const double R = 250.0;
    AsteroidMesh mesh = icosphere(R, 3);
    Rng rng(17);
    std::vector<std::pair<Vec3, Vec3>> rays;
    for (int k = 0; k < 40; ++k) {
      const Vec3 o = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized() * rng.uniform(300, 1500);
      // aim somewhere at the sphere
      const Vec3 aim = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) * 120.0;
      const Vec3 d = (aim - o).normalized();
      insert_vertex(mesh, o, d, o + sphere_hit(o, d, R) * d);
      rays.emplace_back(o, d);
    }
    REQUIRE(is_watertight(mesh));
    const MeshRayCaster caster(mesh);
    double worst = 0.0;
    for (const auto& [o, d] : rays) {
      const auto t = caster.cast(o, d, 1e4);
      REQUIRE(t);
      worst = std::max(worst, std::abs(*t - sphere_hit(o, d, R)));
    }
    CHECK(worst <= 1e-6);
    CHECK_FALSE(caster.cast(Vec3(0, 0, 600), Vec3(1, 0, 0), 1e4));
    CHECK_FALSE(caster.cast(Vec3(0, 0, 600), Vec3(0, 0, -1), 100.0));
  }

  TEST_CASE("watertight triangle test on shared edges") {
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0), d(1, 1, 0);
    int hits = 0;
    // ray through the shared diagonal b-c
    const Vec3 o(0.5, 0.5, 1), dir(0, 0, -1);
    hits += intersect_triangle(o, dir, a, b, c, 10).has_value();
    hits += intersect_triangle(o, dir, b, d, c, 10).has_value();
    CHECK(hits >= 1);
    CHECK(*intersect_triangle(Vec3(0.2, 0.2, 3), dir, a, b, c, 10) == doctest::Approx(3.0));
  }

  TEST_CASE("lidar on a sphere") {
    const double R = 250.0;
    AsteroidEnvForces f;
    f.r_offset = Vec3(0, 0, R);
    LanderState s;
    s.r = Vec3(500, 0, 0) - f.r_offset;  // asteroid frame [500, 0, 0]
    s.v = Vec3(-0.1, 0, 0);
    s.mass = 480;
    const Vec3 origin = target_to_asteroid_frame(s.r, f);
    const BeamSet beams = cone_beams(s.v, deg2rad(kLidarOffsetDeg), 4, true);
    AsteroidMesh mesh = icosphere(R, 3);
    for (const Vec3& d : beams.beams) insert_vertex(mesh, origin, d, origin + sphere_hit(origin, d, R) * d);
    REQUIRE(is_watertight(mesh));

    LidarSensor lidar(std::make_shared<MeshRayCaster>(mesh));
    lidar.reset(-Vec3::UnitZ());
    const VecX o = lidar.observe(s, f);
    REQUIRE(o.size() == 10);
    CHECK(std::abs(o[0] - 250.0) <= 1e-6);
    CHECK(o[5] == doctest::Approx(0.1));
    for (int k = 0; k < 5; ++k) {
      const Vec3& d = lidar.beams().beams[static_cast<std::size_t>(k)];
      CHECK(std::abs(o[k] - sphere_hit(origin, d, R)) <= 1e-6);
      CHECK(o[5 + k] == s.v.dot(d));
    }

    // zero velocity keeps the previous beams
    s.v = Vec3::Zero();
    const BeamSet before = lidar.beams();
    const VecX held = lidar.observe(s, f);
    CHECK(lidar.beams().beams == before.beams);
    for (int k = 0; k < 5; ++k) CHECK(held[5 + k] == 0.0);

    // pointing away: every beam misses
    s.v = Vec3(1, 0, 0);
    const VecX away = lidar.observe(s, f);
    for (int k = 0; k < 5; ++k) {
      CHECK(away[k] == kLidarMaxRange);
      CHECK(away[5 + k] == 0.0);
    }
  }
}
