#include "metaland/harness.hpp"

#include "metaland/sensors.hpp"
#include "metaland/terrain.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace metaland {

using nlohmann::json;

namespace {

constexpr const char* kReportFormat = "metaland-report";
constexpr int kReportVersion = 1;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

const char* failure_name(FailureMode f) {
  switch (f) {
    case FailureMode::none: return "none";
    case FailureMode::downrange_capped: return "downrange";
    case FailureMode::crossrange_capped: return "crossrange";
  }
  return "none";
}

FailureMode parse_failure(const std::string& s) {
  if (s == "downrange") return FailureMode::downrange_capped;
  if (s == "crossrange") return FailureMode::crossrange_capped;
  return FailureMode::none;
}

json stats_json(const MetricStats& m) { return {{"mean", m.mean}, {"std", m.std}, {"max", m.max}}; }

MetricStats stats_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("max").get<double>()};
}

}  // namespace

MetricStats metric_stats(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("metric_stats: no samples");
  MetricStats s;
  double sum = 0.0;
  s.max = values.front();
  for (double v : values) {
    sum += v;
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(acc / static_cast<double>(values.size()));
  return s;
}

EvalStats summarize(const std::vector<EpisodeOutcome>& episodes) {
  if (episodes.empty()) throw ConfigError("summarize: no episodes");
  std::vector<double> r, v, fuel, gs;
  EvalStats st;
  std::size_t wins = 0;
  for (const auto& e : episodes) {
    r.push_back(e.terminal_r);
    v.push_back(e.terminal_v);
    fuel.push_back(e.fuel);
    gs.push_back(e.glideslope);
    wins += e.success ? 1 : 0;
    st.faults += e.faulted ? 1 : 0;
  }
  st.episodes = episodes.size();
  st.r = metric_stats(r);
  st.v = metric_stats(v);
  st.fuel = metric_stats(fuel);
  st.glideslope = metric_stats(gs);
  st.success_rate = static_cast<double>(wins) / static_cast<double>(episodes.size());
  std::sort(fuel.begin(), fuel.end());
  const std::size_t n = fuel.size();
  st.fuel_median = n % 2 == 1 ? fuel[n / 2] : 0.5 * (fuel[n / 2 - 1] + fuel[n / 2]);
  return st;
}

std::size_t workers_from_env() {
  const char* s = std::getenv("METALAND_WORKERS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  const long n = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(std::min(n, 256L));
}

EpisodeOutcome run_episode(Controller& controller, Environment& env, std::uint64_t seed,
                           std::vector<TrajectoryRow>* rows, std::size_t max_steps) {
  EpisodeOutcome out;
  out.seed = seed;
  env.seed(seed);
  VecX obs = env.reset();
  controller.reset(env);
  const double initial_mass = env.state().mass;
  out.failure = env.params().failure;
  LanderState last = env.state();
  try {
    for (std::size_t k = 0; k < max_steps; ++k) {
      const VecX action = controller.act(obs, env);
      const StepResult res = env.step(action);
      obs = res.observation;
      last = res.info.state;
      out.total_reward += res.reward;
      out.steps += 1;
      if (rows) rows->push_back({last.t, last.r, last.v, res.info.thrust, last.mass, res.reward});
      if (res.done) {
        out.success = res.info.success;
        break;
      }
    }
  } catch (const std::exception& e) {
    // kept as a failed episode at the last good state
    std::fprintf(stderr, "episode %llu faulted: %s\n", static_cast<unsigned long long>(seed), e.what());
    out.faulted = true;
    out.success = false;
  }
  out.r = last.r;
  out.v = last.v;
  out.terminal_r = last.r.norm();
  out.terminal_v = last.v.norm();
  out.fuel = initial_mass - last.mass;
  out.glideslope = glideslope(last.v);
  return out;
}

EvalResult run_monte_carlo(const Controller& prototype, const ExperimentSpec& spec, std::size_t n,
                           std::uint64_t seed, std::size_t workers, std::shared_ptr<const SensorAssets> assets) {
  if (n == 0) throw ConfigError("run_monte_carlo: episode count must be positive");
  if (!assets) assets = SensorAssets::build(spec.env);
  EvalResult res;
  res.experiment = spec.id;
  res.body = spec.body();
  res.seed = seed;
  res.episodes.resize(n);
  workers = std::clamp<std::size_t>(workers, 1, n);

  auto work = [&](std::size_t w) {
    std::unique_ptr<Controller> controller = prototype.clone();
    std::unique_ptr<Environment> env = make_environment(spec.env, assets, seed);
    for (std::size_t i = w; i < n; i += workers) {
      res.episodes[i] = run_episode(*controller, *env, derive_seed(seed, i), nullptr, spec.ppo.max_episode_steps);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  res.stats = summarize(res.episodes);
  return res;
}

std::string policy_label(PolicyKind kind, std::size_t unroll) {
  switch (kind) {
    case PolicyKind::drdv: return "DR/DV";
    case PolicyKind::rl: return "RL";
    case PolicyKind::meta_rl: return std::to_string(unroll) + "-step Meta-RL";
  }
  return "?";
}

std::string report_to_json(const EvalResult& r) {
  json j;
  j["format"] = kReportFormat;
  j["version"] = kReportVersion;
  j["experiment"] = r.experiment;
  j["label"] = r.label;
  j["body"] = r.body == Body::mars ? "mars" : "asteroid";
  j["seed"] = r.seed;
  const EvalStats& s = r.stats;
  j["stats"] = {{"episodes", s.episodes},
                {"terminal_position_m", stats_json(s.r)},
                {"terminal_velocity_mps", stats_json(s.v)},
                {"fuel_kg", stats_json(s.fuel)},
                {"fuel_median_kg", s.fuel_median},
                {"glideslope_deg", stats_json(s.glideslope)},
                {"success_rate", s.success_rate},
                {"faults", s.faults}};
  json eps = json::array();
  for (const auto& e : r.episodes) {
    eps.push_back({{"seed", e.seed},
                   {"steps", e.steps},
                   {"r", {e.r.x(), e.r.y(), e.r.z()}},
                   {"v", {e.v.x(), e.v.y(), e.v.z()}},
                   {"fuel", e.fuel},
                   {"glideslope", e.glideslope},
                   {"reward", e.total_reward},
                   {"success", e.success},
                   {"faulted", e.faulted},
                   {"failure", failure_name(e.failure)}});
  }
  j["episodes"] = std::move(eps);
  return j.dump(1) + "\n";
}

EvalResult report_from_json(const std::string& text) {
  EvalResult r;
  try {
    const json j = json::parse(text);
    if (j.at("format") != kReportFormat) throw ConfigError("not an evaluation report");
    if (j.at("version").get<int>() != kReportVersion) throw ConfigError("unsupported report version");
    r.experiment = j.at("experiment").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.body = j.at("body") == "mars" ? Body::mars : Body::asteroid;
    r.seed = j.at("seed").get<std::uint64_t>();
    const json& s = j.at("stats");
    r.stats.episodes = s.at("episodes").get<std::size_t>();
    r.stats.r = stats_from(s.at("terminal_position_m"));
    r.stats.v = stats_from(s.at("terminal_velocity_mps"));
    r.stats.fuel = stats_from(s.at("fuel_kg"));
    r.stats.fuel_median = s.at("fuel_median_kg").get<double>();
    r.stats.glideslope = stats_from(s.at("glideslope_deg"));
    r.stats.success_rate = s.at("success_rate").get<double>();
    r.stats.faults = s.at("faults").get<std::size_t>();
    for (const json& e : j.at("episodes")) {
      EpisodeOutcome o;
      o.seed = e.at("seed").get<std::uint64_t>();
      o.steps = e.at("steps").get<std::size_t>();
      const auto rv = e.at("r").get<std::vector<double>>();
      const auto vv = e.at("v").get<std::vector<double>>();
      o.r = Vec3(rv.at(0), rv.at(1), rv.at(2));
      o.v = Vec3(vv.at(0), vv.at(1), vv.at(2));
      o.terminal_r = o.r.norm();
      o.terminal_v = o.v.norm();
      o.fuel = e.at("fuel").get<double>();
      o.glideslope = e.at("glideslope").get<double>();
      o.total_reward = e.at("reward").get<double>();
      o.success = e.at("success").get<bool>();
      o.faulted = e.at("faulted").get<bool>();
      o.failure = parse_failure(e.at("failure").get<std::string>());
      r.episodes.push_back(o);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string render_tables(const std::vector<EvalResult>& results, TableFormat format) {
  if (results.empty()) throw ConfigError("render_tables: no reports");
  struct Table {
    std::string title;
    std::function<MetricStats(const EvalResult&)> metric;
    double scale;
  };
  const bool asteroid = results.front().body == Body::asteroid;
  const std::vector<Table> tables = {
      {"Norm of Terminal Position (m)", [](const EvalResult& r) { return r.stats.r; }, 1.0},
      {asteroid ? "Norm of Terminal Velocity (cm/s)" : "Norm of Terminal Velocity (m/s)",
       [](const EvalResult& r) { return r.stats.v; }, asteroid ? 100.0 : 1.0},
      {"Fuel Consumption (kg)", [](const EvalResult& r) { return r.stats.fuel; }, 1.0},
      {"Terminal Glideslope (deg)", [](const EvalResult& r) { return r.stats.glideslope; }, 1.0},
  };
  std::ostringstream os;
  if (format == TableFormat::csv) {
    os << "table,experiment,policy,episodes,mean,std,max,success_rate\n";
    for (const auto& t : tables)
      for (const auto& r : results) {
        const MetricStats m = t.metric(r);
        os << '"' << t.title << "\"," << r.experiment << ',' << r.label << ',' << r.stats.episodes << ','
           << fixed(m.mean * t.scale, 4) << ',' << fixed(m.std * t.scale, 4) << ',' << fixed(m.max * t.scale, 4)
           << ',' << fixed(r.stats.success_rate, 4) << '\n';
      }
    return os.str();
  }
  std::size_t width = 8;
  for (const auto& r : results) width = std::max(width, r.label.size() + 2);
  for (const auto& t : tables) {
    os << t.title << "  [" << results.front().experiment << "]\n";
    char line[256];
    std::snprintf(line, sizeof(line), "  %-*s %10s %10s %10s\n", static_cast<int>(width), "Policy", "mu", "sigma",
                  "max");
    os << line;
    for (const auto& r : results) {
      const MetricStats m = t.metric(r);
      std::snprintf(line, sizeof(line), "  %-*s %10.2f %10.2f %10.2f\n", static_cast<int>(width), r.label.c_str(),
                    m.mean * t.scale, m.std * t.scale, m.max * t.scale);
      os << line;
    }
    os << '\n';
  }
  os << "Landing success\n";
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof(line), "  %-*s %9.1f%%  (%zu episodes, %zu faults)\n", static_cast<int>(width),
                  r.label.c_str(), 100.0 * r.stats.success_rate, r.stats.episodes, r.stats.faults);
    os << line;
  }
  return os.str();
}

void write_trajectory_log(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write trajectory log " + path);
  os << "t,rx,ry,rz,vx,vy,vz,tx,ty,tz,r_norm,v_norm,t_norm,mass,reward\n";
  char buf[512];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  row.t, row.r.x(), row.r.y(), row.r.z(), row.v.x(), row.v.y(), row.v.z(), row.thrust.x(),
                  row.thrust.y(), row.thrust.z(), row.r.norm(), row.v.norm(), row.thrust.norm(), row.mass,
                  row.reward);
    os << buf;
  }
  if (!os) throw ConfigError("failed while writing trajectory log " + path);
}

std::string sensor_check(const ExperimentSpec& spec, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ConfigError("sensor_check: sample count must be positive");
  std::ostringstream os;
  char line[256];
  Rng rng(seed);
  if (const auto* mars = std::get_if<MarsConfig>(&spec.env)) {
    DtmOptions opt;
    opt.summit_x = mars->radar.target_map.x();
    opt.summit_y = mars->radar.target_map.y();
    opt.summit_elevation = mars->radar.target_map.z() - 50.0;
    const TerrainMap dtm = generate_dtm(mars->radar.dtm_seed, mars->radar.dtm_size, mars->radar.dtm_spacing, opt);
    const std::vector<double> elevations{400.0, 500.0, 600.0, 700.0, 800.0};
    const auto rows = altimeter_error_stats(dtm, elevations, samples, rng, RangeModel::plane_stack);
    os << "Radar altimeter error, plane-stack model vs. exact ray march (" << samples << " samples per row)\n";
    std::snprintf(line, sizeof(line), "%14s %10s %10s %10s %8s\n", "Elevation (m)", "mean (m)", "std (m)", "max (m)",
                  "miss %");
    os << line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof(line), "%14.0f %10.3f %10.3f %10.3f %8.2f\n", r.elevation, r.mean, r.std, r.max,
                    r.miss_percent);
      os << line;
    }
    return os.str();
  }
  const auto& ast = std::get<AsteroidConfig>(spec.env);
  AsteroidMeshOptions opt = ast.mesh;
  opt.mean_radius = ast.target_radius;
  const MeshRayCaster caster(generate_asteroid_mesh(ast.mesh_seed, opt));
  const double R = ast.target_radius;
  os << "LIDAR range vs. mean-radius sphere (" << samples << " samples per row, nadir-pointing beams)\n";
  std::snprintf(line, sizeof(line), "%14s %12s %12s %12s %8s\n", "Altitude (m)", "mean (m)", "std (m)", "max (m)",
                "miss %");
  os << line;
  for (const double altitude : {100.0, 250.0, 500.0, 750.0}) {
    std::vector<double> err;
    std::size_t misses = 0;
    for (std::size_t k = 0; k < samples; ++k) {
      const double polar = deg2rad(rng.uniform(0.0, ast.polar_max_deg));
      const double az = rng.uniform(-kPi, kPi);
      const Vec3 u(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar));
      const Vec3 origin = (R + altitude) * u;
      const auto hit = caster.cast(origin, -u, kLidarMaxRange);
      if (!hit) {
        ++misses;
        continue;
      }
      err.push_back(std::abs(*hit - altitude));
    }
    const MetricStats m = err.empty() ? MetricStats{} : metric_stats(err);
    std::snprintf(line, sizeof(line), "%14.0f %12.3f %12.3f %12.3f %8.2f\n", altitude, m.mean, m.std, m.max,
                  100.0 * static_cast<double>(misses) / static_cast<double>(samples));
    os << line;
  }
  return os.str();
}

}  // namespace metaland
