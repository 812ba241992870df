#include "metaland/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace metaland {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds and counts share one JSON reader");

namespace {

// --- enum spellings --------------------------------------------------------

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<PointingMode> kPointing[] = {{PointingMode::velocity_averaged_down, "velocity-averaged-down"},
                                                {PointingMode::target_pointing, "target-pointing"},
                                                {PointingMode::velocity_aligned, "velocity-aligned"}};
constexpr EnumName<RadarLayout> kLayout[] = {{RadarLayout::ranges, "ranges"},
                                             {RadarLayout::ranges_doppler, "ranges-doppler"}};
constexpr EnumName<MarsSensing> kMarsSensing[] = {
    {MarsSensing::ground_truth, "ground-truth"}, {MarsSensing::biased, "biased"}, {MarsSensing::radar, "radar"}};
constexpr EnumName<AsteroidSensing> kAstSensing[] = {{AsteroidSensing::ground_truth, "ground-truth"},
                                                     {AsteroidSensing::lidar, "lidar"}};
constexpr EnumName<PolicyKind> kPolicy[] = {
    {PolicyKind::drdv, "drdv"}, {PolicyKind::rl, "rl"}, {PolicyKind::meta_rl, "meta-rl"}};

template <class E, std::size_t N>
std::string enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  throw ConfigError("unknown enum value");
}

template <class E, std::size_t N>
E enum_parse(const EnumName<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& e : table)
    if (s == e.name) return e.value;
  std::string msg = std::string("unknown ") + what + " '" + s + "' (expected";
  for (const auto& e : table) msg += std::string(" ") + e.name;
  throw ConfigError(msg + ")");
}

// --- field visitors ---------------------------------------------------------
// Each visitor walks the fields of one config struct; Writer emits JSON and
// Reader consumes it, rejecting unknown keys so typos in config files surface.

struct Writer {
  json& j;
  void operator()(const char* k, const double& v) { j[k] = v; }
  void operator()(const char* k, const bool& v) { j[k] = v; }
  void operator()(const char* k, const int& v) { j[k] = v; }
  void operator()(const char* k, const std::size_t& v) { j[k] = v; }
  void operator()(const char* k, const std::string& v) { j[k] = v; }
  void operator()(const char* k, const Vec3& v) { j[k] = json::array({v.x(), v.y(), v.z()}); }
  template <class E, std::size_t N>
  void enumeration(const char* k, const E& v, const EnumName<E> (&t)[N]) {
    j[k] = enum_name(t, v);
  }
  template <class S>
  void object(const char* k, const S& s);
};

struct Reader {
  const json& j;
  std::string path;
  std::vector<std::string> seen{};

  const json* find(const char* k) {
    seen.emplace_back(k);
    auto it = j.find(k);
    return it == j.end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const char* k, const std::string& why) const {
    throw ConfigError("config key '" + path + k + "': " + why);
  }
  template <class T>
  void scalar(const char* k, T& v) {
    if (const json* x = find(k)) {
      try {
        v = x->get<T>();
      } catch (const json::exception& e) {
        fail(k, e.what());
      }
    }
  }
  void operator()(const char* k, double& v) {
    if (const json* x = find(k)) {
      if (!x->is_number()) fail(k, "expected a number");
      v = x->get<double>();
    }
  }
  void operator()(const char* k, bool& v) { scalar(k, v); }
  void operator()(const char* k, int& v) { scalar(k, v); }
  void operator()(const char* k, std::size_t& v) {
    if (const json* x = find(k)) {
      if (!x->is_number_unsigned()) fail(k, "expected a non-negative integer");
      v = x->get<std::size_t>();
    }
  }
  void operator()(const char* k, std::string& v) { scalar(k, v); }
  void operator()(const char* k, Vec3& v) {
    if (const json* x = find(k)) {
      if (!x->is_array() || x->size() != 3) fail(k, "expected an array of 3 numbers");
      for (int i = 0; i < 3; ++i) {
        if (!(*x)[static_cast<std::size_t>(i)].is_number()) fail(k, "expected an array of 3 numbers");
        v[i] = (*x)[static_cast<std::size_t>(i)].get<double>();
      }
    }
  }
  template <class E, std::size_t N>
  void enumeration(const char* k, E& v, const EnumName<E> (&t)[N]) {
    if (const json* x = find(k)) {
      if (!x->is_string()) fail(k, "expected a string");
      v = enum_parse(t, x->get<std::string>(), k);
    }
  }
  template <class S>
  void object(const char* k, S& s);
  void finish() const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(seen.begin(), seen.end(), it.key()) == seen.end()) {
        throw ConfigError("unknown config key '" + path + it.key() + "'");
      }
    }
  }
};

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const EngineConfig, EngineConfig>& e) {
  f("isp", e.isp);
  f("g_ref", e.g_ref);
  f("thrust_min", e.thrust_min);
  f("thrust_max", e.thrust_max);
  f("per_axis_caps", e.per_axis_caps);
  f("dry_mass", e.dry_mass);
  f("axis_max", e.axis_max);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const RewardConfig, RewardConfig>& r) {
  f("alpha", r.alpha);
  f("beta", r.beta);
  f("gamma", r.gamma_const);
  f("eta", r.eta);
  f("tau1", r.tau1);
  f("tau2", r.tau2);
  f("v_o", r.v_o);
  f("r_lim", r.r_lim);
  f("v_lim", r.v_lim);
  f("gs_lim", r.gs_lim);
  f("use_glideslope", r.use_glideslope);
  f("aim_altitude", r.aim_altitude);
  f("descent_rate_high", r.descent_rate_high);
  f("descent_rate_low", r.descent_rate_low);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const RadarSettings, RadarSettings>& r) {
  f.enumeration("mode", r.mode, kPointing);
  f.enumeration("layout", r.layout, kLayout);
  f("dtm_seed", r.dtm_seed);
  f("dtm_size", r.dtm_size);
  f("dtm_spacing", r.dtm_spacing);
  f("target_map", r.target_map);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const AsteroidMeshOptions, AsteroidMeshOptions>& m) {
  f("mean_radius", m.mean_radius);
  f("edge_length", m.edge_length);
  f("relief", m.relief);
  f("harmonics", m.harmonics);
  f("pole_flatten_deg", m.pole_flatten_deg);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const MarsConfig, MarsConfig>& c) {
  f("r_min", c.r_min);
  f("r_max", c.r_max);
  f("v_min", c.v_min);
  f("v_max", c.v_max);
  f("mass_min", c.mass_min);
  f("mass_max", c.mass_max);
  f("a_env_max", c.a_env_max);
  f("gravity", c.gravity);
  f.object("engine", c.engine);
  f("failure_probability", c.failure_probability);
  f("failure_lateral_factor", c.failure_lateral_factor);
  f("failure_vertical_factor", c.failure_vertical_factor);
  f("failure_axis_max_fraction", c.failure_axis_max_fraction);
  f("bias_max", c.bias_max);
  f.enumeration("sensing", c.sensing, kMarsSensing);
  f.object("radar", c.radar);
  f.object("reward", c.reward);
  f("dt", c.dt);
  f("substeps", c.substeps);
  f("t_max", c.t_max);
  f("box_xy", c.box_xy);
  f("box_z", c.box_z);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const AsteroidConfig, AsteroidConfig>& c) {
  f("distance_min", c.distance_min);
  f("distance_max", c.distance_max);
  f("polar_max_deg", c.polar_max_deg);
  f("azimuth_max_deg", c.azimuth_max_deg);
  f("heading_max_deg", c.heading_max_deg);
  f("speed_min", c.speed_min);
  f("speed_max", c.speed_max);
  f("mass_min", c.mass_min);
  f("mass_max", c.mass_max);
  f("omega_max", c.omega_max);
  f("srp_max", c.srp_max);
  f("body_mass_min", c.body_mass_min);
  f("body_mass_max", c.body_mass_max);
  f("G", c.G);
  f("target_radius", c.target_radius);
  f.object("engine", c.engine);
  f.enumeration("sensing", c.sensing, kAstSensing);
  f("mesh_seed", c.mesh_seed);
  f.object("mesh", c.mesh);
  f.object("reward", c.reward);
  f("dt", c.dt);
  f("substeps", c.substeps);
  f("t_max", c.t_max);
  f("escape_distance", c.escape_distance);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const PpoConfig, PpoConfig>& p) {
  f("gamma", p.gamma);
  f("clip", p.clip);
  f("clip_min", p.clip_min);
  f("clip_max", p.clip_max);
  f("kl_target", p.kl_target);
  f("episodes_per_batch", p.episodes_per_batch);
  f("epochs", p.epochs);
  f("minibatches", p.minibatches);
  f("unroll", p.unroll);
  f("lr_policy", p.lr_policy);
  f("lr_value", p.lr_value);
  f("log_std_init", p.log_std_init);
  f("iterations", p.iterations);
  f("seed", p.seed);
  f("max_episode_steps", p.max_episode_steps);
}

template <class V>
void fields(V& f, std::conditional_t<std::is_same_v<V, Writer>, const DrDvSettings, DrDvSettings>& d) {
  f("gamma_mars", d.gamma_mars);
  f("gamma_asteroid", d.gamma_asteroid);
  f("asteroid_gravity_scale", d.asteroid_gravity_scale);
  f("t_go_min_mars", d.t_go_min_mars);
  f("t_go_min_asteroid", d.t_go_min_asteroid);
  f("touchdown_speed_mars", d.touchdown_speed_mars);
  f("touchdown_speed_asteroid", d.touchdown_speed_asteroid);
}

template <class S>
void Writer::object(const char* k, const S& s) {
  json sub = json::object();
  Writer w{sub};
  fields<Writer>(w, s);
  j[k] = std::move(sub);
}

template <class S>
void Reader::object(const char* k, S& s) {
  if (const json* x = find(k)) {
    if (!x->is_object()) fail(k, "expected an object");
    Reader r{*x, path + k + "."};
    fields<Reader>(r, s);
    r.finish();
  }
}

json spec_to_json(const ExperimentSpec& s) {
  json j = json::object();
  Writer w{j};
  w("id", s.id);
  w("description", s.description);
  if (const auto* m = std::get_if<MarsConfig>(&s.env)) {
    j["body"] = "mars";
    w.object("mars", *m);
  } else {
    j["body"] = "asteroid";
    w.object("asteroid", std::get<AsteroidConfig>(s.env));
  }
  w.enumeration("policy", s.policy, kPolicy);
  w.object("ppo", s.ppo);
  w.object("drdv", s.drdv);
  w("train_episodes", s.train_episodes);
  w("eval_episodes", s.eval_episodes);
  w("eval_seed", s.eval_seed);
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentSpec s;
  Reader r{j, ""};
  r("id", s.id);
  r("description", s.description);
  std::string body = "mars";
  r("body", body);
  if (body == "mars") {
    MarsConfig m;
    r.object("mars", m);
    s.env = m;
  } else if (body == "asteroid") {
    AsteroidConfig a;
    r.object("asteroid", a);
    s.env = a;
  } else {
    throw ConfigError("config key 'body': expected mars or asteroid");
  }
  r.enumeration("policy", s.policy, kPolicy);
  r.object("ppo", s.ppo);
  r.object("drdv", s.drdv);
  r("train_episodes", s.train_episodes);
  r("eval_episodes", s.eval_episodes);
  r("eval_seed", s.eval_seed);
  r.finish();
  if (s.ppo.episodes_per_batch == 0) throw ConfigError("ppo.episodes_per_batch must be positive");
  if (!(s.ppo.gamma > 0.0 && s.ppo.gamma <= 1.0)) throw ConfigError("ppo.gamma must lie in (0, 1]");
  if (!(s.ppo.clip > 0.0 && s.ppo.clip < 1.0)) throw ConfigError("ppo.clip must lie in (0, 1)");
  if (s.ppo.unroll == 0) throw ConfigError("ppo.unroll must be at least 1");
  return s;
}

ExperimentSpec make_mars(const std::string& id, const std::string& description) {
  ExperimentSpec s;
  s.id = id;
  s.description = description;
  s.env = MarsConfig{};
  // desk-scale budget: shorter horizon, wider initial exploration, larger per-update KL step
  s.ppo.gamma = 0.98;
  s.ppo.log_std_init = -0.3;
  s.ppo.kl_target = 0.004;
  return s;
}

ExperimentSpec make_asteroid(const std::string& id, const std::string& description) {
  ExperimentSpec s;
  s.id = id;
  s.description = description;
  s.env = AsteroidConfig{};
  return s;
}

}  // namespace

std::string to_string(PolicyKind kind) { return enum_name(kPolicy, kind); }
PolicyKind parse_policy_kind(const std::string& text) { return enum_parse(kPolicy, text, "policy"); }

bool ExperimentSpec::sensor_driven() const {
  if (const auto* m = std::get_if<MarsConfig>(&env)) return m->sensing == MarsSensing::radar;
  return std::get<AsteroidConfig>(env).sensing == AsteroidSensing::lidar;
}

std::vector<std::string> preset_ids() {
  return {"nominal-mars", "nominal-asteroid", "exp1", "exp1-hard", "exp2", "exp3",
          "exp3-pointing", "exp4", "exp5", "exp6"};
}

ExperimentSpec experiment_preset(const std::string& id) {
  if (id == "nominal-mars") {
    return make_mars(id, "Mars powered descent, ideal engine, ground-truth state");
  }
  if (id == "nominal-asteroid") {
    ExperimentSpec s = make_asteroid(id, "Asteroid landing, non-rotating body without radiation pressure");
    auto& a = std::get<AsteroidConfig>(s.env);
    a.omega_max = 0.0;
    a.srp_max = 0.0;
    return s;
  }
  if (id == "exp1" || id == "exp1-hard") {
    ExperimentSpec s = make_mars(id, id == "exp1" ? "Mars landing with random engine failure"
                                                  : "Mars landing with severe random engine failure");
    auto& m = std::get<MarsConfig>(s.env);
    m.engine.thrust_max = 24000.0;
    m.failure_probability = 0.5;
    m.failure_lateral_factor = id == "exp1" ? 2.0 : 2.5;
    m.failure_vertical_factor = 1.5;
    return s;
  }
  if (id == "exp2") {
    ExperimentSpec s = make_mars(id, "Mars landing with high mass variation");
    std::get<MarsConfig>(s.env).engine.isp = 225.0 / 6.0;
    return s;
  }
  if (id == "exp3" || id == "exp3-pointing") {
    ExperimentSpec s = make_mars(id, "Mars landing from radar altimeter readings");
    auto& m = std::get<MarsConfig>(s.env);
    m.sensing = MarsSensing::radar;
    m.radar.mode = id == "exp3" ? PointingMode::velocity_averaged_down : PointingMode::target_pointing;
    return s;
  }
  if (id == "exp4") {
    ExperimentSpec s = make_mars(id, "Mars landing with biased state estimate");
    auto& m = std::get<MarsConfig>(s.env);
    m.sensing = MarsSensing::biased;
    m.bias_max = 0.1;
    return s;
  }
  if (id == "exp5") {
    return make_asteroid(id, "Asteroid landing with unknown dynamics");
  }
  if (id == "exp6") {
    ExperimentSpec s = make_asteroid(id, "Asteroid landing from LIDAR altimeter readings");
    auto& a = std::get<AsteroidConfig>(s.env);
    a.sensing = AsteroidSensing::lidar;
    a.polar_max_deg = 22.5;
    a.omega_max = 1e-5;
    return s;
  }
  throw ConfigError("unknown experiment '" + id + "'");
}

std::vector<ExperimentSpec> experiment_presets() {
  std::vector<ExperimentSpec> out;
  for (const auto& id : preset_ids()) out.push_back(experiment_preset(id));
  return out;
}

std::string experiment_to_json(const ExperimentSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

ExperimentSpec experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return spec_from_json(j);
}

ExperimentSpec load_experiment(const std::string& path_or_id) {
  for (const auto& id : preset_ids())
    if (id == path_or_id) return experiment_preset(id);
  std::ifstream in(path_or_id);
  if (!in) throw ConfigError("unknown experiment '" + path_or_id + "' (not a preset id or readable file)");
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_from_json(ss.str());
}

void apply_override(ExperimentSpec& spec, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json j = spec_to_json(spec);
  std::string pointer;
  std::stringstream ks(key);
  for (std::string part; std::getline(ks, part, '.');) pointer += "/" + part;
  const json::json_pointer ptr(pointer);
  if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
  if (key == "body") throw ConfigError("the body of an experiment cannot be overridden");
  j[ptr] = value;
  spec = spec_from_json(j);
}

void sync_training_budget(ExperimentSpec& spec) {
  const std::size_t batch = spec.ppo.episodes_per_batch;
  const std::size_t batches = std::max<std::size_t>(spec.train_episodes / batch, 2);
  spec.ppo.iterations = batches - 1;
}

}  // namespace metaland
