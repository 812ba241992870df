#include "metaland/metaland.h"

#include "metaland/checkpoint.hpp"
#include "metaland/experiment.hpp"
#include "metaland/harness.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace metaland;

struct ml_experiment {
  ExperimentSpec spec;
};

struct ml_env {
  std::unique_ptr<Environment> env;
};

struct ml_policy {
  std::unique_ptr<Controller> controller;
  std::string label;
};

struct ml_eval {
  EvalResult result;
};

namespace {

thread_local std::string g_last_error;

ml_status fail(ml_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
ml_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const ConfigError& e) {
    return fail(ML_ERR_CONFIG, e.what());
  } catch (const NumericFault& e) {
    return fail(ML_ERR_NUMERIC, e.what());
  } catch (const std::domain_error& e) {
    return fail(ML_ERR_STATE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(ML_ERR_IO, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(ML_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(ML_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ML_ERR_INTERNAL, "unknown exception");
  }
}

ml_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || cap < s.size() + 1) {
    return fail(ML_ERR_BUFFER_TOO_SMALL, "buffer too small: need " + std::to_string(s.size() + 1) + " bytes");
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return ML_OK;
}

ml_status null_arg(const char* what) { return fail(ML_ERR_INVALID_ARGUMENT, std::string(what) + " is NULL"); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::ios_base::failure("cannot write " + path);
  os << text;
  if (!os) throw std::ios_base::failure("failed while writing " + path);
}

const std::vector<std::string>& preset_list() {
  static const std::vector<std::string> ids = preset_ids();
  return ids;
}

}  // namespace

extern "C" {

const char* ml_last_error(void) { return g_last_error.c_str(); }

const char* ml_version(void) { return "1.0.0"; }

const char* ml_status_name(ml_status s) {
  switch (s) {
    case ML_OK: return "ok";
    case ML_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ML_ERR_CONFIG: return "configuration error";
    case ML_ERR_IO: return "i/o error";
    case ML_ERR_NUMERIC: return "numeric fault";
    case ML_ERR_STATE: return "invalid state";
    case ML_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case ML_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

size_t ml_preset_count(void) { return preset_list().size(); }

const char* ml_preset_id(size_t i) { return i < preset_list().size() ? preset_list()[i].c_str() : nullptr; }

ml_status ml_experiment_load(const char* preset_or_path, ml_experiment** out) {
  if (!preset_or_path) return null_arg("preset_or_path");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new ml_experiment{load_experiment(preset_or_path)};
    return ML_OK;
  });
}

ml_status ml_experiment_from_json(const char* json, ml_experiment** out) {
  if (!json) return null_arg("json");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new ml_experiment{experiment_from_json(json)};
    return ML_OK;
  });
}

ml_status ml_experiment_set(ml_experiment* exp, const char* assignment) {
  if (!exp) return null_arg("exp");
  if (!assignment) return null_arg("assignment");
  return guarded([&] {
    ExperimentSpec copy = exp->spec;
    apply_override(copy, assignment);
    exp->spec = std::move(copy);
    return ML_OK;
  });
}

ml_status ml_experiment_to_json(const ml_experiment* exp, char* buf, size_t cap, size_t* needed) {
  if (!exp) return null_arg("exp");
  return guarded([&] { return copy_out(experiment_to_json(exp->spec), buf, cap, needed); });
}

ml_status ml_experiment_eval_defaults(const ml_experiment* exp, size_t* episodes, uint64_t* seed) {
  if (!exp) return null_arg("exp");
  if (episodes) *episodes = exp->spec.eval_episodes;
  if (seed) *seed = exp->spec.eval_seed;
  return ML_OK;
}

int ml_experiment_sensor_driven(const ml_experiment* exp) { return exp && exp->spec.sensor_driven() ? 1 : 0; }

void ml_experiment_free(ml_experiment* exp) { delete exp; }

ml_status ml_env_create(const ml_experiment* exp, uint64_t seed, ml_env** out) {
  if (!exp) return null_arg("exp");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new ml_env{make_environment(exp->spec.env, nullptr, seed)};
    return ML_OK;
  });
}

size_t ml_env_obs_dim(const ml_env* env) { return env ? env->env->obs_dim() : 0; }

size_t ml_env_act_dim(const ml_env* env) { return env ? env->env->act_dim() : 0; }

ml_status ml_env_reset(ml_env* env, uint64_t seed, double* obs, size_t cap) {
  if (!env) return null_arg("env");
  return guarded([&] {
    if (cap < env->env->obs_dim() || !obs) return fail(ML_ERR_BUFFER_TOO_SMALL, "observation buffer too small");
    env->env->seed(seed);
    const VecX o = env->env->reset();
    std::copy(o.data(), o.data() + o.size(), obs);
    return ML_OK;
  });
}

ml_status ml_env_step(ml_env* env, const double* action, size_t act_dim, double* obs, size_t cap, double* reward,
                      int* done, int* success) {
  if (!env) return null_arg("env");
  if (!action) return null_arg("action");
  return guarded([&] {
    if (act_dim != env->env->act_dim()) return fail(ML_ERR_INVALID_ARGUMENT, "action has the wrong length");
    if (cap < env->env->obs_dim() || !obs) return fail(ML_ERR_BUFFER_TOO_SMALL, "observation buffer too small");
    const VecX a = Eigen::Map<const VecX>(action, static_cast<Eigen::Index>(act_dim));
    const StepResult r = env->env->step(a);
    std::copy(r.observation.data(), r.observation.data() + r.observation.size(), obs);
    if (reward) *reward = r.reward;
    if (done) *done = r.done ? 1 : 0;
    if (success) *success = r.info.success ? 1 : 0;
    return ML_OK;
  });
}

ml_status ml_env_truth(const ml_env* env, double state[8]) {
  if (!env) return null_arg("env");
  if (!state) return null_arg("state");
  const LanderState& s = env->env->state();
  for (int k = 0; k < 3; ++k) {
    state[k] = s.r[k];
    state[3 + k] = s.v[k];
  }
  state[6] = s.mass;
  state[7] = s.t;
  return ML_OK;
}

void ml_env_free(ml_env* env) { delete env; }

ml_status ml_policy_drdv(const ml_experiment* exp, ml_policy** out) {
  if (!exp) return null_arg("exp");
  if (!out) return null_arg("out");
  return guarded([&] {
    if (exp->spec.sensor_driven()) {
      return fail(ML_ERR_CONFIG, "DR/DV needs a state estimate; experiment '" + exp->spec.id +
                                     "' only provides sensor readings");
    }
    *out = new ml_policy{std::make_unique<DrDvController>(exp->spec.drdv), policy_label(PolicyKind::drdv, 0)};
    return ML_OK;
  });
}

ml_status ml_policy_load(const char* checkpoint_path, ml_policy** out, ml_experiment** trained_on) {
  if (!checkpoint_path) return null_arg("checkpoint_path");
  if (!out) return null_arg("out");
  return guarded([&] {
    if (!std::filesystem::exists(checkpoint_path)) {
      return fail(ML_ERR_IO, std::string("checkpoint not found: ") + checkpoint_path);
    }
    Checkpoint ck = load_checkpoint(checkpoint_path);
    ExperimentSpec spec = experiment_from_json(ck.metadata);
    auto agent = std::make_shared<const Agent>(std::move(ck.state.agent));
    const PolicyKind kind = agent->recurrent() ? PolicyKind::meta_rl : PolicyKind::rl;
    auto policy = std::make_unique<ml_policy>();
    policy->label = policy_label(kind, agent->unroll);
    policy->controller = std::make_unique<PolicyController>(agent);
    if (trained_on) *trained_on = new ml_experiment{std::move(spec)};
    *out = policy.release();
    return ML_OK;
  });
}

ml_status ml_policy_reset(ml_policy* policy, const ml_env* env) {
  if (!policy) return null_arg("policy");
  if (!env) return null_arg("env");
  return guarded([&] {
    policy->controller->reset(*env->env);
    return ML_OK;
  });
}

ml_status ml_policy_act(ml_policy* policy, const ml_env* env, const double* obs, size_t obs_dim, double* action,
                        size_t cap) {
  if (!policy) return null_arg("policy");
  if (!env) return null_arg("env");
  if (!obs) return null_arg("obs");
  return guarded([&] {
    if (cap < env->env->act_dim() || !action) return fail(ML_ERR_BUFFER_TOO_SMALL, "action buffer too small");
    const VecX o = Eigen::Map<const VecX>(obs, static_cast<Eigen::Index>(obs_dim));
    const VecX a = policy->controller->act(o, *env->env);
    std::copy(a.data(), a.data() + a.size(), action);
    return ML_OK;
  });
}

ml_status ml_policy_label(const ml_policy* policy, char* buf, size_t cap, size_t* needed) {
  if (!policy) return null_arg("policy");
  return copy_out(policy->label, buf, cap, needed);
}

void ml_policy_free(ml_policy* policy) { delete policy; }

void ml_train_options_init(ml_train_options* opts) {
  if (!opts) return;
  *opts = ml_train_options{};
  opts->policy = ML_POLICY_META_RL;
  opts->seed = 1;
}

const char* ml_learning_curve_header(void) {
  static const std::string header = learning_curve_header();
  return header.c_str();
}

ml_status ml_train(const ml_experiment* exp, const ml_train_options* opts, ml_progress_fn progress, void* user) {
  if (!exp) return null_arg("exp");
  if (!opts) return null_arg("opts");
  if (!opts->out_dir) return null_arg("opts->out_dir");
  if (opts->policy != ML_POLICY_RL && opts->policy != ML_POLICY_META_RL) {
    return fail(ML_ERR_INVALID_ARGUMENT, "training needs policy rl or meta-rl");
  }
  return guarded([&] {
    namespace fs = std::filesystem;
    const fs::path dir(opts->out_dir);
    const std::string ck_path = (dir / "checkpoint.mlck").string();
    const std::string curve_path = (dir / "learning_curve.csv").string();

    ExperimentSpec spec = exp->spec;
    TrainState state;
    bool resumed = false;
    if (opts->resume && fs::exists(ck_path)) {
      Checkpoint ck = load_checkpoint(ck_path);
      spec = experiment_from_json(ck.metadata);
      state = std::move(ck.state);
      resumed = true;
    } else {
      spec.policy = opts->policy == ML_POLICY_RL ? PolicyKind::rl : PolicyKind::meta_rl;
      if (opts->unroll > 0) spec.ppo.unroll = opts->unroll;
      spec.ppo.seed = opts->seed;
      sync_training_budget(spec);
    }
    if (opts->iterations > 0) spec.ppo.iterations = opts->iterations;
    spec.ppo.workers = opts->workers > 0 ? opts->workers : workers_from_env();

    fs::create_directories(dir);
    const auto assets = SensorAssets::build(spec.env);
    const EnvConfig env_cfg = spec.env;
    const EnvFactory factory = [env_cfg, assets] { return make_environment(env_cfg, assets, 0); };
    if (!resumed) {
      state = initial_train_state(spec.ppo, observation_dim(spec.env), 3, spec.layer2());
      write_file(curve_path, learning_curve_header() + "\n");
    }
    write_file((dir / "experiment.json").string(), experiment_to_json(spec));
    const std::string metadata = experiment_to_json(spec);

    std::ofstream curve(curve_path, std::ios::app);
    if (!curve) throw std::ios_base::failure("cannot append to " + curve_path);
    bool keep_going = true;
    train(spec.ppo, factory, state, [&](const IterationLog& log, const TrainState& st) {
      const std::string row = learning_curve_row(log);
      curve << row << '\n';
      curve.flush();
      save_checkpoint(ck_path, st, metadata);
      if (progress && progress(row.c_str(), user) == 0) keep_going = false;
      return keep_going;
    });
    save_checkpoint(ck_path, state, metadata);
    return ML_OK;
  });
}

ml_status ml_evaluate(const ml_policy* policy, const ml_experiment* exp, size_t episodes, uint64_t seed,
                      size_t workers, const char* trajectory_log, ml_eval** out) {
  if (!policy) return null_arg("policy");
  if (!exp) return null_arg("exp");
  if (!out) return null_arg("out");
  return guarded([&] {
    if (episodes == 0) return fail(ML_ERR_INVALID_ARGUMENT, "episode count must be positive");
    const ExperimentSpec& spec = exp->spec;
    const auto assets = SensorAssets::build(spec.env);
    EvalResult res = run_monte_carlo(*policy->controller, spec, episodes, seed,
                                     workers > 0 ? workers : workers_from_env(), assets);
    res.label = policy->label;
    if (trajectory_log) {
      auto controller = policy->controller->clone();
      auto env = make_environment(spec.env, assets, seed);
      std::vector<TrajectoryRow> rows;
      run_episode(*controller, *env, derive_seed(seed, 0), &rows, spec.ppo.max_episode_steps);
      write_trajectory_log(trajectory_log, rows);
    }
    *out = new ml_eval{std::move(res)};
    return ML_OK;
  });
}

ml_status ml_eval_summary_get(const ml_eval* eval, ml_eval_summary* out) {
  if (!eval) return null_arg("eval");
  if (!out) return null_arg("out");
  const EvalStats& s = eval->result.stats;
  *out = ml_eval_summary{};
  out->episodes = s.episodes;
  out->r_mean = s.r.mean;
  out->r_std = s.r.std;
  out->r_max = s.r.max;
  out->v_mean = s.v.mean;
  out->v_std = s.v.std;
  out->v_max = s.v.max;
  out->fuel_mean = s.fuel.mean;
  out->fuel_std = s.fuel.std;
  out->fuel_max = s.fuel.max;
  out->fuel_median = s.fuel_median;
  out->glideslope_mean = s.glideslope.mean;
  double gs_min = s.glideslope.max;
  for (const auto& e : eval->result.episodes) gs_min = std::min(gs_min, e.glideslope);
  out->glideslope_min = gs_min;
  out->success_rate = s.success_rate;
  out->faults = s.faults;
  return ML_OK;
}

ml_status ml_eval_report_json(const ml_eval* eval, char* buf, size_t cap, size_t* needed) {
  if (!eval) return null_arg("eval");
  return guarded([&] { return copy_out(report_to_json(eval->result), buf, cap, needed); });
}

ml_status ml_eval_write_report(const ml_eval* eval, const char* path) {
  if (!eval) return null_arg("eval");
  if (!path) return null_arg("path");
  return guarded([&] {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_file(path, report_to_json(eval->result));
    return ML_OK;
  });
}

void ml_eval_free(ml_eval* eval) { delete eval; }

ml_status ml_render_reports(const char* const* report_paths, size_t n, ml_table_format format, char* buf,
                            size_t cap, size_t* needed) {
  if (!report_paths && n > 0) return null_arg("report_paths");
  return guarded([&] {
    if (n == 0) return fail(ML_ERR_INVALID_ARGUMENT, "no reports given");
    std::vector<EvalResult> results;
    for (size_t k = 0; k < n; ++k) {
      if (!report_paths[k]) return null_arg("report path");
      results.push_back(report_from_json(read_file(report_paths[k])));
    }
    return copy_out(render_tables(results, format == ML_FORMAT_CSV ? TableFormat::csv : TableFormat::text), buf,
                    cap, needed);
  });
}

ml_status ml_sensor_check(const ml_experiment* exp, size_t samples, uint64_t seed, char* buf, size_t cap,
                          size_t* needed) {
  if (!exp) return null_arg("exp");
  return guarded([&] { return copy_out(sensor_check(exp->spec, samples, seed), buf, cap, needed); });
}

}  // extern "C"
