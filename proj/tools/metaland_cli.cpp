// metaland command-line front end; talks to the library only through metaland.h.
#include "metaland/metaland.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ExperimentDeleter {
  void operator()(ml_experiment* p) const { ml_experiment_free(p); }
};
struct PolicyDeleter {
  void operator()(ml_policy* p) const { ml_policy_free(p); }
};
struct EvalDeleter {
  void operator()(ml_eval* p) const { ml_eval_free(p); }
};
using ExperimentPtr = std::unique_ptr<ml_experiment, ExperimentDeleter>;
using PolicyPtr = std::unique_ptr<ml_policy, PolicyDeleter>;
using EvalPtr = std::unique_ptr<ml_eval, EvalDeleter>;

// Thrown to unwind with an exit code after the message was printed.
struct Exit {
  int code;
};

void check(ml_status s, const std::string& context, int code = kExitRuntime) {
  if (s == ML_OK) return;
  std::cerr << "error: " << context << ": " << ml_last_error() << " (" << ml_status_name(s) << ")\n";
  throw Exit{s == ML_ERR_CONFIG || s == ML_ERR_INVALID_ARGUMENT ? kExitUsage : code};
}

template <class F>
std::string fetch_string(F&& call, const std::string& context) {
  std::vector<char> buf(1 << 16);
  size_t needed = 0;
  ml_status s = call(buf.data(), buf.size(), &needed);
  if (s == ML_ERR_BUFFER_TOO_SMALL) {
    buf.resize(needed);
    s = call(buf.data(), buf.size(), &needed);
  }
  check(s, context);
  return std::string(buf.data());
}

std::string resolve_experiment_id(const std::string& id) {
  // bare experiment numbers are accepted as shorthands
  if (!id.empty() && id.find_first_not_of("0123456789") == std::string::npos) return "exp" + id;
  return id;
}

ExperimentPtr load_experiment(const std::string& id, const std::vector<std::string>& overrides) {
  ml_experiment* raw = nullptr;
  check(ml_experiment_load(resolve_experiment_id(id).c_str(), &raw), "loading experiment '" + id + "'");
  ExperimentPtr exp(raw);
  for (const auto& o : overrides) check(ml_experiment_set(exp.get(), o.c_str()), "applying --set " + o);
  return exp;
}

void print_summary(const ml_eval* eval, const std::string& label) {
  ml_eval_summary s{};
  check(ml_eval_summary_get(eval, &s), "reading evaluation summary");
  std::printf("%s: %zu episodes, success %.1f%%, faults %zu\n", label.c_str(), s.episodes, 100.0 * s.success_rate,
              s.faults);
  std::printf("  terminal position (m):   mean %.3f  std %.3f  max %.3f\n", s.r_mean, s.r_std, s.r_max);
  std::printf("  terminal velocity (m/s): mean %.4f  std %.4f  max %.4f\n", s.v_mean, s.v_std, s.v_max);
  std::printf("  fuel (kg):               mean %.2f  median %.2f  max %.2f\n", s.fuel_mean, s.fuel_median,
              s.fuel_max);
  std::printf("  glideslope (deg):        mean %.2f  min %.2f\n", s.glideslope_mean, s.glideslope_min);
}

void finish_eval(ml_eval* eval, const ml_policy* policy, const std::string& report) {
  const std::string label =
      fetch_string([&](char* b, size_t c, size_t* n) { return ml_policy_label(policy, b, c, n); }, "policy label");
  print_summary(eval, label);
  if (!report.empty()) {
    check(ml_eval_write_report(eval, report.c_str()), "writing report " + report);
    std::printf("report written to %s\n", report.c_str());
  }
}

int progress_printer(const char* row, void* /*user*/) {
  std::printf("%s\n", row);
  std::fflush(stdout);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metaland: adaptive powered-descent guidance lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ml_version());

  std::vector<std::string> overrides;

  // train
  auto* train = app.add_subcommand("train", "optimize an RL or meta-RL policy with PPO");
  std::string train_exp, policy_kind = "meta-rl", out_dir;
  size_t unroll = 20, iterations = 0;
  uint64_t train_seed = 1;
  bool resume = false;
  train->add_option("--experiment", train_exp, "preset id or config file")->required();
  train->add_option("--policy", policy_kind, "policy kind")->check(CLI::IsMember({"rl", "meta-rl"}));
  train->add_option("--unroll", unroll, "recurrent unroll length T")->check(CLI::Range(1, 100000));
  train->add_option("--iterations", iterations, "PPO iterations (default: from the training budget)");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_flag("--resume", resume, "continue from OUT/checkpoint.mlck");
  train->add_option("--set", overrides, "override a config value, key.path=value");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo evaluation of a trained checkpoint");
  std::string checkpoint, eval_report, eval_traj, eval_exp;
  size_t eval_episodes = 0;
  uint64_t eval_seed = 0;
  bool eval_seed_set = false;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evaluate->add_option("--episodes", eval_episodes, "episode count (default: experiment setting)");
  evaluate->add_option_function<uint64_t>(
      "--seed", [&](const uint64_t& s) { eval_seed = s, eval_seed_set = true; }, "evaluation seed");
  evaluate->add_option("--report", eval_report, "write the JSON report here");
  evaluate->add_option("--trajectory-log", eval_traj, "write a CSV log of the first episode");
  evaluate->add_option("--experiment", eval_exp, "evaluate in this experiment instead of the training one");
  evaluate->add_option("--set", overrides, "override a config value, key.path=value");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Monte Carlo evaluation of the DR/DV guidance law");
  std::string base_exp, base_report, base_traj;
  size_t base_episodes = 0;
  uint64_t base_seed = 0;
  bool base_seed_set = false;
  baseline->add_option("--experiment", base_exp, "preset id or config file")->required();
  baseline->add_option("--episodes", base_episodes, "episode count (default: experiment setting)");
  baseline->add_option_function<uint64_t>(
      "--seed", [&](const uint64_t& s) { base_seed = s, base_seed_set = true; }, "evaluation seed");
  baseline->add_option("--report", base_report, "write the JSON report here");
  baseline->add_option("--trajectory-log", base_traj, "write a CSV log of the first episode");
  baseline->add_option("--set", overrides, "override a config value, key.path=value");

  // sensor-check
  auto* sensor = app.add_subcommand("sensor-check", "altimeter error characterization tables");
  std::string sensor_exp;
  size_t samples = 10000;
  uint64_t sensor_seed = 9;
  sensor->add_option("--experiment", sensor_exp, "3 or 6 (or a preset id)")->required();
  sensor->add_option("--samples", samples, "samples per table row")->check(CLI::PositiveNumber);
  sensor->add_option("--seed", sensor_seed, "sampling seed");

  // report
  auto* report = app.add_subcommand("report", "render comparison tables from evaluation reports");
  std::vector<std::string> inputs;
  std::string format = "text";
  report->add_option("--inputs", inputs, "report files")->required()->expected(1, -1);
  report->add_option("--format", format, "output format")->check(CLI::IsMember({"text", "csv"}));

  // config
  auto* config = app.add_subcommand("config", "print an experiment's resolved configuration as JSON");
  std::string config_exp;
  config->add_option("--experiment", config_exp, "preset id or config file")->required();
  config->add_option("--set", overrides, "override a config value, key.path=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) {
      ExperimentPtr exp = load_experiment(train_exp, overrides);
      ml_train_options opts;
      ml_train_options_init(&opts);
      opts.policy = policy_kind == "rl" ? ML_POLICY_RL : ML_POLICY_META_RL;
      opts.unroll = unroll;
      opts.iterations = iterations;
      opts.seed = train_seed;
      opts.out_dir = out_dir.c_str();
      opts.resume = resume ? 1 : 0;
      std::printf("%s\n", ml_learning_curve_header());
      check(ml_train(exp.get(), &opts, progress_printer, nullptr), "training");
      std::printf("checkpoint written to %s/checkpoint.mlck\n", out_dir.c_str());
      return 0;
    }
    if (*evaluate) {
      ml_policy* raw_policy = nullptr;
      ml_experiment* raw_exp = nullptr;
      const ml_status s = ml_policy_load(checkpoint.c_str(), &raw_policy, &raw_exp);
      if (s == ML_ERR_IO) {
        std::cerr << "error: " << ml_last_error() << "\n" << evaluate->help();
        return kExitUsage;
      }
      check(s, "loading checkpoint " + checkpoint);
      PolicyPtr policy(raw_policy);
      ExperimentPtr exp(raw_exp);
      if (!eval_exp.empty()) exp = load_experiment(eval_exp, {});
      for (const auto& o : overrides) check(ml_experiment_set(exp.get(), o.c_str()), "applying --set " + o);
      size_t n = 0;
      uint64_t seed = 0;
      check(ml_experiment_eval_defaults(exp.get(), &n, &seed), "reading evaluation defaults");
      if (eval_episodes > 0) n = eval_episodes;
      if (eval_seed_set) seed = eval_seed;
      ml_eval* raw_eval = nullptr;
      check(ml_evaluate(policy.get(), exp.get(), n, seed, 0, eval_traj.empty() ? nullptr : eval_traj.c_str(),
                        &raw_eval),
            "evaluation");
      EvalPtr eval(raw_eval);
      finish_eval(eval.get(), policy.get(), eval_report);
      return 0;
    }
    if (*baseline) {
      ExperimentPtr exp = load_experiment(base_exp, overrides);
      ml_policy* raw_policy = nullptr;
      check(ml_policy_drdv(exp.get(), &raw_policy), "creating DR/DV policy");
      PolicyPtr policy(raw_policy);
      size_t n = 0;
      uint64_t seed = 0;
      check(ml_experiment_eval_defaults(exp.get(), &n, &seed), "reading evaluation defaults");
      if (base_episodes > 0) n = base_episodes;
      if (base_seed_set) seed = base_seed;
      ml_eval* raw_eval = nullptr;
      check(ml_evaluate(policy.get(), exp.get(), n, seed, 0, base_traj.empty() ? nullptr : base_traj.c_str(),
                        &raw_eval),
            "evaluation");
      EvalPtr eval(raw_eval);
      finish_eval(eval.get(), policy.get(), base_report);
      return 0;
    }
    if (*sensor) {
      ExperimentPtr exp = load_experiment(sensor_exp, overrides);
      if (!ml_experiment_sensor_driven(exp.get())) {
        std::cerr << "error: experiment '" << sensor_exp << "' has no altimeter sensor (use 3 or 6)\n";
        return kExitUsage;
      }
      const std::string table = fetch_string(
          [&](char* b, size_t c, size_t* n) { return ml_sensor_check(exp.get(), samples, sensor_seed, b, c, n); },
          "sensor check");
      std::fputs(table.c_str(), stdout);
      return 0;
    }
    if (*config) {
      ExperimentPtr exp = load_experiment(config_exp, overrides);
      const std::string text = fetch_string(
          [&](char* b, size_t c, size_t* n) { return ml_experiment_to_json(exp.get(), b, c, n); }, "serializing");
      std::printf("%s\n", text.c_str());
      return 0;
    }
    if (*report) {
      std::vector<const char*> paths;
      for (const auto& p : inputs) paths.push_back(p.c_str());
      const ml_table_format fmt = format == "csv" ? ML_FORMAT_CSV : ML_FORMAT_TEXT;
      const std::string tables = fetch_string(
          [&](char* b, size_t c, size_t* n) { return ml_render_reports(paths.data(), paths.size(), fmt, b, c, n); },
          "rendering reports");
      std::fputs(tables.c_str(), stdout);
      return 0;
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return kExitUsage;
}
