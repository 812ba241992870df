// Exercises the shared library through its C interface only.
#include "metaland/metaland.h"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

namespace {

std::string report_of(const ml_eval* eval) {
  size_t needed = 0;
  CHECK(ml_eval_report_json(eval, nullptr, 0, &needed) == ML_ERR_BUFFER_TOO_SMALL);
  std::vector<char> buf(needed);
  REQUIRE(ml_eval_report_json(eval, buf.data(), buf.size(), &needed) == ML_OK);
  return buf.data();
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("presets and errors") {
    CHECK(ml_preset_count() >= 10);
    CHECK(std::strcmp(ml_preset_id(0), "nominal-mars") == 0);
    CHECK(ml_preset_id(1000) == nullptr);
    CHECK(std::strlen(ml_version()) > 0);

    ml_experiment* exp = nullptr;
    CHECK(ml_experiment_load("no-such-experiment", &exp) == ML_ERR_CONFIG);
    CHECK(exp == nullptr);
    CHECK(std::strlen(ml_last_error()) > 0);
    CHECK(ml_experiment_load(nullptr, &exp) == ML_ERR_INVALID_ARGUMENT);
    CHECK(std::strcmp(ml_status_name(ML_ERR_IO), "i/o error") == 0);

    REQUIRE(ml_experiment_load("exp2", &exp) == ML_OK);
    CHECK(ml_experiment_set(exp, "mars.engine.isp=40") == ML_OK);
    CHECK(ml_experiment_set(exp, "mars.engine.bogus=1") == ML_ERR_CONFIG);
    char small[4];
    size_t needed = 0;
    CHECK(ml_experiment_to_json(exp, small, sizeof(small), &needed) == ML_ERR_BUFFER_TOO_SMALL);
    std::vector<char> buf(needed);
    REQUIRE(ml_experiment_to_json(exp, buf.data(), buf.size(), &needed) == ML_OK);
    CHECK(std::string(buf.data()).find("\"isp\": 40") != std::string::npos);
    ml_experiment* copy = nullptr;
    CHECK(ml_experiment_from_json(buf.data(), &copy) == ML_OK);
    ml_experiment_free(copy);
    ml_experiment_free(exp);

    ml_policy* p = nullptr;
    CHECK(ml_policy_load("/nonexistent/ckpt.mlck", &p, nullptr) == ML_ERR_IO);
  }

  TEST_CASE("environment stepping") {
    ml_experiment* exp = nullptr;
    REQUIRE(ml_experiment_load("nominal-mars", &exp) == ML_OK);
    ml_env* env = nullptr;
    REQUIRE(ml_env_create(exp, 3, &env) == ML_OK);
    const size_t n = ml_env_obs_dim(env);
    CHECK(ml_env_act_dim(env) == 3);
    std::vector<double> obs(n);
    CHECK(ml_env_reset(env, 3, obs.data(), 1) == ML_ERR_BUFFER_TOO_SMALL);
    REQUIRE(ml_env_reset(env, 3, obs.data(), n) == ML_OK);
    double truth[8];
    REQUIRE(ml_env_truth(env, truth) == ML_OK);
    CHECK(truth[7] == 0.0);

    ml_policy* drdv = nullptr;
    REQUIRE(ml_policy_drdv(exp, &drdv) == ML_OK);
    REQUIRE(ml_policy_reset(drdv, env) == ML_OK);
    double act[3], reward = 0;
    int done = 0, success = 0, steps = 0;
    while (!done && steps < 5000) {
      REQUIRE(ml_policy_act(drdv, env, obs.data(), n, act, 3) == ML_OK);
      REQUIRE(ml_env_step(env, act, 3, obs.data(), n, &reward, &done, &success) == ML_OK);
      ++steps;
    }
    CHECK(done == 1);
    REQUIRE(ml_env_truth(env, truth) == ML_OK);
    CHECK(truth[2] <= 1e-9);

    const double bad[3] = {NAN, 0, 0};
    CHECK(ml_env_reset(env, 4, obs.data(), n) == ML_OK);
    CHECK(ml_env_step(env, bad, 3, obs.data(), n, &reward, &done, &success) == ML_ERR_NUMERIC);

    ml_policy_free(drdv);
    ml_env_free(env);
    ml_experiment_free(exp);
  }

  TEST_CASE("evaluation reports are deterministic") {
    ml_experiment* exp = nullptr;
    REQUIRE(ml_experiment_load("nominal-asteroid", &exp) == ML_OK);
    ml_policy* drdv = nullptr;
    REQUIRE(ml_policy_drdv(exp, &drdv) == ML_OK);
    ml_eval *a = nullptr, *b = nullptr;
    REQUIRE(ml_evaluate(drdv, exp, 5, 11, 1, nullptr, &a) == ML_OK);
    REQUIRE(ml_evaluate(drdv, exp, 5, 11, 2, nullptr, &b) == ML_OK);
    CHECK(report_of(a) == report_of(b));
    ml_eval_summary s;
    REQUIRE(ml_eval_summary_get(a, &s) == ML_OK);
    CHECK(s.episodes == 5);
    CHECK(s.r_mean >= 0.0);
    ml_eval* none = nullptr;
    CHECK(ml_evaluate(drdv, exp, 0, 11, 1, nullptr, &none) != ML_OK);
    ml_eval_free(a);
    ml_eval_free(b);
    ml_policy_free(drdv);

    ml_experiment* radar = nullptr;
    REQUIRE(ml_experiment_load("exp3", &radar) == ML_OK);
    CHECK(ml_experiment_sensor_driven(radar) == 1);
    CHECK(ml_policy_drdv(radar, &drdv) == ML_ERR_CONFIG);
    ml_experiment_free(radar);
    ml_experiment_free(exp);
  }
}
