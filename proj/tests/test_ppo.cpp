#include "metaland/ppo.hpp"
#include "toy_env.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace metaland;

namespace {

EnvFactory toy_factory() {
  return [] { return std::make_unique<toy::DoubleIntegrator>(); };
}

Agent toy_agent(Layer2 l2, std::size_t unroll, std::uint64_t seed) {
  Rng rng(seed);
  Agent a = Agent::create(2, 1, l2, unroll, rng);
  a.norm.update(VecX::Constant(2, -0.5));
  a.norm.update(VecX::Constant(2, 0.7));
  return a;
}

// Single-observation episodes: actions +-1 with advantage of matching sign.
TrajectoryBatch bandit_batch(const Agent& agent, double sign) {
  TrajectoryBatch b;
  const VecX x = VecX::Ones(2);
  VecX h;
  const VecX mean = agent.policy.forward(x, VecX(), &h);
  for (int e = 0; e < 8; ++e) {
    EpisodeRecord ep;
    for (int k = 0; k < 10; ++k) {
      const VecX a = VecX::Constant(1, (k % 2 == 0) ? 1.0 : -1.0);
      ep.obs.push_back(x);
      ep.raw_obs.push_back(x);
      ep.actions.push_back(a);
      ep.logp.push_back(gaussian_logp(mean, agent.log_std, a));
      ep.values.push_back(0.0);
      ep.rewards.push_back(0.0);
      ep.h_policy.push_back(VecX());
      ep.h_value.push_back(VecX());
    }
    b.episodes.push_back(ep);
    std::vector<double> adv, ret;
    for (int k = 0; k < 10; ++k) {
      adv.push_back(sign * ((k % 2 == 0) ? 1.0 : -1.0));
      ret.push_back(1.0);
    }
    b.advantages.push_back(adv);
    b.returns.push_back(ret);
  }
  return b;
}

}  // namespace

TEST_SUITE("ppo") {
  TEST_CASE("discounted return") {
    const std::vector<double> r = discounted_return({1, 1, 1}, 0.5);
    CHECK(r == std::vector<double>{1.75, 1.5, 1.0});
    CHECK(discounted_return({3, -2, 5}, 0.0) == std::vector<double>{3, -2, 5});
    CHECK(discounted_return(std::vector<double>(5, 1.0), 1.0) == std::vector<double>{5, 4, 3, 2, 1});

    std::vector<double> rew(300);
    Rng rng(1);
    for (double& x : rew) x = rng.uniform(-1, 1);
    const std::vector<double> R = discounted_return(rew, 0.995);
    CHECK(R.back() == rew.back());
    for (std::size_t k = 0; k + 1 < R.size(); ++k) CHECK(R[k] == rew[k] + 0.995 * R[k + 1]);
  }

  TEST_CASE("advantages") {
    TrajectoryBatch b;
    EpisodeRecord ep;
    ep.rewards = {1, 2, 3};
    ep.values = {0, 0, 0};
    b.episodes.push_back(ep);
    process_batch(b, 1.0, false);
    CHECK(b.advantages[0] == std::vector<double>{6, 5, 3});

    b.episodes[0].values = {6, 5, 3};
    process_batch(b, 1.0, false);
    CHECK(b.advantages[0] == std::vector<double>{0, 0, 0});

    std::vector<std::vector<double>> adv{{1, 5, -2}, {0.5, 9}, {3}};
    normalize_advantages(adv);
    double s = 0, s2 = 0, n = 0;
    for (const auto& e : adv)
      for (double a : e) s += a, s2 += a * a, n += 1;
    CHECK(std::abs(s / n) <= 1e-10);
    CHECK(std::abs(s2 / n - (s / n) * (s / n) - 1.0) <= 1e-6);
  }

  TEST_CASE("value loss") {
    CHECK(value_loss({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(value_loss({0, 0, 0, 0}, {2, 2, 2, 2}) == 4.0);
  }

  TEST_CASE("probability ratio and clipping") {
    CHECK(prob_ratio(-1.3, -1.3) == 1.0);
    CHECK(prob_ratio(std::log(2.0), 0.0) == doctest::Approx(2.0));
    CHECK(prob_ratio(-50, 40) > 0.0);
    CHECK(clipped_objective({1.5}, {2.0}, 0.2) == doctest::Approx(2.4));
    CHECK(clipped_objective({0.5}, {-1.0}, 0.2) == doctest::Approx(-0.8));
    CHECK(clipped_objective({1.1}, {3.0}, 0.2) == doctest::Approx(3.3));
    // never above the unclipped surrogate
    Rng rng(2);
    for (int k = 0; k < 1000; ++k) {
      const double ratio = std::exp(rng.uniform(-1, 1)), a = rng.uniform(-3, 3);
      CHECK(clipped_objective({ratio}, {a}, 0.2) <= ratio * a + 1e-15);
    }
  }

  TEST_CASE("clip adaptation") {
    PpoConfig cfg;
    ClipAdaptation c = adapt_clip(cfg.kl_target, 0.2, cfg);
    CHECK(c.clip == 0.2);
    CHECK_FALSE(c.stop);
    c = adapt_clip(10 * cfg.kl_target, 0.2, cfg);
    CHECK(c.clip == doctest::Approx(0.2 / 1.5));
    CHECK(c.stop);
    double clip = 0.2;
    for (int k = 0; k < 10; ++k) clip = adapt_clip(0.0, clip, cfg).clip;
    CHECK(clip == 0.5);
    for (int k = 0; k < 20; ++k) clip = adapt_clip(1.0, clip, cfg).clip;
    CHECK(clip == 0.01);
  }

  TEST_CASE("rollouts") {
    const Agent agent = toy_agent(Layer2::gru, 20, 3);
    const TrajectoryBatch a = collect_rollouts(agent, toy_factory(), 30, 9, 0);
    REQUIRE(a.episodes.size() == 30);
    for (const auto& ep : a.episodes) CHECK(ep.length() == toy::DoubleIntegrator::kHorizon);
    const TrajectoryBatch b = collect_rollouts(agent, toy_factory(), 30, 9, 0, 3);
    for (std::size_t e = 0; e < 30; ++e) {
      CHECK(a.episodes[e].rewards == b.episodes[e].rewards);
      CHECK(a.episodes[e].logp == b.episodes[e].logp);
    }
    CHECK_THROWS_AS(collect_rollouts(agent, toy_factory(), 0, 9, 0), ConfigError);
  }

  TEST_CASE("segment replay") {
    const Agent agent = toy_agent(Layer2::gru, 7, 4);
    const TrajectoryBatch batch = collect_rollouts(agent, toy_factory(), 4, 10, 0);
    double worst_logp = 0.0, worst_value = 0.0;
    for (const auto& ep : batch.episodes) {
      for (std::size_t s = 0; s < ep.length(); s += 7) {
        std::vector<MatX> xs;
        for (std::size_t t = s; t < std::min(s + 7, ep.length()); ++t) xs.push_back(ep.obs[t]);
        const std::vector<MatX> mu = agent.policy.forward_batch(xs, ep.h_policy[s], nullptr);
        const std::vector<MatX> v = agent.value.forward_batch(xs, ep.h_value[s], nullptr);
        for (std::size_t t = 0; t < xs.size(); ++t) {
          const double lp = gaussian_logp(mu[t].col(0), agent.log_std, ep.actions[s + t]);
          worst_logp = std::max(worst_logp, std::abs(lp - ep.logp[s + t]));
          worst_value = std::max(worst_value, std::abs(agent.value_of(v[t](0, 0)) - ep.values[s + t]));
          CHECK(std::abs(prob_ratio(lp, ep.logp[s + t]) - 1.0) <= 1e-10);
        }
      }
    }
    CHECK(worst_logp <= 1e-10);
    CHECK(worst_value <= 1e-10);
  }

  TEST_CASE("update on a two-action bandit") {
    PpoConfig cfg;
    cfg.epochs = 5;
    cfg.minibatches = 2;
    for (double sign : {1.0, -1.0}) {
      Agent agent = toy_agent(Layer2::dense, 1, 5);
      Optimizers opt{Adam(agent.policy.num_params() + 1, 1e-3), Adam(agent.value.num_params(), 1e-3)};
      const TrajectoryBatch b = bandit_batch(agent, sign);
      VecX h;
      const double before = agent.policy.forward(VecX::Ones(2), VecX(), &h)[0];
      double clip = 0.5;
      Rng rng(1);
      const UpdateDiagnostics d = update(b, agent, opt, clip, cfg, rng);
      const double after = agent.policy.forward(VecX::Ones(2), VecX(), &h)[0];
      CHECK(sign * (after - before) > 0.0);
      CHECK(d.kl >= 0.0);
    }
  }

  TEST_CASE("zero advantages leave the policy unchanged") {
    PpoConfig cfg;
    Agent agent = toy_agent(Layer2::gru, 5, 6);
    Optimizers opt{Adam(agent.policy.num_params() + 1, 3e-4), Adam(agent.value.num_params(), 1e-3)};
    TrajectoryBatch b = collect_rollouts(agent, toy_factory(), 6, 11, 0);
    process_batch(b, cfg.gamma, false);
    for (auto& e : b.advantages) std::fill(e.begin(), e.end(), 0.0);
    const VecX theta = agent.policy.params();
    const VecX ls = agent.log_std;
    const VecX w = agent.value.params();
    double clip = 0.2;
    Rng rng(2);
    update(b, agent, opt, clip, cfg, rng);
    CHECK(agent.policy.params() == theta);
    CHECK(agent.log_std == ls);
    CHECK(agent.value.params() != w);
  }

  TEST_CASE("value regression reduces the loss") {
    PpoConfig cfg;
    cfg.epochs = 1;
    cfg.gamma = 0.9;  // short horizon: returns are close to a function of the observed state
    Agent agent = toy_agent(Layer2::gru, 5, 7);
    Optimizers opt{Adam(agent.policy.num_params() + 1, 3e-4), Adam(agent.value.num_params(), 1e-3)};
    TrajectoryBatch b = collect_rollouts(agent, toy_factory(), 6, 12, 0);
    process_batch(b, cfg.gamma, false);
    for (auto& e : b.advantages) std::fill(e.begin(), e.end(), 0.0);
    // affine head fixed from the batch returns, as the trainer's warm-up does
    std::vector<double> all;
    for (const auto& r : b.returns) all.insert(all.end(), r.begin(), r.end());
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    double var = 0.0;
    for (double r : all) var += (r - mean) * (r - mean) / static_cast<double>(all.size());
    agent.value_offset = mean;
    agent.value_scale = std::sqrt(var);
    auto loss = [&] {
      double l = 0.0;
      std::size_t n = 0;
      for (std::size_t e = 0; e < b.episodes.size(); ++e) {
        const auto& ep = b.episodes[e];
        const std::vector<MatX> xs(ep.obs.begin(), ep.obs.end());
        const std::vector<MatX> v = agent.value.forward_batch(xs, ep.h_value[0], nullptr);
        for (std::size_t k = 0; k < ep.length(); ++k, ++n) l += std::pow(agent.value_of(v[k](0, 0)) - b.returns[e][k], 2);
      }
      return l / static_cast<double>(n);
    };
    const double l0 = loss();
    double clip = 0.2;
    for (int k = 0; k < 100; ++k) {
      Rng rng(static_cast<std::uint64_t>(k));
      update(b, agent, opt, clip, cfg, rng);
    }
    CHECK(loss() < 0.5 * l0);
  }

  TEST_CASE("observation normalizer") {
    ObsNormalizer n(2);
    Rng rng(3);
    std::vector<double> xs;
    for (int k = 0; k < 1000; ++k) {
      VecX x(2);
      x << rng.uniform(0, 10), 5.0;
      xs.push_back(x[0]);
      n.update(x);
    }
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / 1000.0;
    CHECK(n.mean[0] == doctest::Approx(mean));
    VecX far(2);
    far << 1e9, 5.0;
    CHECK(n.apply(far)[0] == 10.0);
    CHECK(std::isfinite(n.apply(far)[1]));
  }

  TEST_CASE("trainer solves the double integrator") {
    PpoConfig cfg;
    cfg.iterations = 200;
    cfg.unroll = 10;
    TrainState st = initial_train_state(cfg, 2, 1, Layer2::dense);
    std::size_t rows = 0;
    double best = 1e9;
    std::size_t last_iteration = 0;
    train(cfg, toy_factory(), st, [&](const IterationLog& g, const TrainState&) {
      ++rows;
      CHECK(g.iteration == rows);
      last_iteration = g.iteration;
      best = std::min(best, g.r_mean);
      return g.r_mean >= 0.1;
    });
    CHECK(best < 0.1);
    CHECK(last_iteration <= 200);

    // resuming continues the counter
    PpoConfig more = cfg;
    more.iterations = 2;
    std::vector<std::size_t> seen;
    train(more, toy_factory(), st, [&](const IterationLog& g, const TrainState&) {
      seen.push_back(g.iteration);
      return true;
    });
    CHECK(seen == std::vector<std::size_t>{last_iteration + 1, last_iteration + 2});
  }

  TEST_CASE("learning curve rows") {
    IterationLog g;
    g.iteration = 3;
    g.episodes = 120;
    const std::string header = learning_curve_header();
    const std::string row = learning_curve_row(g);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(row.rfind("3,120,", 0) == 0);
  }
}
