#pragma once

#include "metaland/controller.hpp"
#include "metaland/environments.hpp"
#include "metaland/neuralnet.hpp"
#include "metaland/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace metaland {

struct PpoConfig {
  double gamma = 0.995;
  double clip = 0.2;  // initial value; adapted towards kl_target
  double clip_min = 0.01;
  double clip_max = 0.5;
  double kl_target = 0.001;
  std::size_t episodes_per_batch = 30;
  std::size_t epochs = 20;
  std::size_t minibatches = 4;
  std::size_t unroll = 20;  // steps per truncated segment; recurrent policies only
  double lr_policy = 3e-4;
  double lr_value = 1e-3;
  double log_std_init = -0.7;
  std::size_t iterations = 100;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t max_episode_steps = 100000;
};

/// Running mean / variance (Welford); normalized inputs are clipped to +-clip.
struct ObsNormalizer {
  VecX mean;
  VecX m2;
  double count = 0.0;
  double clip = 10.0;

  explicit ObsNormalizer(std::size_t dim = 0)
      : mean(VecX::Zero(static_cast<Eigen::Index>(dim))), m2(VecX::Zero(static_cast<Eigen::Index>(dim))) {}
  void update(const VecX& x);
  VecX variance() const;
  VecX apply(const VecX& x) const;
};

/// Policy net + state-independent log-std + value net + input normalization.
/// The value estimate is value_offset + value_scale * value-net output; both are
/// fixed from the warm-up batch returns so the net regresses unit-scale targets.
struct Agent {
  Network policy;
  VecX log_std;
  Network value;
  ObsNormalizer norm;
  std::size_t unroll = 1;
  double value_offset = 0.0;
  double value_scale = 1.0;

  static Agent create(std::size_t obs_dim, std::size_t act_dim, Layer2 layer2, std::size_t unroll, Rng& rng,
                      double log_std_init = -0.7);
  std::size_t obs_dim() const { return policy.input_dim(); }
  std::size_t act_dim() const { return policy.output_dim(); }
  bool recurrent() const { return policy.recurrent(); }
  double value_of(double net_output) const { return value_offset + value_scale * net_output; }
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::vector<VecX> obs;  // normalized network inputs
  std::vector<VecX> actions;
  std::vector<double> rewards;
  std::vector<double> logp;
  std::vector<double> values;
  std::vector<VecX> h_policy;  // carried state before each step
  std::vector<VecX> h_value;
  std::vector<VecX> raw_obs;
  double terminal_r = 0.0;
  double terminal_v = 0.0;
  double fuel = 0.0;
  bool success = false;
  std::size_t length() const { return rewards.size(); }
};

struct TrajectoryBatch {
  std::vector<EpisodeRecord> episodes;
  std::vector<std::vector<double>> returns;
  std::vector<std::vector<double>> advantages;
  std::size_t discarded = 0;
  std::size_t num_samples() const;
};

/// R_k = sum_{l >= k} gamma^(l-k) r_l.
std::vector<double> discounted_return(const std::vector<double>& rewards, double gamma);
/// Zero mean, unit variance over every sample of the batch.
void normalize_advantages(std::vector<std::vector<double>>& adv);
/// Fills returns and advantages (R - V from the stored value estimates).
void process_batch(TrajectoryBatch& batch, double gamma, bool normalize = true);
/// Mean squared error between value estimates and returns.
double value_loss(const std::vector<double>& values, const std::vector<double>& returns);
double prob_ratio(double logp_new, double logp_old);
/// Mean of min(ratio A, clip(ratio, 1-eps, 1+eps) A).
double clipped_objective(const std::vector<double>& ratio, const std::vector<double>& adv, double eps);

struct ClipAdaptation {
  double clip = 0.0;
  bool stop = false;  // end the epoch loop
};
ClipAdaptation adapt_clip(double kl, double clip, const PpoConfig& cfg);

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// Runs n episodes under the stochastic policy; episode i is seeded from (base_seed, first_index + i).
TrajectoryBatch collect_rollouts(const Agent& agent, const EnvFactory& factory, std::size_t n_episodes,
                                 std::uint64_t base_seed, std::uint64_t first_index, std::size_t workers = 1,
                                 std::size_t max_steps = 100000);

struct Optimizers {
  Adam policy;  // over [policy params, log_std]
  Adam value;
};

struct UpdateDiagnostics {
  double kl = 0.0;
  double clip = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double explained_variance = 0.0;
  std::size_t epochs_run = 0;
  std::size_t skipped_steps = 0;
};

/// Epochs of clipped-surrogate ascent and value regression over T-step segments.
UpdateDiagnostics update(const TrajectoryBatch& batch, Agent& agent, Optimizers& opt, double& clip,
                         const PpoConfig& cfg, Rng& rng);

struct IterationLog {
  std::size_t iteration = 0;
  std::size_t episodes = 0;
  double r_mean = 0, r_std = 0, r_max = 0;
  double v_mean = 0, v_std = 0, v_max = 0;
  double kl = 0, clip = 0, value_loss = 0, fuel_mean = 0;
  double success_rate = 0, return_mean = 0;
};

std::string learning_curve_header();
std::string learning_curve_row(const IterationLog& log);

struct TrainState {
  Agent agent;
  Optimizers opt;
  double clip = 0.2;
  std::size_t iteration = 0;
  std::size_t episodes = 0;
};

TrainState initial_train_state(const PpoConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Layer2 layer2);

using IterationCallback = std::function<bool(const IterationLog&, const TrainState&)>;

/// Runs cfg.iterations further iterations from `state`; the callback may return false to stop early.
void train(const PpoConfig& cfg, const EnvFactory& factory, TrainState& state, const IterationCallback& on_iteration);

/// Deterministic (mean-action) controller around a trained agent.
class PolicyController final : public Controller {
 public:
  explicit PolicyController(std::shared_ptr<const Agent> agent) : agent_(std::move(agent)) {}
  std::string name() const override { return agent_->recurrent() ? "meta-rl" : "rl"; }
  void reset(const Environment& env) override;
  VecX act(const VecX& observation, const Environment& env) override;
  std::unique_ptr<Controller> clone() const override { return std::make_unique<PolicyController>(agent_); }

 private:
  std::shared_ptr<const Agent> agent_;
  VecX h_;
};

}  // namespace metaland
