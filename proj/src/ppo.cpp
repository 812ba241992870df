#include "metaland/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

namespace metaland {

namespace {

constexpr std::uint64_t kActionStream = 0xa5a5'0001ULL;
constexpr std::uint64_t kRetryStream = 0xa5a5'0002ULL;
constexpr std::uint64_t kUpdateStream = 0xa5a5'0003ULL;
constexpr std::uint64_t kInitStream = 0xa5a5'0004ULL;
constexpr int kMaxAttempts = 8;

EpisodeRecord run_episode(const Agent& agent, Environment& env, std::uint64_t seed, std::size_t max_steps) {
  EpisodeRecord rec;
  rec.seed = seed;
  env.seed(seed);
  VecX raw = env.reset();
  Rng rng(derive_seed(seed, kActionStream));
  const auto hp_dim = static_cast<Eigen::Index>(agent.policy.hidden_dim());
  const auto hv_dim = static_cast<Eigen::Index>(agent.value.hidden_dim());
  VecX h_pol = VecX::Zero(hp_dim);
  VecX h_val = VecX::Zero(hv_dim);
  const double initial_mass = env.state().mass;

  for (std::size_t k = 0; k < max_steps; ++k) {
    const VecX x = agent.norm.apply(raw);
    VecX hp_next, hv_next;
    const VecX mean = agent.policy.forward(x, h_pol, &hp_next);
    const double value = agent.value_of(agent.value.forward(x, h_val, &hv_next)[0]);
    const VecX action = sample_action(mean, agent.log_std, rng);

    rec.raw_obs.push_back(raw);
    rec.obs.push_back(x);
    rec.h_policy.push_back(h_pol);
    rec.h_value.push_back(h_val);
    rec.actions.push_back(action);
    rec.logp.push_back(gaussian_logp(mean, agent.log_std, action));
    rec.values.push_back(value);

    const StepResult res = env.step(action);
    rec.rewards.push_back(res.reward);
    raw = res.observation;
    h_pol = std::move(hp_next);
    h_val = std::move(hv_next);
    rec.terminal_r = res.info.state.r.norm();
    rec.terminal_v = res.info.state.v.norm();
    rec.fuel = initial_mass - res.info.state.mass;
    rec.success = res.info.success;
    if (res.done) break;
  }
  return rec;
}

// Environment faults discard the episode and retry under a derived seed.
EpisodeRecord run_episode_with_retry(const Agent& agent, Environment& env, std::uint64_t seed, std::size_t max_steps,
                                     std::size_t& discarded) {
  std::uint64_t s = seed;
  for (int attempt = 0;; ++attempt) {
    try {
      return run_episode(agent, env, s, max_steps);
    } catch (const NumericFault& e) {
      if (attempt + 1 >= kMaxAttempts) throw;
      std::fprintf(stderr, "episode %llu discarded: %s\n", static_cast<unsigned long long>(s), e.what());
    } catch (const std::domain_error& e) {
      if (attempt + 1 >= kMaxAttempts) throw;
      std::fprintf(stderr, "episode %llu discarded: %s\n", static_cast<unsigned long long>(s), e.what());
    }
    ++discarded;
    s = derive_seed(seed ^ kRetryStream, static_cast<std::uint64_t>(attempt));
  }
}

double mean_of(const std::vector<double>& x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double pop_std(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double m = mean_of(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

struct Segment {
  std::size_t ep, start, len;
};

}  // namespace

// ---------------------------------------------------------------------------

void ObsNormalizer::update(const VecX& x) {
  if (mean.size() != x.size()) {
    mean = VecX::Zero(x.size());
    m2 = VecX::Zero(x.size());
    count = 0.0;
  }
  count += 1.0;
  const VecX delta = x - mean;
  mean += delta / count;
  m2 += delta.cwiseProduct(x - mean);
}

VecX ObsNormalizer::variance() const {
  if (count < 2.0) return VecX::Ones(mean.size());
  return m2 / count;
}

VecX ObsNormalizer::apply(const VecX& x) const {
  if (mean.size() != x.size()) throw ConfigError("ObsNormalizer: dimension mismatch");
  const VecX sd = (variance().array() + 1e-8).sqrt().matrix();
  return ((x - mean).array() / sd.array()).cwiseMax(-clip).cwiseMin(clip).matrix();
}

Agent Agent::create(std::size_t obs_dim, std::size_t act_dim, Layer2 layer2, std::size_t unroll, Rng& rng,
                    double log_std_init) {
  Agent a;
  a.policy = Network(obs_dim, layer_sizes(obs_dim, act_dim, NetKind::policy), layer2);
  a.value = Network(obs_dim, layer_sizes(obs_dim, act_dim, NetKind::value), layer2);
  a.policy.init(rng, 0.01);
  a.value.init(rng, 1.0);
  a.log_std = VecX::Constant(static_cast<Eigen::Index>(act_dim), log_std_init);
  a.norm = ObsNormalizer(obs_dim);
  a.unroll = layer2 == Layer2::gru ? std::max<std::size_t>(unroll, 1) : 1;
  return a;
}

std::size_t TrajectoryBatch::num_samples() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.length();
  return n;
}

std::vector<double> discounted_return(const std::vector<double>& rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

void normalize_advantages(std::vector<std::vector<double>>& adv) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : adv)
    for (double x : a) {
      sum += x;
      ++n;
    }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& a : adv)
    for (double x : a) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  for (auto& a : adv)
    for (double& x : a) x = sd > 1e-12 ? (x - mean) / sd : x - mean;
}

void process_batch(TrajectoryBatch& batch, double gamma, bool normalize) {
  batch.returns.clear();
  batch.advantages.clear();
  for (const auto& ep : batch.episodes) {
    std::vector<double> ret = discounted_return(ep.rewards, gamma);
    std::vector<double> adv(ret.size());
    for (std::size_t k = 0; k < ret.size(); ++k) adv[k] = ret[k] - ep.values[k];
    batch.returns.push_back(std::move(ret));
    batch.advantages.push_back(std::move(adv));
  }
  if (normalize) normalize_advantages(batch.advantages);
}

double value_loss(const std::vector<double>& values, const std::vector<double>& returns) {
  if (values.size() != returns.size()) throw ConfigError("value_loss: size mismatch");
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) acc += (values[k] - returns[k]) * (values[k] - returns[k]);
  return acc / static_cast<double>(values.size());
}

double prob_ratio(double logp_new, double logp_old) { return std::exp(logp_new - logp_old); }

double clipped_objective(const std::vector<double>& ratio, const std::vector<double>& adv, double eps) {
  if (ratio.size() != adv.size()) throw ConfigError("clipped_objective: size mismatch");
  if (ratio.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < ratio.size(); ++k) {
    acc += std::min(ratio[k] * adv[k], std::clamp(ratio[k], 1.0 - eps, 1.0 + eps) * adv[k]);
  }
  return acc / static_cast<double>(ratio.size());
}

ClipAdaptation adapt_clip(double kl, double clip, const PpoConfig& cfg) {
  ClipAdaptation out{clip, false};
  if (kl > 2.0 * cfg.kl_target) {
    out.clip = std::max(clip / 1.5, cfg.clip_min);
  } else if (kl < 0.5 * cfg.kl_target) {
    out.clip = std::min(clip * 1.5, cfg.clip_max);
  }
  out.stop = kl > 4.0 * cfg.kl_target;
  return out;
}

TrajectoryBatch collect_rollouts(const Agent& agent, const EnvFactory& factory, std::size_t n_episodes,
                                 std::uint64_t base_seed, std::uint64_t first_index, std::size_t workers,
                                 std::size_t max_steps) {
  if (n_episodes == 0) throw ConfigError("collect_rollouts: need at least one episode");
  TrajectoryBatch batch;
  batch.episodes.resize(n_episodes);
  workers = std::clamp<std::size_t>(workers, 1, n_episodes);
  std::vector<std::size_t> discarded(workers, 0);

  auto work = [&](std::size_t w) {
    std::unique_ptr<Environment> env = factory();
    for (std::size_t i = w; i < n_episodes; i += workers) {
      const std::uint64_t seed = derive_seed(base_seed, first_index + i);
      batch.episodes[i] = run_episode_with_retry(agent, *env, seed, max_steps, discarded[w]);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  batch.discarded = std::accumulate(discarded.begin(), discarded.end(), std::size_t{0});
  return batch;
}

UpdateDiagnostics update(const TrajectoryBatch& batch, Agent& agent, Optimizers& opt, double& clip,
                         const PpoConfig& cfg, Rng& rng) {
  if (batch.returns.size() != batch.episodes.size()) throw ConfigError("update: batch not processed");
  const std::size_t T = agent.recurrent() ? std::max<std::size_t>(agent.unroll, 1) : 1;
  const auto obs_dim = static_cast<Eigen::Index>(agent.obs_dim());
  const auto act_dim = static_cast<Eigen::Index>(agent.act_dim());
  const auto hp_dim = static_cast<Eigen::Index>(agent.policy.hidden_dim());
  const auto hv_dim = static_cast<Eigen::Index>(agent.value.hidden_dim());
  const Eigen::Index n_pol = static_cast<Eigen::Index>(agent.policy.num_params());

  std::vector<Segment> segments;
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const std::size_t len = batch.episodes[e].length();
    for (std::size_t s = 0; s < len; s += T) segments.push_back({e, s, std::min(T, len - s)});
  }
  const std::size_t n_samples = batch.num_samples();

  UpdateDiagnostics diag;
  {
    std::vector<double> values, returns, resid;
    for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
      for (std::size_t k = 0; k < batch.episodes[e].length(); ++k) {
        values.push_back(batch.episodes[e].values[k]);
        returns.push_back(batch.returns[e][k]);
        resid.push_back(returns.back() - values.back());
      }
    }
    const double var_r = pop_std(returns);
    diag.explained_variance = var_r > 0.0 ? 1.0 - std::pow(pop_std(resid) / var_r, 2) : 0.0;
    diag.value_loss = value_loss(values, returns);
  }

  const std::size_t n_mb = std::clamp<std::size_t>(cfg.minibatches, 1, segments.size());
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double kl_sum = 0.0, obj_sum = 0.0;
    for (std::size_t m = 0; m < n_mb; ++m) {
      const std::size_t lo = m * segments.size() / n_mb;
      const std::size_t hi = (m + 1) * segments.size() / n_mb;
      const auto B = static_cast<Eigen::Index>(hi - lo);
      std::size_t L = 0, N = 0;
      for (std::size_t q = lo; q < hi; ++q) {
        L = std::max(L, segments[order[q]].len);
        N += segments[order[q]].len;
      }
      std::vector<MatX> xs(L, MatX::Zero(obs_dim, B));
      MatX h0p(hp_dim, B), h0v(hv_dim, B);
      for (Eigen::Index b = 0; b < B; ++b) {
        const Segment& sg = segments[order[lo + static_cast<std::size_t>(b)]];
        const EpisodeRecord& ep = batch.episodes[sg.ep];
        if (hp_dim > 0) h0p.col(b) = ep.h_policy[sg.start];
        if (hv_dim > 0) h0v.col(b) = ep.h_value[sg.start];
        for (std::size_t t = 0; t < sg.len; ++t) xs[t].col(b) = ep.obs[sg.start + t];
      }
      Tape tape_p, tape_v;
      const std::vector<MatX> means = agent.policy.forward_batch(xs, h0p, &tape_p);
      const std::vector<MatX> vals = agent.value.forward_batch(xs, h0v, &tape_v);

      std::vector<MatX> dmu(L, MatX::Zero(act_dim, B));
      std::vector<MatX> dval(L, MatX::Zero(1, B));
      VecX g_logstd = VecX::Zero(act_dim);
      const double inv_n = 1.0 / static_cast<double>(N);
      for (Eigen::Index b = 0; b < B; ++b) {
        const Segment& sg = segments[order[lo + static_cast<std::size_t>(b)]];
        const EpisodeRecord& ep = batch.episodes[sg.ep];
        for (std::size_t t = 0; t < sg.len; ++t) {
          const std::size_t k = sg.start + t;
          const VecX mu = means[t].col(b);
          const VecX& a = ep.actions[k];
          const double logp_new = gaussian_logp(mu, agent.log_std, a);
          const double log_ratio = logp_new - ep.logp[k];
          const double ratio = std::exp(log_ratio);
          const double A = batch.advantages[sg.ep][k];
          const double s1 = ratio * A;
          const double s2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * A;
          obj_sum += std::min(s1, s2);
          kl_sum += (ratio - 1.0) - log_ratio;
          // d(-objective)/d(logp), zero where the clipped branch is selected
          const double g = s1 <= s2 ? -ratio * A * inv_n : 0.0;
          const LogpGrad lg = gaussian_logp_grad(mu, agent.log_std, a);
          dmu[t].col(b) = g * lg.d_mean;
          g_logstd += g * lg.d_log_std;
          const double resid = agent.value_of(vals[t](0, b)) - batch.returns[sg.ep][k];
          dval[t](0, b) = 2.0 * resid * agent.value_scale * inv_n;
        }
      }
      VecX grad_pol = VecX::Zero(n_pol + act_dim);
      VecX gp = VecX::Zero(n_pol);
      agent.policy.backward_batch(tape_p, dmu, gp);
      grad_pol << gp, g_logstd;
      VecX grad_val = VecX::Zero(static_cast<Eigen::Index>(agent.value.num_params()));
      agent.value.backward_batch(tape_v, dval, grad_val);

      if (grad_pol.allFinite()) {
        VecX theta(n_pol + act_dim);
        theta << agent.policy.params(), agent.log_std;
        opt.policy.step(theta, grad_pol);
        agent.policy.params() = theta.head(n_pol);
        agent.log_std = theta.tail(act_dim);
      } else {
        opt.policy.lr *= 0.5;
        ++diag.skipped_steps;
        std::fprintf(stderr, "non-finite policy gradient, step skipped, lr -> %g\n", opt.policy.lr);
      }
      if (grad_val.allFinite()) {
        opt.value.step(agent.value.params(), grad_val);
      } else {
        opt.value.lr *= 0.5;
        ++diag.skipped_steps;
        std::fprintf(stderr, "non-finite value gradient, step skipped, lr -> %g\n", opt.value.lr);
      }
    }
    diag.kl = kl_sum / static_cast<double>(n_samples);
    diag.policy_objective = obj_sum / static_cast<double>(n_samples);
    diag.epochs_run = epoch + 1;
    if (diag.kl > 4.0 * cfg.kl_target) break;
  }
  clip = adapt_clip(diag.kl, clip, cfg).clip;
  diag.clip = clip;
  return diag;
}

std::string learning_curve_header() {
  return "iteration,episodes,r_mean,r_std,r_max,v_mean,v_std,v_max,kl,clip,value_loss,fuel_mean,success_rate,"
         "return_mean";
}

std::string learning_curve_row(const IterationLog& g) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.4f,%.6g", g.iteration,
                g.episodes, g.r_mean, g.r_std, g.r_max, g.v_mean, g.v_std, g.v_max, g.kl, g.clip, g.value_loss,
                g.fuel_mean, g.success_rate, g.return_mean);
  return buf;
}

TrainState initial_train_state(const PpoConfig& cfg, std::size_t obs_dim, std::size_t act_dim, Layer2 layer2) {
  Rng rng(derive_seed(cfg.seed, kInitStream));
  TrainState st;
  st.agent = Agent::create(obs_dim, act_dim, layer2, cfg.unroll, rng, cfg.log_std_init);
  st.opt.policy = Adam(st.agent.policy.num_params() + act_dim, cfg.lr_policy);
  st.opt.value = Adam(st.agent.value.num_params(), cfg.lr_value);
  st.clip = cfg.clip;
  return st;
}

void train(const PpoConfig& cfg, const EnvFactory& factory, TrainState& state, const IterationCallback& on_iteration) {
  const std::size_t n = cfg.episodes_per_batch;
  if (state.agent.norm.count == 0.0) {
    // seed the input statistics from one batch of the untrained policy
    const TrajectoryBatch warm =
        collect_rollouts(state.agent, factory, n, cfg.seed, state.episodes, cfg.workers, cfg.max_episode_steps);
    std::vector<double> rets;
    for (const auto& ep : warm.episodes) {
      for (const auto& x : ep.raw_obs) state.agent.norm.update(x);
      const std::vector<double> r = discounted_return(ep.rewards, cfg.gamma);
      rets.insert(rets.end(), r.begin(), r.end());
    }
    state.agent.value_offset = mean_of(rets);
    state.agent.value_scale = std::max(pop_std(rets), 1e-6);
    state.episodes += n;
  }
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    TrajectoryBatch batch =
        collect_rollouts(state.agent, factory, n, cfg.seed, state.episodes, cfg.workers, cfg.max_episode_steps);
    process_batch(batch, cfg.gamma);
    Rng rng(derive_seed(cfg.seed ^ kUpdateStream, state.iteration));
    const UpdateDiagnostics diag = update(batch, state.agent, state.opt, state.clip, cfg, rng);
    for (const auto& ep : batch.episodes)
      for (const auto& x : ep.raw_obs) state.agent.norm.update(x);
    state.iteration += 1;
    state.episodes += n;

    IterationLog log;
    log.iteration = state.iteration;
    log.episodes = state.episodes;
    std::vector<double> rs, vs, fuel, ret;
    std::size_t wins = 0;
    for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
      const auto& ep = batch.episodes[e];
      rs.push_back(ep.terminal_r);
      vs.push_back(ep.terminal_v);
      fuel.push_back(ep.fuel);
      ret.push_back(ep.rewards.empty() ? 0.0 : std::accumulate(ep.rewards.begin(), ep.rewards.end(), 0.0));
      wins += ep.success ? 1 : 0;
    }
    log.r_mean = mean_of(rs);
    log.r_std = pop_std(rs);
    log.r_max = *std::max_element(rs.begin(), rs.end());
    log.v_mean = mean_of(vs);
    log.v_std = pop_std(vs);
    log.v_max = *std::max_element(vs.begin(), vs.end());
    log.kl = diag.kl;
    log.clip = diag.clip;
    log.value_loss = diag.value_loss;
    log.fuel_mean = mean_of(fuel);
    log.success_rate = static_cast<double>(wins) / static_cast<double>(n);
    log.return_mean = mean_of(ret);
    if (on_iteration && !on_iteration(log, state)) break;
  }
}

void PolicyController::reset(const Environment& /*env*/) {
  h_ = VecX::Zero(static_cast<Eigen::Index>(agent_->policy.hidden_dim()));
}

VecX PolicyController::act(const VecX& observation, const Environment& /*env*/) {
  VecX h_next;
  VecX mean = agent_->policy.forward(agent_->norm.apply(observation), h_, &h_next);
  h_ = std::move(h_next);
  return mean;
}

}  // namespace metaland
