#include "irlad/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace irlad {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

struct Batch {
  std::vector<State> states;
  std::vector<Action> actions;
  std::vector<double> advantages;
};

Batch flatten_rollouts(const std::vector<RolloutRecord>& rollouts, const Advantages& adv) {
  Batch b;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const auto& obs = rollouts[i].trajectory.observations;
    for (std::size_t t = 0; t < obs.size(); ++t) {
      b.states.push_back(obs[t].state);
      b.actions.push_back(obs[t].action);
      b.advantages.push_back(adv.per_rollout[i][static_cast<Eigen::Index>(t)]);
    }
  }
  return b;
}

// Mean outputs in action units, 2 x n.
Eigen::MatrixXd batch_means(const GaussianPolicy& p, const Eigen::MatrixXd& features) {
  Eigen::MatrixXd u = nn::forward_batch(p.mean_net, features, 0);
  for (std::size_t i = 0; i < kActionDim; ++i) u.row(static_cast<Eigen::Index>(i)) *= p.action_scale[i];
  return u;
}

double batch_mean_kl(const Eigen::MatrixXd& mu_old, const Action& sd_old, const Eigen::MatrixXd& mu_new,
                     const Action& sd_new) {
  if (mu_old.cols() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double so2 = sd_old[i] * sd_old[i], sn2 = sd_new[i] * sd_new[i];
    const double diff2 = (mu_old.row(row) - mu_new.row(row)).squaredNorm();
    total += static_cast<double>(mu_old.cols()) * (std::log(sd_new[i] / sd_old[i]) + so2 / (2.0 * sn2) - 0.5) +
             diff2 / (2.0 * sn2);
  }
  return total / static_cast<double>(mu_old.cols());
}

void blend(GaussianPolicy& target, const GaussianPolicy& from, const GaussianPolicy& to, double alpha) {
  Eigen::VectorXd a = from.mean_net.flatten(), b = to.mean_net.flatten();
  target.mean_net.unflatten(a + alpha * (b - a));
  for (std::size_t i = 0; i < kActionDim; ++i)
    target.log_std[i] = from.log_std[i] + alpha * (to.log_std[i] - from.log_std[i]);
}

}  // namespace

PolicyUpdateConfig PolicyUpdateConfig::from(const TrainConfig& cfg) {
  PolicyUpdateConfig p;
  p.discount = cfg.discount;
  p.kl_coeff = cfg.kl_coeff;
  p.max_kl = cfg.max_kl;
  p.learning_rate = cfg.policy_learning_rate;
  p.substeps = cfg.policy_substeps;
  return p;
}

Advantages compute_advantages(const std::vector<RolloutRecord>& rollouts,
                              const BootstrapRewardModel& reward, int head, double discount) {
  if (rollouts.empty()) throw std::invalid_argument("policy update needs rollouts");
  Advantages out;
  double sum = 0.0, returns = 0.0;
  std::size_t count = 0;
  for (const auto& r : rollouts) {
    const Eigen::VectorXd rew = step_rewards(reward, r.trajectory, head);
    Eigen::VectorXd togo(rew.size());
    double acc = 0.0;
    for (Eigen::Index t = rew.size(); t-- > 0;) {
      acc = rew[t] + discount * acc;
      togo[t] = acc;
    }
    sum += togo.sum();
    returns += rew.sum();
    count += static_cast<std::size_t>(togo.size());
    out.per_rollout.push_back(std::move(togo));
  }
  const double baseline = sum / static_cast<double>(count);
  for (auto& a : out.per_rollout) {
    a.array() -= baseline;
    if (!a.allFinite()) throw NumericError("policy update: non-finite advantage, update rejected");
  }
  out.mean_return = returns / static_cast<double>(rollouts.size());
  return out;
}

GaussianPolicy GaussianPolicy::initialize(std::uint64_t seed, double sigma2,
                                          const std::vector<int>& trunk_widths) {
  GaussianPolicy p;
  p.mean_net = nn::init_params(seed, sigma2,
                               nn::MlpShape{static_cast<int>(kStateDim), trunk_widths,
                                            static_cast<int>(kActionDim), 1});
  p.mean_net.heads[0].weight.setZero();
  p.mean_net.heads[0].bias.setZero();
  return p;
}

Eigen::MatrixXd GaussianPolicy::state_features(const std::vector<State>& states) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kStateDim), static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j)
    for (std::size_t i = 0; i < kStateDim; ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (states[j][i] - state_offset[i]) / state_scale[i];
  return x;
}

Action GaussianPolicy::mean(const State& s) const {
  const Eigen::MatrixXd m = batch_means(*this, state_features({s}));
  return Action{m(0, 0), m(1, 0)};
}

Action GaussianPolicy::stddev() const {
  return Action{action_scale[0] * std::exp(log_std[0]), action_scale[1] * std::exp(log_std[1])};
}

double gaussian_log_pdf(const Action& x, const Action& mean, const Action& stddev) {
  double lp = 0.0;
  for (std::size_t i = 0; i < kActionDim; ++i) {
    const double z = (x[i] - mean[i]) / stddev[i];
    lp += -0.5 * z * z - std::log(stddev[i]) - kHalfLog2Pi;
  }
  return lp;
}

double GaussianPolicy::log_density(const State& s, const Action& a) const {
  return gaussian_log_pdf(a, mean(s), stddev());
}

void GaussianPolicy::clamp_log_std() {
  for (auto& v : log_std) v = std::clamp(v, kMinLogStd, kMaxLogStd);
}

bool GaussianPolicy::operator==(const GaussianPolicy& o) const {
  return mean_net.shape == o.mean_net.shape && mean_net.flatten() == o.mean_net.flatten() &&
         log_std == o.log_std && state_offset == o.state_offset && state_scale == o.state_scale &&
         action_scale == o.action_scale;
}

std::pair<Action, double> act(const GaussianPolicy& policy, const State& state, Rng& rng) {
  const Action mu = policy.mean(state);
  const Action sd = policy.stddev();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Action a{};
  for (std::size_t i = 0; i < kActionDim; ++i) a[i] = mu[i] + sd[i] * gauss(rng);
  return {a, gaussian_log_pdf(a, mu, sd)};
}

KinematicEnv KinematicEnv::from_demonstrations(const TrajectorySet& demos, double dt) {
  KinematicEnv env;
  env.dt = dt;
  for (const auto& t : demos.trajectories) {
    if (t.empty()) continue;
    env.initial_states.push_back(t.observations.front().state);
    env.horizons.push_back(t.size());
  }
  env.validate();
  return env;
}

void KinematicEnv::validate() const {
  if (!(dt > 0.0)) throw ConfigError("KinematicEnv: dt must be positive");
  if (initial_states.empty() || horizons.empty())
    throw std::invalid_argument("KinematicEnv: empty initial-state or horizon sampler");
}

State step(const KinematicEnv& env, const State& state, const Action& action) {
  State next = state;
  next[0] += action[0] * env.dt;
  next[1] += action[1] * env.dt;
  next[4] += env.dt;
  return next;
}

RolloutRecord rollout(const GaussianPolicy& policy, const KinematicEnv& env, Rng& rng) {
  env.validate();
  const auto& s0 = env.initial_states[std::uniform_int_distribution<std::size_t>(
      0, env.initial_states.size() - 1)(rng)];
  const std::size_t horizon =
      env.horizons[std::uniform_int_distribution<std::size_t>(0, env.horizons.size() - 1)(rng)];
  RolloutRecord rec;
  rec.trajectory.source = Source::Generated;
  rec.trajectory.agent_id = "sampler";
  State s = make_state(s0[0], s0[1], s0[0], s0[1], 0.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    auto [a, lp] = act(policy, s, rng);
    rec.trajectory.observations.push_back(StateAction{s, a});
    rec.step_log_density.push_back(lp);
    rec.log_density += lp;
    s = step(env, s, a);
  }
  return rec;
}

double mean_kl(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy,
               const std::vector<State>& states) {
  return batch_mean_kl(batch_means(old_policy, old_policy.state_features(states)), old_policy.stddev(),
                       batch_means(new_policy, new_policy.state_features(states)), new_policy.stddev());
}

PolicyUpdateReport policy_update(GaussianPolicy& policy, const std::vector<RolloutRecord>& rollouts,
                                 const BootstrapRewardModel& reward, int head,
                                 const PolicyUpdateConfig& cfg) {
  const Advantages adv = compute_advantages(rollouts, reward, head, cfg.discount);
  const Batch batch = flatten_rollouts(rollouts, adv);
  const auto n = static_cast<Eigen::Index>(batch.states.size());
  PolicyUpdateReport report;
  report.mean_return = adv.mean_return;
  if (n == 0) return report;

  const GaussianPolicy old = policy;
  const Eigen::MatrixXd features = policy.state_features(batch.states);
  const Eigen::MatrixXd mu_old = batch_means(old, features);
  const Action sd_old = old.stddev();
  Eigen::MatrixXd actions(static_cast<Eigen::Index>(kActionDim), n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (std::size_t i = 0; i < kActionDim; ++i)
      actions(static_cast<Eigen::Index>(i), j) = batch.actions[static_cast<std::size_t>(j)][i];
  const Eigen::Map<const Eigen::VectorXd> advantages(batch.advantages.data(), n);

  nn::AdamState opt(policy.mean_net, cfg.learning_rate);
  std::array<double, kActionDim> m{}, v{};
  const double inv_n = 1.0 / static_cast<double>(n);

  for (int sub = 1; sub <= cfg.substeps; ++sub) {
    const Eigen::MatrixXd mu = batch_means(policy, features);
    const Action sd = policy.stddev();
    Eigen::MatrixXd upstream(static_cast<Eigen::Index>(kActionDim), n);
    std::array<double, kActionDim> g_log_std{};
    for (std::size_t i = 0; i < kActionDim; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double sn2 = sd[i] * sd[i], so2 = sd_old[i] * sd_old[i];
      const Eigen::ArrayXd resid = (actions.row(row) - mu.row(row)).transpose().array();
      const Eigen::ArrayXd drift = (mu.row(row) - mu_old.row(row)).transpose().array();
      upstream.row(row) = (policy.action_scale[i] * inv_n *
                           (advantages.array() * resid / sn2 - cfg.kl_coeff * drift / sn2))
                              .matrix()
                              .transpose();
      g_log_std[i] = inv_n * ((advantages.array() * (resid.square() / sn2 - 1.0)).sum() -
                              cfg.kl_coeff * (1.0 - (so2 + drift.square()) / sn2).sum());
    }
    nn::GradBuffer grads(policy.mean_net);
    nn::backward_batch(policy.mean_net, features, 0, upstream, grads);
    nn::adam_step(policy.mean_net, grads, opt);
    for (std::size_t i = 0; i < kActionDim; ++i) {
      const double g = g_log_std[i];
      if (!std::isfinite(g)) throw NumericError("policy update: non-finite log-std gradient");
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      const double mh = m[i] / (1.0 - std::pow(opt.beta1, sub));
      const double vh = v[i] / (1.0 - std::pow(opt.beta2, sub));
      policy.log_std[i] += cfg.learning_rate * mh / (std::sqrt(vh) + opt.epsilon);
    }
    policy.clamp_log_std();
  }

  const GaussianPolicy proposed = policy;
  double kl = batch_mean_kl(mu_old, sd_old, batch_means(policy, features), policy.stddev());
  double alpha = 1.0;
  while (kl > cfg.max_kl && report.backtracks < cfg.max_backtracks) {
    alpha *= 0.5;
    ++report.backtracks;
    blend(policy, old, proposed, alpha);
    kl = batch_mean_kl(mu_old, sd_old, batch_means(policy, features), policy.stddev());
  }
  if (kl > cfg.max_kl) {
    policy = old;
    kl = 0.0;
  }
  report.mean_kl = kl;
  return report;
}

GaussianSampler::GaussianSampler(GaussianPolicy policy, KinematicEnv env, PolicyUpdateConfig cfg)
    : policy_(std::move(policy)), env_(std::move(env)), cfg_(cfg) {
  env_.validate();
}

RolloutRecord GaussianSampler::rollout(Rng& rng) const { return irlad::rollout(policy_, env_, rng); }

double GaussianSampler::log_density(const Trajectory& traj) const {
  if (traj.empty()) return 0.0;
  std::vector<State> states;
  states.reserve(traj.size());
  for (const auto& o : traj.observations) states.push_back(o.state);
  const Eigen::MatrixXd mu = batch_means(policy_, policy_.state_features(states));
  const Action sd = policy_.stddev();
  double total = 0.0;
  for (std::size_t j = 0; j < traj.size(); ++j)
    total += gaussian_log_pdf(traj.observations[j].action,
                              Action{mu(0, static_cast<Eigen::Index>(j)), mu(1, static_cast<Eigen::Index>(j))}, sd);
  return total;
}

PolicyUpdateReport GaussianSampler::update(const std::vector<RolloutRecord>& rollouts,
                                           const BootstrapRewardModel& reward, int head, Rng&) {
  return policy_update(policy_, rollouts, reward, head, cfg_);
}

}  // namespace irlad
