#include "irlad/bench.hpp"

#include "irlad/data.hpp"
#include "irlad/eval.hpp"
#include "irlad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace irlad::bench {
namespace {

int draw(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Eigen::ArrayXd e = (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
    p.col(c) = (e / e.sum()).matrix();
  }
  return p;
}

double mean_categorical_kl(const Eigen::MatrixXd& p_old, const Eigen::MatrixXd& p_new) {
  if (p_old.cols() == 0) return 0.0;
  const Eigen::ArrayXXd terms = p_old.array() * (p_old.array().log() - p_new.array().log());
  return terms.sum() / static_cast<double>(p_old.cols());
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

TabularSampler::TabularSampler(oracle::DiscreteMdp mdp, PolicyUpdateConfig cfg)
    : mdp_(std::move(mdp)), cfg_(cfg) {
  mdp_.validate();
  if (!mdp_.grid) throw std::invalid_argument("TabularSampler needs a grid MDP");
  logits_ = nn::init_params(0, 1.0, nn::MlpShape{mdp_.num_states, {}, mdp_.num_actions, 1});
  logits_.set_zero();
}

Eigen::MatrixXd TabularSampler::one_hot(const std::vector<int>& states) const {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(mdp_.num_states, static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) x(states[j], static_cast<Eigen::Index>(j)) = 1.0;
  return x;
}

Eigen::MatrixXd TabularSampler::probabilities() const {
  return column_softmax(
             nn::forward_batch(logits_, Eigen::MatrixXd::Identity(mdp_.num_states, mdp_.num_states), 0))
      .transpose();
}

RolloutRecord TabularSampler::rollout(Rng& rng) const {
  const Eigen::MatrixXd pi = probabilities();
  oracle::Path path;
  RolloutRecord rec;
  int s = draw(mdp_.initial, rng);
  for (int t = 0; t < mdp_.horizon; ++t) {
    const int a = draw(pi.row(s).transpose(), rng);
    const double lp = std::log(pi(s, a));
    rec.step_log_density.push_back(lp);
    rec.log_density += lp;
    path.emplace_back(s, a);
    s = oracle::sample_next_state(mdp_, s, a, rng);
  }
  rec.trajectory = oracle::encode_path(mdp_, path, "sampler", "", Source::Generated);
  return rec;
}

double TabularSampler::log_density(const Trajectory& traj) const {
  const Eigen::MatrixXd pi = probabilities();
  double total = 0.0;
  for (const auto& [s, a] : oracle::decode_trajectory(mdp_, traj)) total += std::log(pi(s, a));
  return total;
}

PolicyUpdateReport TabularSampler::update(const std::vector<RolloutRecord>& rollouts,
                                          const BootstrapRewardModel& reward, int head, Rng&) {
  const Advantages adv = compute_advantages(rollouts, reward, head, cfg_.discount);
  std::vector<int> states, actions;
  std::vector<double> advantages;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const oracle::Path path = oracle::decode_trajectory(mdp_, rollouts[i].trajectory);
    for (std::size_t t = 0; t < path.size(); ++t) {
      states.push_back(path[t].first);
      actions.push_back(path[t].second);
      advantages.push_back(adv.per_rollout[i][static_cast<Eigen::Index>(t)]);
    }
  }
  PolicyUpdateReport report;
  report.mean_return = adv.mean_return;
  const auto n = static_cast<Eigen::Index>(states.size());
  if (n == 0) return report;

  const Eigen::MatrixXd x = one_hot(states);
  const nn::MlpParams old = logits_;
  const Eigen::MatrixXd p_old = column_softmax(nn::forward_batch(old, x, 0));
  const double inv_n = 1.0 / static_cast<double>(n);
  nn::AdamState opt(logits_, cfg_.learning_rate);
  for (int sub = 0; sub < cfg_.substeps; ++sub) {
    const Eigen::MatrixXd p = column_softmax(nn::forward_batch(logits_, x, 0));
    Eigen::MatrixXd upstream = -p;
    for (Eigen::Index j = 0; j < n; ++j) {
      upstream(actions[static_cast<std::size_t>(j)], j) += 1.0;
      upstream.col(j) *= advantages[static_cast<std::size_t>(j)];
    }
    upstream -= cfg_.kl_coeff * (p - p_old);
    upstream *= inv_n;
    nn::GradBuffer grads(logits_);
    nn::backward_batch(logits_, x, 0, upstream, grads);
    nn::adam_step(logits_, grads, opt);
  }

  const Eigen::VectorXd from = old.flatten(), to = logits_.flatten();
  double kl = mean_categorical_kl(p_old, column_softmax(nn::forward_batch(logits_, x, 0)));
  double alpha = 1.0;
  while (kl > cfg_.max_kl && report.backtracks < cfg_.max_backtracks) {
    alpha *= 0.5;
    ++report.backtracks;
    logits_.unflatten(from + alpha * (to - from));
    kl = mean_categorical_kl(p_old, column_softmax(nn::forward_batch(logits_, x, 0)));
  }
  if (kl > cfg_.max_kl) {
    logits_ = old;
    kl = 0.0;
  }
  report.mean_kl = kl;
  return report;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two equal-length samples");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
  const double denom = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  return denom > 0.0 ? xc.dot(yc) / denom : 0.0;
}

GradientCheck gradient_agreement(const oracle::DiscreteMdp& mdp, const oracle::RewardTable& reward,
                                 const std::vector<oracle::WeightedPath>& demos, std::size_t num_rollouts,
                                 Rng& rng, Corruption corruption) {
  if (num_rollouts < 2) throw std::invalid_argument("gradient_agreement: need at least two rollouts");
  GradientCheck out;
  out.exact = oracle::exact_gradient(mdp, reward, demos);
  const Eigen::MatrixXd empirical = oracle::empirical_counts(demos, mdp.num_states, mdp.num_actions);

  const oracle::SoftPolicyTable proposal = oracle::soft_value_iteration(mdp, reward, mdp.horizon);

  const auto n = static_cast<Eigen::Index>(num_rollouts);
  const Eigen::Index cells = static_cast<Eigen::Index>(mdp.num_states) * mdp.num_actions;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(cells, n);
  Eigen::VectorXd returns(n), log_q(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    int s = draw(mdp.initial, rng);
    double r = 0.0, lq = 0.0;
    for (int t = 0; t < mdp.horizon; ++t) {
      const Eigen::VectorXd pi = proposal.policy[static_cast<std::size_t>(t)].row(s).transpose();
      const int a = draw(pi, rng);
      lq += std::log(pi[a]);
      r += reward(s, a);
      counts(static_cast<Eigen::Index>(s) * mdp.num_actions + a, j) += 1.0;
      s = oracle::sample_next_state(mdp, s, a, rng);
    }
    returns[j] = r;
    log_q[j] = corruption == Corruption::IgnoreProposal ? 0.0 : lq;
  }
  const Eigen::VectorXd w = importance_weights(returns, log_q);
  const Eigen::VectorXd expected = counts * w;
  const Eigen::MatrixXd centered = counts.colwise() - expected;
  const Eigen::VectorXd se = (centered.array().square().rowwise() * w.array().square().transpose())
                                 .rowwise()
                                 .sum()
                                 .sqrt();

  out.estimate.resize(mdp.num_states, mdp.num_actions);
  out.standard_error.resize(mdp.num_states, mdp.num_actions);
  out.pass = true;
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      const Eigen::Index k = static_cast<Eigen::Index>(s) * mdp.num_actions + a;
      out.estimate(s, a) = empirical(s, a) - expected[k];
      out.standard_error(s, a) = se[k];
      const double diff = std::abs(out.estimate(s, a) - out.exact(s, a));
      const double z = se[k] > 0.0 ? diff / se[k] : (diff < 1e-12 ? 0.0 : INFINITY);
      out.max_z = std::max(out.max_z, z);
      if (!(z <= 3.0)) out.pass = false;
    }
  return out;
}

GradientCheck random_gradient_check(std::size_t num_rollouts, Rng& rng, Corruption corruption) {
  const oracle::DiscreteMdp mdp = oracle::random_mdp(4, 2, 5, rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto random_table = [&] {
    oracle::RewardTable r(mdp.num_states, mdp.num_actions);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = n01(rng);
    return r;
  };
  const oracle::RewardTable reward = random_table();
  const auto demo_table = oracle::soft_value_iteration(mdp, random_table(), mdp.horizon);
  std::vector<oracle::WeightedPath> demos;
  for (int i = 0; i < 200; ++i) demos.push_back({oracle::sample_soft_path(mdp, demo_table, rng), 1.0});
  return gradient_agreement(mdp, reward, demos, num_rollouts, rng, corruption);
}

GridAgent make_grid_agent(int width, int height, int block, bool north_east, double noise, int horizon) {
  GridAgent agent;
  agent.mdp = oracle::make_gridworld(width, height, oracle::corner_block(width, height, block, north_east), noise,
                                     horizon);
  agent.soft = oracle::soft_value_iteration(agent.mdp, *agent.mdp.true_reward, horizon);
  return agent;
}

TrajectorySet sample_demonstrations(const GridAgent& agent, std::size_t count, const std::string& agent_id,
                                    Rng& rng) {
  TrajectorySet set;
  set.role = SetRole::Demonstration;
  for (std::size_t i = 0; i < count; ++i)
    set.trajectories.push_back(oracle::encode_path(agent.mdp, oracle::sample_soft_path(agent.mdp, agent.soft, rng),
                                                   agent_id, agent_id + "-" + std::to_string(i),
                                                   Source::Demonstration));
  return set;
}

Eigen::MatrixXd learned_reward_table(const BootstrapRewardModel& model, const oracle::DiscreteMdp& mdp,
                                     const TrajectorySet& contexts) {
  std::map<std::tuple<int, int>, double> weight;  // (start cell, t) -> frequency
  double total = 0.0;
  for (const auto& traj : contexts.trajectories) {
    const oracle::Path path = oracle::decode_trajectory(mdp, traj);
    for (std::size_t t = 0; t < path.size(); ++t) {
      weight[{path.front().first, static_cast<int>(t)}] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw std::invalid_argument("learned_reward_table: no contexts");
  Eigen::MatrixXd table(mdp.num_states, mdp.num_actions);
  std::vector<StateAction> obs;
  obs.reserve(weight.size());
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      obs.clear();
      for (const auto& [ctx, w] : weight) obs.push_back(oracle::encode_step(mdp, s, a, std::get<0>(ctx), std::get<1>(ctx)));
      const EnsembleStats e = ensemble_rewards(model, obs);
      double acc = 0.0;
      std::size_t i = 0;
      for (const auto& [ctx, w] : weight) acc += w * e.mean[static_cast<Eigen::Index>(i++)];
      table(s, a) = acc / total;
    }
  return table;
}

TrainConfig GridBenchConfig::default_train() {
  TrainConfig cfg;
  cfg.outer_iterations = 200;
  cfg.prior_weight = 0.3;
  return cfg;
}

RecoveryResult reward_recovery(const GridBenchConfig& cfg, Rng& rng) {
  const GridAgent agent = make_grid_agent(cfg.width, cfg.height, cfg.block, true, cfg.noise, cfg.horizon);
  RecoveryResult out;
  out.demos = sample_demonstrations(agent, cfg.num_demos, "agent_a", rng);
  BootstrapRewardModel model = BootstrapRewardModel::initialize(rng(), cfg.train.num_heads, cfg.train.prior_variance,
                                                                cfg.train.trunk_widths);
  model.set_standardizer(fit_standardizer(out.demos));
  TabularSampler sampler(agent.mdp, PolicyUpdateConfig::from(cfg.train));
  out.trained = train(out.demos, std::move(model), sampler, cfg.train, rng);
  out.learned = learned_reward_table(out.trained.model, agent.mdp, out.demos);
  out.truth = *agent.mdp.true_reward;
  const std::vector<double> l(out.learned.data(), out.learned.data() + out.learned.size());
  const std::vector<double> t(out.truth.data(), out.truth.data() + out.truth.size());
  out.spearman = spearman(l, t);
  return out;
}

DetectionResult synthetic_detection(const GridBenchConfig& cfg, const BootstrapRewardModel& model,
                                    const TrajectorySet& train_demos, Rng& rng) {
  const GridAgent a = make_grid_agent(cfg.width, cfg.height, cfg.block, true, cfg.noise, cfg.horizon);
  const GridAgent b = make_grid_agent(cfg.width, cfg.height, cfg.block, false, cfg.noise, cfg.horizon);
  TrajectorySet normals = sample_demonstrations(a, cfg.num_test, "agent_a_test", rng);
  const TrajectorySet donors =
      sample_demonstrations(b, data::injection_count(cfg.num_test, cfg.anomaly_rate), "agent_b", rng);
  DetectionResult out;
  out.test = data::inject_anomalies(normals, donors, cfg.anomaly_rate, rng);
  const NormalizationStats stats = fit_stats(model, train_demos);
  std::vector<Label> labels;
  for (const auto& t : out.test.trajectories) {
    out.scores.push_back(traj_normality(model, stats, t));
    labels.push_back(t.label);
  }
  out.area = eval::roc_area(out.scores, labels);
  return out;
}

}  // namespace irlad::bench
