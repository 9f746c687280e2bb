#include "irlad/irl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace irlad {

BackgroundBuffer::BackgroundBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("background buffer capacity must be positive");
}

void BackgroundBuffer::push(RolloutRecord record) {
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(record));
}

void BackgroundBuffer::append(std::vector<RolloutRecord> records) {
  for (auto& r : records) push(std::move(r));
}

std::vector<std::size_t> BackgroundBuffer::sample(std::size_t n, Rng& rng) const {
  if (records_.empty()) throw std::logic_error("sampling from an empty background buffer");
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

void IrlUpdateBatch::check() const {
  if (demos.empty() || background.empty()) throw std::invalid_argument("empty IRL update batch");
  if (background.size() != background_log_q.size())
    throw std::invalid_argument("one log q per background trajectory required");
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd importance_weights(const Eigen::VectorXd& returns, const Eigen::VectorXd& log_q) {
  if (returns.size() == 0) throw std::invalid_argument("importance_weights: empty batch");
  if (returns.size() != log_q.size()) throw std::invalid_argument("importance_weights: size mismatch");
  const Eigen::VectorXd log_w = returns - log_q;
  if (!log_w.allFinite()) throw NumericError("importance_weights: non-finite log weight");
  return (log_w.array() - log_sum_exp(log_w)).exp().matrix();
}

double effective_sample_size(const Eigen::VectorXd& weights) { return 1.0 / weights.squaredNorm(); }

namespace {

struct Stacked {
  Eigen::MatrixXd features;
  std::vector<Eigen::Index> start;  // size = trajectories + 1
};

Stacked stack(const BootstrapRewardModel& model, const std::vector<const Trajectory*>& a,
              const std::vector<const Trajectory*>& b) {
  std::vector<StateAction> obs;
  Stacked s;
  s.start.push_back(0);
  for (const auto* list : {&a, &b})
    for (const Trajectory* t : *list) {
      obs.insert(obs.end(), t->observations.begin(), t->observations.end());
      s.start.push_back(static_cast<Eigen::Index>(obs.size()));
    }
  s.features = model.features(obs);
  return s;
}

Eigen::VectorXd segment_sums(const Eigen::VectorXd& steps, const std::vector<Eigen::Index>& start,
                             std::size_t from, std::size_t count) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i)
    out[static_cast<Eigen::Index>(i)] =
        steps.segment(start[from + i], start[from + i + 1] - start[from + i]).sum();
  return out;
}

struct BatchEval {
  Stacked stacked;
  Eigen::VectorXd demo_returns;
  Eigen::VectorXd background_returns;
};

BatchEval evaluate(const BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch) {
  batch.check();
  if (head < 0 || head >= model.num_heads()) throw std::out_of_range("reward head index");
  BatchEval e{stack(model, batch.demos, batch.background), {}, {}};
  const Eigen::VectorXd steps = nn::forward_batch(model.params(), e.stacked.features, head).row(0).transpose();
  e.demo_returns = segment_sums(steps, e.stacked.start, 0, batch.demos.size());
  e.background_returns = segment_sums(steps, e.stacked.start, batch.demos.size(), batch.background.size());
  return e;
}

Eigen::VectorXd log_q_vector(const IrlUpdateBatch& batch) {
  return Eigen::Map<const Eigen::VectorXd>(batch.background_log_q.data(),
                                           static_cast<Eigen::Index>(batch.background_log_q.size()));
}

}  // namespace

double batch_objective(const BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch) {
  const BatchEval e = evaluate(model, head, batch);
  return e.demo_returns.mean() - log_sum_exp(e.background_returns - log_q_vector(batch)) +
         batch.prior_weight * log_prior(model, head);
}

RewardGradient reward_gradient(const BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch) {
  const BatchEval e = evaluate(model, head, batch);
  RewardGradient g{nn::GradBuffer(model.params()), {}, 0.0, 0.0, 0.0};
  g.weights = importance_weights(e.background_returns, log_q_vector(batch));
  g.demo_return = e.demo_returns.mean();
  g.background_return = g.weights.dot(e.background_returns);
  g.ess = effective_sample_size(g.weights);

  const auto& start = e.stacked.start;
  Eigen::MatrixXd upstream(1, e.stacked.features.cols());
  const double demo_share = 1.0 / static_cast<double>(batch.demos.size());
  for (std::size_t i = 0; i < batch.demos.size(); ++i)
    upstream.middleCols(start[i], start[i + 1] - start[i]).setConstant(demo_share);
  for (std::size_t j = 0; j < batch.background.size(); ++j) {
    const std::size_t i = batch.demos.size() + j;
    upstream.middleCols(start[i], start[i + 1] - start[i]).setConstant(-g.weights[static_cast<Eigen::Index>(j)]);
  }
  nn::backward_batch(model.params(), e.stacked.features, head, upstream, g.grads);
  prior_grad(model, head, g.grads, batch.prior_weight);
  return g;
}

RewardUpdateReport reward_update(BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch,
                                 nn::AdamState& optimizer) {
  const RewardGradient g = reward_gradient(model, head, batch);
  nn::adam_step(model.mutable_params(), g.grads, optimizer, head);
  return {g.demo_return, g.background_return, g.ess, g.weights.sum()};
}

void write_training_log(std::ostream& out, const std::vector<IterationLog>& log) {
  out << "iter,head,demo_return,bg_return,ess,policy_kl,wall_ms\n";
  const auto old_precision = out.precision(10);
  for (const auto& e : log)
    out << e.iter << ',' << e.head << ',' << e.demo_return << ',' << e.bg_return << ',' << e.ess << ','
        << e.policy_kl << ',' << e.wall_ms << '\n';
  out.precision(old_precision);
}

TrainResult train(const TrajectorySet& demos, BootstrapRewardModel model, TrajectorySampler& sampler,
                  const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (demos.empty()) throw std::invalid_argument("train: no demonstrations");
  for (const auto& t : demos.trajectories)
    if (t.empty()) throw std::invalid_argument("train: empty demonstration " + t.traj_id);
  if (model.assignments().empty())
    model.set_assignments(bootstrap_assign(demos.size(), model.num_heads(), rng));
  if (model.assignments().front().size() != demos.size())
    throw std::invalid_argument("train: bootstrap assignments do not match the demonstrations");

  TrainResult result{std::move(model), {}};
  BootstrapRewardModel& m = result.model;
  BackgroundBuffer buffer(cfg.buffer_capacity);
  nn::AdamState optimizer(m.params(), cfg.reward_learning_rate);
  std::vector<double> demo_log_q(demos.size());
  const auto rollouts_per_iter = static_cast<std::size_t>(cfg.rollouts_per_iteration);
  const auto demo_batch = static_cast<std::size_t>(cfg.demo_batch);

  for (int iter = 0; iter < cfg.outer_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    const int head = sample_head(m.num_heads(), rng);
    std::vector<RolloutRecord> rollouts;
    rollouts.reserve(rollouts_per_iter);
    for (std::size_t i = 0; i < rollouts_per_iter; ++i) rollouts.push_back(sampler.rollout(rng));
    buffer.append(rollouts);
    for (std::size_t i = 0; i < demos.size(); ++i) demo_log_q[i] = sampler.log_density(demos.trajectories[i]);

    const auto& assignment = m.assignments()[static_cast<std::size_t>(head)];
    std::uniform_int_distribution<std::size_t> pick(0, assignment.size() - 1);
    RewardUpdateReport last;
    double weight_error = 0.0;
    for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
      IrlUpdateBatch batch;
      batch.prior_weight = cfg.prior_weight;
      std::vector<std::size_t> demo_idx(demo_batch);
      for (auto& d : demo_idx) d = assignment[pick(rng)];
      for (std::size_t d : demo_idx) batch.demos.push_back(&demos.trajectories[d]);
      for (std::size_t b : buffer.sample(static_cast<std::size_t>(cfg.background_batch), rng)) {
        batch.background.push_back(&buffer.at(b).trajectory);
        batch.background_log_q.push_back(buffer.at(b).log_density);
      }
      for (std::size_t d : demo_idx) {
        batch.background.push_back(&demos.trajectories[d]);
        batch.background_log_q.push_back(demo_log_q[d]);
      }
      last = reward_update(m, head, batch, optimizer);
      weight_error = std::max(weight_error, std::abs(last.weight_sum - 1.0));
    }
    const PolicyUpdateReport pr = sampler.update(rollouts, m, head, rng);
    const auto t1 = std::chrono::steady_clock::now();
    result.log.push_back(IterationLog{iter, head, last.demo_return, last.background_return, last.ess,
                                      pr.mean_kl,
                                      std::chrono::duration<double, std::milli>(t1 - t0).count(), weight_error});
  }
  return result;
}

InputStandardizer fit_standardizer(const TrajectorySet& demos) {
  double n = 0.0;
  std::array<double, 2> coord_sum{}, coord_sq{};
  double t_sum = 0.0, t_sq = 0.0;
  std::array<double, 2> v_sq{};
  for (const auto& traj : demos.trajectories)
    for (const auto& o : traj.observations) {
      n += 1.0;
      for (std::size_t c = 0; c < 2; ++c) {
        coord_sum[c] += o.state[c];
        coord_sq[c] += o.state[c] * o.state[c];
        v_sq[c] += o.action[c] * o.action[c];
      }
      t_sum += o.elapsed();
      t_sq += o.elapsed() * o.elapsed();
    }
  InputStandardizer s;
  if (n == 0.0) return s;
  auto spread = [](double sum, double sq, double count) {
    const double mean = sum / count;
    const double sd = std::sqrt(std::max(0.0, sq / count - mean * mean));
    return sd > 1e-12 ? sd : 1.0;
  };
  for (std::size_t c = 0; c < 2; ++c) {
    const double mean = coord_sum[c] / n;
    const double sd = spread(coord_sum[c], coord_sq[c], n);
    s.offset[c] = s.offset[c + 2] = mean;
    s.scale[c] = s.scale[c + 2] = sd;
    const double rms = std::sqrt(v_sq[c] / n);
    s.scale[kStateDim + c] = rms > 1e-12 ? rms : 1.0;
  }
  s.offset[4] = t_sum / n;
  s.scale[4] = spread(t_sum, t_sq, n);
  return s;
}

double infer_time_step(const TrajectorySet& demos, double fallback) {
  std::vector<double> steps;
  for (const auto& traj : demos.trajectories)
    for (std::size_t i = 1; i < traj.size(); ++i) {
      const double d = traj.observations[i].elapsed() - traj.observations[i - 1].elapsed();
      if (d > 0.0) steps.push_back(d);
    }
  if (steps.empty()) return fallback;
  auto mid = steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2);
  std::nth_element(steps.begin(), mid, steps.end());
  return *mid;
}

GaussianTrainResult train(const TrajectorySet& demos, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (demos.empty()) throw std::invalid_argument("train: no demonstrations");
  const InputStandardizer standardizer = fit_standardizer(demos);
  BootstrapRewardModel model =
      BootstrapRewardModel::initialize(rng(), cfg.num_heads, cfg.prior_variance, cfg.trunk_widths);
  model.set_standardizer(standardizer);

  GaussianPolicy policy = GaussianPolicy::initialize(rng(), cfg.prior_variance, cfg.trunk_widths);
  for (std::size_t i = 0; i < kStateDim; ++i) {
    policy.state_offset[i] = standardizer.offset[i];
    policy.state_scale[i] = standardizer.scale[i];
  }
  for (std::size_t i = 0; i < kActionDim; ++i) policy.action_scale[i] = standardizer.scale[kStateDim + i];

  GaussianSampler sampler(std::move(policy), KinematicEnv::from_demonstrations(demos, infer_time_step(demos)),
                          PolicyUpdateConfig::from(cfg));
  TrainResult r = train(demos, std::move(model), sampler, cfg, rng);
  return {std::move(r.model), sampler.policy(), std::move(r.log)};
}

}  // namespace irlad
