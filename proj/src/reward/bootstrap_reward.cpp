#include "irlad/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace irlad {

InputVector InputStandardizer::apply(const StateAction& obs) const {
  InputVector x;
  for (std::size_t i = 0; i < kStateDim; ++i) x[i] = (obs.state[i] - offset[i]) / scale[i];
  for (std::size_t i = 0; i < kActionDim; ++i)
    x[kStateDim + i] = (obs.action[i] - offset[kStateDim + i]) / scale[kStateDim + i];
  return x;
}

bool InputStandardizer::is_identity() const { return *this == InputStandardizer{}; }

BootstrapRewardModel::BootstrapRewardModel(nn::MlpParams params, double prior_variance,
                                           std::vector<BootstrapAssignment> assignments,
                                           InputStandardizer standardizer)
    : params_(std::move(params)),
      prior_variance_(prior_variance),
      standardizer_(standardizer) {
  if (!(prior_variance_ > 0.0)) throw ConfigError("prior_variance must be positive");
  if (params_.shape.input_dim != static_cast<int>(kInputDim) || params_.shape.head_width != 1)
    throw std::invalid_argument("reward network must map 7 inputs to scalar heads");
  for (double s : standardizer_.scale)
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("standardizer scale must be positive");
  set_assignments(std::move(assignments));
}

BootstrapRewardModel BootstrapRewardModel::initialize(std::uint64_t seed, int num_heads,
                                                      double prior_variance,
                                                      const std::vector<int>& trunk_widths) {
  if (num_heads < 1) throw ConfigError("num_heads must be >= 1");
  nn::MlpShape shape{static_cast<int>(kInputDim), trunk_widths, 1, num_heads};
  return BootstrapRewardModel(nn::init_params(seed, prior_variance, shape), prior_variance);
}

void BootstrapRewardModel::set_assignments(std::vector<BootstrapAssignment> assignments) {
  if (!assignments.empty()) {
    if (static_cast<int>(assignments.size()) != num_heads())
      throw std::invalid_argument("one bootstrap assignment per head required");
    const std::size_t n = assignments.front().size();
    for (const auto& a : assignments) {
      if (a.size() != n || n == 0) throw std::invalid_argument("bootstrap assignments must share size");
      for (std::size_t idx : a)
        if (idx >= n) throw std::invalid_argument("bootstrap index out of range");
    }
  }
  assignments_ = std::move(assignments);
}

Eigen::MatrixXd BootstrapRewardModel::features(const std::vector<StateAction>& obs) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const auto v = standardizer_.apply(obs[j]);
    for (std::size_t i = 0; i < kInputDim; ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i];
  }
  return x;
}

Eigen::MatrixXd BootstrapRewardModel::features(const Trajectory& traj) const {
  return features(traj.observations);
}

bool BootstrapRewardModel::operator==(const BootstrapRewardModel& other) const {
  return params_.shape == other.params_.shape && params_.same_shape(other.params_) &&
         params_.flatten() == other.params_.flatten() &&
         prior_variance_ == other.prior_variance_ && assignments_ == other.assignments_ &&
         standardizer_ == other.standardizer_;
}

int sample_head(int num_heads, Rng& rng) {
  if (num_heads < 1) throw ConfigError("sample_head: K must be >= 1");
  return std::uniform_int_distribution<int>(0, num_heads - 1)(rng);
}

std::vector<BootstrapAssignment> bootstrap_assign(std::size_t num_demos, int num_heads, Rng& rng) {
  if (num_demos < 1) throw std::invalid_argument("bootstrap_assign: need at least one demonstration");
  if (num_heads < 1) throw ConfigError("bootstrap_assign: K must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, num_demos - 1);
  std::vector<BootstrapAssignment> out(static_cast<std::size_t>(num_heads));
  for (auto& a : out) {
    a.resize(num_demos);
    for (auto& idx : a) idx = pick(rng);
  }
  return out;
}

namespace {
Eigen::MatrixXd single_input(const BootstrapRewardModel& model, const State& s, const Action& a) {
  return model.features(std::vector<StateAction>{StateAction{s, a}});
}
}  // namespace

double head_reward(const BootstrapRewardModel& model, const State& s, const Action& a, int head) {
  return nn::forward_batch(model.params(), single_input(model, s, a), head)(0, 0);
}

double mean_reward(const BootstrapRewardModel& model, const State& s, const Action& a) {
  return nn::forward_all_heads(model.params(), single_input(model, s, a)).col(0).mean();
}

double reward_variance(const BootstrapRewardModel& model, const State& s, const Action& a) {
  const Eigen::VectorXd r = nn::forward_all_heads(model.params(), single_input(model, s, a)).col(0);
  return (r.array() - r.mean()).square().mean();
}

EnsembleStats ensemble_rewards(const BootstrapRewardModel& model, const std::vector<StateAction>& obs) {
  EnsembleStats out;
  if (obs.empty()) return out;
  const Eigen::MatrixXd r = nn::forward_all_heads(model.params(), model.features(obs));
  out.mean = r.colwise().mean().transpose();
  const Eigen::MatrixXd centered = r.rowwise() - out.mean.transpose();
  out.stddev = centered.array().square().colwise().mean().sqrt().transpose();
  return out;
}

Eigen::VectorXd step_rewards(const BootstrapRewardModel& model, const Trajectory& traj, int head) {
  return nn::forward_batch(model.params(), model.features(traj), head).row(0).transpose();
}

double log_prior(const BootstrapRewardModel& model, int head) {
  const auto& p = model.params();
  if (head < 0 || head >= model.num_heads()) throw std::out_of_range("log_prior: head");
  double sq = 0.0;
  for (const auto& l : p.trunk) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  const auto& h = p.heads[static_cast<std::size_t>(head)];
  sq += h.weight.squaredNorm() + h.bias.squaredNorm();
  return -0.5 * sq / model.prior_variance();
}

void prior_grad(const BootstrapRewardModel& model, int head, nn::GradBuffer& grads, double weight) {
  const auto& p = model.params();
  if (head < 0 || head >= model.num_heads()) throw std::out_of_range("prior_grad: head");
  if (!grads.same_shape(p)) throw std::invalid_argument("prior_grad: gradient buffer shape");
  const double c = -weight / model.prior_variance();
  for (std::size_t i = 0; i < p.trunk.size(); ++i) {
    grads.trunk[i].weight += c * p.trunk[i].weight;
    grads.trunk[i].bias += c * p.trunk[i].bias;
  }
  const auto k = static_cast<std::size_t>(head);
  grads.heads[k].weight += c * p.heads[k].weight;
  grads.heads[k].bias += c * p.heads[k].bias;
}

}  // namespace irlad
