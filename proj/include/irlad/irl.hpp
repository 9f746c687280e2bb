// Sample-based MaxEnt IRL: importance-weighted MAP reward updates on one
// bootstrap head at a time, alternated with sampler improvement.
#pragma once

#include "irlad/core.hpp"
#include "irlad/nn.hpp"
#include "irlad/policy.hpp"
#include "irlad/reward.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

namespace irlad {

/// Generated rollouts in insertion order; the oldest are dropped once the
/// capacity is reached.
class BackgroundBuffer {
 public:
  explicit BackgroundBuffer(std::size_t capacity = 50000);

  void push(RolloutRecord record);
  void append(std::vector<RolloutRecord> records);
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const RolloutRecord& at(std::size_t i) const { return records_.at(i); }
  const RolloutRecord& oldest() const { return records_.front(); }
  const RolloutRecord& newest() const { return records_.back(); }

  /// n indices drawn uniformly with replacement.
  std::vector<std::size_t> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<RolloutRecord> records_;
};

/// One reward-update batch. `background` already contains the appended
/// demonstrations, each with its log q.
struct IrlUpdateBatch {
  std::vector<const Trajectory*> demos;
  std::vector<const Trajectory*> background;
  std::vector<double> background_log_q;
  double prior_weight = 1.0;

  void check() const;
};

/// exp(R_j - log q_j) normalized in the log domain. Throws on an empty batch
/// or mismatched lengths.
Eigen::VectorXd importance_weights(const Eigen::VectorXd& returns, const Eigen::VectorXd& log_q);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

/// 1 / sum w^2 for normalized weights.
double effective_sample_size(const Eigen::VectorXd& weights);

/// Mean demo return minus logsumexp_j(R_j - log q_j) plus prior_weight times
/// the head's log-prior.
double batch_objective(const BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch);

struct RewardGradient {
  nn::GradBuffer grads;
  Eigen::VectorXd weights;
  double demo_return = 0.0;
  double background_return = 0.0;  // weighted by `weights`
  double ess = 0.0;
};

/// Gradient of batch_objective over the trunk and `head`.
RewardGradient reward_gradient(const BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch);

struct RewardUpdateReport {
  double demo_return = 0.0;
  double background_return = 0.0;
  double ess = 0.0;
  double weight_sum = 0.0;
};

/// One Adam ascent step on the trunk and `head`. Throws NumericError (and
/// leaves the model untouched) when the gradient is not finite.
RewardUpdateReport reward_update(BootstrapRewardModel& model, int head, const IrlUpdateBatch& batch,
                                 nn::AdamState& optimizer);

struct IterationLog {
  int iter = 0;
  int head = 0;
  double demo_return = 0.0;
  double bg_return = 0.0;
  double ess = 0.0;
  double policy_kl = 0.0;
  double wall_ms = 0.0;
  double weight_sum_error = 0.0;  // max |sum w - 1| over the inner updates; not written
};

void write_training_log(std::ostream& out, const std::vector<IterationLog>& log);

struct TrainResult {
  BootstrapRewardModel model;
  std::vector<IterationLog> log;
};

/// Outer loop: sample a head, roll out, grow the buffer, run the inner reward
/// updates, then improve the sampler against that head. `model` is the
/// starting point; bootstrap assignments are drawn here when it has none.
TrainResult train(const TrajectorySet& demos, BootstrapRewardModel model, TrajectorySampler& sampler,
                  const TrainConfig& cfg, Rng& rng);

struct GaussianTrainResult {
  BootstrapRewardModel model;
  GaussianPolicy policy;
  std::vector<IterationLog> log;
};

/// Per-dimension scales fitted on demonstrations: longitude/latitude dims
/// share coordinate statistics, elapsed time gets its own mean and spread,
/// velocities are scaled by their root mean square.
InputStandardizer fit_standardizer(const TrajectorySet& demos);

/// Median positive elapsed-time increment in the demonstrations; `fallback`
/// when there is none.
double infer_time_step(const TrajectorySet& demos, double fallback = 5.0);

/// Continuous-domain entry point with a Gaussian sampler over a kinematic env.
GaussianTrainResult train(const TrajectorySet& demos, const TrainConfig& cfg, Rng& rng);

}  // namespace irlad
