// Gridworld benchmarks with known ground truth: importance-sampled versus
// exact likelihood gradients, reward recovery, and two-agent detection.
#pragma once

#include "irlad/core.hpp"
#include "irlad/irl.hpp"
#include "irlad/oracle.hpp"
#include "irlad/policy.hpp"
#include "irlad/reward.hpp"

#include <Eigen/Dense>

#include <vector>

namespace irlad::bench {

/// Softmax policy over the actions of a discrete MDP, one logit row per
/// state (a network with no hidden layer reading a one-hot state), rolled
/// out through the MDP and encoded as grid trajectories.
class TabularSampler final : public TrajectorySampler {
 public:
  TabularSampler(oracle::DiscreteMdp mdp, PolicyUpdateConfig cfg);

  RolloutRecord rollout(Rng& rng) const override;
  double log_density(const Trajectory& traj) const override;
  PolicyUpdateReport update(const std::vector<RolloutRecord>& rollouts, const BootstrapRewardModel& reward,
                            int head, Rng& rng) override;

  /// S x A action probabilities.
  Eigen::MatrixXd probabilities() const;
  const nn::MlpParams& logits() const { return logits_; }

 private:
  Eigen::MatrixXd one_hot(const std::vector<int>& states) const;

  oracle::DiscreteMdp mdp_;
  PolicyUpdateConfig cfg_;
  nn::MlpParams logits_;
};

/// Pearson correlation of average ranks.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct GradientCheck {
  Eigen::MatrixXd exact;
  Eigen::MatrixXd estimate;
  Eigen::MatrixXd standard_error;
  double max_z = 0.0;  // max |estimate - exact| / standard_error
  bool pass = false;
};

enum class Corruption { None, IgnoreProposal };

/// Self-normalized importance-sampling estimate of the tabular likelihood
/// gradient from `num_rollouts` paths of the reward's soft policy run through
/// the true dynamics, compared coordinate-wise with the exact gradient at 3
/// standard errors.
GradientCheck gradient_agreement(const oracle::DiscreteMdp& mdp, const oracle::RewardTable& reward,
                                 const std::vector<oracle::WeightedPath>& demos, std::size_t num_rollouts,
                                 Rng& rng, Corruption corruption = Corruption::None);

/// gradient_agreement on a random 4-state / 2-action MDP with horizon 5, a
/// standard normal reward table and 200 demonstrations drawn under a second
/// random reward.
GradientCheck random_gradient_check(std::size_t num_rollouts, Rng& rng,
                                    Corruption corruption = Corruption::None);

struct GridAgent {
  oracle::DiscreteMdp mdp;
  oracle::SoftPolicyTable soft;
};

/// 5x5-style grid whose goal is a size x size corner block.
GridAgent make_grid_agent(int width, int height, int block, bool north_east, double noise, int horizon);

/// Paths drawn from the agent's Boltzmann distribution, encoded as trajectories.
TrajectorySet sample_demonstrations(const GridAgent& agent, std::size_t count, const std::string& agent_id,
                                    Rng& rng);

/// Learned reward per (state, action): the ensemble mean averaged over the
/// (start cell, time) contexts seen in `contexts`.
Eigen::MatrixXd learned_reward_table(const BootstrapRewardModel& model, const oracle::DiscreteMdp& mdp,
                                     const TrajectorySet& contexts);

struct GridBenchConfig {
  int width = 5;
  int height = 5;
  int block = 3;
  double noise = 0.1;
  int horizon = 10;
  std::size_t num_demos = 500;
  std::size_t num_test = 90;
  double anomaly_rate = 0.1;
  TrainConfig train = default_train();

  static TrainConfig default_train();
};

struct RecoveryResult {
  TrainResult trained;
  TrajectorySet demos;
  Eigen::MatrixXd learned;
  Eigen::MatrixXd truth;
  double spearman = 0.0;
};

/// Trains on demonstrations of the north-east agent and correlates the
/// learned reward table with the true one.
RecoveryResult reward_recovery(const GridBenchConfig& cfg, Rng& rng);

struct DetectionResult {
  TrajectorySet test;
  std::vector<double> scores;
  double area = 0.0;
};

/// Held-out north-east trajectories mixed with south-west ones at
/// `anomaly_rate`, scored by trajectory normality under `model`.
DetectionResult synthetic_detection(const GridBenchConfig& cfg, const BootstrapRewardModel& model,
                                    const TrajectorySet& train_demos, Rng& rng);

}  // namespace irlad::bench
