// Bootstrapped reward ensemble: one shared trunk, K scalar heads, each head
// trained on its own with-replacement resample of the demonstrations.
#pragma once

#include "irlad/core.hpp"
#include "irlad/nn.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace irlad {

using InputVector = std::array<double, kInputDim>;

/// Fixed per-dimension affine map applied to [s; a] before the network.
/// The default is the identity.
struct InputStandardizer {
  InputVector offset{};
  InputVector scale{1, 1, 1, 1, 1, 1, 1};

  InputVector apply(const StateAction& obs) const;
  bool is_identity() const;
  bool operator==(const InputStandardizer&) const = default;
};

using BootstrapAssignment = std::vector<std::size_t>;

class BootstrapRewardModel {
 public:
  BootstrapRewardModel() = default;
  BootstrapRewardModel(nn::MlpParams params, double prior_variance,
                       std::vector<BootstrapAssignment> assignments = {},
                       InputStandardizer standardizer = {});

  /// Gaussian N(0, prior_variance) initialization with scalar heads on a 7-d input.
  static BootstrapRewardModel initialize(std::uint64_t seed, int num_heads, double prior_variance,
                                         const std::vector<int>& trunk_widths = {64, 16});

  int num_heads() const { return static_cast<int>(params_.heads.size()); }
  double prior_variance() const { return prior_variance_; }
  const nn::MlpParams& params() const { return params_; }
  nn::MlpParams& mutable_params() { return params_; }
  const std::vector<BootstrapAssignment>& assignments() const { return assignments_; }
  void set_assignments(std::vector<BootstrapAssignment> assignments);
  const InputStandardizer& standardizer() const { return standardizer_; }
  void set_standardizer(const InputStandardizer& s) { standardizer_ = s; }

  /// Network inputs for every observation of a trajectory (7 x |traj|).
  Eigen::MatrixXd features(const Trajectory& traj) const;
  Eigen::MatrixXd features(const std::vector<StateAction>& obs) const;

  bool operator==(const BootstrapRewardModel& other) const;

 private:
  nn::MlpParams params_;
  double prior_variance_ = 0.1;
  std::vector<BootstrapAssignment> assignments_;
  InputStandardizer standardizer_;
};

/// Uniform head index in [0, K).
int sample_head(int num_heads, Rng& rng);

/// K index multisets, each num_demos draws uniform with replacement.
std::vector<BootstrapAssignment> bootstrap_assign(std::size_t num_demos, int num_heads, Rng& rng);

double head_reward(const BootstrapRewardModel& model, const State& s, const Action& a, int head);
double mean_reward(const BootstrapRewardModel& model, const State& s, const Action& a);
/// Population variance (divide by K) of the head outputs.
double reward_variance(const BootstrapRewardModel& model, const State& s, const Action& a);

/// Per-observation ensemble summary for a trajectory: mean and population
/// standard deviation across heads, computed with one trunk pass.
struct EnsembleStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};
EnsembleStats ensemble_rewards(const BootstrapRewardModel& model, const std::vector<StateAction>& obs);

/// Per-step rewards of one head.
Eigen::VectorXd step_rewards(const BootstrapRewardModel& model, const Trajectory& traj, int head);

/// Gaussian log-prior restricted to the trunk and one head, up to a constant.
double log_prior(const BootstrapRewardModel& model, int head);

/// grads += -weight * theta / sigma^2 over the trunk and `head`.
void prior_grad(const BootstrapRewardModel& model, int head, nn::GradBuffer& grads, double weight = 1.0);

}  // namespace irlad
