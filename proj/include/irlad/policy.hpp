// Background-trajectory samplers. A sampler rolls out trajectories with
// recorded proposal log-densities and improves itself against one reward head.
#pragma once

#include "irlad/core.hpp"
#include "irlad/nn.hpp"
#include "irlad/reward.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace irlad {

struct RolloutRecord {
  Trajectory trajectory;  // source = Generated
  std::vector<double> step_log_density;
  double log_density = 0.0;  // sum of step_log_density
};

struct PolicyUpdateConfig {
  double discount = 0.99;
  double kl_coeff = 1.0;
  double max_kl = 0.05;
  double learning_rate = 1e-3;
  int substeps = 5;
  int max_backtracks = 20;

  static PolicyUpdateConfig from(const TrainConfig& cfg);
};

struct PolicyUpdateReport {
  double mean_kl = 0.0;
  double mean_return = 0.0;
  int backtracks = 0;
};

/// Optimizer-agnostic sampler interface used by the IRL trainer.
class TrajectorySampler {
 public:
  virtual ~TrajectorySampler() = default;
  virtual RolloutRecord rollout(Rng& rng) const = 0;
  /// Log-density the current policy assigns to the trajectory's actions
  /// along its states.
  virtual double log_density(const Trajectory& traj) const = 0;
  virtual PolicyUpdateReport update(const std::vector<RolloutRecord>& rollouts,
                                    const BootstrapRewardModel& reward, int head, Rng& rng) = 0;
};

/// Discounted reward-to-go under one head, centred by the batch mean.
/// Throws NumericError on a non-finite advantage.
struct Advantages {
  std::vector<Eigen::VectorXd> per_rollout;
  double mean_return = 0.0;  // undiscounted
};
Advantages compute_advantages(const std::vector<RolloutRecord>& rollouts,
                              const BootstrapRewardModel& reward, int head, double discount);

inline constexpr double kMinLogStd = -5.0;
inline constexpr double kMaxLogStd = 2.0;

/// Diagonal Gaussian over velocity actions with a state-independent log-std.
/// The mean network reads standardized states; `action_scale` converts its
/// output (and the standard deviation) to action units. Scale 1 and zero
/// offsets give the plain N(net(s), diag(exp(2 log_std))) policy.
struct GaussianPolicy {
  nn::MlpParams mean_net;  // 5 -> trunk -> 2
  std::array<double, kActionDim> log_std{0.0, 0.0};
  std::array<double, kStateDim> state_offset{};
  std::array<double, kStateDim> state_scale{1, 1, 1, 1, 1};
  std::array<double, kActionDim> action_scale{1, 1};

  /// Trunk drawn N(0, sigma2); the output layer starts at zero so the
  /// initial mean action is zero everywhere.
  static GaussianPolicy initialize(std::uint64_t seed, double sigma2,
                                   const std::vector<int>& trunk_widths = {64, 16});

  Eigen::MatrixXd state_features(const std::vector<State>& states) const;  // 5 x n
  Action mean(const State& s) const;
  Action stddev() const;
  double log_density(const State& s, const Action& a) const;
  void clamp_log_std();
  bool operator==(const GaussianPolicy& other) const;
};

/// action ~ N(mean(state), diag(stddev^2)) together with its exact log-pdf.
std::pair<Action, double> act(const GaussianPolicy& policy, const State& state, Rng& rng);

double gaussian_log_pdf(const Action& x, const Action& mean, const Action& stddev);

/// Deterministic position integration; initial states and horizons are
/// resampled from the demonstrations.
struct KinematicEnv {
  double dt = 5.0;
  std::vector<State> initial_states;
  std::vector<std::size_t> horizons;

  static KinematicEnv from_demonstrations(const TrajectorySet& demos, double dt);
  void validate() const;
};

State step(const KinematicEnv& env, const State& state, const Action& action);

RolloutRecord rollout(const GaussianPolicy& policy, const KinematicEnv& env, Rng& rng);

/// KL-penalized policy-gradient update: `substeps` Adam ascent steps on
/// mean(A * log pi) - kl_coeff * mean KL(old || new), then step halving until
/// the measured mean KL is at most max_kl.
PolicyUpdateReport policy_update(GaussianPolicy& policy, const std::vector<RolloutRecord>& rollouts,
                                 const BootstrapRewardModel& reward, int head,
                                 const PolicyUpdateConfig& cfg);

/// Mean over states of KL(old(.|s) || new(.|s)).
double mean_kl(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy,
               const std::vector<State>& states);

class GaussianSampler final : public TrajectorySampler {
 public:
  GaussianSampler(GaussianPolicy policy, KinematicEnv env, PolicyUpdateConfig cfg);

  RolloutRecord rollout(Rng& rng) const override;
  double log_density(const Trajectory& traj) const override;
  PolicyUpdateReport update(const std::vector<RolloutRecord>& rollouts,
                            const BootstrapRewardModel& reward, int head, Rng& rng) override;

  const GaussianPolicy& policy() const { return policy_; }
  const KinematicEnv& env() const { return env_; }

 private:
  GaussianPolicy policy_;
  KinematicEnv env_;
  PolicyUpdateConfig cfg_;
};

}  // namespace irlad
