// Shared domain types: observations, trajectories, trajectory sets and the
// training configuration.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace irlad {

/// Every stochastic routine takes this generator explicitly.
using Rng = std::mt19937_64;

inline constexpr std::size_t kStateDim = 5;
inline constexpr std::size_t kActionDim = 2;
inline constexpr std::size_t kInputDim = kStateDim + kActionDim;

/// [longitude, latitude, initial_longitude, initial_latitude, elapsed_seconds]
using State = std::array<double, kStateDim>;
/// Velocity [d_longitude/dt, d_latitude/dt] per second.
using Action = std::array<double, kActionDim>;

enum class Label { Normal, Anomaly, Unlabeled };
enum class Source { Demonstration, Generated };
enum class SetRole { Demonstration, Background, Test };

int label_to_int(Label label);
Label label_from_int(int value);

struct StateAction {
  State state{};
  Action action{};

  double lon() const { return state[0]; }
  double lat() const { return state[1]; }
  double elapsed() const { return state[4]; }
};

struct Trajectory {
  std::string agent_id;
  std::string traj_id;
  std::vector<StateAction> observations;
  Label label = Label::Unlabeled;
  Source source = Source::Demonstration;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
};

struct TrajectorySet {
  std::vector<Trajectory> trajectories;
  SetRole role = SetRole::Test;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
  /// Throws std::invalid_argument if a member's source disagrees with the role.
  void check_role() const;
};

/// Raised for configuration values outside their documented domain.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numeric routine meets a non-finite value.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct TrainConfig {
  int num_heads = 10;
  double prior_variance = 0.1;
  double prior_weight = 1.0;  // multiplies the log-prior in each batch objective
  int outer_iterations = 200;
  int inner_iterations = 10;
  int demo_batch = 32;
  int background_batch = 128;
  int rollouts_per_iteration = 32;
  double discount = 0.99;
  double reward_learning_rate = 1e-3;
  double policy_learning_rate = 1e-3;
  double kl_coeff = 1.0;
  double max_kl = 0.05;
  int policy_substeps = 5;
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 50000;
  std::vector<int> trunk_widths{64, 16};

  void validate() const;
};

/// Undiscounted sum of per-step rewards. Throws NumericError naming the step
/// index when a step reward is not finite.
double traj_return(const Trajectory& traj,
                   const std::function<double(const StateAction&)>& reward);

enum class TrajectoryError { NonFiniteValue, NonMonotoneTime, BadInitialState, Empty };

std::string to_string(TrajectoryError err);

struct TrajectoryViolation {
  TrajectoryError error;
  std::size_t index;  // offending observation
  std::string message() const;
};

/// First violated invariant, or nullopt when the trajectory is well formed.
std::optional<TrajectoryViolation> check_trajectory(const Trajectory& traj);

class InvalidTrajectory : public std::invalid_argument {
 public:
  explicit InvalidTrajectory(TrajectoryViolation v);
  const TrajectoryViolation& violation() const { return violation_; }

 private:
  TrajectoryViolation violation_;
};

/// Returns the trajectory unchanged or throws InvalidTrajectory.
const Trajectory& validate_trajectory(const Trajectory& traj);

/// Builds the canonical state for an observation at position (lon, lat).
State make_state(double lon, double lat, double lon0, double lat0, double elapsed);

/// 64-bit FNV-1a, used for configuration fingerprints.
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

}  // namespace irlad
