// Brute-force ground truth on small discrete MDPs: finite-horizon soft value
// iteration, exhaustive path enumeration of the Boltzmann trajectory
// distribution, and exact likelihood gradients for tabular rewards.
#pragma once

#include "irlad/core.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace irlad::oracle {

/// Present on MDPs built by make_gridworld; used to embed cells as
/// StateAction observations.
struct GridLayout {
  int width = 1;
  int height = 1;
  int cell(int x, int y) const { return y * width + x; }
  int x_of(int s) const { return s % width; }
  int y_of(int s) const { return s / width; }
};

struct DiscreteMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 1;
  std::vector<double> transition;  // [s][a][s'] row-major
  Eigen::VectorXd initial;         // p0 over states
  std::optional<Eigen::MatrixXd> true_reward;  // S x A
  std::optional<GridLayout> grid;

  double T(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  double& T(int s, int a, int next) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  /// Throws std::invalid_argument if rows are not stochastic to 1e-12, p0 is
  /// not a distribution, or H < 1.
  void validate() const;
};

using RewardTable = Eigen::MatrixXd;  // S x A

/// (state, action) per step; H pairs.
using Path = std::vector<std::pair<int, int>>;

struct SoftPolicyTable {
  std::vector<Eigen::MatrixXd> q;       // per step, S x A
  std::vector<Eigen::VectorXd> v;       // per step, S
  std::vector<Eigen::MatrixXd> policy;  // per step, S x A, rows sum to 1
  Eigen::VectorXd start;  // initial-state law of the Boltzmann path distribution
  Eigen::MatrixXd reward;
  double log_z = 0.0;
};

/// Backward recursion V_t = logsumexp_a Q_t, Q_t = r + log sum_s' T exp(V_{t+1}).
/// With deterministic dynamics this is the expected-value backup
/// Q_t = r + sum_s' T V_{t+1}; in general it is the one whose paths follow
/// p0 * prod T * exp(R).
SoftPolicyTable soft_value_iteration(const DiscreteMdp& mdp, const RewardTable& reward, int horizon);

/// Law of s_{t+1} given (s_t, a_t) under the Boltzmann path distribution:
/// T(s'|s,a) exp(V_{t+1}(s')) renormalized.
Eigen::VectorXd successor_law(const DiscreteMdp& mdp, const SoftPolicyTable& table, std::size_t t, int s,
                              int a);

/// Per-step (s, a) marginals of the path distribution implied by `table`.
std::vector<Eigen::MatrixXd> soft_marginals(const DiscreteMdp& mdp, const SoftPolicyTable& table);

/// Expected (s, a) visit counts over a path.
Eigen::MatrixXd expected_counts(const std::vector<Eigen::MatrixXd>& marginals);

class InstanceTooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMaxEnumStateActions = 20;
inline constexpr int kMaxEnumHorizon = 8;

struct PathDistribution {
  std::vector<Path> paths;
  std::vector<double> probabilities;
  double z = 0.0;
  double log_z = 0.0;
  std::vector<double> log_scores;  // log p0 + sum log T + R, unnormalized
};

/// Every dynamics-consistent length-H path with probability proportional to
/// p0 * prod T * exp(R). Guarded by |S||A| <= 20 and H <= 8.
PathDistribution enumerate_traj_distribution(const DiscreteMdp& mdp, const RewardTable& reward,
                                             int horizon);

std::vector<Eigen::MatrixXd> path_marginals(const PathDistribution& dist, int num_states,
                                            int num_actions, int horizon);

struct WeightedPath {
  Path path;
  double weight = 1.0;
};

/// Weighted mean of (s, a) visit counts.
Eigen::MatrixXd empirical_counts(const std::vector<WeightedPath>& demos, int num_states,
                                 int num_actions);

/// Gradient of the mean demo log-likelihood with respect to a tabular
/// reward: empirical counts minus expected counts under the Boltzmann paths.
Eigen::MatrixXd exact_gradient(const DiscreteMdp& mdp, const RewardTable& reward,
                               const std::vector<WeightedPath>& demos);

/// 4-action grid (N, E, S, W). The intended move happens with probability
/// 1 - noise; otherwise one of the other three directions, uniformly. Moves
/// into a wall stay put. True reward is 1 on goal cells, -0.01 elsewhere;
/// p0 is uniform.
DiscreteMdp make_gridworld(int width, int height, const std::vector<std::pair<int, int>>& goals,
                           double noise, int horizon = 10);

/// size x size block of cells in the north-east (high x, high y) or
/// south-west corner.
std::vector<std::pair<int, int>> corner_block(int width, int height, int size, bool north_east);

/// Draws a path from the Boltzmann distribution encoded by `table`.
Path sample_soft_path(const DiscreteMdp& mdp, const SoftPolicyTable& table, Rng& rng);

/// Draws the successor state.
int sample_next_state(const DiscreteMdp& mdp, int s, int a, Rng& rng);

/// Gridworld embedding into the continuous schema: state = [x - cx, y - cy,
/// x0 - cx, y0 - cy, t], action = unit vector of the intended move.
Trajectory encode_path(const DiscreteMdp& mdp, const Path& path, const std::string& agent_id,
                       const std::string& traj_id, Source source);
StateAction encode_step(const DiscreteMdp& mdp, int s, int a, int s0, int t);
std::pair<int, int> decode_step(const DiscreteMdp& mdp, const StateAction& obs);
Path decode_trajectory(const DiscreteMdp& mdp, const Trajectory& traj);

/// Random MDP with dense transition rows and uniform-ish p0, for gradient checks.
DiscreteMdp random_mdp(int num_states, int num_actions, int horizon, Rng& rng);

/// Small textual format used by test fixtures:
///   states N / actions N / horizon H / initial p... /
///   transition s a p_0 ... p_{N-1} / reward s a value
DiscreteMdp parse_mdp(const std::string& text);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace irlad::oracle
