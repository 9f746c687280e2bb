#include "irlad/core.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace irlad {

int label_to_int(Label label) {
  switch (label) {
    case Label::Normal: return 0;
    case Label::Anomaly: return 1;
    case Label::Unlabeled: return -1;
  }
  return -1;
}

Label label_from_int(int value) {
  switch (value) {
    case 0: return Label::Normal;
    case 1: return Label::Anomaly;
    case -1: return Label::Unlabeled;
    default: throw std::invalid_argument("label must be 0, 1 or -1, got " + std::to_string(value));
  }
}

void TrajectorySet::check_role() const {
  for (const auto& t : trajectories) {
    if (role == SetRole::Demonstration && t.source != Source::Demonstration)
      throw std::invalid_argument("demonstration set holds generated trajectory " + t.traj_id);
    if (role == SetRole::Background && t.source != Source::Generated)
      throw std::invalid_argument("background set holds demonstration " + t.traj_id);
  }
}

void TrainConfig::validate() const {
  if (num_heads < 1) throw ConfigError("num_heads must be >= 1");
  if (!(prior_variance > 0.0)) throw ConfigError("prior_variance must be > 0");
  if (!(prior_weight >= 0.0) || !std::isfinite(prior_weight)) throw ConfigError("prior_weight must be >= 0");
  if (outer_iterations < 0) throw ConfigError("outer_iterations must be >= 0");
  if (inner_iterations < 1 || demo_batch < 1 || background_batch < 1 ||
      rollouts_per_iteration < 1 || policy_substeps < 1)
    throw ConfigError("iteration counts and batch sizes must be positive");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  if (!(reward_learning_rate > 0.0) || !(policy_learning_rate > 0.0))
    throw ConfigError("learning rates must be positive");
  if (kl_coeff < 0.0 || !(max_kl > 0.0)) throw ConfigError("kl settings out of range");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
  for (int w : trunk_widths)
    if (w < 1) throw ConfigError("trunk widths must be positive");
}

double traj_return(const Trajectory& traj,
                   const std::function<double(const StateAction&)>& reward) {
  if (traj.empty()) throw std::invalid_argument("traj_return: empty trajectory");
  double total = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double r = reward(traj.observations[i]);
    if (!std::isfinite(r))
      throw NumericError("traj_return: non-finite reward at step " + std::to_string(i));
    total += r;
  }
  return total;
}

std::string to_string(TrajectoryError err) {
  switch (err) {
    case TrajectoryError::NonFiniteValue: return "NonFiniteValue";
    case TrajectoryError::NonMonotoneTime: return "NonMonotoneTime";
    case TrajectoryError::BadInitialState: return "BadInitialState";
    case TrajectoryError::Empty: return "Empty";
  }
  return "Unknown";
}

std::string TrajectoryViolation::message() const {
  return to_string(error) + " at index " + std::to_string(index);
}

std::optional<TrajectoryViolation> check_trajectory(const Trajectory& traj) {
  if (traj.empty()) return TrajectoryViolation{TrajectoryError::Empty, 0};
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& o = traj.observations[i];
    for (double v : o.state)
      if (!std::isfinite(v)) return TrajectoryViolation{TrajectoryError::NonFiniteValue, i};
    for (double v : o.action)
      if (!std::isfinite(v)) return TrajectoryViolation{TrajectoryError::NonFiniteValue, i};
  }
  const auto& first = traj.observations.front().state;
  if (first[4] != 0.0 || first[2] != first[0] || first[3] != first[1])
    return TrajectoryViolation{TrajectoryError::BadInitialState, 0};
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (traj.observations[i].elapsed() < traj.observations[i - 1].elapsed())
      return TrajectoryViolation{TrajectoryError::NonMonotoneTime, i};
  }
  return std::nullopt;
}

InvalidTrajectory::InvalidTrajectory(TrajectoryViolation v)
    : std::invalid_argument("invalid trajectory: " + v.message()), violation_(v) {}

const Trajectory& validate_trajectory(const Trajectory& traj) {
  if (auto v = check_trajectory(traj)) throw InvalidTrajectory(*v);
  return traj;
}

State make_state(double lon, double lat, double lon0, double lat0, double elapsed) {
  return State{lon, lat, lon0, lat0, elapsed};
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace irlad
