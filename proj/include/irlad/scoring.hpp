// Normality scores (z-scored ensemble-mean reward) and the AD / ADU
// anomaly decision rules.
#pragma once

#include "irlad/core.hpp"
#include "irlad/reward.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace irlad {

inline constexpr double kStdFloor = 1e-6;

struct NormalizationStats {
  double mean = 0.0;
  double stddev = 1.0;  // population, floored at kStdFloor
  std::size_t count = 0;
  bool floored = false;

  bool operator==(const NormalizationStats&) const = default;
};

enum class DetectMode { AD, ADU };
enum class Flag { Normal, Anomaly, UncertainAnomaly };

std::string to_string(DetectMode mode);
std::string to_string(Flag flag);
DetectMode detect_mode_from_string(const std::string& text);

struct Thresholds {
  double epsilon = -2.0;
  double gamma_unc = 1.5;
};

/// Mean and spread of mean_reward over every observation of the demonstrations.
NormalizationStats fit_stats(const BootstrapRewardModel& model, const TrajectorySet& demos);

/// Same statistics from precomputed mean rewards.
NormalizationStats fit_stats(const std::vector<double>& mean_rewards);

/// (mean_reward - stats.mean) / stats.stddev; 0 when the spread was floored.
double normalize(const NormalizationStats& stats, double mean_reward);
double normality(const BootstrapRewardModel& model, const NormalizationStats& stats, const State& s,
                 const Action& a);

/// Mean point normality along a trajectory. Throws on an empty trajectory.
double traj_normality(const BootstrapRewardModel& model, const NormalizationStats& stats,
                      const Trajectory& traj);

/// AD: anomaly iff n <= epsilon. ADU additionally requires sigma <= gamma_unc,
/// and reports UncertainAnomaly otherwise.
Flag decide(double normality, double uncertainty, const Thresholds& th, DetectMode mode);

struct Detection {
  double normality = 0.0;
  double uncertainty = 0.0;
  Flag flag = Flag::Normal;
  Thresholds thresholds;
  DetectMode mode = DetectMode::ADU;
};

struct TrajectoryDetection {
  Detection trajectory;  // N(tau) and mean per-step reward std
  std::vector<Detection> points;
  std::vector<double> reward_mean;
  std::vector<double> reward_std;
};

Detection detect(const BootstrapRewardModel& model, const NormalizationStats& stats, const StateAction& obs,
                 const Thresholds& th, DetectMode mode);
TrajectoryDetection detect(const BootstrapRewardModel& model, const NormalizationStats& stats,
                           const Trajectory& traj, const Thresholds& th, DetectMode mode);

/// Scores of one observation, computed on its own so that streamed and
/// file-based scoring produce the same digits.
struct PointScore {
  double reward_mean = 0.0;
  double reward_std = 0.0;
  Detection detection;
};

PointScore score_point(const BootstrapRewardModel& model, const NormalizationStats& stats, const StateAction& obs,
                       const Thresholds& th, DetectMode mode);

void write_score_header(std::ostream& out);
void write_score_row(std::ostream& out, const std::string& traj_id, std::size_t step, const StateAction& obs,
                     const PointScore& score);
/// One row per observation: traj_id,step,t_seconds,lon,lat,reward_mean,reward_std,normality,flag
void write_score_rows(std::ostream& out, const Trajectory& traj, const TrajectoryDetection& det);

}  // namespace irlad
