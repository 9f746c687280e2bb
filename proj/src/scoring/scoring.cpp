#include "irlad/scoring.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace irlad {

std::string to_string(DetectMode mode) { return mode == DetectMode::AD ? "AD" : "ADU"; }

std::string to_string(Flag flag) {
  switch (flag) {
    case Flag::Normal: return "normal";
    case Flag::Anomaly: return "anomaly";
    case Flag::UncertainAnomaly: return "uncertain";
  }
  return "normal";
}

DetectMode detect_mode_from_string(const std::string& text) {
  if (text == "AD" || text == "ad") return DetectMode::AD;
  if (text == "ADU" || text == "adu") return DetectMode::ADU;
  throw ConfigError("unknown detection mode '" + text + "' (expected AD or ADU)");
}

NormalizationStats fit_stats(const std::vector<double>& mean_rewards) {
  if (mean_rewards.empty()) throw std::invalid_argument("fit_stats: no observations");
  NormalizationStats s;
  s.count = mean_rewards.size();
  const double n = static_cast<double>(s.count);
  double sum = 0.0;
  for (double r : mean_rewards) sum += r;
  s.mean = sum / n;
  double sq = 0.0;
  for (double r : mean_rewards) sq += (r - s.mean) * (r - s.mean);
  s.stddev = std::sqrt(sq / n);
  if (!std::isfinite(s.mean) || !std::isfinite(s.stddev)) throw NumericError("fit_stats: non-finite reward");
  if (s.stddev < kStdFloor) {
    s.stddev = kStdFloor;
    s.floored = true;
  }
  return s;
}

NormalizationStats fit_stats(const BootstrapRewardModel& model, const TrajectorySet& demos) {
  std::vector<double> rewards;
  for (const auto& t : demos.trajectories) {
    if (t.empty()) continue;
    const EnsembleStats e = ensemble_rewards(model, t.observations);
    rewards.insert(rewards.end(), e.mean.begin(), e.mean.end());
  }
  return fit_stats(rewards);
}

double normalize(const NormalizationStats& stats, double mean_reward) {
  if (stats.floored) return 0.0;
  return (mean_reward - stats.mean) / stats.stddev;
}

double normality(const BootstrapRewardModel& model, const NormalizationStats& stats, const State& s,
                 const Action& a) {
  return normalize(stats, mean_reward(model, s, a));
}

double traj_normality(const BootstrapRewardModel& model, const NormalizationStats& stats,
                      const Trajectory& traj) {
  if (traj.empty()) throw std::invalid_argument("traj_normality: empty trajectory");
  const EnsembleStats e = ensemble_rewards(model, traj.observations);
  double total = 0.0;
  for (double r : e.mean) total += normalize(stats, r);
  return total / static_cast<double>(traj.size());
}

Flag decide(double normality, double uncertainty, const Thresholds& th, DetectMode mode) {
  if (!(normality <= th.epsilon)) return Flag::Normal;
  if (mode == DetectMode::AD || uncertainty <= th.gamma_unc) return Flag::Anomaly;
  return Flag::UncertainAnomaly;
}

PointScore score_point(const BootstrapRewardModel& model, const NormalizationStats& stats, const StateAction& obs,
                       const Thresholds& th, DetectMode mode) {
  const EnsembleStats e = ensemble_rewards(model, {obs});
  PointScore p{e.mean[0], e.stddev[0], Detection{normalize(stats, e.mean[0]), e.stddev[0], Flag::Normal, th, mode}};
  p.detection.flag = decide(p.detection.normality, p.detection.uncertainty, th, mode);
  return p;
}

Detection detect(const BootstrapRewardModel& model, const NormalizationStats& stats, const StateAction& obs,
                 const Thresholds& th, DetectMode mode) {
  return score_point(model, stats, obs, th, mode).detection;
}

TrajectoryDetection detect(const BootstrapRewardModel& model, const NormalizationStats& stats,
                           const Trajectory& traj, const Thresholds& th, DetectMode mode) {
  if (traj.empty()) throw std::invalid_argument("detect: empty trajectory " + traj.traj_id);
  const EnsembleStats e = ensemble_rewards(model, traj.observations);
  TrajectoryDetection out;
  double n_sum = 0.0, sd_sum = 0.0;
  for (Eigen::Index i = 0; i < e.mean.size(); ++i) {
    Detection d{normalize(stats, e.mean[i]), e.stddev[i], Flag::Normal, th, mode};
    d.flag = decide(d.normality, d.uncertainty, th, mode);
    n_sum += d.normality;
    sd_sum += d.uncertainty;
    out.points.push_back(d);
    out.reward_mean.push_back(e.mean[i]);
    out.reward_std.push_back(e.stddev[i]);
  }
  const double n = static_cast<double>(traj.size());
  out.trajectory = Detection{n_sum / n, sd_sum / n, Flag::Normal, th, mode};
  out.trajectory.flag = decide(out.trajectory.normality, out.trajectory.uncertainty, th, mode);
  return out;
}

void write_score_header(std::ostream& out) {
  out << "traj_id,step,t_seconds,lon,lat,reward_mean,reward_std,normality,flag\n";
}

void write_score_row(std::ostream& out, const std::string& traj_id, std::size_t step, const StateAction& obs,
                     const PointScore& score) {
  const auto flags = out.flags();
  const auto precision = out.precision(17);
  out << traj_id << ',' << step << ',' << obs.elapsed() << ',' << obs.lon() << ',' << obs.lat() << ','
      << score.reward_mean << ',' << score.reward_std << ',' << score.detection.normality << ','
      << to_string(score.detection.flag) << '\n';
  out.precision(precision);
  out.flags(flags);
}

void write_score_rows(std::ostream& out, const Trajectory& traj, const TrajectoryDetection& det) {
  if (det.points.size() != traj.size()) throw std::invalid_argument("score rows: detection length mismatch");
  const auto flags = out.flags();
  const auto precision = out.precision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& o = traj.observations[i];
    out << traj.traj_id << ',' << i << ',' << o.elapsed() << ',' << o.lon() << ',' << o.lat() << ','
        << det.reward_mean[i] << ',' << det.reward_std[i] << ',' << det.points[i].normality << ','
        << to_string(det.points[i].flag) << '\n';
  }
  out.precision(precision);
  out.flags(flags);
}

}  // namespace irlad
