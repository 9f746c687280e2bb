// Trajectory-level detection metrics, threshold sweeps with ROC area, and
// run reports. Anomaly is the positive class.
#pragma once

#include "irlad/core.hpp"
#include "irlad/reward.hpp"
#include "irlad/scoring.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace irlad::eval {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  double precision = 0.0;  // 0 when nothing is flagged
  double recall = 1.0;     // 1 when there are no anomalies
  double f1 = 0.0;
};

double f1_score(double precision, double recall);
Metrics metrics(const ConfusionCounts& c);

/// Only Flag::Anomaly counts as a positive prediction; Unlabeled items are skipped.
ConfusionCounts confusion(const std::vector<Flag>& flags, const std::vector<Label>& labels);
Metrics metrics(const std::vector<Flag>& flags, const std::vector<Label>& labels);

struct SweepPoint {
  double epsilon = 0.0;
  ConfusionCounts counts;
  Metrics metrics;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct Sweep {
  std::vector<SweepPoint> points;
  double area = 0.0;  // trapezoid over (fpr, tpr) with (0,0) and (1,1) added
};

/// Flags score <= epsilon for every epsilon of the grid.
Sweep threshold_sweep(const std::vector<double>& scores, const std::vector<Label>& labels,
                      const std::vector<double>& grid);

/// Every distinct score, ascending; the sweep over it traces the full ROC curve.
std::vector<double> score_grid(const std::vector<double>& scores);

/// Sweep area over score_grid.
double roc_area(const std::vector<double>& scores, const std::vector<Label>& labels);

struct TrajectoryScore {
  std::string agent_id;
  std::string traj_id;
  Label label = Label::Unlabeled;
  double normality = 0.0;
  double uncertainty = 0.0;
  Flag flag_ad = Flag::Normal;
  Flag flag_adu = Flag::Normal;
};

struct RunReport {
  DetectMode mode = DetectMode::ADU;
  Thresholds thresholds;
  std::vector<TrajectoryScore> trajectories;
  std::vector<TrajectoryDetection> detections;  // point-level traces
  ConfusionCounts counts_ad, counts_adu;
  Metrics ad, adu;
  Sweep sweep;

  const Metrics& selected() const { return mode == DetectMode::AD ? ad : adu; }
};

RunReport evaluate_run(const BootstrapRewardModel& model, const NormalizationStats& stats,
                       const TrajectorySet& test, DetectMode mode, const Thresholds& th);

/// traj_id,agent_id,label,normality,uncertainty,flag_ad,flag_adu
void write_report_csv(std::ostream& out, const RunReport& report);
void write_summary(std::ostream& out, const RunReport& report);
void write_sweep_csv(std::ostream& out, const Sweep& sweep);

/// External detector scores, `traj_id,score`, lower meaning more anomalous.
std::vector<std::pair<std::string, double>> read_score_file(std::istream& in,
                                                            const std::string& source_name = "<scores>");

/// Aligns external scores with the labelled test set by traj_id and sweeps them.
Sweep evaluate_scores(const std::vector<std::pair<std::string, double>>& scores, const TrajectorySet& test);

}  // namespace irlad::eval
