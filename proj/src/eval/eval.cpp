#include "irlad/eval.hpp"

#include "irlad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

namespace irlad::eval {

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 1.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

ConfusionCounts confusion(const std::vector<Flag>& flags, const std::vector<Label>& labels) {
  if (flags.size() != labels.size()) throw std::invalid_argument("metrics: flags and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (labels[i] == Label::Unlabeled) continue;
    const bool predicted = flags[i] == Flag::Anomaly;
    const bool actual = labels[i] == Label::Anomaly;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics metrics(const std::vector<Flag>& flags, const std::vector<Label>& labels) {
  return metrics(confusion(flags, labels));
}

Sweep threshold_sweep(const std::vector<double>& scores, const std::vector<Label>& labels,
                      const std::vector<double>& grid) {
  if (scores.size() != labels.size()) throw std::invalid_argument("sweep: scores and labels differ in length");
  if (grid.empty()) throw std::invalid_argument("sweep: empty threshold grid");
  Sweep out;
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}, {1.0, 1.0}};
  std::vector<Flag> flags(scores.size());
  for (double eps : grid) {
    for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] <= eps ? Flag::Anomaly : Flag::Normal;
    SweepPoint p;
    p.epsilon = eps;
    p.counts = confusion(flags, labels);
    p.metrics = metrics(p.counts);
    p.tpr = p.metrics.recall;
    p.fpr = p.counts.fp + p.counts.tn > 0
                ? static_cast<double>(p.counts.fp) / static_cast<double>(p.counts.fp + p.counts.tn)
                : 0.0;
    curve.emplace_back(p.fpr, p.tpr);
    out.points.push_back(p);
  }
  std::sort(curve.begin(), curve.end());
  for (std::size_t i = 1; i < curve.size(); ++i)
    out.area += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  return out;
}

std::vector<double> score_grid(const std::vector<double>& scores) {
  std::vector<double> g = scores;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

double roc_area(const std::vector<double>& scores, const std::vector<Label>& labels) {
  if (scores.empty()) throw std::invalid_argument("roc_area: no scores");
  return threshold_sweep(scores, labels, score_grid(scores)).area;
}

RunReport evaluate_run(const BootstrapRewardModel& model, const NormalizationStats& stats,
                       const TrajectorySet& test, DetectMode mode, const Thresholds& th) {
  RunReport r;
  r.mode = mode;
  r.thresholds = th;
  std::vector<Flag> ad, adu;
  std::vector<Label> labels;
  std::vector<double> scores;
  for (const auto& t : test.trajectories) {
    TrajectoryDetection det = detect(model, stats, t, th, mode);
    const Detection& d = det.trajectory;
    TrajectoryScore s{t.agent_id, t.traj_id, t.label, d.normality, d.uncertainty,
                      decide(d.normality, d.uncertainty, th, DetectMode::AD),
                      decide(d.normality, d.uncertainty, th, DetectMode::ADU)};
    ad.push_back(s.flag_ad);
    adu.push_back(s.flag_adu);
    labels.push_back(s.label);
    scores.push_back(s.normality);
    r.trajectories.push_back(s);
    r.detections.push_back(std::move(det));
  }
  r.counts_ad = confusion(ad, labels);
  r.counts_adu = confusion(adu, labels);
  r.ad = metrics(r.counts_ad);
  r.adu = metrics(r.counts_adu);
  if (!scores.empty()) r.sweep = threshold_sweep(scores, labels, score_grid(scores));
  return r;
}

void write_report_csv(std::ostream& out, const RunReport& report) {
  const auto precision = out.precision(17);
  out << "traj_id,agent_id,label,normality,uncertainty,flag_ad,flag_adu\n";
  for (const auto& s : report.trajectories)
    out << s.traj_id << ',' << s.agent_id << ',' << label_to_int(s.label) << ',' << s.normality << ','
        << s.uncertainty << ',' << to_string(s.flag_ad) << ',' << to_string(s.flag_adu) << '\n';
  out.precision(precision);
}

void write_summary(std::ostream& out, const RunReport& report) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "trajectories " << report.trajectories.size() << "  epsilon " << report.thresholds.epsilon
      << "  gamma_unc " << report.thresholds.gamma_unc << "  selected " << to_string(report.mode) << '\n';
  out << std::left << std::setw(6) << "mode" << std::right << std::setw(6) << "tp" << std::setw(6) << "fp"
      << std::setw(6) << "fn" << std::setw(6) << "tn" << std::setw(11) << "precision" << std::setw(9) << "recall"
      << std::setw(8) << "f1" << '\n';
  out << std::fixed << std::setprecision(3);
  auto row = [&](const char* name, const ConfusionCounts& c, const Metrics& m) {
    out << std::left << std::setw(6) << name << std::right << std::setw(6) << c.tp << std::setw(6) << c.fp
        << std::setw(6) << c.fn << std::setw(6) << c.tn << std::setw(11) << m.precision << std::setw(9)
        << m.recall << std::setw(8) << m.f1 << '\n';
  };
  row("AD", report.counts_ad, report.ad);
  row("ADU", report.counts_adu, report.adu);
  out << "sweep area " << report.sweep.area << '\n';
  out.flags(flags);
  out.precision(precision);
}

void write_sweep_csv(std::ostream& out, const Sweep& sweep) {
  const auto precision = out.precision(17);
  out << "epsilon,tp,fp,fn,tn,precision,recall,f1,fpr,tpr\n";
  for (const auto& p : sweep.points)
    out << p.epsilon << ',' << p.counts.tp << ',' << p.counts.fp << ',' << p.counts.fn << ',' << p.counts.tn << ','
        << p.metrics.precision << ',' << p.metrics.recall << ',' << p.metrics.f1 << ',' << p.fpr << ',' << p.tpr
        << '\n';
  out.precision(precision);
}

std::vector<std::pair<std::string, double>> read_score_file(std::istream& in, const std::string& source_name) {
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#' || line == "\r") continue;
    const auto f = data::split_csv_line(line);
    if (f.size() != 2) throw data::ParseError(source_name, line_no, "expected traj_id,score");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), v);
    if (ec != std::errc() || ptr != f[1].data() + f[1].size() || !std::isfinite(v)) {
      if (out.empty()) continue;
      throw data::ParseError(source_name, line_no, "bad score '" + f[1] + "'");
    }
    out.emplace_back(f[0], v);
  }
  return out;
}

Sweep evaluate_scores(const std::vector<std::pair<std::string, double>>& scores, const TrajectorySet& test) {
  std::map<std::string, Label> labels;
  for (const auto& t : test.trajectories) labels[t.traj_id] = t.label;
  std::vector<double> s;
  std::vector<Label> l;
  for (const auto& [id, v] : scores) {
    auto it = labels.find(id);
    if (it == labels.end()) throw data::DataError("score for unknown trajectory " + id);
    s.push_back(v);
    l.push_back(it->second);
  }
  if (s.empty()) throw data::DataError("no scores to evaluate");
  std::set<std::string> scored;
  for (const auto& entry : scores) scored.insert(entry.first);
  for (const auto& [id, label] : labels)
    if (label != Label::Unlabeled && !scored.count(id)) throw data::DataError("no score for trajectory " + id);
  return threshold_sweep(s, l, score_grid(s));
}

}  // namespace irlad::eval
