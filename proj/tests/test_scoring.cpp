#include "doctest.h"
#include "support.hpp"

#include "irlad/scoring.hpp"

#include <sstream>

using namespace irlad;
using namespace irlad::testing;

namespace {

// Heads read longitude directly: head k outputs lon + offsets[k].
BootstrapRewardModel lon_model(const std::vector<double>& offsets) {
  BootstrapRewardModel m = BootstrapRewardModel::initialize(3, static_cast<int>(offsets.size()), 0.1, {});
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    auto& h = m.mutable_params().heads[k];
    h.weight.setZero();
    h.weight(0, 0) = 1.0;
    h.bias.setConstant(offsets[k]);
  }
  return m;
}

StateAction at_lon(double lon) {
  StateAction o;
  o.state = make_state(lon, 0.0, lon, 0.0, 0.0);
  return o;
}

}  // namespace

TEST_CASE("normalization statistics use the population spread") {
  const NormalizationStats s = fit_stats(std::vector<double>{0.0, 2.0});
  CHECK(s.mean == 1.0);
  CHECK(s.stddev == 1.0);
  CHECK(s.count == 2);
  CHECK_FALSE(s.floored);
  CHECK(normalize(s, -1.0) == -2.0);
}

TEST_CASE("constant rewards floor the spread and give zero normality") {
  const NormalizationStats s = fit_stats(std::vector<double>{0.3, 0.3, 0.3});
  CHECK(s.floored);
  CHECK(s.stddev == kStdFloor);
  CHECK(normalize(s, 5.0) == 0.0);
  CHECK(normalize(s, 0.3) == 0.0);
}

TEST_CASE("model statistics cover every demonstration observation") {
  Rng rng(1);
  const BootstrapRewardModel m = lon_model({0.0, 1.0});
  const TrajectorySet demos = random_set(rng, 3, 2, 5);
  std::vector<double> all;
  for (const auto& t : demos.trajectories)
    for (const auto& o : t.observations) all.push_back(mean_reward(m, o.state, o.action));
  const NormalizationStats a = fit_stats(m, demos), b = fit_stats(all);
  CHECK(a.count == all.size());
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-13));
  CHECK(a.stddev == doctest::Approx(b.stddev).epsilon(1e-9));
}

TEST_CASE("decision rules") {
  const Thresholds th;  // epsilon -2, gamma 1.5
  CHECK(decide(-2.0, 0.0, th, DetectMode::AD) == Flag::Anomaly);
  CHECK(decide(-2.0, 1.5, th, DetectMode::ADU) == Flag::Anomaly);
  CHECK(decide(-1.99, 0.0, th, DetectMode::ADU) == Flag::Normal);
  CHECK(decide(-3.0, 1.6, th, DetectMode::ADU) == Flag::UncertainAnomaly);
  CHECK(decide(-3.0, 1.6, th, DetectMode::AD) == Flag::Anomaly);
  CHECK(decide(std::nan(""), 0.0, th, DetectMode::AD) == Flag::Normal);
  CHECK(to_string(Flag::UncertainAnomaly) == "uncertain");
  CHECK(detect_mode_from_string("AD") == DetectMode::AD);
  CHECK(detect_mode_from_string("ADU") == DetectMode::ADU);
  CHECK_THROWS(detect_mode_from_string("x"));
}

TEST_CASE("ADU flags are a subset of AD flags") {
  for_all(500, 2, [](Rng& rng, int) {
    const Thresholds th{uniform(rng, -4.0, 0.0), uniform(rng, 0.0, 3.0)};
    const double n = normal(rng, 3.0), u = std::abs(normal(rng, 2.0));
    if (decide(n, u, th, DetectMode::ADU) == Flag::Anomaly) CHECK(decide(n, u, th, DetectMode::AD) == Flag::Anomaly);
  });
}

TEST_CASE("point detection with a two-head model") {
  const BootstrapRewardModel m = lon_model({-1.0, 1.0});  // mean lon, std 1
  const NormalizationStats stats{0.0, 1.0, 10, false};
  const Detection d = detect(m, stats, at_lon(-2.0), Thresholds{}, DetectMode::ADU);
  CHECK(d.normality == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(d.uncertainty == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.flag == Flag::Anomaly);
  const BootstrapRewardModel wide = lon_model({-2.0, 2.0});
  CHECK(detect(wide, stats, at_lon(-2.0), Thresholds{}, DetectMode::ADU).flag == Flag::UncertainAnomaly);
}

TEST_CASE("trajectory normality is the mean point normality") {
  const BootstrapRewardModel m = lon_model({0.0});
  const NormalizationStats stats{0.0, 1.0, 2, false};
  Trajectory t;
  t.traj_id = "x";
  t.observations = {at_lon(-3.0), at_lon(1.0)};
  CHECK(traj_normality(m, stats, t) == doctest::Approx(-1.0));
  const TrajectoryDetection det = detect(m, stats, t, Thresholds{}, DetectMode::AD);
  CHECK(det.trajectory.normality == doctest::Approx(-1.0));
  CHECK(det.points[0].flag == Flag::Anomaly);
  CHECK(det.points[1].flag == Flag::Normal);
  CHECK(det.trajectory.flag == Flag::Normal);
  CHECK_THROWS(traj_normality(m, stats, Trajectory{}));
}

TEST_CASE("normality is invariant to a constant reward shift") {
  for_all(20, 3, [](Rng& rng, int) {
    BootstrapRewardModel m = BootstrapRewardModel::initialize(rng(), 3, 0.1, {6});
    const TrajectorySet demos = random_set(rng, 3, 3, 6);
    const Trajectory probe = random_trajectory(rng, 4);
    BootstrapRewardModel shifted = m;
    const double c = normal(rng, 10.0);
    for (auto& h : shifted.mutable_params().heads) h.bias.array() += c;
    const NormalizationStats s1 = fit_stats(m, demos), s2 = fit_stats(shifted, demos);
    for (const auto& o : probe.observations) {
      if (s1.floored) continue;
      CHECK(normality(m, s1, o.state, o.action) ==
            doctest::Approx(normality(shifted, s2, o.state, o.action)).epsilon(1e-6));
    }
  });
}

TEST_CASE("score rows from a trajectory and from single points agree") {
  Rng rng(4);
  const BootstrapRewardModel m = BootstrapRewardModel::initialize(5, 4, 0.1, {6});
  const Trajectory t = random_trajectory(rng, 5, "u", "trip");
  const NormalizationStats s = fit_stats(m, TrajectorySet{{t}, SetRole::Demonstration});
  std::ostringstream whole, pointwise;
  write_score_header(whole);
  write_score_rows(whole, t, detect(m, s, t, Thresholds{}, DetectMode::ADU));
  write_score_header(pointwise);
  for (std::size_t i = 0; i < t.size(); ++i)
    write_score_row(pointwise, t.traj_id, i, t.observations[i],
                    score_point(m, s, t.observations[i], Thresholds{}, DetectMode::ADU));
  CHECK(whole.str() == pointwise.str());
  std::istringstream in(whole.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "traj_id,step,t_seconds,lon,lat,reward_mean,reward_std,normality,flag");
  std::getline(in, line);
  CHECK(line.rfind("trip,0,0,", 0) == 0);
}
