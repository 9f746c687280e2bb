#include "doctest.h"
#include "cli_fixture.hpp"
#include "support.hpp"

#include "irlad/cli.hpp"
#include "irlad/data.hpp"
#include "irlad/io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace irlad;
using namespace irlad::cli;
using namespace irlad::testing;
namespace fs = std::filesystem;

namespace {

std::ostringstream sink;

RunConfig small_config() {
  RunConfig c;
  c.preprocess.min_length = 10;
  c.train.num_heads = 2;
  c.train.outer_iterations = 2;
  c.train.inner_iterations = 2;
  c.train.rollouts_per_iteration = 3;
  c.train.demo_batch = 2;
  c.train.background_batch = 4;
  c.train.trunk_widths = {6};
  c.seed = 5;
  return c;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "irlad");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("config parsing, canonical form and hash") {
  std::istringstream in("# comment\nseed = 7\nnum_heads=3\n\nmode = AD\ntrunk_widths = 8, 4\nagents = 000,001\n");
  const RunConfig c = RunConfig::parse(in);
  CHECK(c.seed == 7);
  CHECK(c.train.num_heads == 3);
  CHECK(c.mode == DetectMode::AD);
  CHECK(c.train.trunk_widths == std::vector<int>{8, 4});
  CHECK(c.agents == std::vector<std::string>{"000", "001"});

  const std::vector<std::string> keys = lines(c.canonical());
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(std::find(keys.begin(), keys.end(), "seed=7") != keys.end());
  CHECK(c.hash().size() == 16);
  CHECK(c.hash() == hex64(fnv1a64(c.canonical())));

  RunConfig d = c;
  d.output_dir = "elsewhere";
  CHECK(d.hash() == c.hash());
  d.set("epsilon", "-2.5");
  CHECK(d.thresholds.epsilon == -2.5);
  CHECK(d.hash() != c.hash());

  std::istringstream round(c.canonical());
  CHECK(RunConfig::parse(round).hash() == c.hash());

  CHECK_THROWS_AS(d.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(d.set("num_heads", "three"), ConfigError);
  CHECK_THROWS_AS(d.set("mode", "sometimes"), ConfigError);
  std::istringstream bad("seed 7\n");
  CHECK_THROWS_AS(RunConfig::parse(bad), ConfigError);
}

TEST_CASE("validation rejects missing paths and out-of-range values") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.demos = "/nonexistent/irlad/path";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  RunConfig r;
  r.anomaly_rate = 1.0;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.anomaly_rate = 0.0;
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("run directory is named by time and configuration hash") {
  TempDir tmp("rundir");
  RunConfig c;
  c.output_dir = tmp.path().string();
  const auto when = std::chrono::system_clock::from_time_t(1700000000);  // 2023-11-14 22:13:20 UTC
  const fs::path dir = make_run_dir(c, std::nullopt, when);
  CHECK(dir.filename().string() == "20231114-221320_" + c.hash());
  CHECK(fs::is_directory(dir));
  CHECK(make_run_dir(c, tmp / "fixed", when) == tmp / "fixed");
  CHECK(provenance("scores", c) == "# irlad scores format=1 seed=0 config=" + c.hash());
}

TEST_CASE("ingest writes one canonical file per user and is reproducible") {
  TempDir tmp("ingest");
  write_geolife(tmp.path(), {"000", "001", "002"}, 2, 30);
  RunConfig c = small_config();
  c.geolife_dir = tmp.path().string();
  REQUIRE(cmd_ingest(c, tmp / "a", sink) == kOk);
  REQUIRE(cmd_ingest(c, tmp / "b", sink) == kOk);
  for (const char* f : {"000.csv", "001.csv", "002.csv", "manifest.json"}) {
    REQUIRE(fs::exists(tmp / "a" / f));
    CHECK(slurp(tmp / "a" / f) == slurp(tmp / "b" / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(tmp / "a" / "manifest.json"));
  CHECK(manifest["total_trajectories"] == 6);
  CHECK(manifest["files"].size() == 3);
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["config_hash"] == c.hash());
  const std::string text = slurp(tmp / "a" / "001.csv");
  CHECK(text.rfind(provenance("canonical", c) + "\n", 0) == 0);
  std::ifstream in(tmp / "a" / "001.csv");
  const TrajectorySet s = data::read_canonical(in);
  CHECK(s.size() == 2);
  for (const auto& t : s.trajectories) {
    CHECK(t.agent_id == "001");
    CHECK(t.size() == 30);
    CHECK_FALSE(check_trajectory(t).has_value());
  }
}

TEST_CASE("ingest records rejections and fails on an empty input") {
  TempDir tmp("empty");
  fs::create_directories(tmp / "geo" / "Data");
  RunConfig c = small_config();
  c.geolife_dir = (tmp / "geo").string();
  CHECK(cmd_ingest(c, tmp / "out", sink) == kData);
  const auto manifest = nlohmann::json::parse(slurp(tmp / "out" / "manifest.json"));
  CHECK(manifest["total_trajectories"] == 0);

  write_geolife(tmp / "short", {"000"}, 1, 5);
  c.geolife_dir = (tmp / "short").string();
  CHECK(cmd_ingest(c, tmp / "out2", sink) == kData);
  const auto m2 = nlohmann::json::parse(slurp(tmp / "out2" / "manifest.json"));
  CHECK(m2["rejections"].size() == 1);
}

TEST_CASE("taxi-trip ingest with long-trip labeling") {
  TempDir tmp("tst");
  {
    std::ofstream out(tmp / "trips.csv");
    out << "TRIP_ID,TAXI_ID,TIMESTAMP,POLYLINE\n";
    for (int trip = 0; trip < 4; ++trip) {
      const int points = trip == 3 ? 240 : 40;  // 59.75 min versus 9.75 min
      out << "T" << trip << "," << 100 + trip << "," << 1372636858 + trip << ",\"[";
      for (int i = 0; i < points; ++i) out << (i ? "," : "") << "[" << -8.6 + 1e-4 * i << "," << 41.1 + 1e-4 * trip << "]";
      out << "]\"\n";
    }
    out << "T9,1,0,\"[]\"\n";
  }
  RunConfig c = small_config();
  c.tst_file = (tmp / "trips.csv").string();
  c.long_trip_cutoff = 3000.0;
  REQUIRE(cmd_ingest(c, tmp / "out", sink) == kOk);
  std::ifstream in(tmp / "out" / "tst.csv");
  const TrajectorySet s = data::read_canonical(in);
  REQUIRE(s.size() == 4);
  CHECK(s.trajectories[3].label == Label::Anomaly);
  CHECK(s.trajectories[3].size() == s.trajectories[0].size());
  CHECK(s.trajectories[0].label == Label::Normal);
  CHECK(nlohmann::json::parse(slurp(tmp / "out" / "manifest.json"))["empty_rows"] == 1);
}

TEST_CASE("train, score and eval end to end") {
  TempDir tmp("pipeline");
  write_geolife(tmp.path(), {"000", "001"}, 3, 24);
  RunConfig c = small_config();
  c.geolife_dir = tmp.path().string();
  REQUIRE(cmd_ingest(c, tmp / "ingest", sink) == kOk);

  RunConfig t = c;
  t.demos = (tmp / "ingest").string();
  REQUIRE(cmd_train(t, tmp / "per_user", sink) == kOk);
  CHECK(fs::exists(tmp / "per_user" / "model_000.json"));
  CHECK(fs::exists(tmp / "per_user" / "model_001.json"));
  CHECK(fs::exists(tmp / "per_user" / "train_log_000.csv"));
  const io::ModelFile m0 = io::load_model_file(tmp / "per_user" / "model_000.json");
  const io::ModelFile m1 = io::load_model_file(tmp / "per_user" / "model_001.json");
  CHECK(m0.agent_id == "000");
  CHECK(m0.seed == 5);
  CHECK(m0.config_hash == t.hash());
  REQUIRE(m0.stats);
  REQUIRE(m0.policy);
  CHECK_FALSE(m0.reward == m1.reward);
  const std::string log = slurp(tmp / "per_user" / "train_log_000.csv");
  CHECK(log.rfind(provenance("train-log", t) + "\n", 0) == 0);
  CHECK(lines(log).size() == 2 + 2);

  RunConfig pooled = t;
  pooled.train_mode = TrainMode::Pooled;
  REQUIRE(cmd_train(pooled, tmp / "pooled", sink) == kOk);
  int models = 0;
  for (const auto& e : fs::directory_iterator(tmp / "pooled"))
    models += e.path().filename().string().rfind("model_", 0) == 0;
  CHECK(models == 1);
  CHECK(fs::exists(tmp / "pooled" / "model_pool.json"));

  // Stream and file scoring agree row for row.
  RunConfig s = c;
  s.model = (tmp / "per_user" / "model_000.json").string();
  s.input = (tmp / "ingest" / "001.csv").string();
  std::istringstream unused;
  std::ostringstream file_out, stream_out;
  REQUIRE(cmd_score(s, unused, file_out) == kOk);
  RunConfig st = s;
  st.input = "-";
  std::istringstream piped(slurp(tmp / "ingest" / "001.csv"));
  REQUIRE(cmd_score(st, piped, stream_out) == kOk);
  const auto a = lines(file_out.str()), b = lines(stream_out.str());
  CHECK(a.size() == 2 + 3 * 24);
  CHECK(std::equal(a.begin() + 1, a.end(), b.begin() + 1, b.end()));
  CHECK(a[1] == "traj_id,step,t_seconds,lon,lat,reward_mean,reward_std,normality,flag");

  std::istringstream empty("");
  std::ostringstream empty_out;
  REQUIRE(cmd_score(st, empty, empty_out) == kOk);
  CHECK(lines(empty_out.str()).size() == 2);

  RunConfig flagged = s;
  flagged.mode = DetectMode::AD;
  flagged.thresholds.epsilon = 1e9;
  std::ostringstream all_flags;
  cmd_score(flagged, unused, all_flags);
  const auto rows = lines(all_flags.str());
  for (std::size_t i = 2; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].rfind(',') + 1) == "anomaly");

  // Evaluation with donor injection.
  RunConfig e = c;
  e.model = s.model;
  e.test = (tmp / "ingest" / "000.csv").string();
  e.donors = (tmp / "ingest" / "001.csv").string();
  e.anomaly_rate = 0.25;
  std::ostringstream summary;
  REQUIRE(cmd_eval(e, tmp / "eval", summary) == kOk);
  const auto report = lines(slurp(tmp / "eval" / "report.csv"));
  CHECK(report[0] == provenance("report", e));
  CHECK(report.size() == 2 + 4);
  CHECK(fs::exists(tmp / "eval" / "sweep.csv"));
  CHECK(summary.str().find("precision") != std::string::npos);
}

TEST_CASE("zero outer iterations store the initial reward model") {
  TempDir tmp("init");
  write_geolife(tmp.path(), {"007"}, 2, 15);
  RunConfig c = small_config();
  c.geolife_dir = tmp.path().string();
  REQUIRE(cmd_ingest(c, tmp / "ingest", sink) == kOk);
  c.demos = (tmp / "ingest").string();
  c.train.outer_iterations = 0;
  REQUIRE(cmd_train(c, tmp / "out", sink) == kOk);
  const io::ModelFile m = io::load_model_file(tmp / "out" / "model_007.json");
  Rng rng = agent_rng(c.seed, "007");
  const BootstrapRewardModel init = BootstrapRewardModel::initialize(rng(), 2, 0.1, {6});
  CHECK(m.reward.params().flatten() == init.params().flatten());
}

TEST_CASE("exit codes of the command line") {
  TempDir tmp("exit");
  CHECK(run_args({}) == kUsage);
  CHECK(run_args({"frobnicate"}) == kUsage);
  CHECK(run_args({"ingest", "--set", "no_such_key=1", "--run-dir", (tmp / "x").string()}) == kUsage);
  CHECK(run_args({"ingest", "--set", "geolife_dir=/nonexistent/irlad", "--run-dir", (tmp / "x").string()}) ==
        kUsage);
  fs::create_directories(tmp / "geo");
  CHECK(run_args({"ingest", "--set", "geolife_dir=" + (tmp / "geo").string(), "--run-dir", (tmp / "y").string()}) ==
        kData);
  CHECK(fs::exists(tmp / "y" / "config.txt"));
  {
    std::ofstream cfg(tmp / "run.cfg");
    cfg << "bench_rollouts = 2000\nbench_outer_iterations = 1\nbench_num_demos = 20\n";
  }
  CHECK(run_args({"bench-oracle", "-c", (tmp / "run.cfg").string(), "--corrupt-gradient", "--run-dir",
                  (tmp / "bench").string()}) == kAcceptance);
  const std::string report = slurp(tmp / "bench" / "bench_report.csv");
  CHECK(report.find("gradient_agreement_max_z") != std::string::npos);
  CHECK(report.find("FAIL") != std::string::npos);
}
