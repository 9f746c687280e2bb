// Command-line surface: flat key = value run configuration, run directories
// named by time and configuration hash, and the ingest / train / score /
// eval / bench-oracle commands.
#pragma once

#include "irlad/core.hpp"
#include "irlad/data.hpp"
#include "irlad/scoring.hpp"

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace irlad::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kAcceptance = 3 };

inline constexpr int kArtifactVersion = 1;

enum class TrainMode { PerUser, Pooled };

struct RunConfig {
  // inputs
  std::string geolife_dir;
  std::string tst_file;
  std::string labels;
  std::string demos;  // canonical file or directory of them
  std::string test;
  std::string donors;
  std::string model;
  std::string input;  // "-" reads stdin
  std::string external_scores;
  std::vector<std::string> agents;  // empty: all

  TrainMode train_mode = TrainMode::PerUser;
  data::PreprocessConfig preprocess;
  double long_trip_cutoff = 0.0;  // 0 disables long-trip labeling
  double anomaly_rate = 0.1;
  TrainConfig train;
  Thresholds thresholds;
  DetectMode mode = DetectMode::ADU;

  std::size_t bench_rollouts = 10000;
  int bench_outer_iterations = 200;
  std::size_t bench_num_demos = 500;

  std::string output_dir = "runs";
  std::uint64_t seed = 0;

  /// Throws ConfigError for an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  /// `key = value` lines; '#' starts a comment.
  static RunConfig parse(std::istream& in, const std::string& source_name = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  /// Sorted `key=value` lines of every setting except output_dir.
  std::string canonical() const;
  std::string hash() const;
  void validate() const;
};

/// `# irlad <artifact> format=<v> seed=<seed> config=<hash>`
std::string provenance(const std::string& artifact, const RunConfig& cfg);

/// output_dir/<YYYYmmdd-HHMMSS>_<hash>, or `override_dir`; created if missing.
std::filesystem::path make_run_dir(const RunConfig& cfg, const std::optional<std::filesystem::path>& override_dir,
                                   std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

/// Generator for one agent's training run (or one benchmark check).
Rng agent_rng(std::uint64_t seed, const std::string& agent);

/// Canonical CSV files (one per file argument, or every *.csv of a directory
/// in name order) concatenated.
TrajectorySet load_canonical(const std::string& path_or_dir);

int cmd_ingest(const RunConfig& cfg, const std::filesystem::path& run_dir, std::ostream& log);
int cmd_train(const RunConfig& cfg, const std::filesystem::path& run_dir, std::ostream& log);
/// Writes score rows to `out`. With input "-" rows are read from `in` and
/// emitted one at a time.
int cmd_score(const RunConfig& cfg, std::istream& in, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& run_dir, std::ostream& log);
int cmd_bench_oracle(const RunConfig& cfg, const std::filesystem::path& run_dir, bool corrupt_gradient,
                     std::ostream& log);

/// Full command line; maps failures to exit codes.
int run(int argc, char** argv);

}  // namespace irlad::cli
