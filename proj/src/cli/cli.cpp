#include "irlad/cli.hpp"

#include "irlad/bench.hpp"
#include "irlad/eval.hpp"
#include "irlad/io.hpp"
#include "irlad/irl.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace irlad::cli {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream os;
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? "," : "") << items[i];
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class M>
Field string_field(M RunConfig::*member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

#define IRLAD_DOUBLE(expr)                                                                             \
  Field {                                                                                              \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = to_double(k, v); },        \
        [](const RunConfig& c) { return fmt(c.expr); }                                                 \
  }
#define IRLAD_INT(type, expr)                                                                          \
  Field {                                                                                              \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = to_int<type>(k, v); },     \
        [](const RunConfig& c) { return std::to_string(c.expr); }                                      \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"geolife_dir", string_field(&RunConfig::geolife_dir)},
      {"tst_file", string_field(&RunConfig::tst_file)},
      {"labels", string_field(&RunConfig::labels)},
      {"demos", string_field(&RunConfig::demos)},
      {"test", string_field(&RunConfig::test)},
      {"donors", string_field(&RunConfig::donors)},
      {"model", string_field(&RunConfig::model)},
      {"input", string_field(&RunConfig::input)},
      {"external_scores", string_field(&RunConfig::external_scores)},
      {"agents",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.agents = split_list(v); },
        [](const RunConfig& c) { return join(c.agents); }}},
      {"train_mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "per_user") c.train_mode = TrainMode::PerUser;
          else if (v == "pooled") c.train_mode = TrainMode::Pooled;
          else throw ConfigError("config key '" + k + "': expected per_user or pooled");
        },
        [](const RunConfig& c) { return std::string(c.train_mode == TrainMode::Pooled ? "pooled" : "per_user"); }}},
      {"resample_dt", IRLAD_DOUBLE(preprocess.resample_dt)},
      {"min_length", IRLAD_INT(std::size_t, preprocess.min_length)},
      {"long_trip_cutoff", IRLAD_DOUBLE(long_trip_cutoff)},
      {"anomaly_rate", IRLAD_DOUBLE(anomaly_rate)},
      {"num_heads", IRLAD_INT(int, train.num_heads)},
      {"prior_variance", IRLAD_DOUBLE(train.prior_variance)},
      {"prior_weight", IRLAD_DOUBLE(train.prior_weight)},
      {"outer_iterations", IRLAD_INT(int, train.outer_iterations)},
      {"inner_iterations", IRLAD_INT(int, train.inner_iterations)},
      {"demo_batch", IRLAD_INT(int, train.demo_batch)},
      {"background_batch", IRLAD_INT(int, train.background_batch)},
      {"rollouts_per_iteration", IRLAD_INT(int, train.rollouts_per_iteration)},
      {"discount", IRLAD_DOUBLE(train.discount)},
      {"reward_learning_rate", IRLAD_DOUBLE(train.reward_learning_rate)},
      {"policy_learning_rate", IRLAD_DOUBLE(train.policy_learning_rate)},
      {"kl_coeff", IRLAD_DOUBLE(train.kl_coeff)},
      {"max_kl", IRLAD_DOUBLE(train.max_kl)},
      {"policy_substeps", IRLAD_INT(int, train.policy_substeps)},
      {"buffer_capacity", IRLAD_INT(std::size_t, train.buffer_capacity)},
      {"trunk_widths",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.trunk_widths.clear();
          for (const auto& w : split_list(v)) c.train.trunk_widths.push_back(to_int<int>(k, w));
        },
        [](const RunConfig& c) { return join(c.train.trunk_widths); }}},
      {"epsilon", IRLAD_DOUBLE(thresholds.epsilon)},
      {"gamma_unc", IRLAD_DOUBLE(thresholds.gamma_unc)},
      {"mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.mode = detect_mode_from_string(v);
          } catch (const std::exception&) {
            throw ConfigError("config key '" + k + "': expected AD or ADU");
          }
        },
        [](const RunConfig& c) { return to_string(c.mode); }}},
      {"bench_rollouts", IRLAD_INT(std::size_t, bench_rollouts)},
      {"bench_outer_iterations", IRLAD_INT(int, bench_outer_iterations)},
      {"bench_num_demos", IRLAD_INT(std::size_t, bench_num_demos)},
      {"output_dir", string_field(&RunConfig::output_dir)},
      {"seed", IRLAD_INT(std::uint64_t, seed)},
  };
  return table;
}

#undef IRLAD_DOUBLE
#undef IRLAD_INT

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data::DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data::DataError("cannot read " + path.string());
  return in;
}

std::string file_safe(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return out.empty() ? "_" : out;
}

bool selected(const RunConfig& cfg, const std::string& agent) {
  return cfg.agents.empty() || std::find(cfg.agents.begin(), cfg.agents.end(), agent) != cfg.agents.end();
}

void apply_label_file(const RunConfig& cfg, TrajectorySet& set) {
  if (cfg.labels.empty()) return;
  auto in = open_in(cfg.labels);
  data::apply_labels(set, data::read_label_file(in, cfg.labels));
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories, const std::string& extension) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? !e.is_directory() : !e.is_regular_file()) continue;
    if (!extension.empty()) {
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext != extension) continue;
    }
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

io::ModelFile load_scoring_model(const RunConfig& cfg) {
  if (cfg.model.empty()) throw ConfigError("no model file given (key 'model')");
  io::ModelFile mf = io::load_model_file(cfg.model);
  if (!mf.stats) throw data::DataError(cfg.model + ": model file has no normalization statistics");
  return mf;
}

}  // namespace

Rng agent_rng(std::uint64_t seed, const std::string& agent) {
  const std::uint64_t h = fnv1a64(agent);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

RunConfig RunConfig::parse(std::istream& in, const std::string& source_name) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse(in, path.string());
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [key, field] : fields()) {
    if (key == "output_dir") continue;
    out += key + "=" + field.get(*this) + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(canonical())); }

void RunConfig::validate() const {
  TrainConfig t = train;
  t.seed = seed;
  t.validate();
  preprocess.validate();
  if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0)) throw ConfigError("anomaly_rate must lie in [0, 1)");
  if (long_trip_cutoff < 0.0) throw ConfigError("long_trip_cutoff must be >= 0");
  if (!(thresholds.gamma_unc >= 0.0)) throw ConfigError("gamma_unc must be >= 0");
  if (bench_rollouts < 2 || bench_num_demos < 1 || bench_outer_iterations < 0)
    throw ConfigError("bench settings out of range");
  for (const std::string* p : {&geolife_dir, &tst_file, &labels, &demos, &test, &donors, &model, &external_scores})
    if (!p->empty() && !fs::exists(*p)) throw ConfigError("path does not exist: " + *p);
  if (!input.empty() && input != "-" && !fs::exists(input)) throw ConfigError("path does not exist: " + input);
}

std::string provenance(const std::string& artifact, const RunConfig& cfg) {
  return "# irlad " + artifact + " format=" + std::to_string(kArtifactVersion) + " seed=" + std::to_string(cfg.seed) +
         " config=" + cfg.hash();
}

fs::path make_run_dir(const RunConfig& cfg, const std::optional<fs::path>& override_dir,
                      std::chrono::system_clock::time_point now) {
  fs::path dir;
  if (override_dir) {
    dir = *override_dir;
  } else {
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    dir = fs::path(cfg.output_dir) / (std::string(stamp) + "_" + cfg.hash());
  }
  fs::create_directories(dir);
  return dir;
}

TrajectorySet load_canonical(const std::string& path_or_dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(path_or_dir)) files = sorted_entries(path_or_dir, false, ".csv");
  else files.push_back(path_or_dir);
  TrajectorySet out;
  out.role = SetRole::Demonstration;
  for (const auto& f : files) {
    auto in = open_in(f);
    TrajectorySet part = data::read_canonical(in, f.string());
    for (auto& t : part.trajectories) out.trajectories.push_back(std::move(t));
  }
  return out;
}

int cmd_ingest(const RunConfig& cfg, const fs::path& run_dir, std::ostream& log) {
  if (cfg.geolife_dir.empty() && cfg.tst_file.empty())
    throw ConfigError("ingest needs geolife_dir or tst_file");
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kArtifactVersion;
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = cfg.hash();
  manifest["files"] = nlohmann::ordered_json::array();
  manifest["rejections"] = nlohmann::ordered_json::array();
  std::size_t total = 0;

  auto reject = [&](const std::string& source, const std::string& track, const std::string& why) {
    manifest["rejections"].push_back({{"source", source}, {"track", track}, {"reason", why}});
  };
  auto accept = [&](const data::RawTrack& raw, const std::string& source, TrajectorySet& set) {
    try {
      raw.validate();
      data::Preprocessed p = data::preprocess(raw, cfg.preprocess);
      if (p.trajectory) set.trajectories.push_back(std::move(*p.trajectory));
      else reject(source, raw.track_id, p.rejection);
    } catch (const data::ParseError&) {
      throw;
    } catch (const data::DataError& e) {
      reject(source, raw.track_id, e.what());
    }
  };
  auto emit = [&](TrajectorySet& set, const std::string& name) {
    apply_label_file(cfg, set);
    if (set.empty()) return;
    auto out = open_out(run_dir / name);
    data::write_canonical(out, set, provenance("canonical", cfg).substr(2));
    manifest["files"].push_back({{"path", name}, {"trajectories", set.size()}});
    total += set.size();
    log << "wrote " << name << " (" << set.size() << " trajectories)\n";
  };

  if (!cfg.geolife_dir.empty()) {
    fs::path root = cfg.geolife_dir;
    if (fs::is_directory(root / "Data")) root /= "Data";
    for (const auto& user_dir : sorted_entries(root, true, "")) {
      const std::string user = user_dir.filename().string();
      if (!selected(cfg, user)) continue;
      const fs::path tracks = fs::is_directory(user_dir / "Trajectory") ? user_dir / "Trajectory" : user_dir;
      TrajectorySet set;
      set.role = SetRole::Demonstration;
      for (const auto& plt : sorted_entries(tracks, false, ".plt")) accept(data::parse_plt(plt, user), plt.string(), set);
      emit(set, file_safe(user) + ".csv");
    }
  }
  if (!cfg.tst_file.empty()) {
    auto in = open_in(cfg.tst_file);
    const data::TstFile parsed = data::parse_tst_file(in, cfg.tst_file);
    manifest["empty_rows"] = parsed.empty_rows;
    TrajectorySet set;
    set.role = SetRole::Demonstration;
    for (const auto& raw : parsed.tracks)
      if (selected(cfg, raw.agent_id)) accept(raw, cfg.tst_file, set);
    if (cfg.long_trip_cutoff > 0.0 && !set.empty()) {
      data::LongTripOptions opts;
      opts.cutoff_seconds = cfg.long_trip_cutoff;
      set = data::label_long_trips(set, opts);
      set.role = SetRole::Demonstration;
    }
    emit(set, "tst.csv");
  }

  manifest["total_trajectories"] = total;
  auto out = open_out(run_dir / "manifest.json");
  out << manifest.dump(1) << '\n';
  if (total == 0) {
    log << "no trajectories accepted\n";
    return kData;
  }
  return kOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& run_dir, std::ostream& log) {
  if (cfg.demos.empty()) throw ConfigError("train needs demos (canonical file or directory)");
  TrajectorySet all = load_canonical(cfg.demos);
  apply_label_file(cfg, all);
  std::map<std::string, TrajectorySet> groups;
  for (auto& t : all.trajectories) {
    if (!selected(cfg, t.agent_id)) continue;
    const std::string key = cfg.train_mode == TrainMode::Pooled ? "pool" : t.agent_id;
    groups[key].role = SetRole::Demonstration;
    groups[key].trajectories.push_back(std::move(t));
  }
  if (groups.empty()) throw data::DataError("no demonstrations to train on");

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  for (const auto& [agent, demos] : groups) {
    Rng rng = agent_rng(cfg.seed, agent);
    GaussianTrainResult r = train(demos, tc, rng);
    io::ModelFile mf;
    mf.stats = fit_stats(r.model, demos);
    mf.reward = std::move(r.model);
    mf.policy = std::move(r.policy);
    mf.seed = cfg.seed;
    mf.config_hash = cfg.hash();
    mf.agent_id = agent;
    const std::string stem = file_safe(agent);
    io::save_model_file(run_dir / ("model_" + stem + ".json"), mf);
    auto out = open_out(run_dir / ("train_log_" + stem + ".csv"));
    out << provenance("train-log", cfg) << '\n';
    write_training_log(out, r.log);
    log << "trained " << agent << " on " << demos.size() << " trajectories -> model_" << stem << ".json\n";
  }
  return kOk;
}

int cmd_score(const RunConfig& cfg, std::istream& in, std::ostream& out) {
  if (cfg.input.empty()) throw ConfigError("score needs input (file or '-')");
  const io::ModelFile mf = load_scoring_model(cfg);
  out << provenance("scores", cfg) << '\n';
  write_score_header(out);
  if (cfg.input == "-") {
    data::CanonicalStream stream("<stdin>");
    std::map<std::string, std::size_t> steps;
    std::string line;
    while (std::getline(in, line)) {
      const auto row = stream.feed(line);
      if (!row) continue;
      const std::size_t step = steps[row->agent_id + '\x1f' + row->traj_id]++;
      write_score_row(out, row->traj_id, step, row->obs,
                      score_point(mf.reward, *mf.stats, row->obs, cfg.thresholds, cfg.mode));
      out.flush();
    }
    return kOk;
  }
  const TrajectorySet set = load_canonical(cfg.input);
  for (const auto& t : set.trajectories)
    for (std::size_t i = 0; i < t.size(); ++i)
      write_score_row(out, t.traj_id, i, t.observations[i],
                      score_point(mf.reward, *mf.stats, t.observations[i], cfg.thresholds, cfg.mode));
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const fs::path& run_dir, std::ostream& log) {
  if (cfg.test.empty()) throw ConfigError("eval needs test (canonical file or directory)");
  const io::ModelFile mf = load_scoring_model(cfg);
  TrajectorySet test = load_canonical(cfg.test);
  test.role = SetRole::Test;
  apply_label_file(cfg, test);
  if (cfg.long_trip_cutoff > 0.0) {
    data::LongTripOptions opts;
    opts.cutoff_seconds = cfg.long_trip_cutoff;
    test = data::label_long_trips(test, opts);
  }
  if (!cfg.donors.empty()) {
    Rng rng(cfg.seed);
    test = data::inject_anomalies(test, load_canonical(cfg.donors), cfg.anomaly_rate, rng);
  }
  if (test.empty()) throw data::DataError("empty test set");

  const eval::RunReport report = eval::evaluate_run(mf.reward, *mf.stats, test, cfg.mode, cfg.thresholds);
  {
    auto out = open_out(run_dir / "report.csv");
    out << provenance("report", cfg) << '\n';
    eval::write_report_csv(out, report);
  }
  {
    auto out = open_out(run_dir / "sweep.csv");
    out << provenance("sweep", cfg) << '\n';
    eval::write_sweep_csv(out, report.sweep);
  }
  {
    auto out = open_out(run_dir / "summary.txt");
    out << provenance("summary", cfg) << '\n';
    eval::write_summary(out, report);
  }
  eval::write_summary(log, report);
  if (!cfg.external_scores.empty()) {
    auto in = open_in(cfg.external_scores);
    const eval::Sweep ext = eval::evaluate_scores(eval::read_score_file(in, cfg.external_scores), test);
    auto out = open_out(run_dir / "external_sweep.csv");
    out << provenance("external-sweep", cfg) << '\n';
    eval::write_sweep_csv(out, ext);
    log << "external detector sweep area " << ext.area << '\n';
  }
  return kOk;
}

int cmd_bench_oracle(const RunConfig& cfg, const fs::path& run_dir, bool corrupt_gradient, std::ostream& log) {
  struct Check {
    std::string name;
    double value;
    std::string relation;
    double threshold;
    bool pass;
  };
  std::vector<Check> checks;
  using clock = std::chrono::steady_clock;

  auto t0 = clock::now();
  Rng gradient_rng = agent_rng(cfg.seed, "gradient_agreement");
  const bench::GradientCheck g = bench::random_gradient_check(
      cfg.bench_rollouts, gradient_rng, corrupt_gradient ? bench::Corruption::IgnoreProposal : bench::Corruption::None);
  checks.push_back({"gradient_agreement_max_z", g.max_z, "<=", 3.0, g.pass});
  log << "gradient agreement: " << std::chrono::duration<double>(clock::now() - t0).count() << " s\n";

  bench::GridBenchConfig grid;
  grid.num_demos = cfg.bench_num_demos;
  grid.train.outer_iterations = cfg.bench_outer_iterations;
  t0 = clock::now();
  Rng rng(cfg.seed);
  const bench::RecoveryResult rec = bench::reward_recovery(grid, rng);
  checks.push_back({"reward_recovery_spearman", rec.spearman, ">=", 0.7, rec.spearman >= 0.7});
  log << "reward recovery: " << std::chrono::duration<double>(clock::now() - t0).count() << " s\n";

  t0 = clock::now();
  const bench::DetectionResult det = bench::synthetic_detection(grid, rec.trained.model, rec.demos, rng);
  checks.push_back({"synthetic_detection_area", det.area, ">=", 0.9, det.area >= 0.9});
  log << "synthetic detection: " << std::chrono::duration<double>(clock::now() - t0).count() << " s\n";

  auto out = open_out(run_dir / "bench_report.csv");
  out << provenance("bench-report", cfg) << '\n';
  out << "check,value,relation,threshold,result\n";
  out.precision(17);
  bool all = true;
  for (const auto& c : checks) {
    out << c.name << ',' << c.value << ',' << c.relation << ',' << c.threshold << ',' << (c.pass ? "PASS" : "FAIL")
        << '\n';
    log << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << c.value << " (" << c.relation << ' ' << c.threshold
        << ")\n";
    all = all && c.pass;
  }
  return all ? kOk : kAcceptance;
}

int run(int argc, char** argv) {
  CLI::App app{"Anomaly detection with bootstrapped inverse reinforcement learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "irlad 1");

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string run_dir_override;
  std::string score_out;
  bool corrupt = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override, key=value (repeatable)");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--run-dir", run_dir_override, "write outputs here instead of a fresh run directory");
  };
  auto* ingest = app.add_subcommand("ingest", "parse GeoLife / taxi-trip inputs into canonical trajectories");
  auto* train_cmd = app.add_subcommand("train", "fit reward ensembles (per user or pooled)");
  auto* score = app.add_subcommand("score", "per-observation scores for a canonical file or stdin");
  auto* evaluate = app.add_subcommand("eval", "trajectory-level detection report");
  auto* bench_cmd = app.add_subcommand("bench-oracle", "gridworld benchmarks with known ground truth");
  for (auto* sub : {ingest, train_cmd, score, evaluate, bench_cmd}) common(sub);
  std::string model_opt, input_opt, test_opt;
  score->add_option("--model", model_opt, "model file");
  score->add_option("--input", input_opt, "canonical file, or - for stdin");
  score->add_option("--out", score_out, "output file, or - for stdout (default: run directory)");
  evaluate->add_option("--model", model_opt, "model file");
  evaluate->add_option("--test", test_opt, "labelled canonical test file or directory");
  bench_cmd->add_flag("--corrupt-gradient", corrupt, "drop the proposal density from the importance weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(trim(kv.substr(0, eq)), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (!model_opt.empty()) cfg.model = model_opt;
    if (!input_opt.empty()) cfg.input = input_opt;
    if (!test_opt.empty()) cfg.test = test_opt;
    cfg.validate();
    const std::optional<fs::path> override_dir =
        run_dir_override.empty() ? std::nullopt : std::optional<fs::path>(run_dir_override);

    if (score->parsed()) {
      const bool to_stdout = score_out == "-" || (score_out.empty() && cfg.input == "-");
      if (to_stdout) return cmd_score(cfg, std::cin, std::cout);
      const fs::path target = score_out.empty() ? make_run_dir(cfg, override_dir) / "scores.csv" : fs::path(score_out);
      auto out = open_out(target);
      const int rc = cmd_score(cfg, std::cin, out);
      std::cerr << "wrote " << target.string() << '\n';
      return rc;
    }
    const fs::path dir = make_run_dir(cfg, override_dir);
    {
      auto out = open_out(dir / "config.txt");
      out << provenance("config", cfg) << '\n' << cfg.canonical();
    }
    std::cerr << "run directory " << dir.string() << '\n';
    if (ingest->parsed()) return cmd_ingest(cfg, dir, std::cerr);
    if (train_cmd->parsed()) return cmd_train(cfg, dir, std::cerr);
    if (evaluate->parsed()) return cmd_eval(cfg, dir, std::cout);
    return cmd_bench_oracle(cfg, dir, corrupt, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace irlad::cli
