#include "irlad/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace irlad::data {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool to_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

template <class Int>
bool to_int(const std::string& text, Int& out) {
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return !t.empty() && ec == std::errc() && ptr == t.data() + t.size();
}

double interpolate(double a, double b, double frac) { return a + (b - a) * frac; }

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

void RawTrack::validate() const {
  if (points.size() < 2) throw TooShort("track " + track_id + " has fewer than 2 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.t) || !std::isfinite(p.lon) || !std::isfinite(p.lat))
      throw DataError("track " + track_id + ": non-finite value at point " + std::to_string(i));
    if (i > 0 && !(p.t > points[i - 1].t))
      throw DataError("track " + track_id + ": timestamps not increasing at point " + std::to_string(i));
  }
}

double civil_seconds(const std::string& date, const std::string& time) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char dash1 = 0, dash2 = 0, c1 = 0, c2 = 0;
  std::istringstream ds(trim(date)), ts(trim(time));
  if (!(ds >> y >> dash1 >> mo >> dash2 >> d) || dash1 != '-' || dash2 != '-' || !ds.eof())
    throw DataError("bad date '" + date + "'");
  if (!(ts >> h >> c1 >> mi >> c2 >> sec) || c1 != ':' || c2 != ':' || !ts.eof())
    throw DataError("bad time '" + time + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec < 0.0 || sec >= 61.0) throw DataError("bad timestamp '" + date + " " + time + "'");
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

RawTrack parse_plt(std::istream& in, const std::string& agent_id, const std::string& track_id,
                   const std::string& source_name) {
  RawTrack track{agent_id, track_id, {}, TrackSource::GeoLife, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no <= 6) continue;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 7) throw ParseError(source_name, line_no, "expected 7 fields, got " + std::to_string(f.size()));
    RawPoint p;
    if (!to_double(f[0], p.lat)) throw ParseError(source_name, line_no, "bad latitude '" + f[0] + "'");
    if (!to_double(f[1], p.lon)) throw ParseError(source_name, line_no, "bad longitude '" + f[1] + "'");
    try {
      p.t = civil_seconds(f[5], f[6]);
    } catch (const DataError& e) {
      throw ParseError(source_name, line_no, e.what());
    }
    if (!track.points.empty() && !(p.t > track.points.back().t)) continue;
    track.points.push_back(p);
  }
  if (track.points.size() < 2) throw TooShort(source_name + ": fewer than 2 valid points");
  return track;
}

RawTrack parse_plt(const std::filesystem::path& file, const std::string& agent_id) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  return parse_plt(in, agent_id, file.stem().string(), file.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::vector<std::pair<double, double>> parse_polyline(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed polyline: ") + e.what());
  }
  if (!j.is_array()) throw DataError("polyline is not an array");
  std::vector<std::pair<double, double>> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw DataError("polyline entries must be [lon, lat] pairs");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

TstColumns TstColumns::from_header(const std::string& header_line) {
  TstColumns c;
  c.names = split_csv_line(header_line);
  for (std::size_t i = 0; i < c.names.size(); ++i) {
    c.names[i] = trim(c.names[i]);
    const auto& n = c.names[i];
    const int idx = static_cast<int>(i);
    if (n == "POLYLINE") c.polyline = idx;
    else if (n == "TRIP_ID") c.trip_id = idx;
    else if (n == "TAXI_ID") c.taxi_id = idx;
    else if (n == "TIMESTAMP") c.timestamp = idx;
  }
  if (c.polyline < 0) throw DataError("taxi-trip header has no POLYLINE column");
  return c;
}

RawTrack parse_tst(const std::vector<std::string>& fields, const TstColumns& cols,
                   const std::string& source_name, std::size_t line) {
  if (fields.size() != cols.names.size())
    throw ParseError(source_name, line,
                     "expected " + std::to_string(cols.names.size()) + " fields, got " + std::to_string(fields.size()));
  RawTrack track;
  track.source = TrackSource::TST;
  track.agent_id = cols.taxi_id >= 0 ? trim(fields[static_cast<std::size_t>(cols.taxi_id)]) : "pool";
  track.track_id = cols.trip_id >= 0 ? trim(fields[static_cast<std::size_t>(cols.trip_id)]) : "trip" + std::to_string(line);
  double start = 0.0;
  if (cols.timestamp >= 0 && !to_double(fields[static_cast<std::size_t>(cols.timestamp)], start))
    throw ParseError(source_name, line, "bad TIMESTAMP '" + fields[static_cast<std::size_t>(cols.timestamp)] + "'");
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (static_cast<int>(i) != cols.polyline) track.annotations[cols.names[i]] = fields[i];
  std::vector<std::pair<double, double>> poly;
  try {
    poly = parse_polyline(fields[static_cast<std::size_t>(cols.polyline)]);
  } catch (const DataError& e) {
    throw ParseError(source_name, line, e.what());
  }
  if (poly.empty()) throw TooShort(source_name + ":" + std::to_string(line) + ": empty polyline");
  for (std::size_t i = 0; i < poly.size(); ++i)
    track.points.push_back(RawPoint{start + kTstInterval * static_cast<double>(i), poly[i].first, poly[i].second});
  return track;
}

TstFile parse_tst_file(std::istream& in, const std::string& source_name) {
  TstFile out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<TstColumns> cols;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!cols) {
      cols = TstColumns::from_header(line);
      continue;
    }
    try {
      out.tracks.push_back(parse_tst(split_csv_line(line), *cols, source_name, line_no));
    } catch (const TooShort&) {
      ++out.empty_rows;
    }
  }
  return out;
}

void PreprocessConfig::validate() const {
  if (!(resample_dt > 0.0) || !std::isfinite(resample_dt)) throw ConfigError("resample_dt must be positive");
  if (min_length < 2) throw ConfigError("min_length must be at least 2");
}

Preprocessed preprocess(const RawTrack& raw, const PreprocessConfig& cfg) {
  cfg.validate();
  try {
    raw.validate();
  } catch (const TooShort& e) {
    return {std::nullopt, e.what()};
  }
  const auto& pts = raw.points;
  const double t0 = pts.front().t;
  const double total = pts.back().t - t0;

  std::vector<double> times;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.resample_dt;
    if (t > total + 1e-9) break;
    times.push_back(std::min(t, total));
  }
  if (times.back() < total - 1e-9) times.push_back(total);

  std::vector<std::pair<double, double>> pos;
  pos.reserve(times.size());
  std::size_t seg = 0;
  for (double t : times) {
    const double abs_t = t0 + t;
    while (seg + 2 < pts.size() && pts[seg + 1].t < abs_t) ++seg;
    const auto& a = pts[seg];
    const auto& b = pts[seg + 1];
    double frac = (abs_t - a.t) / (b.t - a.t);
    frac = std::clamp(frac, 0.0, 1.0);
    pos.emplace_back(interpolate(a.lon, b.lon, frac), interpolate(a.lat, b.lat, frac));
  }
  pos.back() = {pts.back().lon, pts.back().lat};

  if (times.size() < cfg.min_length)
    return {std::nullopt, "track " + raw.track_id + ": " + std::to_string(times.size()) + " steps after resampling, " +
                              std::to_string(cfg.min_length) + " required"};

  Trajectory traj;
  traj.agent_id = raw.agent_id;
  traj.traj_id = raw.track_id;
  traj.source = Source::Demonstration;
  const double lon0 = pos.front().first, lat0 = pos.front().second;
  for (std::size_t i = 0; i < times.size(); ++i) {
    StateAction o;
    o.state = make_state(pos[i].first, pos[i].second, lon0, lat0, times[i]);
    if (i + 1 < times.size()) {
      const double dt = times[i + 1] - times[i];
      o.action = {(pos[i + 1].first - pos[i].first) / dt, (pos[i + 1].second - pos[i].second) / dt};
    }
    traj.observations.push_back(o);
  }
  validate_trajectory(traj);
  return {std::move(traj), {}};
}

std::size_t injection_count(std::size_t target_size, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("anomaly rate must lie in [0, 1)");
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(target_size) / (1.0 - rate)));
}

TrajectorySet inject_anomalies(const TrajectorySet& target, const TrajectorySet& donors, double rate, Rng& rng) {
  const std::size_t m = injection_count(target.size(), rate);
  std::set<std::string> target_agents;
  for (const auto& t : target.trajectories) target_agents.insert(t.agent_id);
  for (const auto& d : donors.trajectories)
    if (target_agents.count(d.agent_id))
      throw std::invalid_argument("donor agent '" + d.agent_id + "' also appears in the target set");
  if (donors.size() < m)
    throw DataError("need " + std::to_string(m) + " donor trajectories, have " + std::to_string(donors.size()));

  TrajectorySet out;
  out.role = SetRole::Test;
  out.trajectories = target.trajectories;
  for (auto& t : out.trajectories) t.label = Label::Normal;
  std::vector<std::size_t> idx(donors.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
    std::swap(idx[i], idx[j]);
    Trajectory t = donors.trajectories[idx[i]];
    t.label = Label::Anomaly;
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

TrajectorySet label_long_trips(const TrajectorySet& trips, const LongTripOptions& opts) {
  auto duration = [](const Trajectory& t) { return t.empty() ? 0.0 : t.observations.back().elapsed(); };
  std::size_t crop = 0;
  if (opts.crop_to) {
    crop = *opts.crop_to;
  } else {
    std::vector<std::size_t> lengths;
    for (const auto& t : trips.trajectories)
      if (duration(t) <= opts.cutoff_seconds) lengths.push_back(t.size());
    if (!lengths.empty()) {
      auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
      std::nth_element(lengths.begin(), mid, lengths.end());
      crop = *mid;
    }
  }
  TrajectorySet out;
  out.role = SetRole::Test;
  for (Trajectory t : trips.trajectories) {
    if (duration(t) > opts.cutoff_seconds) {
      t.label = Label::Anomaly;
      if (crop > 0 && t.size() > crop) {
        t.observations.resize(crop);
        t.observations.back().action = {0.0, 0.0};
      }
    } else {
      t.label = Label::Normal;
    }
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

std::map<std::string, Label> read_label_file(std::istream& in, const std::string& source_name) {
  std::map<std::string, Label> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw ParseError(source_name, line_no, "expected traj_id,label");
    int v = 0;
    if (!to_int(f[1], v)) {
      if (line_no == 1 || out.empty()) continue;  // header
      throw ParseError(source_name, line_no, "bad label '" + f[1] + "'");
    }
    try {
      out[trim(f[0])] = label_from_int(v);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
  return out;
}

std::size_t apply_labels(TrajectorySet& set, const std::map<std::string, Label>& labels) {
  std::size_t n = 0;
  for (auto& t : set.trajectories) {
    auto it = labels.find(t.traj_id);
    if (it != labels.end()) {
      t.label = it->second;
      ++n;
    }
  }
  return n;
}

void write_canonical(std::ostream& out, const TrajectorySet& set, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "agent_id,traj_id,t_seconds,lon,lat,v_lon,v_lat,label\n";
  const auto flags = out.flags();
  const auto precision = out.precision(17);
  for (const auto& t : set.trajectories)
    for (const auto& o : t.observations)
      out << t.agent_id << ',' << t.traj_id << ',' << o.elapsed() << ',' << o.lon() << ',' << o.lat() << ','
          << o.action[0] << ',' << o.action[1] << ',' << label_to_int(t.label) << '\n';
  out.precision(precision);
  out.flags(flags);
}

std::optional<CanonicalStream::Row> CanonicalStream::feed(const std::string& line) {
  ++line_;
  const std::string t = trim(line);
  if (t.empty() || t.front() == '#') return std::nullopt;
  const auto f = split_csv_line(t);
  if (f.size() != 8) throw ParseError(source_, line_, "expected 8 fields, got " + std::to_string(f.size()));
  if (f[0] == "agent_id") return std::nullopt;
  Row row;
  row.agent_id = f[0];
  row.traj_id = f[1];
  double ts = 0.0, lon = 0.0, lat = 0.0, vx = 0.0, vy = 0.0;
  int label = 0;
  if (!to_double(f[2], ts) || !to_double(f[3], lon) || !to_double(f[4], lat) || !to_double(f[5], vx) ||
      !to_double(f[6], vy) || !to_int(f[7], label))
    throw ParseError(source_, line_, "non-numeric or non-finite field");
  try {
    row.label = label_from_int(label);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source_, line_, e.what());
  }
  const std::string key = row.agent_id + '\x1f' + row.traj_id;
  auto it = starts_.find(key);
  if (it == starts_.end() || key != current_) {
    if (it != starts_.end())
      throw ParseError(source_, line_, "rows of trajectory " + row.traj_id + " are not contiguous");
    it = starts_.emplace(key, Start{lon, lat, ts}).first;
    current_ = key;
  }
  row.obs.state = make_state(lon, lat, it->second.lon, it->second.lat, ts - it->second.t);
  row.obs.action = {vx, vy};
  return row;
}

TrajectorySet read_canonical(std::istream& in, const std::string& source_name) {
  TrajectorySet set;
  set.role = SetRole::Demonstration;
  CanonicalStream stream(source_name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = stream.feed(line);
    if (!row) continue;
    if (set.trajectories.empty() || set.trajectories.back().traj_id != row->traj_id ||
        set.trajectories.back().agent_id != row->agent_id) {
      Trajectory t;
      t.agent_id = row->agent_id;
      t.traj_id = row->traj_id;
      t.label = row->label;
      set.trajectories.push_back(std::move(t));
    }
    auto& t = set.trajectories.back();
    if (t.label != row->label) throw ParseError(source_name, line_no, "label changes within trajectory " + t.traj_id);
    t.observations.push_back(row->obs);
  }
  for (const auto& t : set.trajectories) {
    if (auto v = check_trajectory(t)) throw DataError(source_name + ": trajectory " + t.traj_id + ": " + v->message());
  }
  return set;
}

}  // namespace irlad::data
