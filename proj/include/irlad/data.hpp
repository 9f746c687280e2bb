// Dataset ingestion: GeoLife PLT files, taxi-trip CSV rows with a JSON
// polyline, resampling into state-action trajectories, anomaly injection and
// long-trip labeling.
#pragma once

#include "irlad/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace irlad::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input; the message carries the source name and line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class TooShort : public DataError {
 public:
  using DataError::DataError;
};

enum class TrackSource { GeoLife, TST, Canonical };

struct RawPoint {
  double t = 0.0;  // absolute seconds
  double lon = 0.0;
  double lat = 0.0;
};

struct RawTrack {
  std::string agent_id;
  std::string track_id;
  std::vector<RawPoint> points;
  TrackSource source = TrackSource::Canonical;
  std::map<std::string, std::string> annotations;

  /// Throws TooShort with fewer than two points, DataError when timestamps are
  /// not strictly increasing or a value is not finite.
  void validate() const;
};

/// Seconds since 1970-01-01T00:00:00 for a "YYYY-MM-DD" date and "HH:MM:SS" time.
double civil_seconds(const std::string& date, const std::string& time);

/// GeoLife PLT: six header lines, then `lat,lon,0,alt,days,date,time`.
/// Points whose timestamp does not advance are dropped.
RawTrack parse_plt(std::istream& in, const std::string& agent_id, const std::string& track_id,
                   const std::string& source_name = "<plt>");
RawTrack parse_plt(const std::filesystem::path& file, const std::string& agent_id);

/// Splits one CSV record, honouring double quotes (with "" escapes).
std::vector<std::string> split_csv_line(const std::string& line);

/// Parses "[[lon,lat],...]".
std::vector<std::pair<double, double>> parse_polyline(const std::string& text);

inline constexpr double kTstInterval = 15.0;

/// Column positions in a taxi-trip CSV header; POLYLINE is required.
struct TstColumns {
  std::vector<std::string> names;
  int polyline = -1;
  int trip_id = -1;
  int taxi_id = -1;
  int timestamp = -1;

  static TstColumns from_header(const std::string& header_line);
};

/// One trip row: points spaced 15 s from the trip start, lon/lat order kept,
/// other columns kept as annotations.
RawTrack parse_tst(const std::vector<std::string>& fields, const TstColumns& cols,
                   const std::string& source_name = "<tst>", std::size_t line = 0);

/// Every trip of a taxi-trip CSV file. Rows with an empty polyline are
/// skipped and counted.
struct TstFile {
  std::vector<RawTrack> tracks;
  std::size_t empty_rows = 0;
};
TstFile parse_tst_file(std::istream& in, const std::string& source_name = "<tst>");

struct PreprocessConfig {
  double resample_dt = 5.0;
  std::size_t min_length = 100;

  void validate() const;
};

struct Preprocessed {
  std::optional<Trajectory> trajectory;
  std::string rejection;  // empty when accepted
};

/// Linear-interpolation resampling at resample_dt; the true final point is
/// kept (with a shorter last interval when needed). Actions are forward
/// velocity differences, zero on the last step. Coordinates stay in degrees.
Preprocessed preprocess(const RawTrack& raw, const PreprocessConfig& cfg);

/// Adds round(rate * n / (1 - rate)) donor trajectories labelled Anomaly to
/// the target set (labelled Normal), so anomalies make up `rate` of the result.
TrajectorySet inject_anomalies(const TrajectorySet& target, const TrajectorySet& donors, double rate,
                               Rng& rng);

std::size_t injection_count(std::size_t target_size, double rate);

struct LongTripOptions {
  double cutoff_seconds = 3000.0;
  std::optional<std::size_t> crop_to;  // default: median normal-trip length
};

/// Trips lasting longer than the cutoff become anomalies cropped from the end;
/// the rest are Normal.
TrajectorySet label_long_trips(const TrajectorySet& trips, const LongTripOptions& opts = {});

/// `traj_id,label` lines (header optional). Labels are 0, 1 or -1.
std::map<std::string, Label> read_label_file(std::istream& in, const std::string& source_name = "<labels>");
/// Returns the number of trajectories whose label was overridden.
std::size_t apply_labels(TrajectorySet& set, const std::map<std::string, Label>& labels);

/// Canonical trajectory CSV: `agent_id,traj_id,t_seconds,lon,lat,v_lon,v_lat,label`.
/// Lines starting with '#' are provenance comments.
void write_canonical(std::ostream& out, const TrajectorySet& set, const std::string& comment = "");
TrajectorySet read_canonical(std::istream& in, const std::string& source_name = "<canonical>");

/// Streaming reader for the canonical format: feeds one row at a time and
/// returns the observation it describes, tracking each trajectory's start.
class CanonicalStream {
 public:
  struct Row {
    std::string agent_id;
    std::string traj_id;
    StateAction obs;
    Label label = Label::Unlabeled;
  };

  explicit CanonicalStream(std::string source_name = "<stdin>") : source_(std::move(source_name)) {}

  /// nullopt for blank, comment and header lines.
  std::optional<Row> feed(const std::string& line);

 private:
  struct Start {
    double lon, lat, t;
  };
  std::string source_;
  std::map<std::string, Start> starts_;
  std::size_t line_ = 0;
  std::string current_;
};

}  // namespace irlad::data
