// Temporary directories and a tiny GeoLife-style tree for command tests.
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace irlad::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("irlad_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Data/<user>/Trajectory/*.plt with `tracks` tracks of `points` fixes 5 s apart.
inline void write_geolife(const std::filesystem::path& root, const std::vector<std::string>& users, int tracks,
                          int points) {
  for (std::size_t u = 0; u < users.size(); ++u) {
    const auto dir = root / "Data" / users[u] / "Trajectory";
    std::filesystem::create_directories(dir);
    for (int k = 0; k < tracks; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "2008102%d0%d0000.plt", static_cast<int>(u), k);
      std::ofstream out(dir / name);
      out << "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n";
      for (int i = 0; i < points; ++i) {
        const double lat = 39.9 + 0.01 * static_cast<double>(u) + 2e-5 * i + 1e-5 * std::sin(0.3 * i + k);
        const double lon = 116.3 + 0.01 * k + 3e-5 * i * (u % 2 ? -1.0 : 1.0);
        const int sec = 5 * i;
        char line[160];
        std::snprintf(line, sizeof line, "%.6f,%.6f,0,100,39744.0,2008-10-2%d,%02d:%02d:%02d\n", lat, lon,
                      static_cast<int>(u), 1 + k + sec / 3600, (sec / 60) % 60, sec % 60);
        out << line;
      }
    }
  }
}

}  // namespace irlad::testing
