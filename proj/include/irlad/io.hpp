// Model files: JSON documents holding network tensors (row-major), bootstrap
// assignments, the input standardizer, optional policy and normalization
// statistics, and provenance (format version, seed, config hash).
#pragma once

#include "irlad/nn.hpp"
#include "irlad/policy.hpp"
#include "irlad/reward.hpp"
#include "irlad/scoring.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace irlad::io {

inline constexpr int kFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const nn::MlpParams& params, const std::string& role);
nn::MlpParams mlp_from_json(const nlohmann::json& j, const std::string& expected_role);

nlohmann::json to_json(const BootstrapRewardModel& model);
BootstrapRewardModel reward_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GaussianPolicy& policy);
GaussianPolicy policy_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const nlohmann::json& j);

struct ModelFile {
  BootstrapRewardModel reward;
  std::optional<GaussianPolicy> policy;
  std::optional<NormalizationStats> stats;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string agent_id;

  bool operator==(const ModelFile&) const = default;
};

nlohmann::json to_json(const ModelFile& file);
ModelFile model_file_from_json(const nlohmann::json& j);

void write_model_file(std::ostream& out, const ModelFile& file);
ModelFile read_model_file(std::istream& in);
void save_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model_file(const std::filesystem::path& path);

}  // namespace irlad::io
