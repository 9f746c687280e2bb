#include "irlad/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace irlad::io {

using nlohmann::json;

namespace {

json layer_json(const nn::DenseLayer& l) {
  std::vector<double> w(static_cast<std::size_t>(l.weight.size()));
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      w[static_cast<std::size_t>(r * l.weight.cols() + c)] = l.weight(r, c);
  return {{"rows", l.weight.rows()},
          {"cols", l.weight.cols()},
          {"weight", w},
          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

nn::DenseLayer layer_from(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols)
    throw FormatError("layer dimensions disagree with the stored shape");
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(rows))
    throw FormatError("layer tensor has the wrong number of values");
  nn::DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    l.bias[r] = b[static_cast<std::size_t>(r)];
  }
  return l;
}

template <std::size_t N>
std::array<double, N> array_from(const json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N) throw FormatError(std::string("field '") + key + "' has the wrong length");
  std::array<double, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

void check_version(const json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion)
    throw FormatError("unsupported model format version");
}

}  // namespace

json to_json(const nn::MlpParams& params, const std::string& role) {
  json j;
  j["role"] = role;
  j["input_dim"] = params.shape.input_dim;
  j["trunk_widths"] = params.shape.trunk_widths;
  j["head_width"] = params.shape.head_width;
  j["num_heads"] = params.shape.num_heads;
  j["trunk"] = json::array();
  for (const auto& l : params.trunk) j["trunk"].push_back(layer_json(l));
  j["heads"] = json::array();
  for (const auto& l : params.heads) j["heads"].push_back(layer_json(l));
  return j;
}

nn::MlpParams mlp_from_json(const json& j, const std::string& expected_role) {
  try {
    if (j.at("role").get<std::string>() != expected_role)
      throw FormatError("expected a '" + expected_role + "' network, found '" + j.at("role").get<std::string>() + "'");
    nn::MlpParams p;
    p.shape.input_dim = j.at("input_dim").get<int>();
    p.shape.trunk_widths = j.at("trunk_widths").get<std::vector<int>>();
    p.shape.head_width = j.at("head_width").get<int>();
    p.shape.num_heads = j.at("num_heads").get<int>();
    if (p.shape.input_dim < 1 || p.shape.head_width < 1 || p.shape.num_heads < 1)
      throw FormatError("network dimensions must be positive");
    const auto& trunk = j.at("trunk");
    const auto& heads = j.at("heads");
    if (trunk.size() != p.shape.trunk_widths.size() || heads.size() != static_cast<std::size_t>(p.shape.num_heads))
      throw FormatError("layer count disagrees with the stored shape");
    Eigen::Index in = p.shape.input_dim;
    for (std::size_t i = 0; i < trunk.size(); ++i) {
      p.trunk.push_back(layer_from(trunk[i], p.shape.trunk_widths[i], in));
      in = p.shape.trunk_widths[i];
    }
    for (const auto& h : heads) p.heads.push_back(layer_from(h, p.shape.head_width, in));
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed network: ") + e.what());
  }
}

json to_json(const BootstrapRewardModel& model) {
  json j;
  j["network"] = to_json(model.params(), "reward");
  j["prior_variance"] = model.prior_variance();
  j["assignments"] = model.assignments();
  j["standardizer"] = {{"offset", model.standardizer().offset}, {"scale", model.standardizer().scale}};
  return j;
}

BootstrapRewardModel reward_model_from_json(const json& j) {
  try {
    InputStandardizer s;
    s.offset = array_from<kInputDim>(j.at("standardizer"), "offset");
    s.scale = array_from<kInputDim>(j.at("standardizer"), "scale");
    return BootstrapRewardModel(mlp_from_json(j.at("network"), "reward"), j.at("prior_variance").get<double>(),
                                j.at("assignments").get<std::vector<BootstrapAssignment>>(), s);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed reward model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid reward model: ") + e.what());
  }
}

json to_json(const GaussianPolicy& policy) {
  return {{"network", to_json(policy.mean_net, "policy")},
          {"log_std", policy.log_std},
          {"state_offset", policy.state_offset},
          {"state_scale", policy.state_scale},
          {"action_scale", policy.action_scale}};
}

GaussianPolicy policy_from_json(const json& j) {
  try {
    GaussianPolicy p;
    p.mean_net = mlp_from_json(j.at("network"), "policy");
    if (p.mean_net.shape.input_dim != static_cast<int>(kStateDim) ||
        p.mean_net.shape.head_width != static_cast<int>(kActionDim) || p.mean_net.shape.num_heads != 1)
      throw FormatError("policy network must map 5 state inputs to a 2-d mean");
    p.log_std = array_from<kActionDim>(j, "log_std");
    p.state_offset = array_from<kStateDim>(j, "state_offset");
    p.state_scale = array_from<kStateDim>(j, "state_scale");
    p.action_scale = array_from<kActionDim>(j, "action_scale");
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed policy: ") + e.what());
  }
}

json to_json(const NormalizationStats& stats) {
  return {{"mean", stats.mean}, {"stddev", stats.stddev}, {"count", stats.count}, {"floored", stats.floored}};
}

NormalizationStats stats_from_json(const json& j) {
  try {
    NormalizationStats s;
    s.mean = j.at("mean").get<double>();
    s.stddev = j.at("stddev").get<double>();
    s.count = j.at("count").get<std::size_t>();
    s.floored = j.at("floored").get<bool>();
    if (!(s.stddev >= kStdFloor) || s.count < 1) throw FormatError("normalization statistics out of range");
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed normalization statistics: ") + e.what());
  }
}

json to_json(const ModelFile& file) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "irlad-model";
  j["seed"] = file.seed;
  j["config_hash"] = file.config_hash;
  j["agent_id"] = file.agent_id;
  j["reward"] = to_json(file.reward);
  if (file.policy) j["policy"] = to_json(*file.policy);
  if (file.stats) j["stats"] = to_json(*file.stats);
  return j;
}

ModelFile model_file_from_json(const json& j) {
  check_version(j);
  try {
    ModelFile f;
    f.seed = j.at("seed").get<std::uint64_t>();
    f.config_hash = j.at("config_hash").get<std::string>();
    f.agent_id = j.value("agent_id", "");
    f.reward = reward_model_from_json(j.at("reward"));
    if (j.contains("policy")) f.policy = policy_from_json(j.at("policy"));
    if (j.contains("stats")) f.stats = stats_from_json(j.at("stats"));
    return f;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

void write_model_file(std::ostream& out, const ModelFile& file) { out << to_json(file).dump(1) << '\n'; }

ModelFile read_model_file(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  return model_file_from_json(j);
}

void save_model_file(const std::filesystem::path& path, const ModelFile& file) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_model_file(out, file);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ModelFile load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model_file(in);
}

}  // namespace irlad::io
