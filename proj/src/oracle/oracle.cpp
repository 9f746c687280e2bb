#include "irlad/oracle.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace irlad::oracle {
namespace {

constexpr double kRowTolerance = 1e-12;
constexpr std::size_t kMaxEnumeratedPaths = 5'000'000;

void check_reward(const DiscreteMdp& mdp, const RewardTable& reward) {
  if (reward.rows() != mdp.num_states || reward.cols() != mdp.num_actions)
    throw std::invalid_argument("reward table must be S x A");
  if (!reward.allFinite()) throw NumericError("reward table holds non-finite values");
}

void check_guard(const DiscreteMdp& mdp, int horizon) {
  if (mdp.num_states * mdp.num_actions > kMaxEnumStateActions || horizon > kMaxEnumHorizon)
    throw InstanceTooLarge("instance exceeds enumeration guard (|S||A| <= 20, H <= 8)");
}

// Unit displacement of each gridworld action: N, E, S, W.
constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {1, 0, -1, 0};

}  // namespace

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

void DiscreteMdp::validate() const {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("MDP needs states and actions");
  if (horizon < 1) throw std::invalid_argument("MDP horizon must be >= 1");
  if (transition.size() != static_cast<std::size_t>(num_states) * num_actions * num_states)
    throw std::invalid_argument("transition tensor has wrong size");
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (int n = 0; n < num_states; ++n) {
        if (T(s, a, n) < 0.0) throw std::invalid_argument("negative transition probability");
        sum += T(s, a, n);
      }
      if (std::abs(sum - 1.0) > kRowTolerance)
        throw std::invalid_argument("transition row (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") does not sum to 1");
    }
  if (initial.size() != num_states || (initial.array() < 0.0).any() ||
      std::abs(initial.sum() - 1.0) > kRowTolerance)
    throw std::invalid_argument("initial distribution invalid");
  if (true_reward && (true_reward->rows() != num_states || true_reward->cols() != num_actions))
    throw std::invalid_argument("true reward table must be S x A");
}

SoftPolicyTable soft_value_iteration(const DiscreteMdp& mdp, const RewardTable& reward, int horizon) {
  mdp.validate();
  check_reward(mdp, reward);
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const int S = mdp.num_states, A = mdp.num_actions;
  SoftPolicyTable out;
  out.q.assign(static_cast<std::size_t>(horizon), Eigen::MatrixXd::Zero(S, A));
  out.v.assign(static_cast<std::size_t>(horizon), Eigen::VectorXd::Zero(S));
  out.policy.assign(static_cast<std::size_t>(horizon), Eigen::MatrixXd::Zero(S, A));

  for (int t = horizon - 1; t >= 0; --t) {
    auto& q = out.q[static_cast<std::size_t>(t)];
    q = reward;
    if (t + 1 < horizon) {
      const auto& v_next = out.v[static_cast<std::size_t>(t + 1)];
      const double m = v_next.maxCoeff();
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          double acc = 0.0;
          for (int n = 0; n < S; ++n) acc += mdp.T(s, a, n) * std::exp(v_next[n] - m);
          q(s, a) += m + std::log(acc);
        }
    }
    auto& v = out.v[static_cast<std::size_t>(t)];
    auto& pi = out.policy[static_cast<std::size_t>(t)];
    for (int s = 0; s < S; ++s) {
      v[s] = log_sum_exp(q.row(s).transpose());
      pi.row(s) = (q.row(s).array() - v[s]).exp();
    }
  }

  Eigen::VectorXd log_start(S);
  for (int s = 0; s < S; ++s)
    log_start[s] = mdp.initial[s] > 0.0 ? std::log(mdp.initial[s]) + out.v[0][s]
                                        : -std::numeric_limits<double>::infinity();
  out.log_z = log_sum_exp(log_start);
  out.start = (log_start.array() - out.log_z).exp();
  out.reward = reward;
  return out;
}

Eigen::VectorXd successor_law(const DiscreteMdp& mdp, const SoftPolicyTable& table, std::size_t t, int s,
                              int a) {
  const int S = mdp.num_states;
  Eigen::VectorXd p(S);
  if (t + 1 >= table.v.size()) {
    for (int n = 0; n < S; ++n) p[n] = mdp.T(s, a, n);
    return p;
  }
  const double log_norm = table.q[t](s, a) - table.reward(s, a);
  const auto& v_next = table.v[t + 1];
  for (int n = 0; n < S; ++n) {
    const double T = mdp.T(s, a, n);
    p[n] = T > 0.0 ? T * std::exp(v_next[n] - log_norm) : 0.0;
  }
  return p;
}

std::vector<Eigen::MatrixXd> soft_marginals(const DiscreteMdp& mdp, const SoftPolicyTable& table) {
  const int S = mdp.num_states;
  std::vector<Eigen::MatrixXd> out;
  Eigen::VectorXd d = table.start;
  for (std::size_t t = 0; t < table.policy.size(); ++t) {
    Eigen::MatrixXd m = table.policy[t].array().colwise() * d.array();
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < mdp.num_actions; ++a) {
        if (m(s, a) == 0.0) continue;
        next += m(s, a) * successor_law(mdp, table, t, s, a);
      }
    out.push_back(std::move(m));
    d = next;
  }
  return out;
}

Eigen::MatrixXd expected_counts(const std::vector<Eigen::MatrixXd>& marginals) {
  if (marginals.empty()) return {};
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(marginals[0].rows(), marginals[0].cols());
  for (const auto& m : marginals) c += m;
  return c;
}

PathDistribution enumerate_traj_distribution(const DiscreteMdp& mdp, const RewardTable& reward,
                                             int horizon) {
  mdp.validate();
  check_reward(mdp, reward);
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  check_guard(mdp, horizon);

  PathDistribution dist;
  Path current;
  current.reserve(static_cast<std::size_t>(horizon));
  // Depth-first over dynamics-consistent continuations.
  auto extend = [&](auto&& self, int s, double log_score) -> void {
    for (int a = 0; a < mdp.num_actions; ++a) {
      current.emplace_back(s, a);
      const double score = log_score + reward(s, a);
      if (static_cast<int>(current.size()) == horizon) {
        if (dist.paths.size() >= kMaxEnumeratedPaths)
          throw InstanceTooLarge("enumeration exceeds path budget");
        dist.paths.push_back(current);
        dist.log_scores.push_back(score);
      } else {
        for (int n = 0; n < mdp.num_states; ++n) {
          const double p = mdp.T(s, a, n);
          if (p > 0.0) self(self, n, score + std::log(p));
        }
      }
      current.pop_back();
    }
  };
  for (int s = 0; s < mdp.num_states; ++s)
    if (mdp.initial[s] > 0.0) extend(extend, s, std::log(mdp.initial[s]));

  const Eigen::Map<const Eigen::VectorXd> scores(dist.log_scores.data(),
                                                 static_cast<Eigen::Index>(dist.log_scores.size()));
  dist.log_z = log_sum_exp(scores);
  dist.z = std::exp(dist.log_z);
  dist.probabilities.reserve(dist.paths.size());
  for (double ls : dist.log_scores) dist.probabilities.push_back(std::exp(ls - dist.log_z));
  return dist;
}

std::vector<Eigen::MatrixXd> path_marginals(const PathDistribution& dist, int num_states,
                                            int num_actions, int horizon) {
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(horizon),
                                   Eigen::MatrixXd::Zero(num_states, num_actions));
  for (std::size_t i = 0; i < dist.paths.size(); ++i)
    for (std::size_t t = 0; t < dist.paths[i].size(); ++t) {
      const auto [s, a] = dist.paths[i][t];
      out[t](s, a) += dist.probabilities[i];
    }
  return out;
}

Eigen::MatrixXd empirical_counts(const std::vector<WeightedPath>& demos, int num_states,
                                 int num_actions) {
  if (demos.empty()) throw std::invalid_argument("empirical_counts: no demonstrations");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(num_states, num_actions);
  double total = 0.0;
  for (const auto& d : demos) {
    for (const auto& [s, a] : d.path) c(s, a) += d.weight;
    total += d.weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("empirical_counts: zero total weight");
  return c / total;
}

Eigen::MatrixXd exact_gradient(const DiscreteMdp& mdp, const RewardTable& reward,
                               const std::vector<WeightedPath>& demos) {
  check_guard(mdp, mdp.horizon);
  const auto table = soft_value_iteration(mdp, reward, mdp.horizon);
  return empirical_counts(demos, mdp.num_states, mdp.num_actions) -
         expected_counts(soft_marginals(mdp, table));
}

DiscreteMdp make_gridworld(int width, int height, const std::vector<std::pair<int, int>>& goals,
                           double noise, int horizon) {
  if (width < 1 || height < 1 || width * height > 64)
    throw std::invalid_argument("gridworld needs 1 <= width*height <= 64");
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");
  DiscreteMdp mdp;
  GridLayout grid{width, height};
  mdp.grid = grid;
  mdp.num_states = width * height;
  mdp.num_actions = 4;
  mdp.horizon = horizon;
  mdp.transition.assign(static_cast<std::size_t>(mdp.num_states) * 4 * mdp.num_states, 0.0);
  mdp.initial = Eigen::VectorXd::Constant(mdp.num_states, 1.0 / mdp.num_states);
  auto target = [&](int s, int dir) {
    const int x = grid.x_of(s) + kDx[dir], y = grid.y_of(s) + kDy[dir];
    if (x < 0 || x >= width || y < 0 || y >= height) return s;
    return grid.cell(x, y);
  };
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < 4; ++a)
      for (int dir = 0; dir < 4; ++dir) {
        const double p = dir == a ? 1.0 - noise : noise / 3.0;
        if (p > 0.0) mdp.T(s, a, target(s, dir)) += p;
      }
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(mdp.num_states, 4, -0.01);
  for (const auto& [x, y] : goals) {
    if (x < 0 || x >= width || y < 0 || y >= height) throw std::invalid_argument("goal outside grid");
    r.row(grid.cell(x, y)).setConstant(1.0);
  }
  mdp.true_reward = r;
  mdp.validate();
  return mdp;
}

std::vector<std::pair<int, int>> corner_block(int width, int height, int size, bool north_east) {
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const bool in = north_east ? (x >= width - size && y >= height - size) : (x < size && y < size);
      if (in) cells.emplace_back(x, y);
    }
  return cells;
}

int sample_next_state(const DiscreteMdp& mdp, int s, int a, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  int last = 0;
  for (int n = 0; n < mdp.num_states; ++n) {
    const double p = mdp.T(s, a, n);
    if (p <= 0.0) continue;
    last = n;
    if (u < p) return n;
    u -= p;
  }
  return last;
}

namespace {
int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  int last = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = static_cast<int>(i);
    if (u < p[i]) return static_cast<int>(i);
    u -= p[i];
  }
  return last;
}
}  // namespace

Path sample_soft_path(const DiscreteMdp& mdp, const SoftPolicyTable& table, Rng& rng) {
  Path path;
  int s = sample_categorical(table.start, rng);
  for (std::size_t t = 0; t < table.policy.size(); ++t) {
    const int a = sample_categorical(table.policy[t].row(s).transpose(), rng);
    path.emplace_back(s, a);
    if (t + 1 < table.policy.size()) s = sample_categorical(successor_law(mdp, table, t, s, a), rng);
  }
  return path;
}

StateAction encode_step(const DiscreteMdp& mdp, int s, int a, int s0, int t) {
  if (!mdp.grid) throw std::invalid_argument("encode_step: MDP has no grid layout");
  const auto& g = *mdp.grid;
  const double cx = 0.5 * (g.width - 1), cy = 0.5 * (g.height - 1);
  StateAction obs;
  obs.state = make_state(g.x_of(s) - cx, g.y_of(s) - cy, g.x_of(s0) - cx, g.y_of(s0) - cy,
                         static_cast<double>(t));
  obs.action = Action{static_cast<double>(kDx[a]), static_cast<double>(kDy[a])};
  return obs;
}

std::pair<int, int> decode_step(const DiscreteMdp& mdp, const StateAction& obs) {
  if (!mdp.grid) throw std::invalid_argument("decode_step: MDP has no grid layout");
  const auto& g = *mdp.grid;
  const double cx = 0.5 * (g.width - 1), cy = 0.5 * (g.height - 1);
  const int x = static_cast<int>(std::lround(obs.state[0] + cx));
  const int y = static_cast<int>(std::lround(obs.state[1] + cy));
  if (x < 0 || x >= g.width || y < 0 || y >= g.height)
    throw std::invalid_argument("decode_step: observation outside grid");
  const int dx = static_cast<int>(std::lround(obs.action[0]));
  const int dy = static_cast<int>(std::lround(obs.action[1]));
  for (int a = 0; a < 4; ++a)
    if (kDx[a] == dx && kDy[a] == dy) return {g.cell(x, y), a};
  throw std::invalid_argument("decode_step: action is not a grid move");
}

Trajectory encode_path(const DiscreteMdp& mdp, const Path& path, const std::string& agent_id,
                       const std::string& traj_id, Source source) {
  if (path.empty()) throw std::invalid_argument("encode_path: empty path");
  Trajectory traj;
  traj.agent_id = agent_id;
  traj.traj_id = traj_id;
  traj.source = source;
  const int s0 = path.front().first;
  for (std::size_t t = 0; t < path.size(); ++t)
    traj.observations.push_back(encode_step(mdp, path[t].first, path[t].second, s0, static_cast<int>(t)));
  return traj;
}

Path decode_trajectory(const DiscreteMdp& mdp, const Trajectory& traj) {
  Path path;
  path.reserve(traj.size());
  for (const auto& obs : traj.observations) path.push_back(decode_step(mdp, obs));
  return path;
}

DiscreteMdp random_mdp(int num_states, int num_actions, int horizon, Rng& rng) {
  DiscreteMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.horizon = horizon;
  mdp.transition.assign(static_cast<std::size_t>(num_states) * num_actions * num_states, 0.0);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (int n = 0; n < num_states; ++n) sum += (mdp.T(s, a, n) = u(rng));
      for (int n = 0; n < num_states; ++n) mdp.T(s, a, n) /= sum;
    }
  mdp.initial.resize(num_states);
  for (int s = 0; s < num_states; ++s) mdp.initial[s] = u(rng);
  mdp.initial /= mdp.initial.sum();
  mdp.validate();
  return mdp;
}

DiscreteMdp parse_mdp(const std::string& text) {
  DiscreteMdp mdp;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("parse_mdp line " + std::to_string(line_no) + ": " + why);
  };
  auto ensure_storage = [&] {
    if (mdp.num_states < 1 || mdp.num_actions < 1) fail("declare states and actions first");
    if (mdp.transition.empty())
      mdp.transition.assign(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions * mdp.num_states, 0.0);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "states") {
      ls >> mdp.num_states;
    } else if (key == "actions") {
      ls >> mdp.num_actions;
    } else if (key == "horizon") {
      ls >> mdp.horizon;
    } else if (key == "initial") {
      ensure_storage();
      mdp.initial.resize(mdp.num_states);
      for (int s = 0; s < mdp.num_states; ++s)
        if (!(ls >> mdp.initial[s])) fail("initial needs one value per state");
    } else if (key == "transition") {
      ensure_storage();
      int s = -1, a = -1;
      if (!(ls >> s >> a) || s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions)
        fail("bad transition indices");
      for (int n = 0; n < mdp.num_states; ++n)
        if (!(ls >> mdp.T(s, a, n))) fail("transition needs one value per state");
    } else if (key == "reward") {
      ensure_storage();
      if (!mdp.true_reward) mdp.true_reward = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_actions);
      int s = -1, a = -1;
      double r = 0.0;
      if (!(ls >> s >> a >> r) || s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions)
        fail("bad reward entry");
      (*mdp.true_reward)(s, a) = r;
    } else {
      fail("unknown key '" + key + "'");
    }
    if (ls.fail() && !ls.eof()) fail("malformed value");
  }
  mdp.validate();
  return mdp;
}

}  // namespace irlad::oracle
