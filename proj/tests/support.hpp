// Hand-rolled generators and small helpers shared by the test binaries.
#pragma once

#include "irlad/core.hpp"
#include "irlad/nn.hpp"
#include "irlad/reward.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace irlad::testing {

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double normal(Rng& rng, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }

/// Runs `body` on `cases` independently seeded generators.
inline void for_all(int cases, std::uint64_t seed, const std::function<void(Rng&, int)>& body) {
  for (int c = 0; c < cases; ++c) {
    Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(c));
    body(rng, c);
  }
}

/// Well-formed GPS-like trajectory: random walk around (lon, lat) with dt spacing.
inline Trajectory random_trajectory(Rng& rng, std::size_t length, const std::string& agent = "agent",
                                    const std::string& id = "t", double dt = 5.0) {
  Trajectory t;
  t.agent_id = agent;
  t.traj_id = id;
  const double lon0 = uniform(rng, 116.0, 117.0), lat0 = uniform(rng, 39.5, 40.5);
  double lon = lon0, lat = lat0;
  for (std::size_t i = 0; i < length; ++i) {
    StateAction o;
    o.state = make_state(lon, lat, lon0, lat0, static_cast<double>(i) * dt);
    o.action = {normal(rng, 1e-4), normal(rng, 1e-4)};
    if (i + 1 == length) o.action = {0.0, 0.0};
    lon += o.action[0] * dt;
    lat += o.action[1] * dt;
    t.observations.push_back(o);
  }
  return t;
}

inline TrajectorySet random_set(Rng& rng, std::size_t count, std::size_t min_len, std::size_t max_len,
                                const std::string& agent = "agent") {
  TrajectorySet s;
  s.role = SetRole::Demonstration;
  for (std::size_t i = 0; i < count; ++i)
    s.trajectories.push_back(random_trajectory(
        rng, static_cast<std::size_t>(uniform_int(rng, static_cast<int>(min_len), static_cast<int>(max_len))), agent,
        agent + "_" + std::to_string(i)));
  return s;
}

/// Random network shape and parameters with entries N(0, 0.5).
inline nn::MlpParams random_mlp(Rng& rng) {
  nn::MlpShape shape;
  shape.input_dim = uniform_int(rng, 1, 7);
  const int depth = uniform_int(rng, 0, 3);
  for (int i = 0; i < depth; ++i) shape.trunk_widths.push_back(uniform_int(rng, 1, 9));
  shape.head_width = uniform_int(rng, 1, 3);
  shape.num_heads = uniform_int(rng, 1, 4);
  return nn::init_params(rng(), 0.5, shape);
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double sd = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng, sd);
  return v;
}

/// Relative error used by the finite-difference checks.
inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace irlad::testing
