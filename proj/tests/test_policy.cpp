#include "doctest.h"
#include "support.hpp"

#include "irlad/policy.hpp"

using namespace irlad;
using namespace irlad::testing;

namespace {

KinematicEnv fixed_env(std::size_t horizon, double dt = 2.0) {
  KinematicEnv env;
  env.dt = dt;
  env.initial_states = {make_state(116.3, 39.9, 116.3, 39.9, 0.0)};
  env.horizons = {horizon};
  return env;
}

// Reward model whose every head returns w . [s; a] with no hidden layer.
BootstrapRewardModel linear_reward(const std::array<double, kInputDim>& w, int heads = 1) {
  BootstrapRewardModel m = BootstrapRewardModel::initialize(1, heads, 0.1, {});
  for (auto& h : m.mutable_params().heads) {
    for (std::size_t i = 0; i < kInputDim; ++i) h.weight(0, static_cast<Eigen::Index>(i)) = w[i];
    h.bias.setZero();
  }
  return m;
}

std::vector<RolloutRecord> rollouts(const GaussianPolicy& p, const KinematicEnv& env, int n, Rng& rng) {
  std::vector<RolloutRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(rollout(p, env, rng));
  return out;
}

}  // namespace

TEST_CASE("initial policy has zero mean action") {
  const GaussianPolicy p = GaussianPolicy::initialize(3, 0.1);
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const Action m = p.mean(make_state(uniform(rng, 116, 117), uniform(rng, 39, 40), 116.5, 39.5, uniform(rng, 0, 900)));
    CHECK(m[0] == 0.0);
    CHECK(m[1] == 0.0);
  }
}

TEST_CASE("gaussian_log_pdf closed form") {
  for_all(50, 2, [](Rng& rng, int) {
    const Action x{normal(rng), normal(rng)}, mu{normal(rng), normal(rng)};
    const Action sd{std::exp(normal(rng)), std::exp(normal(rng))};
    double expect = 0.0;
    for (int i = 0; i < 2; ++i)
      expect += -0.5 * std::pow((x[i] - mu[i]) / sd[i], 2) - std::log(sd[i]) - 0.5 * std::log(2 * M_PI);
    CHECK(std::abs(gaussian_log_pdf(x, mu, sd) - expect) < 1e-10);
  });
}

TEST_CASE("act returns a sample with its exact log-density") {
  GaussianPolicy p = GaussianPolicy::initialize(4, 0.1);
  p.log_std = {-0.3, 0.2};
  Rng rng(5);
  const State s = make_state(116.3, 39.9, 116.3, 39.9, 10.0);
  const int n = 20000;
  double m0 = 0.0, m1 = 0.0, v0 = 0.0;
  for (int i = 0; i < n; ++i) {
    auto [a, lp] = act(p, s, rng);
    CHECK(std::abs(lp - p.log_density(s, a)) < 1e-10);
    m0 += a[0];
    m1 += a[1];
    v0 += a[0] * a[0];
  }
  m0 /= n, m1 /= n, v0 = v0 / n - m0 * m0;
  CHECK(std::abs(m0) < 4 * std::exp(-0.3) / std::sqrt(n));
  CHECK(std::abs(m1) < 4 * std::exp(0.2) / std::sqrt(n));
  CHECK(std::abs(v0 - std::exp(-0.6)) < 0.05);
}

TEST_CASE("a tiny standard deviation concentrates samples at the mean") {
  GaussianPolicy p = GaussianPolicy::initialize(4, 0.1);
  p.log_std = {kMinLogStd, kMinLogStd};
  Rng rng(6);
  const State s = make_state(116.3, 39.9, 116.3, 39.9, 0.0);
  for (int i = 0; i < 1000; ++i) {
    auto [a, lp] = act(p, s, rng);
    CHECK(std::abs(a[0]) < 6 * std::exp(kMinLogStd));
    CHECK(std::abs(a[1]) < 6 * std::exp(kMinLogStd));
  }
  p.log_std = {-40.0, 9.0};
  p.clamp_log_std();
  CHECK(p.log_std[0] == kMinLogStd);
  CHECK(p.log_std[1] == kMaxLogStd);
}

TEST_CASE("kinematic step integrates velocity") {
  const KinematicEnv env = fixed_env(3, 2.0);
  const State s = make_state(116.3, 39.9, 116.3, 39.9, 4.0);
  const State n = step(env, s, {0.001, -0.002});
  CHECK(n[0] == doctest::Approx(116.302));
  CHECK(n[1] == doctest::Approx(39.896));
  CHECK(n[2] == s[2]);
  CHECK(n[3] == s[3]);
  CHECK(n[4] == 6.0);
}

TEST_CASE("rollout follows the environment horizon and records densities") {
  const GaussianPolicy p = GaussianPolicy::initialize(7, 0.1);
  Rng rng(8);
  const RolloutRecord r = rollout(p, fixed_env(3), rng);
  REQUIRE(r.trajectory.size() == 3);
  CHECK(r.trajectory.source == Source::Generated);
  CHECK_FALSE(check_trajectory(r.trajectory).has_value());
  double sum = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    const auto& o = r.trajectory.observations[t];
    CHECK(r.step_log_density[t] == doctest::Approx(p.log_density(o.state, o.action)).epsilon(1e-12));
    sum += r.step_log_density[t];
    if (t > 0) {
      const auto& prev = r.trajectory.observations[t - 1];
      CHECK(o.state[0] == doctest::Approx(prev.state[0] + prev.action[0] * 2.0).epsilon(1e-14));
    }
  }
  CHECK(r.log_density == doctest::Approx(sum).epsilon(1e-14));
  const GaussianSampler sampler(p, fixed_env(3), PolicyUpdateConfig{});
  CHECK(sampler.log_density(r.trajectory) == doctest::Approx(r.log_density).epsilon(1e-12));
}

TEST_CASE("environment from demonstrations") {
  Rng rng(9);
  const TrajectorySet demos = random_set(rng, 4, 3, 9);
  const KinematicEnv env = KinematicEnv::from_demonstrations(demos, 5.0);
  REQUIRE(env.initial_states.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(env.initial_states[i][0] == demos.trajectories[i].observations[0].state[0]);
    CHECK(env.horizons[i] == demos.trajectories[i].size());
  }
  CHECK_THROWS(KinematicEnv{}.validate());
}

TEST_CASE("advantages are centred discounted reward-to-go") {
  std::array<double, kInputDim> w{};
  const BootstrapRewardModel zero = linear_reward(w);
  BootstrapRewardModel one = zero;
  one.mutable_params().heads[0].bias[0] = 1.0;
  const GaussianPolicy p = GaussianPolicy::initialize(7, 0.1);
  Rng rng(10);
  const auto rs = rollouts(p, fixed_env(3), 1, rng);
  const Advantages a = compute_advantages(rs, one, 0, 0.5);
  // reward-to-go [1.75, 1.5, 1], mean 4.25 / 3
  const double base = 4.25 / 3;
  CHECK(a.per_rollout[0][0] == doctest::Approx(1.75 - base));
  CHECK(a.per_rollout[0][1] == doctest::Approx(1.5 - base));
  CHECK(a.per_rollout[0][2] == doctest::Approx(1.0 - base));
  CHECK(a.mean_return == doctest::Approx(3.0));
  const Advantages z = compute_advantages(rs, zero, 0, 0.99);
  CHECK(z.per_rollout[0].isZero(0.0));
  CHECK_THROWS(compute_advantages({}, zero, 0, 0.99));
}

TEST_CASE("zero reward leaves the policy unchanged") {
  GaussianPolicy p = GaussianPolicy::initialize(11, 0.1, {8});
  const GaussianPolicy before = p;
  Rng rng(12);
  const KinematicEnv env = fixed_env(5);
  const auto rs = rollouts(p, env, 8, rng);
  const PolicyUpdateReport rep = policy_update(p, rs, linear_reward({}), 0, PolicyUpdateConfig{});
  CHECK(p == before);
  CHECK(rep.mean_kl == 0.0);
}

TEST_CASE("policy gradient moves the mean toward rewarded actions within the KL bound") {
  std::array<double, kInputDim> w{};
  w[5] = 1.0;  // reward the longitude velocity
  const BootstrapRewardModel reward = linear_reward(w);
  GaussianPolicy p = GaussianPolicy::initialize(13, 0.1, {8});
  Rng rng(14);
  const KinematicEnv env = fixed_env(5);
  PolicyUpdateConfig cfg;
  cfg.learning_rate = 1e-2;
  const State s0 = env.initial_states[0];
  for (int it = 0; it < 10; ++it) {
    const GaussianPolicy old = p;
    const auto rs = rollouts(p, env, 32, rng);
    std::vector<State> states;
    for (const auto& r : rs)
      for (const auto& o : r.trajectory.observations) states.push_back(o.state);
    const PolicyUpdateReport rep = policy_update(p, rs, reward, 0, cfg);
    CHECK(rep.mean_kl <= cfg.max_kl + 1e-12);
    CHECK(mean_kl(old, p, states) == doctest::Approx(rep.mean_kl).epsilon(1e-9));
  }
  CHECK(p.mean(s0)[0] > 0.0);
}

TEST_CASE("KL of a policy with itself is zero and positive otherwise") {
  const GaussianPolicy p = GaussianPolicy::initialize(15, 0.1);
  GaussianPolicy q = p;
  q.log_std[0] = 0.5;
  const std::vector<State> states{make_state(116.3, 39.9, 116.3, 39.9, 0.0)};
  CHECK(mean_kl(p, p, states) == 0.0);
  // KL(N(0,1) || N(0,e^1)) per dimension: log(e^0.5) + 1/(2e) - 1/2
  CHECK(mean_kl(p, q, states) == doctest::Approx(0.5 + 0.5 * std::exp(-1.0) - 0.5).epsilon(1e-12));
}
