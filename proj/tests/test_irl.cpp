#include "doctest.h"
#include "support.hpp"

#include "irlad/irl.hpp"

#include <sstream>

using namespace irlad;
using namespace irlad::testing;

namespace {

struct BatchFixture {
  std::vector<Trajectory> storage;
  IrlUpdateBatch batch;
};

BatchFixture random_batch(Rng& rng, int demos, int background, double prior_weight) {
  BatchFixture f;
  f.storage.reserve(static_cast<std::size_t>(demos + background));
  for (int i = 0; i < demos + background; ++i)
    f.storage.push_back(random_trajectory(rng, static_cast<std::size_t>(uniform_int(rng, 1, 6))));
  for (int i = 0; i < demos; ++i) f.batch.demos.push_back(&f.storage[static_cast<std::size_t>(i)]);
  for (int i = 0; i < demos + background; ++i) {
    f.batch.background.push_back(&f.storage[static_cast<std::size_t>(i)]);
    f.batch.background_log_q.push_back(normal(rng, 2.0));
  }
  f.batch.prior_weight = prior_weight;
  return f;
}

BootstrapRewardModel small_model(Rng& rng, int heads) {
  BootstrapRewardModel m = BootstrapRewardModel::initialize(rng(), heads, 0.1, {6, 4});
  InputStandardizer s;
  s.offset = {116.5, 39.9, 116.5, 39.9, 10.0, 0.0, 0.0};
  s.scale = {0.3, 0.3, 0.3, 0.3, 10.0, 1e-4, 1e-4};
  m.set_standardizer(s);
  return m;
}

}  // namespace

TEST_CASE("importance weights are normalized and follow exp(R - log q)") {
  for_all(100, 1, [](Rng& rng, int) {
    const int n = uniform_int(rng, 1, 30);
    const Eigen::VectorXd R = random_vector(rng, n, 50.0), lq = random_vector(rng, n, 50.0);
    const Eigen::VectorXd w = importance_weights(R, lq);
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    CHECK((w.array() >= 0.0).all());
    const double ess = effective_sample_size(w);
    CHECK(ess >= 1.0 - 1e-9);
    CHECK(ess <= n + 1e-9);
    const Eigen::Index i = uniform_int(rng, 0, n - 1), j = uniform_int(rng, 0, n - 1);
    if (w[i] > 1e-200 && w[j] > 1e-200)
      CHECK(std::abs(std::log(w[i] / w[j]) - ((R[i] - lq[i]) - (R[j] - lq[j]))) < 1e-8);
  });
  CHECK(effective_sample_size(importance_weights(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4))) ==
        doctest::Approx(4.0));
  CHECK_THROWS(importance_weights(Eigen::VectorXd(), Eigen::VectorXd()));
  CHECK_THROWS(importance_weights(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)));
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(2);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(importance_weights(bad, Eigen::VectorXd::Zero(2)), NumericError);
}

TEST_CASE("log_sum_exp is stable") {
  Eigen::VectorXd v(3);
  v << 1000.0, 1000.0, -1000.0;
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
  v << -1000.0, -1000.0, -1000.0;
  CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(3.0)));
}

TEST_CASE("objective matches its definition") {
  Rng rng(2);
  const BootstrapRewardModel m = small_model(rng, 3);
  BatchFixture f = random_batch(rng, 3, 5, 0.7);
  const int head = 2;
  auto ret = [&](const Trajectory& t) { return step_rewards(m, t, head).sum(); };
  double demo = 0.0;
  for (auto* d : f.batch.demos) demo += ret(*d);
  demo /= 3.0;
  Eigen::VectorXd lw(8);
  for (int j = 0; j < 8; ++j) lw[j] = ret(*f.batch.background[static_cast<std::size_t>(j)]) - f.batch.background_log_q[static_cast<std::size_t>(j)];
  const double expect = demo - log_sum_exp(lw) + 0.7 * log_prior(m, head);
  CHECK(batch_objective(m, head, f.batch) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("reward gradient matches finite differences of the objective") {
  for_all(20, 3, [](Rng& rng, int) {
    const BootstrapRewardModel m = small_model(rng, 3);
    BatchFixture f = random_batch(rng, uniform_int(rng, 1, 4), uniform_int(rng, 1, 6), uniform(rng, 0.0, 1.0));
    const int head = uniform_int(rng, 0, 2);
    const RewardGradient g = reward_gradient(m, head, f.batch);
    const Eigen::VectorXd analytic = g.grads.flatten();
    const Eigen::VectorXd theta = m.params().flatten();
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index i = uniform_int(rng, 0, static_cast<int>(theta.size()) - 1);
      auto at = [&](double delta) {
        BootstrapRewardModel q = m;
        Eigen::VectorXd t = theta;
        t[i] += delta;
        q.mutable_params().unflatten(t);
        return batch_objective(q, head, f.batch);
      };
      const double h = 1e-6;
      const double fd = (at(h) - at(-h)) / (2 * h);
      CHECK(std::abs(fd - analytic[i]) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
  });
}

TEST_CASE("identical demos and background cancel") {
  Rng rng(4);
  const BootstrapRewardModel m = small_model(rng, 2);
  const Trajectory t = random_trajectory(rng, 5);
  IrlUpdateBatch b;
  b.demos = {&t, &t};
  b.background = {&t, &t, &t};
  b.background_log_q = {-3.0, -3.0, -3.0};
  b.prior_weight = 0.0;
  const RewardGradient g = reward_gradient(m, 1, b);
  CHECK(g.grads.flatten().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.ess == doctest::Approx(3.0));
}

TEST_CASE("reward_update touches only the trunk and the chosen head") {
  Rng rng(5);
  BootstrapRewardModel m = small_model(rng, 3);
  const BootstrapRewardModel before = m;
  BatchFixture f = random_batch(rng, 3, 4, 1.0);
  nn::AdamState opt(m.params(), 1e-2);
  const RewardUpdateReport rep = reward_update(m, 1, f.batch, opt);
  CHECK(rep.weight_sum == doctest::Approx(1.0));
  for (int k : {0, 2}) {
    CHECK(m.params().heads[k].weight == before.params().heads[k].weight);
    CHECK(m.params().heads[k].bias == before.params().heads[k].bias);
  }
  CHECK(m.params().heads[1].weight != before.params().heads[1].weight);
  CHECK(m.params().trunk[0].weight != before.params().trunk[0].weight);
}

TEST_CASE("repeated updates increase the objective") {
  Rng rng(6);
  BootstrapRewardModel m = small_model(rng, 1);
  BatchFixture f = random_batch(rng, 4, 8, 0.1);
  nn::AdamState opt(m.params(), 1e-3);
  const double start = batch_objective(m, 0, f.batch);
  for (int i = 0; i < 200; ++i) reward_update(m, 0, f.batch, opt);
  CHECK(batch_objective(m, 0, f.batch) > start);
}

TEST_CASE("background buffer is FIFO with a capacity") {
  BackgroundBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    RolloutRecord r;
    r.log_density = i;
    buf.push(std::move(r));
  }
  CHECK(buf.size() == 3);
  CHECK(buf.oldest().log_density == 2.0);
  CHECK(buf.newest().log_density == 4.0);
  Rng rng(7);
  for (std::size_t i : buf.sample(50, rng)) CHECK(i < 3);
  CHECK_THROWS(BackgroundBuffer(3).sample(1, rng));
  CHECK_THROWS_AS(BackgroundBuffer(0), ConfigError);
}

TEST_CASE("empty batches are rejected") {
  IrlUpdateBatch b;
  CHECK_THROWS(b.check());
  Rng rng(8);
  const BootstrapRewardModel m = small_model(rng, 1);
  CHECK_THROWS(reward_gradient(m, 0, b));
}

TEST_CASE("standardizer and time step come from the demonstrations") {
  Rng rng(9);
  const TrajectorySet demos = random_set(rng, 5, 5, 20);
  const InputStandardizer s = fit_standardizer(demos);
  double n = 0, t = 0;
  for (const auto& tr : demos.trajectories)
    for (const auto& o : tr.observations) n += 1, t += o.elapsed();
  CHECK(s.offset[4] == doctest::Approx(t / n));
  CHECK(s.offset[0] == s.offset[2]);
  CHECK(s.scale[0] == s.scale[2]);
  CHECK(s.scale[1] == s.scale[3]);
  CHECK(s.scale[5] > 0.0);
  CHECK(infer_time_step(demos) == doctest::Approx(5.0));
  CHECK(infer_time_step(TrajectorySet{}, 3.0) == 3.0);
}

TEST_CASE("training with zero outer iterations returns the initial model") {
  Rng rng(10);
  TrajectorySet demos = random_set(rng, 4, 3, 6);
  TrainConfig cfg;
  cfg.outer_iterations = 0;
  cfg.num_heads = 3;
  cfg.trunk_widths = {8};
  Rng r1(11), copy(11);
  const GaussianTrainResult res = train(demos, cfg, r1);
  const BootstrapRewardModel init = BootstrapRewardModel::initialize(copy(), 3, 0.1, {8});
  CHECK(res.model.params().flatten() == init.params().flatten());
  CHECK(res.log.empty());
  CHECK(res.model.assignments().size() == 3);
}

TEST_CASE("training is deterministic for a seed and logs every iteration") {
  Rng rng(12);
  TrajectorySet demos = random_set(rng, 6, 4, 8);
  TrainConfig cfg;
  cfg.outer_iterations = 3;
  cfg.inner_iterations = 2;
  cfg.num_heads = 2;
  cfg.rollouts_per_iteration = 4;
  cfg.demo_batch = 4;
  cfg.background_batch = 8;
  cfg.trunk_widths = {8};
  Rng a(13), b(13);
  const GaussianTrainResult ra = train(demos, cfg, a), rb = train(demos, cfg, b);
  CHECK(ra.model == rb.model);
  CHECK(ra.policy == rb.policy);
  REQUIRE(ra.log.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ra.log[i].iter == static_cast<int>(i));
    CHECK(ra.log[i].head == rb.log[i].head);
    CHECK(ra.log[i].ess >= 1.0);
    CHECK(ra.log[i].policy_kl <= cfg.max_kl + 1e-12);
  }
  CHECK_FALSE(ra.model.params().flatten() == BootstrapRewardModel::initialize(1, 2, 0.1, {8}).params().flatten());
  std::ostringstream out;
  write_training_log(out, ra.log);
  std::string header;
  std::istringstream in(out.str());
  std::getline(in, header);
  CHECK(header == "iter,head,demo_return,bg_return,ess,policy_kl,wall_ms");
  CHECK_THROWS(train(TrajectorySet{}, cfg, a));
}
