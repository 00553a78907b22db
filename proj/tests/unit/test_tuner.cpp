#include <doctest.h>

#include <cmath>
#include <random>

#include "arcturus/tuner.hpp"

using namespace arcturus;
using namespace arcturus::tuner;

TEST_CASE("arm space covers the grid once, S major then C then T") {
  const auto arms = arm_space();
  REQUIRE(arms.size() == 800);
  CHECK(arms.front().params == tunnel::TunnelParams{1, 50, 1});
  CHECK(arms.back().params == tunnel::TunnelParams{10, 200, 5});
  CHECK(arms[1].params == tunnel::TunnelParams{1, 50, 2});
  CHECK(arms[5].params == tunnel::TunnelParams{1, 60, 1});
  CHECK(arms[80].params == tunnel::TunnelParams{2, 50, 1});
  for (int i = 0; i < 800; ++i) {
    CHECK(arms[static_cast<std::size_t>(i)].index == i);
    CHECK(arm_index(arms[static_cast<std::size_t>(i)].params) == i);
    CHECK(arms[static_cast<std::size_t>(i)].params.valid());
  }
}

TEST_CASE("reward formula") {
  RewardNorm n;  // rqpt [0, 25000], art [0, 100]
  CHECK(compute_reward(25000, 0, n).first == doctest::Approx(1.0));
  CHECK(compute_reward(0, 100, n).first == doctest::Approx(0.0));
  // rqpt_norm 0.6, art_norm 0.2
  CHECK(compute_reward(15000, 20, n).first == doctest::Approx(0.7));
}

TEST_CASE("extrema widen before normalising, reward stays in [0, 1]") {
  RewardNorm n;
  auto [r, widened] = compute_reward(50000, 0, n);
  CHECK(widened.rqpt_max == 50000);
  CHECK(r == doctest::Approx(1.0));
  auto [r2, w2] = compute_reward(25000, 200, widened);
  CHECK(w2.art_max == 200);
  CHECK(r2 == doctest::Approx(0.5 * 0.5 + 0.5 * 0.0));
  RewardNorm flat{10, 10, 5, 5};
  CHECK(compute_reward(10, 5, flat).first == doctest::Approx(0.5));  // both norms 0
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1e5);
  for (int i = 0; i < 1000; ++i) {
    auto [ri, ni] = compute_reward(u(rng), u(rng) / 100, n);
    CHECK(ri >= 0.0);
    CHECK(ri <= 1.0);
    n = ni;
  }
}

TEST_CASE("fresh state picks arm 0") {
  LinUcbState s;
  Context x(0.5, 0.3, 0.2, 0.4);
  CHECK(s.select_arm(x).index == 0);
}

TEST_CASE("one update with reward 1 matches the hand ridge step") {
  LinUcbState s(1.0);
  const Context x(0.6, 0.2, 0.4, 0.1);
  const int j = 417;
  s.update(j, x, 1.0);
  // A = I + xx^T: theta = x / (1 + |x|^2), x^T A^-1 x = |x|^2 / (1 + |x|^2).
  const double n2 = x.squaredNorm();
  const double expected_j = n2 / (1 + n2) + std::sqrt(n2 / (1 + n2));
  const double expected_other = std::sqrt(n2);
  CHECK(s.score(j, x) == doctest::Approx(expected_j));
  CHECK(s.score(0, x) == doctest::Approx(expected_other));
  CHECK(s.score(j, x) > s.score(0, x));
  CHECK(s.select_arm(x).index == j);
}

TEST_CASE("update invariants") {
  LinUcbState s;
  s.update(3, Context::Zero(), 0.8);
  CHECK(s.arm(3).a.isApprox(Matrix::Identity()));
  CHECK(s.arm(3).b.isZero());

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  LinUcbState p, q;
  std::vector<std::pair<Context, double>> obs;
  for (int i = 0; i < 30; ++i) obs.push_back({Context(u(rng), u(rng), u(rng), u(rng)), (u(rng) + 1) / 2});
  for (const auto& [x, r] : obs) p.update(7, x, r);
  for (auto it = obs.rbegin(); it != obs.rend(); ++it) q.update(7, it->first, it->second);
  CHECK(p.arm(7).a.isApprox(q.arm(7).a));
  CHECK(p.arm(7).b.isApprox(q.arm(7).b));
  const Matrix a = p.arm(7).a;
  CHECK(a.isApprox(a.transpose()));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  CHECK((p.arm(7).a * p.arm(7).a_inv).isApprox(Matrix::Identity(), 1e-9));
  CHECK(p.arm(8).a.isApprox(Matrix::Identity()));
}

TEST_CASE("state snapshot round-trips") {
  LinUcbState s(0.7);
  s.update(12, Context(0.1, 0.2, 0.3, 0.4), 0.9);
  const auto back = LinUcbState::from_json(s.to_json());
  CHECK(back.alpha() == doctest::Approx(0.7));
  CHECK(back.arm(12).a.isApprox(s.arm(12).a));
  CHECK(back.arm(12).b.isApprox(s.arm(12).b));
  const Context x(0.3, 0.3, 0.3, 0.3);
  CHECK(back.select_arm(x).index == s.select_arm(x).index);
}

TEST_CASE("stationary environment concentrates on the best arm") {
  StationaryEnv env;
  CHECK(arm_at(env.best_arm).params == tunnel::TunnelParams{4, 100, 2});
  const auto run = run_stationary(env, 5000, 1.0, 7);
  REQUIRE(run.arms.size() == 5000);
  CHECK(arm_frequency(run, env.best_arm, 4000, 5000) > 0.9);
  // Deterministic for a fixed seed.
  const auto again = run_stationary(env, 5000, 1.0, 7);
  CHECK(again.arms == run.arms);
}

TEST_CASE("tuner step returns valid parameters and snapshots restore") {
  Tuner t;
  TunnelModel model;
  std::mt19937_64 rng(4);
  tunnel::TunnelParams p = t.step({});
  for (int i = 0; i < 50; ++i) {
    CHECK(p.valid());
    p = t.step(model.observe(p, rng));
    CHECK(t.last_reward() >= 0.0);
    CHECK(t.last_reward() <= 1.0);
  }
  const auto restored = Tuner::restore(t.snapshot());
  CHECK(restored.norm().rqpt_max == doctest::Approx(t.norm().rqpt_max));
}
