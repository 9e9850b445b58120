#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "simbandit/baselines.hpp"
#include "simbandit/covering.hpp"
#include "simbandit/rng.hpp"

using namespace simbandit;

namespace {

std::shared_ptr<const MetricSpace> share(MetricSpace s) { return std::make_shared<const MetricSpace>(std::move(s)); }

}  // namespace

TEST_CASE("exp3: single arm and gamma = 1") {
  Exp3 one(1, Exp3::default_gamma(1, 100), CounterRng(1, Stream::algorithm));
  CHECK(one.gamma() == 1.0);
  for (int t = 0; t < 100; ++t) {
    CHECK(one.draw() == 0);
    one.update(0, 1.0);
  }

  Exp3 flat(4, 1.0, CounterRng(2, Stream::algorithm));
  for (int t = 0; t < 50; ++t) {
    const auto arm = flat.draw();
    flat.update(arm, 1.0);
    for (double p : flat.probabilities()) CHECK(p == doctest::Approx(0.25));
  }
}

TEST_CASE("exp3: probabilities form a distribution with floor gamma/k") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t k = 3 + seed;
    Exp3 e(k, 0.1, CounterRng(seed, Stream::algorithm));
    CounterRng payoffs(seed, Stream::audit);
    std::vector<char> mask(k, 1);
    mask[0] = 0;
    for (int t = 0; t < 2000; ++t) {
      const bool masked = t % 3 == 0;
      const auto p = e.probabilities(masked ? &mask : nullptr);
      const double m = masked ? double(k - 1) : double(k);
      CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
      for (std::size_t i = 0; i < k; ++i) {
        if (masked && i == 0) {
          CHECK(p[i] == 0.0);
        } else {
          CHECK(p[i] >= 0.1 / m - 1e-12);
        }
      }
      const auto arm = e.draw(masked ? &mask : nullptr);
      CHECK((!masked || arm != 0));
      e.update(arm, payoffs.uniform());
    }
  }
  Exp3 e(2, 0.5, CounterRng(0, Stream::algorithm));
  CHECK_THROWS_AS(e.update(0, 0.5), std::logic_error);
  const auto arm = e.draw();
  CHECK_THROWS_AS(e.update(arm, 1.5), std::invalid_argument);
}

TEST_CASE("exp3: regret on adversarial 0/1 sequences") {
  const std::size_t T = 10000, k = 2;
  const double bound = 2.7 * std::sqrt(double(k) * T * std::log(double(k)));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // blocks of varying length where one arm pays 1 and the other 0, biased to arm 1 overall
    std::vector<std::array<double, 2>> g(T);
    CounterRng rng(seed, Stream::audit);
    std::size_t t = 0;
    while (t < T) {
      const std::size_t len = 50 + rng.below(500);
      const int good = rng.bernoulli(0.6) ? 1 : 0;
      for (std::size_t i = 0; i < len && t < T; ++i, ++t) g[t] = {good == 0 ? 1.0 : 0.0, good == 1 ? 1.0 : 0.0};
    }
    double best0 = 0.0, best1 = 0.0;
    for (const auto& row : g) {
      best0 += row[0];
      best1 += row[1];
    }
    // the bound is on expected regret: average over the algorithm's own randomness
    double got = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
      Exp3 e(k, Exp3::default_gamma(k, T), CounterRng(seed, Stream::algorithm, rep));
      for (std::size_t s = 0; s < T; ++s) {
        const auto arm = e.draw();
        got += g[s][arm] / reps;
        e.update(arm, g[s][arm]);
      }
    }
    CHECK(std::max(best0, best1) - got <= bound);
  }
}

TEST_CASE("ucb1: untried arms first and two-arm regret") {
  Ucb1 u(4);
  CHECK(u.select() == 0);
  u.update(0, 1.0);
  CHECK(u.select() == 1);
  std::vector<char> mask{1, 0, 0, 1};
  CHECK(u.select(&mask) == 3);

  std::vector<std::size_t> bad;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Ucb1 b(2);
    CounterRng rng(seed, Stream::noise);
    std::size_t pulls = 0;
    for (int t = 0; t < 10000; ++t) {
      const auto arm = b.select();
      if (arm == 1) ++pulls;
      b.update(arm, rng.bernoulli(arm == 0 ? 0.9 : 0.1) ? 1.0 : 0.0);
    }
    bad.push_back(pulls);
  }
  std::nth_element(bad.begin(), bad.begin() + 10, bad.end());
  CHECK(bad[10] <= 200);
}

TEST_CASE("ucb1 policy: single arm never regrets") {
  Environment env(share(MetricSpace::zero(1)), share(MetricSpace::discrete(1)), {0.4}, {},
                  round_robin_arrivals({0}), 100);
  Ucb1Policy p(env);
  for (std::size_t t = 1; t <= 100; ++t) {
    CHECK(p.choose(t, 0).arm == best_response(env, 0).arm);
    p.receive(sample_payoff(env, t, 0, 0, 7));
  }
}

TEST_CASE("policies respect feasibility") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto env = make_random_env(seed, 500);
    Exp3Policy e(env, 500, seed);
    Ucb1Policy u(env);
    UniformPolicy un(env, 500, seed);
    OraclePolicy o(env);
    for (Policy* p : std::vector<Policy*>{&e, &u, &un, &o})
      for (std::size_t t = 1; t <= 500; ++t) {
        const PointId x = env.context_at(t);
        const auto c = p->choose(t, x);
        CHECK(env.feasible(x, c.arm));
        p->receive(sample_payoff(env, t, x, c.arm, stream_key(seed, Stream::noise)));
      }
  }
}

TEST_CASE("uniform: one context reduces to EXP3 over the arm net") {
  Environment env(share(MetricSpace::zero(1)), share(MetricSpace::line(21)), std::vector<double>(21, 0.5), {},
                  round_robin_arrivals({0}), 1000);
  UniformPolicy u(env, 1000, 9);
  CHECK(u.context_net().size() == 1);
  CHECK(is_r_net(env.arms(), all_points(env.arms()), u.arm_net(), u.granularity()));
  Exp3 ref(u.arm_net().size(), Exp3::default_gamma(u.arm_net().size(), 1000), CounterRng(9, Stream::algorithm, 1));
  for (std::size_t t = 1; t <= 1000; ++t) {
    const auto c = u.choose(t, 0);
    const auto j = ref.draw();
    CHECK(c.arm == u.arm_net()[j]);
    const double payoff = sample_payoff(env, t, 0, c.arm, 3);
    u.receive(payoff);
    ref.update(j, payoff);
  }
}

TEST_CASE("uniform: granularity and routing") {
  auto env = make_ridge_env(101, 101, 0.9, 0.1, 1.0, uniform_arrivals(101, 1), 100000);
  UniformPolicy u(env, 100000, 1);
  // Greedy nets on 101 evenly spaced points: every m-th point, m = floor(r/h) + 1.
  double best_r = 0.0, best = 1e300;
  for (int j = 0; j <= 160; ++j) {
    const double r = std::exp2(-j / 4.0);
    const double m = std::floor(r / 0.01 + 1e-9) + 1.0;
    const double cells = std::ceil(101.0 / m);
    const bool exact = cells == 101.0;
    const double pred = (exact ? 0.0 : r) * 1e5 +
                        2.0 * std::sqrt((std::numbers::e - 1.0) * cells * 1e5 * cells * std::log(cells));
    if (pred < best) best = pred, best_r = r;
    if (exact) break;
  }
  CHECK(u.granularity() == best_r);
  CHECK(is_r_net(env.contexts(), all_points(env.contexts()), u.context_net(), u.granularity()));
  for (PointId x = 0; x < env.num_contexts(); ++x) {
    const PointId c = u.context_net()[u.cell_of(x)];
    CHECK(within(env.contexts().distance(x, c), u.granularity()));
    for (PointId other : u.context_net()) CHECK(env.contexts().distance(x, c) <= env.contexts().distance(x, other));
  }
}

TEST_CASE("oracle policy plays the best response") {
  auto env = make_random_env(4, 200);
  OraclePolicy o(env);
  for (std::size_t t = 1; t <= 200; ++t) {
    const PointId x = env.context_at(t);
    CHECK(o.choose(t, x).arm == best_response(env, x).arm);
    o.receive(0.5);
  }
}
