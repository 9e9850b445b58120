#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "simbandit/environment.hpp"
#include "simbandit/rng.hpp"
#include "simbandit/zooming_number.hpp"

using namespace simbandit;

namespace {

std::shared_ptr<const MetricSpace> share(MetricSpace s) { return std::make_shared<const MetricSpace>(std::move(s)); }

Environment single_pair(double mu) {
  return Environment(share(MetricSpace::zero(1)), share(MetricSpace::discrete(1)), {mu}, {},
                     round_robin_arrivals({0}), 10);
}

}  // namespace

TEST_CASE("sample_payoff: degenerate means") {
  auto one = single_pair(1.0);
  auto zero = single_pair(0.0);
  const auto key = stream_key(3, Stream::noise);
  for (std::size_t t = 1; t <= 1000; ++t) {
    CHECK(sample_payoff(one, t, 0, 0, key) == 1.0);
    CHECK(sample_payoff(zero, t, 0, 0, key) == 0.0);
  }
}

TEST_CASE("sample_payoff: Monte Carlo mean of Bernoulli(0.6)") {
  auto env = single_pair(0.6);
  const auto key = stream_key(11, Stream::noise);
  double sum = 0.0;
  const std::size_t n = 100000;
  for (std::size_t t = 1; t <= n; ++t) sum += sample_payoff(env, t, 0, 0, key);
  // 3 sigma of the mean is 3 * sqrt(0.24 / 1e5) ~ 0.0046
  CHECK(std::abs(sum / n - 0.6) <= 0.01);
}

TEST_CASE("sample_payoff: reproducible and feasibility-checked") {
  auto xs = share(MetricSpace::line(3));
  auto ys = share(MetricSpace::line(3));
  std::vector<double> mu(9, 0.5);
  std::vector<char> feas(9, 1);
  feas[1] = 0;
  Environment env(xs, ys, mu, feas, round_robin_arrivals({0, 1, 2}), 100);
  const auto key = stream_key(5, Stream::noise);
  for (std::size_t t = 1; t <= 200; ++t) CHECK(sample_payoff(env, t, 2, 2, key) == sample_payoff(env, t, 2, 2, key));
  CHECK_THROWS_AS(sample_payoff(env, 1, 0, 1, key), FeasibilityError);

  Environment gauss(xs, ys, mu, {}, round_robin_arrivals({0}), 100, NoiseRule{NoiseKind::gaussian, 0.3});
  for (std::size_t t = 1; t <= 500; ++t) {
    const double v = sample_payoff(gauss, t, 0, 0, key);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("best_response: single feasible arm and random instances") {
  auto xs = share(MetricSpace::discrete(2, SpaceKind::context));
  auto ys = share(MetricSpace::discrete(3));
  Environment env(xs, ys, {0.9, 0.2, 0.8, 0.1, 0.1, 0.1}, {0, 1, 0, 1, 1, 1}, round_robin_arrivals({0}), 10);
  CHECK(best_response(env, 0).arm == 1);
  CHECK(best_response(env, 0).mu_star == doctest::Approx(0.2));
  CHECK(best_response(env, 1).arm == 0);  // tie, lowest arm

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed, Stream::audit);
    const std::size_t n = 20;
    std::vector<double> mu(n * n);
    std::vector<char> feas(n * n);
    for (auto& m : mu) m = std::round(rng.uniform() * 10.0) / 10.0;  // coarse values force ties
    for (auto& f : feas) f = rng.bernoulli(0.7);
    for (std::size_t x = 0; x < n; ++x) feas[x * n + x] = 1;
    Environment r(share(MetricSpace::discrete(n, SpaceKind::context)), share(MetricSpace::discrete(n)), mu, feas,
                  round_robin_arrivals({0}), 10);
    for (PointId x = 0; x < n; ++x) {
      PointId arm = n;
      double best = -1.0;
      for (PointId y = 0; y < n; ++y)
        if (feas[x * n + y] && mu[x * n + y] > best) {
          best = mu[x * n + y];
          arm = y;
        }
      const auto br = best_response(r, x);
      CHECK(br.arm == arm);
      CHECK(br.mu_star == best);
    }
  }
}

TEST_CASE("needle: net values and smoothing floor") {
  NeedleParams p;
  p.n_x = 1;
  p.n_y = 2;
  p.r = 0.2;
  p.assignment = {0};
  p.resolution = 3;
  auto inst = make_needle_instance(p);
  const auto& env = inst.env;
  const PointId x0 = inst.net_x[0], ystar = inst.net_y[0], y1 = inst.net_y[1];
  CHECK(inst.needle[0] == ystar);
  CHECK(env.mu(x0, ystar) == doctest::Approx(0.6));
  CHECK(env.mu(x0, y1) == doctest::Approx(0.55));
  const auto br = best_response(env, x0);
  CHECK(br.arm == ystar);
  CHECK(br.mu_star == doctest::Approx(0.5 + p.r / 2));
  // arm halfway between the two net arms: distance 0.2 from both
  const PointId mid = 2;
  CHECK(env.arms().distance(mid, ystar) == doctest::Approx(0.2));
  CHECK(env.arms().distance(mid, y1) == doctest::Approx(0.2));
  CHECK(env.mu(x0, mid) == doctest::Approx(0.5));
  CHECK_THROWS(make_needle_instance(NeedleParams{1, 2, 0.6, {}, 0, 0, 10}));
}

TEST_CASE("needle: exactly one optimal net arm per net context") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    NeedleParams p{4, 4, 0.125, {}, seed, 1, 100};
    auto inst = make_needle_instance(p);
    CHECK(validate_lipschitz(inst.env).ok);
    for (std::size_t i = 0; i < p.n_x; ++i) {
      const PointId x = inst.net_x[i];
      std::size_t top = 0;
      for (PointId y : inst.net_y) {
        const double v = inst.env.mu(x, y);
        if (y == inst.needle[i]) {
          CHECK(v == doctest::Approx(0.5 + p.r / 2));
          ++top;
        } else {
          CHECK(v == doctest::Approx(0.5 + p.r / 4));
        }
      }
      CHECK(top == 1);
    }
    for (std::size_t t = 1; t <= 8; ++t) CHECK(inst.env.context_at(t) == inst.net_x[(t - 1) % p.n_x]);
  }
}

TEST_CASE("needle: zooming number of the 4x4 net instance") {
  auto inst = make_needle_instance(NeedleParams{4, 4, 0.25, {}, 7, 0, 100});
  CHECK(zooming_number(inst.env, 0.25 / 4, CoverMode::greedy) <= 16);
  CHECK(zooming_number(inst.env, 0.25 / 4, CoverMode::exact) <= 16);
}

TEST_CASE("drifting: zero sigma is time-invariant") {
  auto env = make_drifting_env(DriftParams{4, 0.0, DriftShape::linear, 300, 1});
  for (std::size_t t = 1; t < 300; ++t)
    for (PointId y = 0; y < 4; ++y) CHECK(env.mu(t, y) == env.mu(0, y));
  const auto first = best_response(env, 0).arm;
  for (PointId x = 0; x < 300; ++x) CHECK(best_response(env, x).arm == first);
}

TEST_CASE("drifting: linear increments bounded by sigma") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto env = make_drifting_env(DriftParams{5, 0.01, DriftShape::linear, 5000, seed});
    double worst = 0.0;
    for (PointId t = 0; t + 1 < 5000; ++t)
      for (PointId y = 0; y < 5; ++y) worst = std::max(worst, std::abs(env.mu(t + 1, y) - env.mu(t, y)));
    CHECK(worst <= 0.01 + 1e-12);
    for (std::size_t t = 1; t <= 10; ++t) CHECK(env.context_at(t) == t - 1);
  }
}

TEST_CASE("drifting: sqrt shape respects its metric") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto env = make_drifting_env(DriftParams{3, 0.02, DriftShape::sqrt, 4000, seed});
    CHECK(validate_lipschitz(env).ok);
    CounterRng rng(seed, Stream::audit);
    for (int i = 0; i < 20000; ++i) {
      const PointId a = rng.below(4000), b = rng.below(4000), y = rng.below(3);
      const double bound = std::min(1.0, 0.02 * std::sqrt(std::abs(double(a) - double(b))));
      CHECK(std::abs(env.mu(a, y) - env.mu(b, y)) <= bound + 1e-9);
    }
  }
}

TEST_CASE("sleeping: always awake and alternating singletons") {
  std::vector<double> mu{0.3, 0.7, 0.5};
  auto all = make_sleeping_env(3, std::vector<std::vector<PointId>>(50, {0, 1, 2}), mu);
  CHECK(all.num_contexts() == 1);
  CHECK(all.feasible_arms(0).size() == 3);
  CHECK(best_response(all, 0).arm == 1);

  std::vector<std::vector<PointId>> alt;
  for (int t = 0; t < 20; ++t) alt.push_back({PointId(t % 2)});
  auto env = make_sleeping_env(3, alt, mu);
  for (std::size_t t = 1; t <= 20; ++t) CHECK(best_response(env, env.context_at(t)).arm == (t - 1) % 2);
  CHECK_THROWS(make_sleeping_env(3, {{0}, {}}, mu));
}

TEST_CASE("sleeping: benchmark matches brute force over awake arms") {
  CounterRng rng(99, Stream::audit);
  std::vector<double> mu(5);
  for (auto& m : mu) m = rng.uniform();
  std::vector<std::vector<PointId>> awake(1000);
  for (auto& s : awake) {
    for (PointId y = 0; y < 5; ++y)
      if (rng.bernoulli(0.5)) s.push_back(y);
    if (s.empty()) s.push_back(rng.below(5));
  }
  auto env = make_sleeping_env(5, awake, mu);
  CHECK(env.contexts().distance(0, env.num_contexts() - 1) == 0.0);
  for (std::size_t t = 1; t <= 1000; ++t) {
    double best = -1.0;
    for (PointId y : awake[t - 1]) best = std::max(best, mu[y]);
    CHECK(best_response(env, env.context_at(t)).mu_star == best);
  }
}

TEST_CASE("lipschitz validator flags a steep instance") {
  auto xs = share(MetricSpace::line(5));
  auto ys = share(MetricSpace::line(5));
  std::vector<double> mu(25, 0.5);
  mu[12] = 0.9;  // neighbours are 0.25 away
  Environment env(xs, ys, mu, {}, round_robin_arrivals({0}), 10);
  const auto rep = validate_lipschitz(env);
  CHECK_FALSE(rep.ok);
  REQUIRE(rep.violation.has_value());
  CHECK(rep.violation->gap > rep.violation->distance);
}

TEST_CASE("generators pass the Lipschitz validator") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(validate_lipschitz(make_random_env(seed, 100)).ok);
  CHECK(validate_lipschitz(make_ridge_env(30, 30, 0.9, 0.1, 1.0, uniform_arrivals(30, 1), 100)).ok);
}
