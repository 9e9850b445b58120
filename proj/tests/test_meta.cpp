#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "simbandit/meta.hpp"
#include "simbandit/rng.hpp"

using namespace simbandit;

namespace {

std::shared_ptr<const MetricSpace> share(MetricSpace s) { return std::make_shared<const MetricSpace>(std::move(s)); }

}  // namespace

TEST_CASE("t0 examples") {
  CHECK(t0(1.0, 2.5, 1.0) == 3);
  CHECK(t0(1.0, 0.3, 0.0) == 1);
  CHECK(t0(1.0 / std::numbers::e, 1.0, 0.0) == 8);
  for (double d : {0.0, 1.0, 2.0}) {
    std::size_t prev = 0;
    for (int i = 0; i < 10; ++i) {
      const std::size_t b = t0(std::ldexp(1.0, -i), 1.0, d);
      CHECK(b > prev);
      prev = b;
    }
  }
  CHECK_THROWS(t0(0.0, 1.0, 1.0));
}

TEST_CASE("rk covering examples") {
  auto line = MetricSpace::line(101);
  std::vector<PointId> arrivals{0, 10, 10, 40, 95};
  std::vector<PointId> support{0, 10, 40, 95};
  CHECK(rk_covering_number(line, arrivals, 0.1, 1) == covering_number(line, support, 0.1));
  CHECK(rk_covering_number(line, arrivals, 0.1, 6) == 0);

  // two tight clusters of 12 arrivals plus 5 scattered outliers
  std::vector<PointId> clustered;
  for (int i = 0; i < 12; ++i) clustered.push_back(20 + i % 3);
  for (int i = 0; i < 12; ++i) clustered.push_back(70 + i % 4);
  for (PointId o : {0, 45, 55, 90, 100}) clustered.push_back(o);
  CHECK(rk_covering_number(line, clustered, 0.1, 10, CoverMode::exact) == 2);
  CHECK(rk_covering_number(line, clustered, 0.1, 10, CoverMode::greedy) == 2);

  // brute force on random multisets of a small line
  auto small = MetricSpace::line(12);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed, Stream::audit);
    std::vector<PointId> arr;
    for (int i = 0; i < 40; ++i) arr.push_back(rng.below(12));
    const double r = 0.1 + 0.3 * rng.uniform();
    const std::size_t k = 1 + rng.below(12);
    std::vector<PointId> heavy;
    for (PointId x = 0; x < 12; ++x) {
      if (std::find(arr.begin(), arr.end(), x) == arr.end()) continue;
      std::size_t c = 0;
      for (PointId a : arr) c += small.distance(x, a) <= r + 1e-12;
      if (c >= k) heavy.push_back(x);
    }
    std::vector<double> dist;
    for (PointId a : heavy)
      for (PointId b : heavy) dist.push_back(small.distance(a, b));
    const std::size_t expect = heavy.empty() ? 0 : oracle::min_clique_partition(MetricSpace::matrix(heavy.size(), dist), r);
    CHECK(rk_covering_number(small, arr, r, k, CoverMode::exact) == expect);
  }
}

TEST_CASE("route: root first, then a child once the root is full") {
  Environment env(share(MetricSpace::line(5)), share(MetricSpace::discrete(3)), std::vector<double>(15, 0.5), {},
                  round_robin_arrivals({0, 3}), 100);
  MetaPolicy m(env, 100, 1);
  REQUIRE(m.budget(0) == 1);
  const auto c = m.choose(1, 0);
  CHECK(c.cell == 0);
  CHECK(c.arm < 3);
  CHECK_THROWS_AS(m.feedback(1, 0.5), std::logic_error);
  m.feedback(0, 0.5);
  CHECK(m.balls()[0].full);
  CHECK(m.route(2, 3) == 1);
  const auto& child = m.balls()[1];
  CHECK(child.center == 3);
  CHECK(child.radius() == 0.5);
  CHECK(child.parent == std::optional<std::size_t>(0));
  CHECK(m.balls()[0].children == std::vector<std::size_t>{1});
}

TEST_CASE("step: EXP3 over three arms reaches every arm") {
  Environment env(share(MetricSpace::zero(1)), share(MetricSpace::discrete(3)), {0.2, 0.5, 0.8}, {},
                  round_robin_arrivals({0}), 2000);
  MetaPolicy m(env, 2000, 4, MetaParams{50.0});
  std::set<PointId> seen;
  for (std::size_t t = 1; t <= 300; ++t) {
    const auto c = m.choose(t, 0);
    CHECK(c.arm < 3);
    seen.insert(c.arm);
    m.receive(sample_payoff(env, t, 0, c.arm, 1));
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("meta runs keep every claim") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto env = make_random_env(seed, 10000, 40, 10);
    for (Subroutine sub : {Subroutine::exp3, Subroutine::ucb1}) {
      MetaPolicy m(env, 10000, seed, MetaParams{0.05, std::nullopt, sub});
      auto auditor = m.make_auditor(env);
      const auto key = stream_key(seed, Stream::noise);
      std::size_t last_balls = m.balls().size();
      for (std::size_t t = 1; t <= 10000; ++t) {
        const PointId x = env.context_at(t);
        const auto c = m.choose(t, x);
        auditor->after_choose(t, x, c);
        const double payoff = sample_payoff(env, t, x, c.arm, key);
        m.receive(payoff);
        auditor->after_feedback(t, x, c, payoff);
        CHECK(m.balls().size() >= last_balls);
        last_balls = m.balls().size();
      }
      auditor->finish(10000);
      CHECK(m.balls().size() > 3);
      for (const auto& b : m.balls()) {
        CHECK(b.hits <= b.budget);
        CHECK(b.full == (b.hits >= b.budget));
      }
      for (const auto& check : auditor->report().checks()) {
        INFO(check.name, " ", check.first_detail);
        CHECK(check.passed());
      }
      CHECK(auditor->report().find("one_hit")->events == 10000);
      CHECK(auditor->report().find("full_balls")->events > 0);
    }
  }
}
