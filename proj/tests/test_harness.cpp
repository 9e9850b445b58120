#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simbandit/baselines.hpp"
#include "simbandit/harness.hpp"
#include "simbandit/io.hpp"
#include "simbandit/meta.hpp"
#include "simbandit/taxonomy.hpp"
#include "simbandit/zooming.hpp"

using namespace simbandit;

namespace {

std::shared_ptr<const MetricSpace> share(MetricSpace s) { return std::make_shared<const MetricSpace>(std::move(s)); }

Instance wrap(Environment env) { return Instance{std::make_shared<const Environment>(std::move(env)), nullptr}; }

NeedleParams needle_params(std::size_t horizon) {
  NeedleParams p;
  p.n_x = 4;
  p.n_y = 4;
  p.r = 0.125;
  p.seed = 3;
  p.resolution = 1;
  p.horizon = horizon;
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("run: trivial regret") {
  Environment one(share(MetricSpace::zero(1)), share(MetricSpace::discrete(1)), {0.3}, {},
                  round_robin_arrivals({0}), 1);
  Ucb1Policy u(one);
  const auto log = run(one, u, RunOptions{1, 5});
  CHECK(log.horizon() == 1);
  CHECK(log.total_regret() == 0.0);

  auto env = make_random_env(2, 500);
  OraclePolicy o(env);
  const auto olog = run(env, o, RunOptions{500, 1});
  CHECK(olog.total_regret() == 0.0);
  for (const auto& r : olog.rounds) CHECK(r.inst_regret == 0.0);

  Environment flat(share(MetricSpace::line(5)), share(MetricSpace::line(4)), std::vector<double>(20, 0.4), {},
                   uniform_arrivals(5, 2), 300);
  Exp3Policy e(flat, 300, 2);
  const auto flog = run(flat, e, RunOptions{300, 2});
  for (double c : contextual_regret(flog, flat)) CHECK(c == 0.0);
}

TEST_CASE("run: horizon and arm checks") {
  auto env = make_random_env(1, 100);
  Ucb1Policy u(env);
  CHECK_THROWS_AS(run(env, u, RunOptions{101, 0}), ConfigError);
  Environment small(share(MetricSpace::zero(1)), share(MetricSpace::discrete(2)), {0.1, 0.2}, {},
                    round_robin_arrivals({0}), 10);
  Ucb1Policy wrong(env);  // built for a different, larger arm space
  bool threw = false;
  try {
    run(small, wrong, RunOptions{10, 0});
  } catch (const std::exception&) {
    threw = true;
  }
  CHECK(threw);
}

TEST_CASE("regret replay equals hand-summed gaps") {
  Environment env(share(MetricSpace::zero(2)), share(MetricSpace::discrete(3)), {0.2, 0.5, 0.9, 0.6, 0.1, 0.3}, {},
                  round_robin_arrivals({0, 1}), 4);
  RunLog log;
  log.rounds = {{1, 0, 0}, {2, 1, 1}, {3, 0, 2}, {4, 1, 0}};
  const auto series = contextual_regret(log, env);
  REQUIRE(series.size() == 4);
  CHECK(series[0] == doctest::Approx(0.7));
  CHECK(series[1] == doctest::Approx(0.7 + 0.5));
  CHECK(series[2] == doctest::Approx(1.2));
  CHECK(series[3] == doctest::Approx(1.2));
}

TEST_CASE("adversarial benchmark matches exhaustive argmax of summed means") {
  const std::size_t X = 3, Y = 4, T = 60;
  CounterRng rng(11, Stream::instance);
  std::vector<double> mu(T * X * Y);
  for (auto& m : mu) m = rng.uniform();
  auto env = Environment::adversarial(share(MetricSpace::discrete(X, SpaceKind::context)),
                                      share(MetricSpace::discrete(Y)), mu, {}, uniform_arrivals(X, 4), T);
  const auto bench = benchmark_arms(env, T);
  for (PointId x = 0; x < X; ++x) {
    std::size_t best = 0;
    double best_sum = -1.0;
    for (PointId y = 0; y < Y; ++y) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += mu[t * X * Y + x * Y + y];
      if (s > best_sum) best_sum = s, best = y;
    }
    CHECK(bench[x] == best);
  }
  Exp3Policy e(env, T, 1);
  const auto log = run(env, e, RunOptions{T, 1});
  double hand = 0.0;
  for (const auto& r : log.rounds) {
    const std::size_t base = (r.round - 1) * X * Y + r.context * Y;
    hand += mu[base + bench[r.context]] - mu[base + r.arm];
  }
  CHECK(log.total_regret() == doctest::Approx(hand));
  CHECK(contextual_regret(log, env).back() == doctest::Approx(hand));
}

TEST_CASE("regret decomposes over structure cells") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto env = make_random_env(seed, 2000);
    std::vector<std::unique_ptr<Policy>> policies;
    policies.push_back(std::make_unique<ZoomingPolicy>(env, 2000));
    policies.push_back(std::make_unique<MetaPolicy>(env, 2000, seed, MetaParams{0.05}));
    policies.push_back(std::make_unique<UniformPolicy>(env, 2000, seed));
    for (auto& p : policies) {
      const auto log = run(env, *p, RunOptions{2000, seed});
      double sum = 0.0;
      for (const auto& [cell, r] : regret_by_cell(log)) sum += r;
      CHECK(sum == doctest::Approx(log.total_regret()).epsilon(1e-9));
    }
  }
}

TEST_CASE("csv schema and determinism") {
  auto inst = make_needle_instance(needle_params(1024));
  ZoomingPolicy a(inst.env, 1024), b(inst.env, 1024);
  const auto csv_a = to_csv(run(inst.env, a, RunOptions{1024, 9}));
  const auto csv_b = to_csv(run(inst.env, b, RunOptions{1024, 9}));
  CHECK(csv_a == csv_b);
  CHECK(csv_a.rfind("round,context_id,arm_id,payoff,inst_regret,cum_regret,structure_size\n", 0) == 0);
  CHECK(std::count(csv_a.begin(), csv_a.end(), '\n') == 1025);
  ZoomingPolicy c(inst.env, 1024);
  CHECK(to_csv(run(inst.env, c, RunOptions{1024, 10})) != csv_a);
}

TEST_CASE("doubling phases") {
  CHECK(doubling_phase_lengths(7) == std::vector<std::size_t>{2, 4, 1});
  CHECK(doubling_phase_lengths(2) == std::vector<std::size_t>{2});
  CHECK(doubling_phase_lengths(14) == std::vector<std::size_t>{2, 4, 8});
  CHECK(doubling_phase_lengths(15) == std::vector<std::size_t>{2, 4, 8, 1});

  auto env = make_random_env(5, 100);
  std::vector<std::pair<std::size_t, std::size_t>> made;
  DoublingPolicy d([&](std::size_t h, std::size_t phase) -> std::unique_ptr<Policy> {
    made.emplace_back(h, phase);
    return std::make_unique<ZoomingPolicy>(env, h);
  });
  const auto log = run(env, d, RunOptions{7, 1});
  CHECK(made == std::vector<std::pair<std::size_t, std::size_t>>{{2, 1}, {4, 2}, {8, 3}});
  std::vector<std::size_t> phases;
  for (const auto& r : log.rounds) phases.push_back(r.phase);
  CHECK(phases == std::vector<std::size_t>{1, 1, 2, 2, 2, 2, 3});
  // a fresh instance per phase: the first round of each phase sees only the initial ball
  CHECK(log.rounds[2].structure_size <= 2);
}

TEST_CASE("doubling: phase 1 equals a fixed-horizon T = 2 run") {
  auto inst = wrap(make_random_env(8, 1000));
  AlgorithmSpec spec{"uniform", nlohmann::json::object(), false};
  auto fixed = make_policy(spec, inst, 2, 4);
  spec.anytime = true;
  auto wrapped = make_policy(spec, inst, 1000, 4);
  const auto a = run(*inst.env, *fixed, RunOptions{2, 4});
  const auto b = run(*inst.env, *wrapped, RunOptions{1000, 4});
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(a.rounds[t].arm == b.rounds[t].arm);
    CHECK(a.rounds[t].payoff == b.rounds[t].payoff);
  }
}

TEST_CASE("doubling: wrapped zooming within 4x of fixed-horizon zooming") {
  const std::size_t T = 20000;
  auto inst = wrap(make_ridge_env(17, 17, 0.9, 0.1, 1.0, uniform_arrivals(17, 1), T));
  std::vector<double> fixed, wrapped;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AlgorithmSpec spec{"zooming", nlohmann::json::object(), false};
    auto f = make_policy(spec, inst, T, seed);
    fixed.push_back(run(*inst.env, *f, RunOptions{T, seed}).total_regret());
    spec.anytime = true;
    auto w = make_policy(spec, inst, T, seed);
    wrapped.push_back(run(*inst.env, *w, RunOptions{T, seed}).total_regret());
  }
  CHECK(median(wrapped) <= 4.0 * median(fixed));
}

TEST_CASE("doubling audits merge phase reports") {
  auto inst = wrap(make_random_env(3, 3000));
  AlgorithmSpec spec{"zooming", nlohmann::json::object(), true};
  auto p = make_policy(spec, inst, 3000, 2);
  const auto log = run(*inst.env, *p, RunOptions{3000, 2, true});
  REQUIRE(log.audit);
  CHECK(log.audit->find("domain")->events == 3000);
  CHECK(log.audit->passed());
}

TEST_CASE("q_hat removal: phase i uses q_hat = 1/i") {
  Instance inst = instance_from_json(
      nlohmann::json{{"generator", "taxonomy"}, {"leaves", 12}, {"seed", 2}, {"mu_seed", 5}}, 200);
  AlgorithmSpec spec{"taxonomy", {{"q_hat", "phases"}}, true};
  auto p = make_policy(spec, inst, 200, 1);
  auto* d = dynamic_cast<DoublingPolicy*>(p.get());
  REQUIRE(d);
  for (std::size_t t = 1; t <= 40; ++t) {
    d->choose(t, 0);
    auto* tax = dynamic_cast<TaxonomyPolicy*>(d->inner());
    REQUIRE(tax);
    CHECK(tax->q_hat() == doctest::Approx(1.0 / double(d->phase())));
    d->receive(0.5);
  }
  CHECK(d->phase() == 5);  // 2 + 4 + 8 + 16 = 30 < 40
  AlgorithmSpec fixed{"taxonomy", {{"q_hat", "phases"}}, false};
  CHECK_THROWS_AS(make_policy(fixed, inst, 200, 1), ConfigError);
}

TEST_CASE("snapshot audits") {
  auto inst = wrap(make_random_env(6, 3000));
  for (const char* name : {"zooming", "meta"}) {
    AlgorithmSpec spec{name, name == std::string("meta") ? nlohmann::json{{"c_y", 0.05}} : nlohmann::json::object(),
                       false};
    auto p = make_policy(spec, inst, 3000, 1);
    run(*inst.env, *p, RunOptions{3000, 1});
    const nlohmann::json snap{{"round", 3000}, {"state", p->snapshot()}};
    const auto report = audit_snapshot(snap, inst);
    INFO(name, "\n", format_report(report));
    CHECK(report.passed());
    CHECK(!report.checks().empty());

    // corrupt one ball's statistics
    auto bad = snap;
    auto& balls = bad["state"]["balls"];
    REQUIRE(balls.size() > 1);
    if (name == std::string("zooming")) {
      balls[1]["payoff_sum"] = double(balls[1]["n"].get<std::size_t>()) + 5.0;
    } else {
      balls[1]["hits"] = balls[1]["budget"].get<std::size_t>() + 1;
    }
    CHECK_FALSE(audit_snapshot(bad, inst).passed());
  }

  Instance tinst = instance_from_json(
      nlohmann::json{{"generator", "taxonomy"}, {"leaves", 16}, {"seed", 1}, {"mu_seed", 2}}, 5000);
  AlgorithmSpec tspec{"taxonomy", {{"log_horizon", 1.0}}, false};
  auto tp = make_policy(tspec, tinst, 5000, 1);
  const auto log = run(*tinst.env, *tp, RunOptions{5000, 1, true});
  CHECK(log.audit->find("invariant")->passed());
  CHECK(log.audit->find("invariant")->events > 0);
  const nlohmann::json tsnap{{"round", 5000}, {"state", tp->snapshot()}};
  CHECK(audit_snapshot(tsnap, tinst).passed());
  CHECK_THROWS_AS(audit_snapshot(tsnap, inst), ConfigError);
}

TEST_CASE("mutation: skipped activation is caught with a round number") {
  auto env = make_ridge_env(9, 9, 0.9, 0.1, 1.0, uniform_arrivals(9, 2), 4000);
  ZoomOptions o;
  o.skip_activation = true;
  ZoomingPolicy p(env, 4000, o);
  const auto log = run(env, p, RunOptions{4000, 3, true});
  REQUIRE(log.audit);
  CHECK(log.audit->find("separation")->passed());
  const auto* act = log.audit->find("activation_rule");
  CHECK_FALSE(act->passed());
  REQUIRE(act->first_violation_round);
  CHECK(*act->first_violation_round >= 1);
  CHECK_FALSE(log.audit->passed());
}

TEST_CASE("instance documents round-trip losslessly") {
  std::vector<Instance> insts;
  for (std::uint64_t seed = 0; seed < 6; ++seed) insts.push_back(wrap(make_random_env(seed, 50)));
  insts.push_back(wrap(make_needle_instance(needle_params(64)).env));
  DriftParams dp;
  dp.horizon = 200;
  insts.push_back(wrap(make_drifting_env(dp)));
  insts.push_back(wrap(make_sleeping_env(3, {{0, 1}, {1, 2}, {0, 2}, {0, 1}}, {0.2, 0.5, 0.7})));
  insts.push_back(instance_from_json(nlohmann::json{{"generator", "taxonomy"}, {"leaves", 9}, {"seed", 4}}, 30));
  CounterRng rng(1, Stream::instance);
  std::vector<double> mu(10 * 2 * 3);
  for (auto& m : mu) m = rng.uniform();
  insts.push_back(wrap(Environment::adversarial(share(MetricSpace::line(2)), share(MetricSpace::discrete(3)), mu, {},
                                                round_robin_arrivals({1, 0}), 10, NoiseRule{NoiseKind::gaussian, 0.2})));
  for (const auto& inst : insts) {
    const auto doc = instance_to_json(inst);
    const auto back = instance_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(instance_to_json(back).dump() == doc.dump());
    const auto& a = *inst.env;
    const auto& b = *back.env;
    CHECK(a.mu_table() == b.mu_table());
    CHECK(a.feasibility_table() == b.feasibility_table());
    CHECK(a.horizon() == b.horizon());
    CHECK(bool(inst.taxonomy) == bool(back.taxonomy));
    for (PointId p = 0; p < a.pairs().size(); p += 7)
      for (PointId q = 0; q < a.pairs().size(); q += 5) CHECK(a.pairs().distance(p, q) == b.pairs().distance(p, q));
    for (std::size_t t = 1; t <= std::min<std::size_t>(a.horizon(), 30); ++t) CHECK(a.context_at(t) == b.context_at(t));
  }
}

TEST_CASE("space documents") {
  const auto line = space_from_json(nlohmann::json{{"kind", "line"}, {"n", 5}});
  CHECK(line->size() == 5);
  CHECK(line->distance(0, 4) == 1.0);
  const auto grid = space_from_json(nlohmann::json{{"kind", "grid"}, {"nx", 3}, {"ny", 4}, {"norm", "linf"}});
  CHECK(grid->size() == 12);
  const auto prod = MetricSpace::product(line, grid);
  const auto back = space_from_json(space_to_json(prod));
  CHECK(back->size() == prod.size());
  for (PointId a = 0; a < prod.size(); a += 3)
    for (PointId b = 0; b < prod.size(); b += 4) CHECK(back->distance(a, b) == prod.distance(a, b));
  CHECK_THROWS_AS(space_from_json(nlohmann::json{{"kind", "torus"}}), ConfigError);
  CHECK_THROWS_AS(space_from_json(nlohmann::json{{"kind", "matrix"}, {"n", 2}, {"dist", {0, 1}}}), ConfigError);
}

TEST_CASE("config parsing") {
  const nlohmann::json ok{{"environment", {{"generator", "ridge"}, {"n_x", 5}, {"n_y", 5}}},
                          {"algorithm", {{"name", "zooming"}}},
                          {"horizon", 1e3},
                          {"seeds", {3, 1, 2}}};
  const auto c = parse_config(ok);
  CHECK(c.horizon == 1000);
  CHECK(c.seeds.size() == 3);
  auto bad = ok;
  bad["seeds"] = nlohmann::json::array();
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = ok;
  bad["horizon"] = 0;
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = ok;
  bad.erase("environment");
  bad["environment_file"] = "/nonexistent/instance.json";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = ok;
  bad["algorithm"] = "taxonomy";
  const auto cb = parse_config(bad);
  CHECK_THROWS_AS(make_policy(cb.algorithm, instance_from_json(cb.environment, 100), 100, 0), ConfigError);
  bad["algorithm"] = "nope";
  CHECK_THROWS_AS(make_policy(parse_config(bad).algorithm, instance_from_json(cb.environment, 100), 100, 0),
                  ConfigError);
}

TEST_CASE("seed fan-out is order independent") {
  const nlohmann::json j{{"environment", {{"generator", "random"}, {"seed", 4}}},
                         {"algorithm", {{"name", "meta"}, {"params", {{"c_y", 0.1}}}}},
                         {"horizon", 800},
                         {"seeds", {5, 2, 9, 1, 7}}};
  const auto c = parse_config(j);
  const auto inst = instance_from_json(c.environment, c.horizon);
  const auto serial = run_seeds(c, inst, 1);
  const auto parallel = run_seeds(c, inst, 4);
  REQUIRE(serial.size() == 5);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].log.seed == parallel[i].log.seed);
    CHECK(to_csv(serial[i].log) == to_csv(parallel[i].log));
  }
  CHECK(std::is_sorted(serial.begin(), serial.end(),
                       [](const SeedResult& a, const SeedResult& b) { return a.log.seed < b.log.seed; }));
}

TEST_CASE("drifting runs report dynamic regret") {
  DriftParams dp;
  dp.horizon = 500;
  auto env = make_drifting_env(dp);
  Ucb1Policy u(env);
  const auto log = run(env, u, RunOptions{500, 1});
  CHECK(log.dynamic);
  CHECK(log.average_regret() == doctest::Approx(log.total_regret() / 500.0));
  for (const auto& r : log.rounds) CHECK(r.inst_regret >= 0.0);
}
