#include "simbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

#include "simbandit/baselines.hpp"
#include "simbandit/meta.hpp"
#include "simbandit/rng.hpp"
#include "simbandit/taxonomy.hpp"
#include "simbandit/zooming.hpp"

namespace simbandit {

namespace {

void put_double(std::ostream& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

bool is_time_axis(const Environment& env) {
  return std::holds_alternative<TimeMetric>(env.contexts().descriptor());
}

template <class T>
std::optional<T> opt_param(const nlohmann::json& params, const char* key) {
  if (!params.contains(key) || params[key].is_null()) return std::nullopt;
  try {
    return params[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("algorithm parameter \"") + key + "\": " + e.what());
  }
}

}  // namespace

std::vector<PointId> benchmark_arms(const Environment& env, std::size_t horizon) {
  std::vector<PointId> best(env.num_contexts());
  for (PointId x = 0; x < env.num_contexts(); ++x) {
    const auto& arms = env.feasible_arms(x);
    if (!env.round_varying()) {
      best[x] = best_response(env, x).arm;
      continue;
    }
    std::vector<double> total(arms.size(), 0.0);
    for (std::size_t t = 1; t <= horizon; ++t)
      for (std::size_t i = 0; i < arms.size(); ++i) total[i] += env.mu(t, x, arms[i]);
    best[x] = arms[std::max_element(total.begin(), total.end()) - total.begin()];
  }
  return best;
}

RunLog run(const Environment& env, Policy& policy, const RunOptions& options) {
  const std::size_t T = options.horizon == 0 ? env.horizon() : options.horizon;
  if (T > env.horizon())
    throw ConfigError("horizon " + std::to_string(T) + " exceeds the instance horizon " +
                      std::to_string(env.horizon()));
  RunLog log;
  log.policy = policy.name();
  log.seed = options.seed;
  log.dynamic = is_time_axis(env);
  log.rounds.reserve(T);

  // Time-invariant instances: best responses are computed on first arrival.
  std::vector<PointId> bench;
  std::vector<char> known;
  if (env.round_varying()) {
    bench = benchmark_arms(env, T);
  } else {
    bench.assign(env.num_contexts(), 0);
    known.assign(env.num_contexts(), 0);
  }
  auto* doubling = dynamic_cast<DoublingPolicy*>(&policy);
  const auto noise_key = stream_key(options.seed, Stream::noise);
  auto auditor = options.audit ? policy.make_auditor(env) : nullptr;
  double cum = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const PointId x = env.context_at(t);
    const Choice c = policy.choose(t, x);
    if (c.arm >= env.num_arms()) throw ConfigError(policy.name() + " played an arm outside the arm space");
    if (!env.feasible(x, c.arm)) throw FeasibilityError(policy.name() + " played an infeasible arm");
    if (auditor) auditor->after_choose(t, x, c);
    const double payoff = sample_payoff(env, t, x, c.arm, noise_key);
    policy.receive(payoff);
    if (auditor) auditor->after_feedback(t, x, c, payoff);
    if (!known.empty() && !known[x]) {
      bench[x] = best_response(env, x).arm;
      known[x] = 1;
    }
    RoundRecord r;
    r.round = t;
    r.context = x;
    r.arm = c.arm;
    r.cell = c.cell;
    r.payoff = payoff;
    r.mu = env.mu(t, x, c.arm);
    r.inst_regret = env.mu(t, x, bench[x]) - r.mu;
    cum += r.inst_regret;
    r.cum_regret = cum;
    r.structure_size = policy.structure_size();
    r.phase = doubling ? doubling->phase() : 0;
    log.rounds.push_back(r);
  }
  if (auditor) {
    auditor->finish(T);
    log.audit = auditor->report();
  }
  return log;
}

std::vector<double> contextual_regret(const RunLog& log, const Environment& env) {
  const auto bench = benchmark_arms(env, log.horizon());
  std::vector<double> out;
  out.reserve(log.rounds.size());
  double cum = 0.0;
  for (const auto& r : log.rounds) {
    cum += env.mu(r.round, r.context, bench[r.context]) - env.mu(r.round, r.context, r.arm);
    out.push_back(cum);
  }
  return out;
}

std::map<std::pair<std::size_t, std::size_t>, double> regret_by_cell(const RunLog& log) {
  std::map<std::pair<std::size_t, std::size_t>, double> out;
  for (const auto& r : log.rounds) out[{r.phase, r.cell}] += r.inst_regret;
  return out;
}

void write_csv(const RunLog& log, std::ostream& out) {
  out << "round,context_id,arm_id,payoff,inst_regret,cum_regret,structure_size\n";
  for (const auto& r : log.rounds) {
    out << r.round << ',' << r.context << ',' << r.arm << ',';
    put_double(out, r.payoff);
    out << ',';
    put_double(out, r.inst_regret);
    out << ',';
    put_double(out, r.cum_regret);
    out << ',' << r.structure_size << '\n';
  }
}

std::string to_csv(const RunLog& log) {
  std::ostringstream s;
  write_csv(log, s);
  return s.str();
}

// ---- doubling ----

std::vector<std::size_t> doubling_phase_lengths(std::size_t horizon) {
  std::vector<std::size_t> out;
  std::size_t left = horizon, len = 2;
  while (left > 0) {
    out.push_back(std::min(len, left));
    left -= out.back();
    len *= 2;
  }
  return out;
}

namespace {

// Forwards to a fresh auditor per phase with phase-local rounds and merges
// the finished reports with rounds shifted back to global numbering.
class PhaseAuditor : public RoundAuditor {
 public:
  PhaseAuditor(DoublingPolicy& policy, const Environment& env) : policy_(policy), env_(env) {
    policy_.set_phase_end_hook([this] { close(); });
  }
  ~PhaseAuditor() override { policy_.set_phase_end_hook({}); }

  void after_choose(std::size_t round, PointId x, const Choice& c) override {
    if (policy_.phase() != phase_) {
      phase_ = policy_.phase();
      start_ = policy_.phase_start();
      inner_ = policy_.inner()->make_auditor(env_);
    }
    if (inner_) inner_->after_choose(round - start_ + 1, x, c);
    last_ = round;
  }

  void after_feedback(std::size_t round, PointId x, const Choice& c, double payoff) override {
    if (inner_) inner_->after_feedback(round - start_ + 1, x, c, payoff);
  }

  void finish(std::size_t) override { close(); }

  void close() {
    if (!inner_) return;
    inner_->finish(last_ - start_ + 1);
    report_.merge(inner_->report(), start_ - 1);
    inner_.reset();
  }

 private:
  DoublingPolicy& policy_;
  const Environment& env_;
  std::unique_ptr<RoundAuditor> inner_;
  std::size_t phase_ = 0, start_ = 1, last_ = 0;
};

}  // namespace

DoublingPolicy::DoublingPolicy(PhaseFactory factory, std::string name)
    : factory_(std::move(factory)), name_(std::move(name)) {}

Choice DoublingPolicy::choose(std::size_t, PointId context) {
  const std::size_t length = std::size_t{1} << phase_;
  if (!inner_ || played_ - (phase_start_ - 1) == length) {
    if (inner_ && phase_end_hook_) phase_end_hook_();
    ++phase_;
    phase_start_ = played_ + 1;
    inner_ = factory_(std::size_t{1} << phase_, phase_);
    if (!inner_) throw std::logic_error("doubling: factory returned no policy");
  }
  ++played_;
  return inner_->choose(played_ - phase_start_ + 1, context);
}

void DoublingPolicy::receive(double payoff) { inner_->receive(payoff); }

nlohmann::json DoublingPolicy::snapshot() const {
  return {{"algorithm", "doubling"},
          {"phase", phase_},
          {"phase_start", phase_start_},
          {"inner", inner_ ? inner_->snapshot() : nlohmann::json(nullptr)}};
}

std::unique_ptr<RoundAuditor> DoublingPolicy::make_auditor(const Environment& env) {
  return std::make_unique<PhaseAuditor>(*this, env);
}

// ---- configs ----

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be an object");
  ExperimentConfig c;
  try {
    if (j.contains("environment_file")) {
      auto path = std::filesystem::path(j["environment_file"].get<std::string>());
      if (path.is_relative()) path = base_dir / path;
      if (!std::filesystem::exists(path)) throw ConfigError("environment file not found: " + path.string());
      c.environment = read_json_file(path);
    } else if (j.contains("environment")) {
      c.environment = j["environment"];
    } else {
      throw ConfigError("config needs \"environment\" or \"environment_file\"");
    }
    const auto& a = j.at("algorithm");
    if (a.is_string()) {
      c.algorithm.name = a.get<std::string>();
    } else {
      c.algorithm.name = a.at("name").get<std::string>();
      if (a.contains("params")) c.algorithm.params = a["params"];
      c.algorithm.anytime = a.value("anytime", false);
    }
    if (!j.contains("horizon")) throw ConfigError("config needs \"horizon\"");
    const double T = j["horizon"].get<double>();
    if (!(T >= 1.0) || T != std::floor(T)) throw ConfigError("horizon must be a positive integer");
    c.horizon = static_cast<std::size_t>(T);
    if (j.contains("seeds")) {
      c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    } else if (j.contains("seed")) {
      c.seeds = {j["seed"].get<std::uint64_t>()};
    }
    if (c.seeds.empty()) throw ConfigError("config needs at least one seed");
    c.audit = j.value("audit", false);
    if (j.contains("output")) {
      const auto& o = j["output"];
      c.output_dir = o.value("dir", c.output_dir.string());
      c.prefix = o.value("prefix", c.prefix);
      c.snapshots = o.value("snapshots", false);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

std::uint64_t phase_seed(std::uint64_t seed, std::size_t phase) {
  return phase <= 1 ? seed : stream_key(seed, Stream::algorithm, 1000 + phase);
}

std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, const Instance& inst, std::size_t horizon,
                                    std::uint64_t seed) {
  if (!inst.env) throw ConfigError("no instance");
  const auto& env = *inst.env;
  const auto& p = spec.params;
  if (!p.is_object()) throw ConfigError("algorithm params must be an object");
  if (spec.anytime) {
    AlgorithmSpec fixed = spec;
    fixed.anytime = false;
    const bool phased_q = p.contains("q_hat") && p["q_hat"].is_string();
    if (phased_q && p["q_hat"] != "phases") throw ConfigError("q_hat must be a number or \"phases\"");
    auto factory = [fixed, &inst, seed, phased_q](std::size_t phase_horizon, std::size_t phase) {
      AlgorithmSpec s = fixed;
      if (phased_q) s.params["q_hat"] = 1.0 / static_cast<double>(phase);
      return make_policy(s, inst, phase_horizon, phase_seed(seed, phase));
    };
    return std::make_unique<DoublingPolicy>(factory, "doubling-" + spec.name);
  }
  const auto log_horizon = opt_param<double>(p, "log_horizon");
  if (spec.name == "zooming") {
    ZoomOptions o;
    o.log_horizon = log_horizon;
    return std::make_unique<ZoomingPolicy>(env, horizon, o);
  }
  if (spec.name == "uniform") return std::make_unique<UniformPolicy>(env, horizon, seed, opt_param<double>(p, "granularity"));
  if (spec.name == "exp3") return std::make_unique<Exp3Policy>(env, horizon, seed, opt_param<double>(p, "gamma"));
  if (spec.name == "ucb1") return std::make_unique<Ucb1Policy>(env);
  if (spec.name == "oracle") return std::make_unique<OraclePolicy>(env);
  if (spec.name == "meta") {
    MetaParams m;
    m.c_y = opt_param<double>(p, "c_y").value_or(m.c_y);
    m.d_y = opt_param<double>(p, "d_y");
    const auto sub = opt_param<std::string>(p, "subroutine").value_or("exp3");
    if (sub != "exp3" && sub != "ucb1") throw ConfigError("meta subroutine must be exp3 or ucb1");
    m.subroutine = sub == "ucb1" ? Subroutine::ucb1 : Subroutine::exp3;
    return std::make_unique<MetaPolicy>(env, horizon, seed, m);
  }
  if (spec.name == "taxonomy") {
    if (!inst.taxonomy) throw ConfigError("taxonomy algorithm needs an instance with a taxonomy");
    if (inst.taxonomy->num_leaves() != env.num_arms()) throw ConfigError("taxonomy leaves do not match the arms");
    if (p.contains("q_hat") && p["q_hat"].is_string())
      throw ConfigError("q_hat = \"phases\" needs \"anytime\": true");
    const double q = opt_param<double>(p, "q_hat").value_or(1.0);
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q_hat must lie in (0, 1]");
    return std::make_unique<TaxonomyPolicy>(*inst.taxonomy, horizon, q, seed, TaxOptions{log_horizon});
  }
  throw ConfigError("unknown algorithm: " + spec.name);
}

std::vector<SeedResult> run_seeds(const ExperimentConfig& config, const Instance& inst, std::size_t workers) {
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  std::vector<SeedResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        auto policy = make_policy(config.algorithm, inst, config.horizon, seeds[i]);
        results[i].log = run(*inst.env, *policy, RunOptions{config.horizon, seeds[i], config.audit});
        if (config.snapshots)
          results[i].snapshot = {{"round", config.horizon}, {"seed", seeds[i]}, {"state", policy->snapshot()}};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, seeds.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

std::size_t default_workers() {
  if (const char* w = std::getenv("SIMBANDIT_WORKERS")) {
    const long v = std::strtol(w, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---- snapshot audits ----

namespace {

AuditReport audit_zoom_snapshot(const nlohmann::json& state, std::size_t round, const Environment& env) {
  ZoomingPolicy policy(env, state.at("horizon").get<std::size_t>());
  std::vector<BallRecord> balls;
  for (const auto& b : state.at("balls")) {
    BallRecord r;
    r.cx = b.at("context").get<PointId>();
    r.cy = b.at("arm").get<PointId>();
    r.level = b.at("level").get<int>();
    r.n = b.at("n").get<std::size_t>();
    r.payoff_sum = b.at("payoff_sum").get<double>();
    if (!b.at("parent").is_null()) r.parent = b["parent"].get<std::size_t>();
    r.activation_round = b.at("activation_round").get<std::size_t>();
    if (r.cx >= env.num_contexts() || r.cy >= env.num_arms()) throw ConfigError("snapshot ball outside the instance");
    balls.push_back(r);
  }
  policy.load(std::move(balls), round);
  return audit_zoom_state(policy, env);
}

AuditReport audit_meta_snapshot(const nlohmann::json& state, std::size_t round, const Environment& env) {
  AuditReport report;
  for (const char* c : {"hit_budget", "full_flag", "budgets", "parent_links", "separation"}) report.touch(c);
  MetaParams params;
  params.c_y = state.at("c_y").get<double>();
  params.d_y = state.at("d_y").get<double>();
  MetaPolicy reference(env, state.at("horizon").get<std::size_t>(), 0, params);
  const auto& balls = state.at("balls");
  const auto& xs = env.contexts();
  for (std::size_t id = 0; id < balls.size(); ++id) {
    const auto& b = balls[id];
    const auto hits = b.at("hits").get<std::size_t>(), budget = b.at("budget").get<std::size_t>();
    const int level = b.at("level").get<int>();
    const auto center = b.at("center").get<PointId>();
    if (center >= xs.size()) throw ConfigError("snapshot ball outside the context space");
    const std::string tag = "ball " + std::to_string(id);
    report.record("hit_budget", round, hits <= budget, tag);
    report.record("full_flag", round, b.at("full").get<bool>() == (hits >= budget), tag);
    report.record("budgets", round, budget == reference.budget(level), tag);
    bool linked = true;
    if (b.at("parent").is_null()) {
      linked = id == 0 && level == 0;
    } else {
      const auto parent = b["parent"].get<std::size_t>();
      linked = parent < id && balls[parent].at("level").get<int>() + 1 == level &&
               balls[parent].at("full").get<bool>() &&
               within(xs.distance(balls[parent].at("center").get<PointId>(), center), level_radius(level - 1));
      const auto siblings = balls[parent].at("children").get<std::vector<std::size_t>>();
      linked = linked && std::find(siblings.begin(), siblings.end(), id) != siblings.end();
    }
    report.record("parent_links", round, linked, tag);
    for (std::size_t other = 0; other < id; ++other) {
      if (balls[other].at("level").get<int>() != level) continue;
      report.record("separation", round,
                    !within(xs.distance(balls[other].at("center").get<PointId>(), center), level_radius(level)),
                    "balls " + std::to_string(other) + ", " + std::to_string(id));
    }
  }
  return report;
}

AuditReport audit_taxonomy_snapshot(const nlohmann::json& state, std::size_t round, const Instance& inst) {
  if (!inst.taxonomy) throw ConfigError("taxonomy snapshot needs an instance with a taxonomy");
  const auto& tax = *inst.taxonomy;
  AuditReport report;
  for (const char* c : {"stats", "active_cover", "invariant"}) report.touch(c);
  TaxonomyPolicy reference(tax, state.at("horizon").get<std::size_t>(), state.at("q_hat").get<double>(), 0,
                           TaxOptions{state.at("log_horizon").get<double>()});
  const auto& nodes = state.at("nodes");
  if (nodes.size() != tax.size()) throw ConfigError("snapshot node count does not match the taxonomy");
  std::vector<char> active(tax.size(), 0);
  for (NodeId v = 0; v < tax.size(); ++v) {
    const auto n = nodes[v].at("n").get<std::size_t>();
    const double sum = nodes[v].at("payoff_sum").get<double>();
    report.record("stats", round, sum >= 0.0 && sum <= double(n), "node " + std::to_string(v));
    reference.set_stats(v, n, sum);
    active[v] = nodes[v].at("active").get<bool>();
  }
  bool cover = true;
  for (NodeId leaf : tax.leaves()) {
    std::size_t hits = 0;
    for (std::optional<NodeId> u = leaf; u; u = tax.parent(*u)) hits += active[*u];
    cover = cover && hits == 1;
  }
  report.record("active_cover", round, cover, "active nodes do not partition the leaves");
  for (NodeId v = 0; v < tax.size(); ++v)
    if (active[v] && !tax.is_leaf(v)) report.record("invariant", round, reference.invariant_holds(v), "node " + std::to_string(v));
  return report;
}

AuditReport audit_state(const nlohmann::json& state, std::size_t round, const Instance& inst) {
  const auto algorithm = state.at("algorithm").get<std::string>();
  if (algorithm == "zooming") return audit_zoom_snapshot(state, round, *inst.env);
  if (algorithm == "meta") return audit_meta_snapshot(state, round, *inst.env);
  if (algorithm == "taxonomy") return audit_taxonomy_snapshot(state, round, inst);
  if (algorithm == "doubling") {
    const auto start = state.at("phase_start").get<std::size_t>();
    return audit_state(state.at("inner"), round - start + 1, inst);
  }
  throw ConfigError("no state checks for algorithm " + algorithm);
}

}  // namespace

AuditReport audit_snapshot(const nlohmann::json& snapshot, const Instance& inst) {
  try {
    return audit_state(snapshot.at("state"), snapshot.value("round", std::size_t{0}), inst);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("snapshot: ") + e.what());
  }
}

std::string format_report(const AuditReport& report) {
  std::ostringstream s;
  for (const auto& c : report.checks()) {
    s << (c.passed() ? "PASS " : "FAIL ") << c.name << ": " << c.violations << " of " << c.events
      << " events violated";
    if (c.first_violation_round) s << ", first at round " << *c.first_violation_round << " (" << c.first_detail << ")";
    s << '\n';
  }
  return s.str();
}

}  // namespace simbandit
