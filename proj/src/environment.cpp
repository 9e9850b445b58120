#include "simbandit/environment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "simbandit/rng.hpp"

namespace simbandit {

PointId ArrivalSchedule::at(std::size_t round) const {
  if (contexts.empty()) throw std::logic_error("arrival schedule is empty");
  if (round == 0) throw std::out_of_range("rounds are numbered from 1");
  switch (kind) {
    case ArrivalKind::explicit_list:
      if (round > contexts.size()) throw std::out_of_range("arrival list shorter than the horizon");
      return contexts[round - 1];
    case ArrivalKind::round_robin: return contexts[(round - 1) % contexts.size()];
    case ArrivalKind::uniform: {
      const std::uint64_t bits = counter_draw(stream_key(seed, Stream::arrivals), round);
      return contexts[static_cast<std::size_t>((static_cast<unsigned __int128>(bits) * contexts.size()) >> 64)];
    }
  }
  return contexts.front();
}

ArrivalSchedule uniform_arrivals(std::size_t num_contexts, std::uint64_t seed) {
  ArrivalSchedule s;
  s.kind = ArrivalKind::uniform;
  s.seed = seed;
  for (PointId x = 0; x < num_contexts; ++x) s.contexts.push_back(x);
  return s;
}

ArrivalSchedule round_robin_arrivals(std::vector<PointId> cycle) {
  ArrivalSchedule s;
  s.kind = ArrivalKind::round_robin;
  s.contexts = std::move(cycle);
  return s;
}

Environment::Environment(std::shared_ptr<const MetricSpace> contexts, std::shared_ptr<const MetricSpace> arms,
                         std::vector<double> mu, std::vector<char> feasible, ArrivalSchedule arrivals,
                         std::size_t horizon, NoiseRule noise)
    : contexts_(std::move(contexts)),
      arms_(std::move(arms)),
      mu_(std::move(mu)),
      feasible_(std::move(feasible)),
      arrivals_(std::move(arrivals)),
      horizon_(horizon),
      noise_(noise) {
  if (!contexts_ || !arms_) throw std::invalid_argument("environment: missing space");
  if (horizon_ == 0) throw std::invalid_argument("environment: horizon must be at least 1");
  const std::size_t cells = num_contexts() * num_arms();
  if (mu_.size() == cells * horizon_ && horizon_ > 1 && mu_.size() != cells) {
    round_varying_ = true;
  } else if (mu_.size() != cells) {
    throw std::invalid_argument("environment: mu table has the wrong size");
  }
  for (double m : mu_)
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("environment: mu outside [0, 1]");
  if (!feasible_.empty() && feasible_.size() != cells)
    throw std::invalid_argument("environment: feasibility table has the wrong size");
  if (!(noise_.sigma >= 0.0)) throw std::invalid_argument("environment: negative noise sigma");
  pairs_ = std::make_shared<const MetricSpace>(MetricSpace::product(contexts_, arms_));
  index_feasibility();
  check_arrivals();
}

Environment Environment::adversarial(std::shared_ptr<const MetricSpace> contexts,
                                     std::shared_ptr<const MetricSpace> arms, std::vector<double> mu_by_round,
                                     std::vector<char> feasible, ArrivalSchedule arrivals, std::size_t horizon,
                                     NoiseRule noise) {
  if (mu_by_round.size() != contexts->size() * arms->size() * horizon)
    throw std::invalid_argument("adversarial environment: need one mu table per round");
  Environment env(std::move(contexts), std::move(arms), std::move(mu_by_round), std::move(feasible),
                  std::move(arrivals), horizon, noise);
  env.round_varying_ = true;
  return env;
}

void Environment::index_feasibility() {
  feasible_arms_.assign(num_contexts(), {});
  for (PointId x = 0; x < num_contexts(); ++x)
    for (PointId y = 0; y < num_arms(); ++y)
      if (feasible(x, y)) feasible_arms_[x].push_back(y);
}

void Environment::check_arrivals() const {
  auto check = [&](PointId x) {
    if (x >= num_contexts()) throw std::invalid_argument("environment: arrival context out of range");
    if (feasible_arms_[x].empty()) throw FeasibilityError("environment: arrival context has no feasible arm");
  };
  if (arrivals_.contexts.empty()) throw std::invalid_argument("environment: empty arrival schedule");
  if (arrivals_.kind == ArrivalKind::explicit_list && arrivals_.contexts.size() < horizon_)
    throw std::invalid_argument("environment: arrival list shorter than the horizon");
  for (PointId x : arrivals_.contexts) check(x);
}

std::vector<PointId> Environment::feasible_pairs() const {
  std::vector<PointId> out;
  for (PointId x = 0; x < num_contexts(); ++x)
    for (PointId y : feasible_arms_[x]) out.push_back(pair_id(x, y));
  return out;
}

double Environment::mu(PointId x, PointId y) const {
  if (round_varying_) throw UnsupportedOperation("mu(x, y): instance has round-varying payoffs");
  return mu_[pair_id(x, y)];
}

double Environment::mu(std::size_t round, PointId x, PointId y) const {
  if (!round_varying_) return mu_[pair_id(x, y)];
  if (round == 0 || round > horizon_) throw std::out_of_range("mu: round outside the horizon");
  return mu_[(round - 1) * num_contexts() * num_arms() + pair_id(x, y)];
}

double sample_payoff(const Environment& env, std::size_t round, PointId x, PointId y, std::uint64_t noise_key) {
  if (x >= env.num_contexts() || y >= env.num_arms() || !env.feasible(x, y))
    throw FeasibilityError("sample_payoff: infeasible context-arm pair");
  const double m = env.mu(round, x, y);
  const std::uint64_t bits = counter_draw(noise_key, round);
  if (env.noise().kind == NoiseKind::bernoulli) return to_unit(bits) < m ? 1.0 : 0.0;
  CounterRng g(bits, Stream::noise);
  return std::clamp(m + env.noise().sigma * g.gaussian(), 0.0, 1.0);
}

BestResponse best_response(const Environment& env, PointId x, std::size_t round) {
  const auto& arms = env.feasible_arms(x);
  if (arms.empty()) throw FeasibilityError("best_response: context has no feasible arm");
  BestResponse best{arms.front(), env.mu(round, x, arms.front())};
  for (PointId y : arms) {
    const double m = env.mu(round, x, y);
    if (m > best.mu_star) best = {y, m};
  }
  return best;
}

LipschitzReport validate_lipschitz(const Environment& env, std::size_t exhaustive_limit, std::size_t samples,
                                   std::uint64_t seed) {
  LipschitzReport report;
  const auto pairs = env.feasible_pairs();
  const auto& space = env.pairs();
  const std::size_t n = pairs.size();
  auto check = [&](std::size_t round, PointId a, PointId b) {
    ++report.checked;
    const auto [xa, ya] = env.split(a);
    const auto [xb, yb] = env.split(b);
    const double gap = std::abs(env.mu(round, xa, ya) - env.mu(round, xb, yb));
    const double d = space.distance(a, b);
    if (gap > d + 1e-9) {
      report.ok = false;
      report.violation = LipschitzViolation{round, a, b, gap, d};
      return false;
    }
    return true;
  };
  std::vector<std::size_t> rounds{1};
  if (env.round_varying()) {
    rounds.clear();
    if (env.horizon() <= 64) {
      for (std::size_t t = 1; t <= env.horizon(); ++t) rounds.push_back(t);
    } else {
      CounterRng pick(seed, Stream::audit, 1);
      for (int i = 0; i < 64; ++i) rounds.push_back(1 + pick.below(env.horizon()));
    }
  }
  CounterRng rng(seed, Stream::audit);
  for (std::size_t round : rounds) {
    if (n <= exhaustive_limit) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (!check(round, pairs[i], pairs[j])) return report;
    } else {
      for (std::size_t s = 0; s < samples; ++s)
        if (!check(round, pairs[rng.below(n)], pairs[rng.below(n)])) return report;
    }
  }
  return report;
}

namespace {

void require_lipschitz(const Environment& env, const char* what) {
  const auto report = validate_lipschitz(env);
  if (!report.ok)
    throw std::logic_error(std::string(what) + ": generated instance violates the Lipschitz condition");
}

std::vector<double> net_line(std::size_t n, double spacing, std::size_t resolution) {
  std::vector<double> coords;
  const double step = spacing / static_cast<double>(resolution + 1);
  for (std::size_t i = 0; i < n; ++i) {
    coords.push_back(static_cast<double>(i) * spacing);
    if (i + 1 < n)
      for (std::size_t k = 1; k <= resolution; ++k)
        coords.push_back(static_cast<double>(i) * spacing + static_cast<double>(k) * step);
  }
  return coords;
}

}  // namespace

NeedleInstance make_needle_instance(const NeedleParams& p) {
  if (p.n_x < 1 || p.n_y < 2) throw std::invalid_argument("needle: need n_x >= 1 and n_y >= 2");
  if (!(p.r > 0.0 && p.r <= 0.5)) throw std::invalid_argument("needle: r must lie in (0, 1/2]");
  if (!p.assignment.empty() && p.assignment.size() != p.n_x)
    throw std::invalid_argument("needle: assignment needs one arm per net context");
  const double spacing = 2.0 * p.r;
  auto xs = std::make_shared<const MetricSpace>(
      MetricSpace::line_coords(net_line(p.n_x, spacing, p.resolution), 1.0, SpaceKind::context));
  auto ys = std::make_shared<const MetricSpace>(
      MetricSpace::line_coords(net_line(p.n_y, spacing, p.resolution), 1.0, SpaceKind::arms));
  NeedleInstance out{Environment(xs, ys, std::vector<double>(xs->size() * ys->size(), 0.5), {},
                                 round_robin_arrivals({0}), p.horizon),
                     {}, {}, {}};
  for (std::size_t i = 0; i < p.n_x; ++i) out.net_x.push_back(i * (p.resolution + 1));
  for (std::size_t j = 0; j < p.n_y; ++j) out.net_y.push_back(j * (p.resolution + 1));
  CounterRng rng(p.seed, Stream::instance);
  for (std::size_t i = 0; i < p.n_x; ++i) {
    const std::size_t j = p.assignment.empty() ? rng.below(p.n_y) : p.assignment[i];
    if (j >= p.n_y) throw std::invalid_argument("needle: assignment index out of range");
    out.needle.push_back(out.net_y[j]);
  }
  std::vector<double> mu(xs->size() * ys->size(), 0.5);
  for (PointId x = 0; x < xs->size(); ++x)
    for (PointId y = 0; y < ys->size(); ++y) {
      double best = 0.5;
      for (std::size_t i = 0; i < p.n_x; ++i)
        for (std::size_t j = 0; j < p.n_y; ++j) {
          const double base = out.net_y[j] == out.needle[i] ? 0.5 + p.r / 2.0 : 0.5 + p.r / 4.0;
          best = std::max(best, base - xs->distance(x, out.net_x[i]) - ys->distance(y, out.net_y[j]));
        }
      mu[x * ys->size() + y] = best;
    }
  out.env = Environment(xs, ys, std::move(mu), {}, round_robin_arrivals(out.net_x), p.horizon);
  out.env.label = "needle";
  require_lipschitz(out.env, "needle");
  return out;
}

Environment make_drifting_env(const DriftParams& p) {
  if (!(p.sigma >= 0.0)) throw std::invalid_argument("drifting: sigma must be nonnegative");
  if (p.k == 0 || p.horizon == 0) throw std::invalid_argument("drifting: need k >= 1 and T >= 1");
  const std::size_t T = p.horizon;
  auto xs = std::make_shared<const MetricSpace>(MetricSpace::time_axis(T, p.sigma, p.shape));
  auto ys = std::make_shared<const MetricSpace>(MetricSpace::discrete(p.k));
  std::vector<double> mu(T * p.k, 0.0);
  CounterRng rng(p.seed, Stream::instance);
  for (PointId y = 0; y < p.k; ++y) {
    const double start = 0.1 + 0.8 * rng.uniform();
    if (p.shape == DriftShape::linear || p.sigma == 0.0) {
      // reflecting walk with steps uniform in [-sigma, sigma]
      double v = start;
      for (std::size_t t = 0; t < T; ++t) {
        mu[t * p.k + y] = v;
        v += p.sigma * (2.0 * rng.uniform() - 1.0);
        if (v < 0.0) v = -v;
        if (v > 1.0) v = 2.0 - v;
        v = std::clamp(v, 0.0, 1.0);
      }
      continue;
    }
    // Knots every L rounds, each within (sigma / sqrt 3) sqrt(distance) of every
    // earlier knot, then linear interpolation; the sqrt 3 slack covers pairs that
    // straddle knots.
    const std::size_t L = std::max<std::size_t>(1, p.knot_spacing);
    const double c = p.sigma / std::sqrt(3.0);
    const std::size_t knots = (T + L - 1) / L + 1;
    const double unit = c * std::sqrt(static_cast<double>(L));
    const std::size_t reach = static_cast<std::size_t>(std::ceil(1.0 / (unit * unit))) + 1;
    std::vector<double> v(knots);
    v[0] = start;
    for (std::size_t k = 1; k < knots; ++k) {
      double lo = 0.0, hi = 1.0;
      for (std::size_t j = (k > reach ? k - reach : 0); j < k; ++j) {
        const double slack = unit * std::sqrt(static_cast<double>(k - j));
        lo = std::max(lo, v[j] - slack);
        hi = std::min(hi, v[j] + slack);
      }
      v[k] = std::clamp(v[k - 1] + unit * rng.gaussian(), lo, hi);
    }
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t k = t / L;
      const double a = static_cast<double>(t - k * L) / static_cast<double>(L);
      mu[t * p.k + y] = std::clamp((1.0 - a) * v[k] + a * v[k + 1], 0.0, 1.0);
    }
  }
  ArrivalSchedule arrivals;
  arrivals.kind = ArrivalKind::explicit_list;
  arrivals.contexts.resize(T);
  for (std::size_t t = 0; t < T; ++t) arrivals.contexts[t] = t;
  Environment env(xs, ys, std::move(mu), {}, std::move(arrivals), T);
  env.label = "drifting";
  require_lipschitz(env, "drifting");
  return env;
}

Environment make_sleeping_env(std::size_t num_arms, const std::vector<std::vector<PointId>>& awake,
                              const std::vector<double>& mu) {
  if (mu.size() != num_arms) throw std::invalid_argument("sleeping: need one mean per arm");
  if (awake.empty()) throw std::invalid_argument("sleeping: empty schedule");
  std::map<std::vector<PointId>, PointId> ids;
  std::vector<std::vector<PointId>> sets;
  ArrivalSchedule arrivals;
  for (const auto& raw : awake) {
    auto s = raw;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.empty()) throw std::invalid_argument("sleeping: empty awake set");
    if (s.back() >= num_arms) throw std::invalid_argument("sleeping: awake arm out of range");
    auto [it, fresh] = ids.emplace(s, sets.size());
    if (fresh) sets.push_back(s);
    arrivals.contexts.push_back(it->second);
  }
  auto xs = std::make_shared<const MetricSpace>(MetricSpace::zero(sets.size()));
  auto ys = std::make_shared<const MetricSpace>(MetricSpace::discrete(num_arms));
  std::vector<double> table(sets.size() * num_arms, 0.0);
  std::vector<char> feasible(sets.size() * num_arms, 0);
  for (std::size_t x = 0; x < sets.size(); ++x)
    for (PointId y = 0; y < num_arms; ++y) table[x * num_arms + y] = mu[y];
  for (std::size_t x = 0; x < sets.size(); ++x)
    for (PointId y : sets[x]) feasible[x * num_arms + y] = 1;
  Environment env(xs, ys, std::move(table), std::move(feasible), std::move(arrivals), awake.size());
  env.label = "sleeping";
  require_lipschitz(env, "sleeping");
  return env;
}

Environment make_peaks_env(std::shared_ptr<const MetricSpace> contexts, std::shared_ptr<const MetricSpace> arms,
                           const std::vector<Peak>& peaks, double floor, ArrivalSchedule arrivals,
                           std::size_t horizon) {
  std::vector<double> mu(contexts->size() * arms->size());
  for (PointId x = 0; x < contexts->size(); ++x)
    for (PointId y = 0; y < arms->size(); ++y) {
      double v = floor;
      for (const auto& pk : peaks)
        v = std::max(v, pk.height - pk.slope_x * contexts->distance(x, pk.x) - pk.slope_y * arms->distance(y, pk.y));
      mu[x * arms->size() + y] = std::clamp(v, 0.0, 1.0);
    }
  Environment env(std::move(contexts), std::move(arms), std::move(mu), {}, std::move(arrivals), horizon);
  env.label = "peaks";
  require_lipschitz(env, "peaks");
  return env;
}

Environment make_ridge_env(std::size_t n_x, std::size_t n_y, double height, double floor, double slope,
                           ArrivalSchedule arrivals, std::size_t horizon) {
  if (!(slope >= 0.0 && slope <= 1.0)) throw std::invalid_argument("ridge: slope must lie in [0, 1]");
  auto xs = std::make_shared<const MetricSpace>(MetricSpace::line(n_x, 1.0, SpaceKind::context));
  auto ys = std::make_shared<const MetricSpace>(MetricSpace::line(n_y, 1.0, SpaceKind::arms));
  const auto& px = std::get<PointsMetric>(xs->descriptor()).coords;
  const auto& py = std::get<PointsMetric>(ys->descriptor()).coords;
  std::vector<double> mu(n_x * n_y);
  for (PointId x = 0; x < n_x; ++x)
    for (PointId y = 0; y < n_y; ++y)
      mu[x * n_y + y] = std::clamp(std::max(floor, height - slope * std::abs(py[y] - px[x])), 0.0, 1.0);
  Environment env(xs, ys, std::move(mu), {}, std::move(arrivals), horizon);
  env.label = "ridge";
  require_lipschitz(env, "ridge");
  return env;
}

Environment make_random_env(std::uint64_t seed, std::size_t horizon, std::size_t max_contexts,
                            std::size_t max_arms) {
  CounterRng rng(seed, Stream::instance);
  auto random_space = [&](std::size_t max_n, SpaceKind kind) {
    const std::size_t n = 2 + rng.below(std::max<std::size_t>(1, max_n - 1));
    const std::size_t dim = 1 + rng.below(2);
    std::vector<double> coords(n * dim);
    for (auto& c : coords) c = rng.uniform();
    const Norm norm = static_cast<Norm>(rng.below(3));
    return std::make_shared<const MetricSpace>(MetricSpace::points(dim, std::move(coords), norm, 1.0, kind));
  };
  auto xs = random_space(max_contexts, SpaceKind::context);
  auto ys = random_space(max_arms, SpaceKind::arms);
  std::vector<Peak> peaks;
  const std::size_t count = 1 + rng.below(4);
  for (std::size_t i = 0; i < count; ++i)
    peaks.push_back(Peak{rng.below(xs->size()), rng.below(ys->size()), 0.5 + 0.5 * rng.uniform(),
                         rng.uniform(), rng.uniform()});
  const double floor = 0.4 * rng.uniform();
  std::vector<double> mu(xs->size() * ys->size());
  for (PointId x = 0; x < xs->size(); ++x)
    for (PointId y = 0; y < ys->size(); ++y) {
      double v = floor;
      for (const auto& pk : peaks)
        v = std::max(v, pk.height - pk.slope_x * xs->distance(x, pk.x) - pk.slope_y * ys->distance(y, pk.y));
      mu[x * ys->size() + y] = std::clamp(v, 0.0, 1.0);
    }
  std::vector<char> feasible(mu.size(), 1);
  for (PointId x = 0; x < xs->size(); ++x) {
    for (PointId y = 0; y < ys->size(); ++y)
      if (rng.uniform() < 0.2) feasible[x * ys->size() + y] = 0;
    feasible[x * ys->size() + rng.below(ys->size())] = 1;
  }
  Environment env(xs, ys, std::move(mu), std::move(feasible), uniform_arrivals(xs->size(), seed), horizon);
  env.label = "random";
  require_lipschitz(env, "random");
  return env;
}

}  // namespace simbandit
