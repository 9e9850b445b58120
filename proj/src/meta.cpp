#include "simbandit/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "simbandit/zooming.hpp"

namespace simbandit {

std::size_t t0(double r, double c_y, double d_y) {
  if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("t0: r must lie in (0, 1]");
  if (!(c_y > 0.0) || !(d_y >= 0.0)) throw std::invalid_argument("t0: need c_Y > 0 and d_Y >= 0");
  const double v = c_y * std::pow(r, -(2.0 + d_y)) * std::max(1.0, std::log(1.0 / r));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v - 1e-9)));
}

std::size_t rk_covering_number(const MetricSpace& space, std::span<const PointId> arrivals, double r, std::size_t k,
                               CoverMode mode) {
  std::map<PointId, std::size_t> mult;
  for (PointId x : arrivals) ++mult[x];
  std::vector<PointId> heavy;
  for (const auto& [x, _] : mult) {
    std::size_t inside = 0;
    for (const auto& [p, c] : mult)
      if (within(space.distance(x, p), r)) inside += c;
    if (inside >= k) heavy.push_back(x);
  }
  return covering_number(space, heavy, r, mode);
}

double ContextBall::radius() const { return level_radius(level); }

MetaPolicy::MetaPolicy(const Environment& env, std::size_t horizon, std::uint64_t seed, MetaParams params)
    : env_(&env), horizon_(horizon), seed_(seed), params_(params) {
  if (horizon == 0) throw std::invalid_argument("meta: horizon must be positive");
  d_y_ = params_.d_y.value_or(env.arms().dimension());
  if (d_y_ <= 0.0) {
    arm_net_ = all_points(env.arms());
  } else {
    const double d = env.contexts().dimension() + d_y_;
    const double r = std::pow(static_cast<double>(horizon), -1.0 / (2.0 + d));
    arm_net_ = build_r_net(env.arms(), all_points(env.arms()), r);
  }
  activate(env.context_at(1), 0, std::nullopt, 0);
}

std::size_t MetaPolicy::budget(int level) const { return t0(level_radius(level), params_.c_y, d_y_); }

void MetaPolicy::activate(PointId center, int level, std::optional<std::size_t> parent, std::size_t round) {
  const std::size_t id = balls_.size();
  ContextBall b;
  b.center = center;
  b.level = level;
  b.budget = budget(level);
  b.parent = parent;
  b.activation_round = round;
  balls_.push_back(b);
  if (parent) balls_[*parent].children.push_back(id);
  if (params_.subroutine == Subroutine::exp3) {
    bandits_.emplace_back(Exp3(arm_net_.size(), Exp3::default_gamma(arm_net_.size(), b.budget),
                               CounterRng(seed_, Stream::algorithm, id + 1)));
  } else {
    bandits_.emplace_back(Ucb1(arm_net_.size()));
  }
}

std::size_t MetaPolicy::route(std::size_t round, PointId x) {
  const auto& xs = env_->contexts();
  std::optional<std::size_t> hit, smallest_full;
  for (std::size_t id = 0; id < balls_.size(); ++id) {
    const auto& b = balls_[id];
    if (!within(xs.distance(b.center, x), b.radius())) continue;
    if (!b.full) {
      hit = id;  // ids grow with activation order, so the last one wins
    } else if (!smallest_full || b.level > balls_[*smallest_full].level) {
      smallest_full = id;
    }
  }
  if (hit) return *hit;
  const std::size_t parent = *smallest_full;
  if (balls_[parent].level + 1 > kMaxLevel) {
    floor_reached_ = true;
    return parent;
  }
  activate(x, balls_[parent].level + 1, parent, round);
  return balls_.size() - 1;
}

PointId MetaPolicy::playable(PointId x, PointId arm) const {
  if (env_->feasible(x, arm)) return arm;
  PointId best = env_->feasible_arms(x).front();
  double best_d = std::numeric_limits<double>::infinity();
  for (PointId y : env_->feasible_arms(x)) {
    const double d = env_->arms().distance(arm, y);
    if (d < best_d) {
      best_d = d;
      best = y;
    }
  }
  return best;
}

Choice MetaPolicy::choose(std::size_t round, PointId x) {
  if (pending_) throw std::logic_error("meta: choose called twice without feedback");
  const std::size_t ball = route(round, x);
  const std::size_t j = std::visit(
      [](auto& bandit) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(bandit)>, Exp3>)
          return bandit.draw();
        else
          return bandit.select();
      },
      bandits_[ball]);
  pending_ = Pending{ball, j};
  return Choice{playable(x, arm_net_[j]), ball};
}

void MetaPolicy::feedback(std::size_t ball, double payoff) {
  check_payoff(payoff);
  if (!pending_ || pending_->ball != ball) throw std::logic_error("meta: feedback for a ball that was not hit");
  std::visit([&](auto& bandit) { bandit.update(pending_->net_arm, payoff); }, bandits_[ball]);
  auto& b = balls_[ball];
  ++b.hits;
  if (b.hits >= b.budget) b.full = true;
  pending_.reset();
}

void MetaPolicy::receive(double payoff) {
  if (!pending_) throw std::logic_error("meta: feedback without a pending choice");
  feedback(pending_->ball, payoff);
}

nlohmann::json MetaPolicy::snapshot() const {
  nlohmann::json balls = nlohmann::json::array();
  for (const auto& b : balls_)
    balls.push_back({{"center", b.center},
                     {"level", b.level},
                     {"radius", b.radius()},
                     {"budget", b.budget},
                     {"hits", b.hits},
                     {"full", b.full},
                     {"parent", b.parent ? nlohmann::json(*b.parent) : nlohmann::json(nullptr)},
                     {"children", b.children},
                     {"activation_round", b.activation_round}});
  return {{"algorithm", "meta"},
          {"horizon", horizon_},
          {"c_y", params_.c_y},
          {"d_y", d_y_},
          {"arm_net", arm_net_},
          {"balls", std::move(balls)}};
}

namespace {

class MetaAuditor : public RoundAuditor {
 public:
  MetaAuditor(const MetaPolicy& policy, const Environment& env) : policy_(policy), env_(env) {
    for (const char* c : {"one_hit", "activation_rule", "hit_budget", "full_flag", "separation", "children",
                          "full_balls", "full_balls_relaxed"})
      report_.touch(c);
  }

  void after_choose(std::size_t round, PointId x, const Choice& choice) override {
    arrivals_.push_back(x);
    const auto& balls = policy_.balls();
    const auto& xs = env_.contexts();
    const std::size_t hit = choice.cell;
    // activation: new balls this round must be children of the smallest full ball containing x
    if (balls.size() > seen_) {
      bool ok = balls.size() == seen_ + 1;
      std::optional<std::size_t> parent;
      for (std::size_t id = 0; id < seen_ && ok; ++id) {
        if (!within(xs.distance(balls[id].center, x), balls[id].radius())) continue;
        if (!balls[id].full) ok = false;
        if (!parent || balls[id].level > balls[*parent].level) parent = id;
      }
      const auto& c = balls.back();
      ok = ok && parent && c.parent == parent && c.center == x && c.level == balls[*parent].level + 1 &&
           c.activation_round == round;
      report_.record("activation_rule", round, ok, "activation did not follow the rule");
      bool separated = true;
      for (std::size_t id = 0; id + 1 < balls.size(); ++id)
        if (balls[id].level == c.level && within(xs.distance(balls[id].center, c.center), c.radius()))
          separated = false;
      report_.record("separation", round, separated, "equal-radius balls too close");
    }
    seen_ = balls.size();
    std::optional<std::size_t> expected;
    for (std::size_t id = 0; id < balls.size(); ++id)
      if (!balls[id].full && within(xs.distance(balls[id].center, x), balls[id].radius())) expected = id;
    report_.record("one_hit", round, expected && *expected == hit, "hit ball is not the unique latest non-full ball");
    hit_ = hit;
  }

  void after_feedback(std::size_t round, PointId, const Choice&, double) override {
    const auto& b = policy_.balls()[hit_];
    report_.record("hit_budget", round, b.hits <= b.budget, "ball hit beyond its budget");
    report_.record("full_flag", round, b.full == (b.hits >= b.budget), "full flag out of sync");
  }

  void finish(std::size_t rounds) override {
    const auto& balls = policy_.balls();
    const auto& xs = env_.contexts();
    std::vector<PointId> support(arrivals_);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    std::optional<std::size_t> cdbl;
    if (support.size() <= 1500) cdbl = doubling_constant_estimate(xs, support);
    if (cdbl)
      for (std::size_t id = 0; id < balls.size(); ++id)
        report_.record("children", rounds, balls[id].children.size() <= *cdbl * *cdbl,
                       "ball " + std::to_string(id) + " has too many children");
    std::map<int, std::size_t> full_by_level;
    for (const auto& b : balls)
      if (b.full) ++full_by_level[b.level];
    for (const auto& [level, count] : full_by_level) {
      const double r = level_radius(level);
      const std::size_t k = policy_.budget(level);
      const CoverMode mode = support.size() <= kExactLimit ? CoverMode::exact : CoverMode::greedy;
      report_.record("full_balls", rounds, count <= rk_covering_number(xs, arrivals_, r, k, mode),
                     "level " + std::to_string(level));
      if (cdbl) {
        const std::size_t relaxed_k = std::max<std::size_t>(1, k / *cdbl);
        report_.record("full_balls_relaxed", rounds, count <= rk_covering_number(xs, arrivals_, r, relaxed_k, mode),
                       "level " + std::to_string(level));
      }
    }
  }

 private:
  const MetaPolicy& policy_;
  const Environment& env_;
  std::vector<PointId> arrivals_;
  std::size_t seen_ = 1;
  std::size_t hit_ = 0;
};

}  // namespace

std::unique_ptr<RoundAuditor> MetaPolicy::make_auditor(const Environment& env) {
  return std::make_unique<MetaAuditor>(*this, env);
}

}  // namespace simbandit
