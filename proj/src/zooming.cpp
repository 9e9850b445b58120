#include "simbandit/zooming.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "simbandit/zooming_number.hpp"

namespace simbandit {

double confidence_radius(std::size_t n, double log_horizon) {
  return 4.0 * std::sqrt(log_horizon / (1.0 + static_cast<double>(n)));
}

ZoomingPolicy::ZoomingPolicy(const Environment& env, std::size_t horizon, ZoomOptions options)
    : xs_(env.contexts_ptr()),
      ys_(env.arms_ptr()),
      feasible_(env.feasibility_table()),
      horizon_(horizon),
      log_horizon_(options.log_horizon.value_or(std::log(static_cast<double>(std::max<std::size_t>(horizon, 2))))),
      options_(options),
      by_level_(kMaxLevel + 1),
      pre_by_level_(kMaxLevel + 1),
      arm_order_(env.num_arms()),
      owner_stamp_(env.num_arms(), 0),
      owner_level_(env.num_arms(), 0) {
  if (horizon == 0) throw std::invalid_argument("zooming: horizon must be positive");
  const auto& first = env.feasible_arms(env.context_at(1));
  insert_ball(BallRecord{env.context_at(1), first.empty() ? 0 : first.front(), 0, 0, 0.0, std::nullopt, 0});
}

double ZoomingPolicy::preindex(std::size_t id) const {
  const auto& b = balls_[id];
  return b.mean() + 2.0 * b.radius() + rad(id);
}

double ZoomingPolicy::center_distance(std::size_t a, std::size_t b) const {
  const auto& p = balls_[a];
  const auto& q = balls_[b];
  return std::min(1.0, xs_->distance(p.cx, q.cx) + ys_->distance(p.cy, q.cy));
}

bool ZoomingPolicy::contains(std::size_t id, PointId x, PointId y) const {
  const auto& b = balls_[id];
  return within(std::min(1.0, xs_->distance(b.cx, x) + ys_->distance(b.cy, y)), b.radius());
}

bool ZoomingPolicy::in_domain(std::size_t id, PointId x, PointId y) const {
  if (!contains(id, x, y)) return false;
  for (std::size_t j = 0; j < balls_.size(); ++j)
    if (balls_[j].level > balls_[id].level && contains(j, x, y)) return false;
  return true;
}

double ZoomingPolicy::index(std::size_t id) const {
  double best = pre_[id];
  for (int l = 0; l <= balls_[id].level; ++l)
    for (const auto& [p, j] : pre_by_level_[l]) {
      if (p >= best) break;
      if (j != id) best = std::min(best, p + center_distance(id, j));
    }
  return best;
}

double ZoomingPolicy::index_exhaustive(std::size_t id) const {
  double best = preindex(id);
  for (std::size_t j = 0; j < balls_.size(); ++j)
    if (balls_[j].level <= balls_[id].level) best = std::min(best, preindex(j) + center_distance(id, j));
  return best;
}

void ZoomingPolicy::insert_ball(BallRecord b) {
  const std::size_t id = balls_.size();
  by_level_[b.level].push_back(id);
  balls_.push_back(std::move(b));
  pre_.push_back(preindex(id));
  pre_by_level_[balls_[id].level].emplace(pre_[id], id);
}

void ZoomingPolicy::load(std::vector<BallRecord> balls, std::size_t /*round*/) {
  balls_.clear();
  pre_.clear();
  for (auto& v : by_level_) v.clear();
  for (auto& s : pre_by_level_) s.clear();
  pending_.reset();
  for (auto& b : balls) {
    if (b.level < 0 || b.level > kMaxLevel) throw std::invalid_argument("zooming: ball level out of range");
    insert_ball(std::move(b));
  }
}

const std::vector<PointId>& ZoomingPolicy::arms_by_distance(PointId cy) {
  auto& order = arm_order_[cy];
  if (order.empty()) {
    order.resize(ys_->size());
    std::iota(order.begin(), order.end(), PointId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](PointId a, PointId b) { return ys_->distance(cy, a) < ys_->distance(cy, b); });
  }
  return order;
}

Choice ZoomingPolicy::choose(std::size_t round, PointId x) {
  if (pending_) throw std::logic_error("zooming: choose called twice without feedback");
  ++stamp_;
  const std::size_t K = ys_->size();
  std::vector<std::pair<std::size_t, PointId>> relevant;
  // Finest balls first, so the first level to claim an arm owns it in its domain.
  for (int level = kMaxLevel; level >= 0; --level) {
    const double r = level_radius(level);
    for (std::size_t id : by_level_[level]) {
      const auto& b = balls_[id];
      const double dx = xs_->distance(b.cx, x);
      if (!within(std::min(1.0, dx), r)) continue;
      PointId first = K;
      for (PointId y : arms_by_distance(b.cy)) {
        if (!within(std::min(1.0, dx + ys_->distance(b.cy, y)), r)) break;
        if (!feasible_.empty() && !feasible_[x * K + y]) continue;
        if (owner_stamp_[y] != stamp_) {
          owner_stamp_[y] = stamp_;
          owner_level_[y] = level;
        } else if (owner_level_[y] != level) {
          continue;
        }
        first = std::min(first, y);
      }
      if (first < K) relevant.emplace_back(id, first);
    }
  }
  if (relevant.empty()) throw std::logic_error("zooming: no relevant ball (covering invariant broken)");
  std::sort(relevant.begin(), relevant.end(), [&](const auto& a, const auto& b) {
    if (pre_[a.first] != pre_[b.first]) return pre_[a.first] > pre_[b.first];
    return a.first < b.first;
  });
  std::size_t best = relevant.front().first;
  PointId arm = relevant.front().second;
  double best_index = -std::numeric_limits<double>::infinity();
  for (const auto& [id, y] : relevant) {
    if (pre_[id] < best_index) break;  // index <= preindex
    const double idx = index(id);
    if (idx > best_index || (idx == best_index && id < best)) {
      best_index = idx;
      best = id;
      arm = y;
    }
  }
  pending_ = Pending{best, x, arm, round, rad(best)};
  return Choice{arm, best};
}

void ZoomingPolicy::receive(double payoff) {
  check_payoff(payoff);
  if (!pending_) throw std::logic_error("zooming: feedback without a pending choice");
  const Pending p = *pending_;
  pending_.reset();
  auto& b = balls_[p.ball];
  pre_by_level_[b.level].erase({pre_[p.ball], p.ball});
  ++b.n;
  b.payoff_sum += payoff;
  pre_[p.ball] = preindex(p.ball);
  pre_by_level_[b.level].emplace(pre_[p.ball], p.ball);
  if (options_.skip_activation || p.rad_at_selection > b.radius()) return;
  if (b.level + 1 > kMaxLevel) {
    floor_reached_ = true;
    return;
  }
  insert_ball(BallRecord{p.x, p.y, b.level + 1, 0, 0.0, p.ball, p.round});
}

nlohmann::json ZoomingPolicy::snapshot() const {
  nlohmann::json balls = nlohmann::json::array();
  for (const auto& b : balls_) {
    balls.push_back({{"context", b.cx},
                     {"arm", b.cy},
                     {"level", b.level},
                     {"radius", b.radius()},
                     {"n", b.n},
                     {"payoff_sum", b.payoff_sum},
                     {"parent", b.parent ? nlohmann::json(*b.parent) : nlohmann::json(nullptr)},
                     {"activation_round", b.activation_round}});
  }
  return {{"algorithm", "zooming"},
          {"horizon", horizon_},
          {"floor_reached", floor_reached_},
          {"balls", std::move(balls)}};
}

AuditReport audit_zoom_state(const ZoomingPolicy& policy, const Environment& env) {
  AuditReport report;
  const auto& balls = policy.balls();
  for (const char* c : {"covering", "separation", "parent_links", "radii", "stats"}) report.touch(c);
  // covering, coarse balls first so the initial ball settles most pairs at once
  std::vector<std::size_t> order(balls.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return balls[a].level < balls[b].level; });
  for (PointId p : env.feasible_pairs()) {
    const auto [x, y] = env.split(p);
    bool covered = false;
    for (std::size_t id : order)
      if (policy.contains(id, x, y)) {
        covered = true;
        break;
      }
    report.record("covering", 0, covered, "pair " + std::to_string(p) + " uncovered");
  }
  std::vector<std::vector<std::size_t>> levels(kMaxLevel + 1);
  for (std::size_t id = 0; id < balls.size(); ++id) {
    const auto& b = balls[id];
    const bool level_ok = b.level >= 0 && b.level <= kMaxLevel;
    report.record("radii", b.activation_round, level_ok, "ball " + std::to_string(id));
    if (level_ok) levels[b.level].push_back(id);
    report.record("stats", b.activation_round, b.payoff_sum >= 0.0 && b.payoff_sum <= static_cast<double>(b.n),
                  "ball " + std::to_string(id));
    if (b.parent) {
      const bool ok = *b.parent < id && balls[*b.parent].level + 1 == b.level &&
                      balls[*b.parent].activation_round < b.activation_round;
      report.record("parent_links", b.activation_round, ok, "ball " + std::to_string(id));
    } else {
      report.record("parent_links", b.activation_round, id == 0 && b.level == 0, "orphan ball " + std::to_string(id));
    }
  }
  for (const auto& ids : levels)
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const double d = policy.center_distance(ids[i], ids[j]);
        const bool ok = !within(d, balls[ids[i]].radius());
        report.record("separation", std::max(balls[ids[i]].activation_round, balls[ids[j]].activation_round), ok,
                      "balls " + std::to_string(ids[i]) + ", " + std::to_string(ids[j]));
      }
  return report;
}

namespace {

class ZoomAuditor : public RoundAuditor {
 public:
  ZoomAuditor(const ZoomingPolicy& policy, const Environment& env) : policy_(policy), env_(env) {
    for (const char* c : {"domain", "concentration", "lemma1", "activation_rule", "corollary1", "separation",
                          "parent_links", "covering"})
      report_.touch(c);
    if (!env.round_varying()) {
      star_.resize(env.num_contexts(), 0.0);
      for (PointId x = 0; x < env.num_contexts(); ++x)
        if (!env.feasible_arms(x).empty()) star_[x] = best_response(env, x).mu_star;
    }
  }

  void after_choose(std::size_t round, PointId x, const Choice& choice) override {
    const auto& balls = policy_.balls();
    before_ = balls.size();
    sel_level_ = balls[choice.cell].level;
    rad_sel_ = policy_.rad(choice.cell);
    report_.record("domain", round, env_.feasible(x, choice.arm) && policy_.in_domain(choice.cell, x, choice.arm),
                   "selected pair outside the ball's domain");
    if (star_.empty()) return;
    for (std::size_t id = 0; id < balls.size(); ++id) {
      const auto& b = balls[id];
      if (b.n == 0) continue;
      const double gap = std::abs(b.mean() - env_.mu(b.cx, b.cy));
      report_.record("concentration", round, gap <= b.radius() + policy_.rad(id), "ball " + std::to_string(id));
    }
    const double delta = star_[x] - env_.mu(x, choice.arm);
    report_.record("lemma1", round, delta <= 15.0 * level_radius(sel_level_) + 1e-12,
                   "badness " + std::to_string(delta));
  }

  void after_feedback(std::size_t round, PointId x, const Choice& choice, double /*payoff*/) override {
    const auto& balls = policy_.balls();
    const bool expect = rad_sel_ <= level_radius(sel_level_) && sel_level_ < kMaxLevel;
    const std::size_t added = balls.size() - before_;
    bool ok = added == (expect ? 1u : 0u);
    if (ok && added == 1) {
      const auto& c = balls.back();
      ok = c.cx == x && c.cy == choice.arm && c.level == sel_level_ + 1 && c.parent == choice.cell &&
           c.activation_round == round;
    }
    report_.record("activation_rule", round, ok, expect ? "expected a child ball" : "unexpected child ball");
    if (added == 1) {
      const std::size_t id = balls.size() - 1;
      const auto& c = balls[id];
      if (!star_.empty()) {
        const double delta = star_[x] - env_.mu(x, choice.arm);
        report_.record("corollary1", round, delta <= 12.0 * c.radius() + 1e-12, "badness " + std::to_string(delta));
      }
      bool separated = true;
      for (std::size_t j = 0; j < id && separated; ++j)
        if (balls[j].level == c.level && within(policy_.center_distance(id, j), c.radius())) separated = false;
      report_.record("separation", round, separated, "new ball too close to an equal-radius ball");
      const bool link = c.parent && balls[*c.parent].level + 1 == c.level &&
                        balls[*c.parent].activation_round < c.activation_round;
      report_.record("parent_links", round, link, "bad parent link");
    }
    bool covered = true;
    for (PointId y : env_.feasible_arms(x)) {
      bool hit = false;
      for (std::size_t id = 0; id < balls.size() && !hit; ++id) hit = policy_.contains(id, x, y);
      covered = covered && hit;
    }
    report_.record("covering", round, covered, "context pair left uncovered");
  }

  void finish(std::size_t /*rounds*/) override { report_.merge(audit_zoom_state(policy_, env_)); }

 private:
  const ZoomingPolicy& policy_;
  const Environment& env_;
  std::vector<double> star_;
  std::size_t before_ = 0;
  int sel_level_ = 0;
  double rad_sel_ = 0.0;
};

}  // namespace

std::unique_ptr<RoundAuditor> ZoomingPolicy::make_auditor(const Environment& env) {
  return std::make_unique<ZoomAuditor>(*this, env);
}

}  // namespace simbandit
