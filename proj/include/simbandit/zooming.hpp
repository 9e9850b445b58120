#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "simbandit/environment.hpp"
#include "simbandit/policy.hpp"

namespace simbandit {

// Balls never shrink below radius 2^-kMaxLevel.
inline constexpr int kMaxLevel = 20;

inline double level_radius(int level) { return std::ldexp(1.0, -level); }

// 4 sqrt(log T / (1 + n)), natural log.
double confidence_radius(std::size_t n, double log_horizon);

struct BallRecord {
  PointId cx = 0, cy = 0;  // center (context, arm)
  int level = 0;           // radius = 2^-level
  std::size_t n = 0;
  double payoff_sum = 0.0;
  std::optional<std::size_t> parent;
  std::size_t activation_round = 0;  // 0 for the initial ball

  double radius() const { return level_radius(level); }
  double mean() const { return n == 0 ? 0.0 : payoff_sum / static_cast<double>(n); }
};

struct ZoomOptions {
  // Overrides ln T in the confidence radius.
  std::optional<double> log_horizon;
  // Fault injection for audit tests: never activate children.
  bool skip_activation = false;
};

// Contextual zooming over the product of the context and arm spaces,
// restricted to the feasible pairs of the environment it was built from.
class ZoomingPolicy : public Policy {
 public:
  ZoomingPolicy(const Environment& env, std::size_t horizon, ZoomOptions options = {});

  std::string name() const override { return "zooming"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  std::size_t structure_size() const override { return balls_.size(); }
  nlohmann::json snapshot() const override;
  std::unique_ptr<RoundAuditor> make_auditor(const Environment& env) override;

  const std::vector<BallRecord>& balls() const { return balls_; }
  std::size_t horizon() const { return horizon_; }
  double log_horizon() const { return log_horizon_; }
  double rad(std::size_t id) const { return confidence_radius(balls_[id].n, log_horizon_); }
  double preindex(std::size_t id) const;
  // Index by the pruned search the policy uses for selection.
  double index(std::size_t id) const;
  // Index by a plain scan over every ball; reference for tests and audits.
  double index_exhaustive(std::size_t id) const;
  double center_distance(std::size_t a, std::size_t b) const;
  bool contains(std::size_t id, PointId x, PointId y) const;
  bool in_domain(std::size_t id, PointId x, PointId y) const;
  bool floor_reached() const { return floor_reached_; }

  // Replaces the ball collection (snapshot restore and synthetic test states).
  void load(std::vector<BallRecord> balls, std::size_t round);

  struct Pending {
    std::size_t ball = 0;
    PointId x = 0, y = 0;
    std::size_t round = 0;
    double rad_at_selection = 0.0;
  };
  const std::optional<Pending>& pending() const { return pending_; }

 private:
  void insert_ball(BallRecord b);
  const std::vector<PointId>& arms_by_distance(PointId cy);

  std::shared_ptr<const MetricSpace> xs_, ys_;
  std::vector<char> feasible_;  // empty = all pairs
  std::size_t horizon_;
  double log_horizon_;
  ZoomOptions options_;
  std::vector<BallRecord> balls_;
  std::vector<double> pre_;
  std::vector<std::vector<std::size_t>> by_level_;
  std::vector<std::set<std::pair<double, std::size_t>>> pre_by_level_;
  std::vector<std::vector<PointId>> arm_order_;
  std::vector<std::size_t> owner_stamp_;
  std::vector<int> owner_level_;
  std::size_t stamp_ = 0;
  std::optional<Pending> pending_;
  bool floor_reached_ = false;
};

// State checks that need no history: covering of every feasible pair,
// separation of equal-radius balls, parent links, statistics ranges.
AuditReport audit_zoom_state(const ZoomingPolicy& policy, const Environment& env);

}  // namespace simbandit
