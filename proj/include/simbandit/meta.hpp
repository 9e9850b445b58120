#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "simbandit/baselines.hpp"
#include "simbandit/covering.hpp"
#include "simbandit/environment.hpp"
#include "simbandit/policy.hpp"

namespace simbandit {

// Hit budget ceil(c_Y r^-(2 + d_Y) max(1, ln(1/r))), at least 1.
std::size_t t0(double r, double c_y, double d_y);

// r-covering number of the arrivals x whose ball B(x, r) holds at least k
// arrivals, counting multiplicities.
std::size_t rk_covering_number(const MetricSpace& space, std::span<const PointId> arrivals, double r, std::size_t k,
                               CoverMode mode = CoverMode::greedy);

enum class Subroutine { exp3, ucb1 };

struct MetaParams {
  double c_y = 1.0;
  std::optional<double> d_y;  // default: declared dimension of the arm space
  Subroutine subroutine = Subroutine::exp3;
};

struct ContextBall {
  PointId center = 0;
  int level = 0;  // radius 2^-level
  std::size_t budget = 1;
  std::size_t hits = 0;
  bool full = false;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  std::size_t activation_round = 0;

  double radius() const;
};

// Adaptive partition of the context space; each ball runs its own bandit over
// a fixed arm net (all arms when d_Y = 0, otherwise an r-net with
// r = T^(-1/(2 + d_X + d_Y))).
class MetaPolicy : public Policy {
 public:
  MetaPolicy(const Environment& env, std::size_t horizon, std::uint64_t seed, MetaParams params = {});

  std::string name() const override { return "meta"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  std::size_t structure_size() const override { return balls_.size(); }
  nlohmann::json snapshot() const override;
  std::unique_ptr<RoundAuditor> make_auditor(const Environment& env) override;

  // Runs the activation rule for x if needed and returns the hit ball.
  std::size_t route(std::size_t round, PointId x);
  // Throws std::logic_error unless `ball` is this round's hit ball.
  void feedback(std::size_t ball, double payoff);

  const std::vector<ContextBall>& balls() const { return balls_; }
  const std::vector<PointId>& arm_net() const { return arm_net_; }
  std::size_t budget(int level) const;
  double d_y() const { return d_y_; }
  double c_y() const { return params_.c_y; }
  bool floor_reached() const { return floor_reached_; }

 private:
  void activate(PointId center, int level, std::optional<std::size_t> parent, std::size_t round);
  PointId playable(PointId x, PointId arm) const;

  const Environment* env_;
  std::size_t horizon_;
  std::uint64_t seed_;
  MetaParams params_;
  double d_y_;
  std::vector<PointId> arm_net_;
  std::vector<ContextBall> balls_;
  std::vector<std::variant<Exp3, Ucb1>> bandits_;
  struct Pending {
    std::size_t ball, net_arm;
  };
  std::optional<Pending> pending_;
  bool floor_reached_ = false;
};

}  // namespace simbandit
