#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "simbandit/environment.hpp"
#include "simbandit/policy.hpp"
#include "simbandit/rng.hpp"

namespace simbandit {

// EXP3 with log-domain weights. An optional mask restricts a draw to a subset
// of arms (sleeping arms); the distribution is renormalized over that subset.
class Exp3 {
 public:
  Exp3(std::size_t k, double gamma, CounterRng rng);

  // min(1, sqrt(k ln k / ((e - 1) T))); 1 when k = 1.
  static double default_gamma(std::size_t k, std::size_t horizon);

  std::size_t draw(const std::vector<char>* allowed = nullptr);
  void update(std::size_t arm, double payoff);
  std::vector<double> probabilities(const std::vector<char>* allowed = nullptr) const;

  std::size_t k() const { return log_w_.size(); }
  double gamma() const { return gamma_; }
  std::size_t plays() const { return plays_; }

 private:
  double gamma_;
  std::vector<double> log_w_;
  CounterRng rng_;
  std::vector<double> last_probs_;
  std::optional<std::size_t> last_arm_;
  std::size_t plays_ = 0;
};

// UCB1: untried arms first (lowest index), then mean + sqrt(2 ln t / n) with
// t the number of plays so far; ties go to the lowest index.
class Ucb1 {
 public:
  explicit Ucb1(std::size_t k);

  std::size_t select(const std::vector<char>* allowed = nullptr) const;
  void update(std::size_t arm, double payoff);
  double index(std::size_t arm) const;

  std::size_t k() const { return n_.size(); }
  std::size_t plays() const { return t_; }
  std::size_t count(std::size_t arm) const { return n_[arm]; }

 private:
  std::vector<std::size_t> n_;
  std::vector<double> sum_;
  std::size_t t_ = 0;
};

// Context-free EXP3 over all arms; infeasible arms are masked out per context.
class Exp3Policy : public Policy {
 public:
  Exp3Policy(const Environment& env, std::size_t horizon, std::uint64_t seed, std::optional<double> gamma = {});
  std::string name() const override { return "exp3"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  nlohmann::json snapshot() const override;
  const Exp3& bandit() const { return exp3_; }

 private:
  const Environment* env_;
  Exp3 exp3_;
  std::vector<char> mask_;
  std::optional<std::size_t> pending_;
};

// Context-free UCB1 over all arms, restricted to feasible arms each round.
class Ucb1Policy : public Policy {
 public:
  explicit Ucb1Policy(const Environment& env);
  std::string name() const override { return "ucb1"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  nlohmann::json snapshot() const override;
  const Ucb1& bandit() const { return ucb_; }

 private:
  const Environment* env_;
  Ucb1 ucb_;
  std::vector<char> mask_;
  std::optional<std::size_t> pending_;
};

// Fixed r*-nets of contexts and arms with r* = T^(-1/(2 + d_X + d_Y)); one
// EXP3 instance per context cell over the arm net, each tuned for ceil(T / cells)
// rounds. A net arm that is infeasible for the context is replaced by the
// nearest feasible arm.
// Predicted regret of the uniform algorithm with `cells` context cells and
// `arms` net arms at granularity r: r*T plus the EXP3 bound summed over cells.
double uniform_predicted_regret(std::size_t cells, std::size_t arms, double r, std::size_t horizon);

// Granularity minimizing uniform_predicted_regret over r = 2^{-j/4}.
double uniform_granularity(const Environment& env, std::size_t horizon);

class UniformPolicy : public Policy {
 public:
  UniformPolicy(const Environment& env, std::size_t horizon, std::uint64_t seed,
                std::optional<double> granularity = {});
  std::string name() const override { return "uniform"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  std::size_t structure_size() const override { return context_net_.size() * arm_net_.size(); }
  nlohmann::json snapshot() const override;

  double granularity() const { return r_; }
  const std::vector<PointId>& context_net() const { return context_net_; }
  const std::vector<PointId>& arm_net() const { return arm_net_; }
  // Index into context_net() of the cell that serves context x.
  std::size_t cell_of(PointId x) const { return cell_of_[x]; }

 private:
  PointId playable(PointId x, PointId arm) const;

  const Environment* env_;
  double r_;
  std::size_t cell_horizon_;
  std::uint64_t seed_;
  std::vector<PointId> context_net_, arm_net_;
  std::vector<std::size_t> cell_of_;
  std::vector<std::optional<Exp3>> cells_;
  struct Pending {
    std::size_t cell, net_arm;
  };
  std::optional<Pending> pending_;
};

// Plays the best response to every context (requires ground truth).
class OraclePolicy : public Policy {
 public:
  explicit OraclePolicy(const Environment& env) : env_(&env) {}
  std::string name() const override { return "oracle"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override { check_payoff(payoff); }

 private:
  const Environment* env_;
};

}  // namespace simbandit
