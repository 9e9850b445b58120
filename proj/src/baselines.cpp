#include "simbandit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "simbandit/covering.hpp"

namespace simbandit {

Exp3::Exp3(std::size_t k, double gamma, CounterRng rng) : gamma_(gamma), log_w_(k, 0.0), rng_(rng) {
  if (k == 0) throw std::invalid_argument("exp3: need at least one arm");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("exp3: gamma must lie in (0, 1]");
}

double Exp3::default_gamma(std::size_t k, std::size_t horizon) {
  if (k <= 1) return 1.0;
  const double kk = static_cast<double>(k);
  const double T = static_cast<double>(std::max<std::size_t>(horizon, 1));
  return std::min(1.0, std::sqrt(kk * std::log(kk) / ((std::numbers::e - 1.0) * T)));
}

std::vector<double> Exp3::probabilities(const std::vector<char>* allowed) const {
  const std::size_t k = log_w_.size();
  std::size_t m = 0;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i)
    if (!allowed || (*allowed)[i]) {
      ++m;
      top = std::max(top, log_w_[i]);
    }
  if (m == 0) throw std::invalid_argument("exp3: no allowed arm");
  std::vector<double> p(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (!allowed || (*allowed)[i]) {
      p[i] = std::exp(log_w_[i] - top);
      total += p[i];
    }
  for (std::size_t i = 0; i < k; ++i)
    if (!allowed || (*allowed)[i]) p[i] = (1.0 - gamma_) * p[i] / total + gamma_ / static_cast<double>(m);
  return p;
}

std::size_t Exp3::draw(const std::vector<char>* allowed) {
  last_probs_ = probabilities(allowed);
  const double u = rng_.uniform();
  double acc = 0.0;
  std::size_t arm = 0, last_positive = 0;
  for (; arm < last_probs_.size(); ++arm) {
    if (last_probs_[arm] <= 0.0) continue;
    last_positive = arm;
    acc += last_probs_[arm];
    if (u < acc) break;
  }
  if (arm == last_probs_.size()) arm = last_positive;  // rounding in the cumulative sum
  last_arm_ = arm;
  return arm;
}

void Exp3::update(std::size_t arm, double payoff) {
  check_payoff(payoff);
  if (!last_arm_ || *last_arm_ != arm) throw std::logic_error("exp3: feedback for an arm that was not drawn");
  const double estimate = payoff / last_probs_[arm];
  log_w_[arm] += gamma_ * estimate / static_cast<double>(log_w_.size());
  last_arm_.reset();
  ++plays_;
}

Ucb1::Ucb1(std::size_t k) : n_(k, 0), sum_(k, 0.0) {
  if (k == 0) throw std::invalid_argument("ucb1: need at least one arm");
}

double Ucb1::index(std::size_t arm) const {
  if (n_[arm] == 0) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(n_[arm]);
  return sum_[arm] / n + std::sqrt(2.0 * std::log(static_cast<double>(std::max<std::size_t>(t_, 1))) / n);
}

std::size_t Ucb1::select(const std::vector<char>* allowed) const {
  std::optional<std::size_t> best;
  double best_index = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_.size(); ++i) {
    if (allowed && !(*allowed)[i]) continue;
    const double idx = index(i);
    if (!best || idx > best_index) {
      best = i;
      best_index = idx;
    }
  }
  if (!best) throw std::invalid_argument("ucb1: no allowed arm");
  return *best;
}

void Ucb1::update(std::size_t arm, double payoff) {
  check_payoff(payoff);
  ++n_[arm];
  sum_[arm] += payoff;
  ++t_;
}

namespace {

const std::vector<char>* feasibility_mask(const Environment& env, PointId x, std::vector<char>& mask) {
  if (env.all_feasible()) return nullptr;
  mask.assign(env.num_arms(), 0);
  for (PointId y : env.feasible_arms(x)) mask[y] = 1;
  return &mask;
}

}  // namespace

Exp3Policy::Exp3Policy(const Environment& env, std::size_t horizon, std::uint64_t seed, std::optional<double> gamma)
    : env_(&env),
      exp3_(env.num_arms(), gamma.value_or(Exp3::default_gamma(env.num_arms(), horizon)),
            CounterRng(seed, Stream::algorithm)) {}

Choice Exp3Policy::choose(std::size_t /*round*/, PointId x) {
  if (pending_) throw std::logic_error("exp3: choose called twice without feedback");
  const std::size_t arm = exp3_.draw(feasibility_mask(*env_, x, mask_));
  pending_ = arm;
  return Choice{arm, 0};
}

void Exp3Policy::receive(double payoff) {
  if (!pending_) throw std::logic_error("exp3: feedback without a pending choice");
  exp3_.update(*pending_, payoff);
  pending_.reset();
}

nlohmann::json Exp3Policy::snapshot() const {
  return {{"algorithm", "exp3"}, {"gamma", exp3_.gamma()}, {"probabilities", exp3_.probabilities()}};
}

Ucb1Policy::Ucb1Policy(const Environment& env) : env_(&env), ucb_(env.num_arms()) {}

Choice Ucb1Policy::choose(std::size_t /*round*/, PointId x) {
  if (pending_) throw std::logic_error("ucb1: choose called twice without feedback");
  const std::size_t arm = ucb_.select(feasibility_mask(*env_, x, mask_));
  pending_ = arm;
  return Choice{arm, 0};
}

void Ucb1Policy::receive(double payoff) {
  if (!pending_) throw std::logic_error("ucb1: feedback without a pending choice");
  ucb_.update(*pending_, payoff);
  pending_.reset();
}

nlohmann::json Ucb1Policy::snapshot() const {
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < ucb_.k(); ++i) counts.push_back(ucb_.count(i));
  return {{"algorithm", "ucb1"}, {"counts", counts}};
}

double uniform_predicted_regret(std::size_t cells, std::size_t arms, double r, std::size_t horizon) {
  const double T = static_cast<double>(horizon);
  const double k = static_cast<double>(arms);
  const double bandit = arms > 1 ? 2.0 * std::sqrt((std::numbers::e - 1.0) * double(cells) * T * k * std::log(k)) : 0.0;
  return r * T + bandit;
}

double uniform_granularity(const Environment& env, std::size_t horizon) {
  horizon = std::max<std::size_t>(horizon, 1);
  const auto xs = all_points(env.contexts());
  const auto ys = all_points(env.arms());
  double best_r = 1.0, best = std::numeric_limits<double>::infinity();
  // Geometric scan r = 2^{-j/4}; stop once both nets are the whole spaces.
  for (int j = 0; j <= 160; ++j) {
    const double r = std::exp2(-j / 4.0);
    const auto cx = build_r_net(env.contexts(), xs, r).size();
    const auto cy = build_r_net(env.arms(), ys, r).size();
    const bool exact = cx == xs.size() && cy == ys.size();
    const double pred = uniform_predicted_regret(cx, cy, exact ? 0.0 : r, horizon);
    if (pred < best) {
      best = pred;
      best_r = r;
    }
    if (exact) break;
  }
  return best_r;
}

UniformPolicy::UniformPolicy(const Environment& env, std::size_t horizon, std::uint64_t seed,
                             std::optional<double> granularity)
    : env_(&env), seed_(seed) {
  r_ = granularity.value_or(uniform_granularity(env, horizon));
  if (!(r_ > 0.0)) throw std::invalid_argument("uniform: granularity must be positive");
  context_net_ = build_r_net(env.contexts(), all_points(env.contexts()), r_);
  arm_net_ = build_r_net(env.arms(), all_points(env.arms()), r_);
  cell_of_.resize(env.num_contexts());
  for (PointId x = 0; x < env.num_contexts(); ++x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < context_net_.size(); ++c) {
      const double dd = env.contexts().distance(x, context_net_[c]);
      if (dd < best_d) {
        best_d = dd;
        best = c;
      }
    }
    cell_of_[x] = best;
  }
  cells_.resize(context_net_.size());
  cell_horizon_ = (horizon + context_net_.size() - 1) / context_net_.size();
}

PointId UniformPolicy::playable(PointId x, PointId arm) const {
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

Choice UniformPolicy::choose(std::size_t /*round*/, PointId x) {
  if (pending_) throw std::logic_error("uniform: choose called twice without feedback");
  const std::size_t cell = cell_of_[x];
  auto& bandit = cells_[cell];
  if (!bandit)
    bandit.emplace(arm_net_.size(), Exp3::default_gamma(arm_net_.size(), cell_horizon_),
                   CounterRng(seed_, Stream::algorithm, cell + 1));
  const std::size_t j = bandit->draw();
  pending_ = Pending{cell, j};
  return Choice{playable(x, arm_net_[j]), cell};
}

void UniformPolicy::receive(double payoff) {
  if (!pending_) throw std::logic_error("uniform: feedback without a pending choice");
  cells_[pending_->cell]->update(pending_->net_arm, payoff);
  pending_.reset();
}

nlohmann::json UniformPolicy::snapshot() const {
  return {{"algorithm", "uniform"},
          {"granularity", r_},
          {"context_net", context_net_},
          {"arm_net", arm_net_},
          {"cell_horizon", cell_horizon_}};
}

Choice OraclePolicy::choose(std::size_t round, PointId x) {
  return Choice{best_response(*env_, x, round).arm, 0};
}

}  // namespace simbandit
