#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simbandit/metric_space.hpp"

namespace simbandit {

enum class NoiseKind { bernoulli, gaussian };

// Payoff distribution around mu. Gaussian draws mu + sigma * z clipped to [0, 1].
struct NoiseRule {
  NoiseKind kind = NoiseKind::bernoulli;
  double sigma = 0.1;
};

enum class ArrivalKind { explicit_list, round_robin, uniform };

// Context for round t (1-based). round_robin cycles through `contexts`;
// uniform draws from `contexts` on the arrivals stream with counter t.
struct ArrivalSchedule {
  ArrivalKind kind = ArrivalKind::explicit_list;
  std::vector<PointId> contexts;
  std::uint64_t seed = 0;

  PointId at(std::size_t round) const;
};

class FeasibilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Expected payoffs over feasible context-arm pairs plus the arrival schedule and
// noise rule. Time-invariant instances hold one |X| x |Y| table; adversarial
// instances hold one table per round. Immutable after construction.
class Environment {
 public:
  Environment(std::shared_ptr<const MetricSpace> contexts, std::shared_ptr<const MetricSpace> arms,
              std::vector<double> mu, std::vector<char> feasible, ArrivalSchedule arrivals, std::size_t horizon,
              NoiseRule noise = {});

  // Oblivious adversary: mu_by_round holds horizon consecutive |X| x |Y| tables.
  static Environment adversarial(std::shared_ptr<const MetricSpace> contexts,
                                 std::shared_ptr<const MetricSpace> arms, std::vector<double> mu_by_round,
                                 std::vector<char> feasible, ArrivalSchedule arrivals, std::size_t horizon,
                                 NoiseRule noise = {});

  const MetricSpace& contexts() const { return *contexts_; }
  const MetricSpace& arms() const { return *arms_; }
  const MetricSpace& pairs() const { return *pairs_; }
  std::shared_ptr<const MetricSpace> contexts_ptr() const { return contexts_; }
  std::shared_ptr<const MetricSpace> arms_ptr() const { return arms_; }
  std::shared_ptr<const MetricSpace> pairs_ptr() const { return pairs_; }

  std::size_t num_contexts() const { return contexts_->size(); }
  std::size_t num_arms() const { return arms_->size(); }
  std::size_t horizon() const { return horizon_; }
  PointId pair_id(PointId x, PointId y) const { return x * num_arms() + y; }
  std::pair<PointId, PointId> split(PointId pair) const { return {pair / num_arms(), pair % num_arms()}; }

  bool all_feasible() const { return feasible_.empty(); }
  bool feasible(PointId x, PointId y) const { return feasible_.empty() || feasible_[pair_id(x, y)]; }
  const std::vector<PointId>& feasible_arms(PointId x) const { return feasible_arms_[x]; }
  const std::vector<char>& feasibility_table() const { return feasible_; }
  std::vector<PointId> feasible_pairs() const;

  bool round_varying() const { return round_varying_; }
  // Time-invariant mean; throws UnsupportedOperation for adversarial instances.
  double mu(PointId x, PointId y) const;
  double mu(std::size_t round, PointId x, PointId y) const;
  const std::vector<double>& mu_table() const { return mu_; }

  PointId context_at(std::size_t round) const { return arrivals_.at(round); }
  const ArrivalSchedule& arrivals() const { return arrivals_; }
  const NoiseRule& noise() const { return noise_; }

  std::string label;

 private:
  void index_feasibility();
  void check_arrivals() const;

  std::shared_ptr<const MetricSpace> contexts_, arms_, pairs_;
  std::vector<double> mu_;
  std::vector<char> feasible_;
  std::vector<std::vector<PointId>> feasible_arms_;
  ArrivalSchedule arrivals_;
  std::size_t horizon_ = 0;
  NoiseRule noise_;
  bool round_varying_ = false;
};

struct RoundOutcome {
  std::size_t round = 0;
  PointId context = 0;
  PointId arm = 0;
  double payoff = 0.0;
};

// Payoff draw for (round, x, y) from the noise stream keyed by `noise_key`
// (see stream_key). The draw uses counter = round, so it is a pure function of
// its arguments.
double sample_payoff(const Environment& env, std::size_t round, PointId x, PointId y, std::uint64_t noise_key);

struct BestResponse {
  PointId arm = 0;
  double mu_star = 0.0;
};

// Exhaustive argmax over feasible arms; ties go to the lowest arm id.
BestResponse best_response(const Environment& env, PointId x, std::size_t round = 1);

struct LipschitzViolation {
  std::size_t round = 0;
  PointId a = 0, b = 0;  // pair ids
  double gap = 0.0, distance = 0.0;
};

struct LipschitzReport {
  bool ok = true;
  std::size_t checked = 0;
  std::optional<LipschitzViolation> violation;
};

// |mu(x,y) - mu(x',y')| <= D((x,y),(x',y')) over feasible pairs: exhaustive when
// there are at most exhaustive_limit feasible pairs, otherwise sampled. For
// adversarial instances every round is checked the same way (sampled rounds
// above 64).
LipschitzReport validate_lipschitz(const Environment& env, std::size_t exhaustive_limit = 10000,
                                   std::size_t samples = 200000, std::uint64_t seed = 0);

// ---- generators ----

struct NeedleParams {
  std::size_t n_x = 1;
  std::size_t n_y = 2;
  double r = 0.25;
  std::vector<PointId> assignment;  // index into the arm net per context net point; empty = random
  std::uint64_t seed = 0;
  std::size_t resolution = 0;       // extra points between neighbouring net points
  std::size_t horizon = 1000;
};

struct NeedleInstance {
  Environment env;
  std::vector<PointId> net_x, net_y;  // point ids of S_X and S_Y
  std::vector<PointId> needle;        // needle arm id per net context
};

// Net points sit 2r apart on a line (distances truncated at 1). Net pairs get
// 1/2 + r/2 (needle) or 1/2 + r/4; every pair is smoothed down to
// max over net pairs of max(1/2, v(x0,y0) - D_X - D_Y).
NeedleInstance make_needle_instance(const NeedleParams& p);

struct DriftParams {
  std::size_t k = 5;
  double sigma = 0.01;
  DriftShape shape = DriftShape::sqrt;
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;
  std::size_t knot_spacing = 16;  // sqrt shape only
};

// Contexts are rounds (x_t = t, id t - 1). Arms carry no similarity.
Environment make_drifting_env(const DriftParams& p);

// contexts = distinct awake sets in first-seen order, D_X = 0, arms discrete.
Environment make_sleeping_env(std::size_t num_arms, const std::vector<std::vector<PointId>>& awake,
                              const std::vector<double>& mu);

struct Peak {
  PointId x = 0, y = 0;
  double height = 1.0;
  double slope_x = 1.0, slope_y = 1.0;  // <= 1 keeps the instance Lipschitz
};

// mu(x, y) = max(floor, max_i height_i - slope_x,i D_X(x, x_i) - slope_y,i D_Y(y, y_i)), clamped to [0, 1].
Environment make_peaks_env(std::shared_ptr<const MetricSpace> contexts, std::shared_ptr<const MetricSpace> arms,
                           const std::vector<Peak>& peaks, double floor, ArrivalSchedule arrivals,
                           std::size_t horizon);

// Contexts and arms are evenly spaced lines on [0, 1];
// mu(x, y) = max(floor, height - slope |y - x|), a near-optimal ridge along y = x.
Environment make_ridge_env(std::size_t n_x, std::size_t n_y, double height, double floor, double slope,
                           ArrivalSchedule arrivals, std::size_t horizon);

// Random cones on random 1-D or 2-D spaces with random infeasible pairs; for property suites.
Environment make_random_env(std::uint64_t seed, std::size_t horizon, std::size_t max_contexts = 12,
                            std::size_t max_arms = 12);

ArrivalSchedule uniform_arrivals(std::size_t num_contexts, std::uint64_t seed);
ArrivalSchedule round_robin_arrivals(std::vector<PointId> cycle);

}  // namespace simbandit
