#include "simbandit/zooming_number.hpp"

namespace simbandit {

double badness(const Environment& env, PointId x, PointId y) {
  return best_response(env, x).mu_star - env.mu(x, y);
}

std::vector<PointId> near_optimal_pairs(const Environment& env, double r, double constant) {
  if (env.round_varying()) throw UnsupportedOperation("zooming number needs a time-invariant payoff table");
  std::vector<PointId> out;
  for (PointId x = 0; x < env.num_contexts(); ++x) {
    const auto& arms = env.feasible_arms(x);
    if (arms.empty()) continue;
    const double star = best_response(env, x).mu_star;
    for (PointId y : arms)
      if (star - env.mu(x, y) <= constant * r + 1e-12) out.push_back(env.pair_id(x, y));
  }
  return out;
}

std::size_t zooming_number(const Environment& env, double r, CoverMode mode, double constant) {
  const auto pr = near_optimal_pairs(env, r, constant);
  return covering_number(env.pairs(), pr, r, mode);
}

}  // namespace simbandit
