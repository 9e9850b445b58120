#pragma once

#include <vector>

#include "simbandit/covering.hpp"
#include "simbandit/environment.hpp"

namespace simbandit {

inline constexpr double kZoomingConstant = 12.0;

// Badness mu*(x) - mu(x, y) of a feasible pair.
double badness(const Environment& env, PointId x, PointId y);

// P_r = feasible pairs with badness <= constant * r, as pair ids.
std::vector<PointId> near_optimal_pairs(const Environment& env, double r, double constant = kZoomingConstant);

// r-covering number of P_r. Throws UnsupportedOperation for round-varying instances.
std::size_t zooming_number(const Environment& env, double r, CoverMode mode = CoverMode::greedy,
                           double constant = kZoomingConstant);

}  // namespace simbandit
