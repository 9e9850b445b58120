#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "simbandit/metric_space.hpp"

namespace simbandit {

enum class CoverMode {
  greedy,  // default: polynomial, an upper bound on the true value
  exact,   // exhaustive branch and bound; limited to kExactLimit points
};

inline constexpr std::size_t kExactLimit = 150;

// A cover of a point set by sets of diameter <= r. Each set is a list of point ids.
struct Cover {
  std::vector<std::vector<PointId>> sets;
  std::size_t size() const { return sets.size(); }
};

// Greedy cover by sets of diameter <= r: repeatedly take the uncovered seed
// whose greedily grown clique (neighbors added nearest-first while every
// pairwise distance stays <= r) covers the most uncovered points. Duplicate
// ids are ignored.
Cover greedy_cover(const MetricSpace& space, std::span<const PointId> points, double r);

// Minimum number of sets of diameter <= r covering `points` (a minimum clique
// partition of the threshold graph), by DSATUR branch and bound on the
// complement graph. Throws std::length_error above kExactLimit distinct points
// and std::runtime_error if the search budget is exhausted.
Cover exact_cover(const MetricSpace& space, std::span<const PointId> points, double r);

// r-covering number. Empty set -> 0.
std::size_t covering_number(const MetricSpace& space, std::span<const PointId> points, double r,
                            CoverMode mode = CoverMode::greedy);

// Size of an r-packing (pairwise distances > r). Greedy builds a maximal
// packing in index order; exact returns the maximum (independent set in the
// threshold graph, limited to 4 * kExactLimit points).
std::size_t packing_number(const MetricSpace& space, std::span<const PointId> points, double r,
                           CoverMode mode = CoverMode::greedy);
std::vector<PointId> maximum_packing(const MetricSpace& space, std::span<const PointId> points, double r);

// Greedy r-net in index order: pairwise > r apart, every point within <= r of the net.
std::vector<PointId> build_r_net(const MetricSpace& space, std::span<const PointId> points, double r);
bool is_r_net(const MetricSpace& space, std::span<const PointId> points, std::span<const PointId> net, double r);

// Largest greedy cover count, over balls B(p, 2^-i) intersected with the set,
// of the ball's points by sets of half its diameter.
std::size_t doubling_constant_estimate(const MetricSpace& space, std::span<const PointId> points);

// Every point id of a space, for the common "whole space" case.
std::vector<PointId> all_points(const MetricSpace& space);

// Largest pairwise distance; 0 for fewer than two points.
double diameter(const MetricSpace& space, std::span<const PointId> points);

}  // namespace simbandit
