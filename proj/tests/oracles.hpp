#pragma once

// Brute-force reference implementations used only by tests. They share no code
// with the library beyond the distance function.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "simbandit/metric_space.hpp"

namespace oracle {

using simbandit::MetricSpace;

// Minimum number of L1-diameter-r sets covering the n x n grid on the unit
// square. In rotated coordinates (i + j, i - j) the L1 distance becomes L-inf,
// so every maximal clique is the set of grid points in an axis-aligned window
// of side r; the search is an exact set cover over those windows.
inline std::size_t grid_l1_min_cover(int n, double r) {
  const int side = static_cast<int>(std::floor(r * (n - 1) + 1e-9));
  const int npts = n * n;
  if (npts > 128) throw std::invalid_argument("oracle grid too large");
  using Mask = std::array<std::uint64_t, 2>;
  auto set_bit = [](Mask& m, int i) { m[i >> 6] |= 1ULL << (i & 63); };
  auto test_bit = [](const Mask& m, int i) { return (m[i >> 6] >> (i & 63)) & 1ULL; };
  std::vector<int> u(npts), v(npts);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      u[i * n + j] = i + j;
      v[i * n + j] = i - j + (n - 1);
    }
  std::vector<Mask> windows;
  for (int u0 = 0; u0 <= 2 * (n - 1); ++u0)
    for (int v0 = 0; v0 <= 2 * (n - 1); ++v0) {
      Mask m{0, 0};
      for (int p = 0; p < npts; ++p)
        if (u[p] >= u0 && u[p] <= u0 + side && v[p] >= v0 && v[p] <= v0 + side) set_bit(m, p);
      if (m[0] | m[1]) windows.push_back(m);
    }
  // drop windows contained in another
  std::vector<Mask> maximal;
  for (std::size_t a = 0; a < windows.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < windows.size() && !dominated; ++b) {
      if (a == b) continue;
      const bool subset = (windows[a][0] & ~windows[b][0]) == 0 && (windows[a][1] & ~windows[b][1]) == 0;
      const bool equal = windows[a] == windows[b];
      if (subset && (!equal || b < a)) dominated = true;
    }
    if (!dominated) maximal.push_back(windows[a]);
  }
  std::vector<std::vector<int>> containing(npts);
  for (std::size_t w = 0; w < maximal.size(); ++w)
    for (int p = 0; p < npts; ++p)
      if (test_bit(maximal[w], p)) containing[p].push_back(static_cast<int>(w));

  std::size_t best = static_cast<std::size_t>(npts);
  std::function<void(Mask, std::size_t)> search = [&](Mask covered, std::size_t depth) {
    if (depth >= best) return;
    std::vector<int> open;
    for (int p = 0; p < npts; ++p)
      if (!test_bit(covered, p)) open.push_back(p);
    if (open.empty()) {
      best = depth;
      return;
    }
    // points pairwise farther than r each need their own set
    std::vector<int> far;
    for (int p : open) {
      bool ok = true;
      for (int q : far)
        if (std::max(std::abs(u[p] - u[q]), std::abs(v[p] - v[q])) <= side) {
          ok = false;
          break;
        }
      if (ok) far.push_back(p);
    }
    if (depth + far.size() >= best) return;
    int pick = open.front();
    for (int p : open)
      if (containing[p].size() < containing[pick].size()) pick = p;
    for (int w : containing[pick]) {
      Mask next = covered;
      next[0] |= maximal[w][0];
      next[1] |= maximal[w][1];
      search(next, depth + 1);
    }
  };
  search(Mask{0, 0}, 0);
  return best;
}

// Minimum partition of all points into groups of diameter <= r, by exhaustive
// restricted-growth enumeration. Small inputs only.
inline std::size_t min_clique_partition(const MetricSpace& space, double r) {
  const std::size_t n = space.size();
  std::vector<std::vector<std::size_t>> groups;
  std::size_t best = n;
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (groups.size() >= best) return;
    if (i == n) {
      best = groups.size();
      return;
    }
    for (std::size_t k = 0; k < groups.size(); ++k) {
      bool ok = true;
      for (std::size_t m : groups[k])
        if (space.distance(i, m) > r + 1e-12) {
          ok = false;
          break;
        }
      if (ok) {
        groups[k].push_back(i);
        go(i + 1);
        groups[k].pop_back();
      }
    }
    groups.push_back({i});
    go(i + 1);
    groups.pop_back();
  };
  go(0);
  return best;
}

// Maximum set of points pairwise farther than r apart (independent set in the
// threshold graph), by bitmask branching. At most 64 points.
inline std::size_t max_packing_bitmask(const MetricSpace& space, double r) {
  const std::size_t n = space.size();
  if (n > 64) throw std::invalid_argument("oracle packing: at most 64 points");
  std::vector<std::uint64_t> close(n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && space.distance(a, b) <= r + 1e-12) close[a] |= 1ULL << b;
  std::function<std::size_t(std::uint64_t)> mis = [&](std::uint64_t p) -> std::size_t {
    if (!p) return 0;
    const int v = __builtin_ctzll(p);
    const std::uint64_t rest = p & ~(1ULL << v);
    const std::size_t take = 1 + mis(rest & ~close[v]);
    if (!(rest & close[v])) return take;
    return std::max(take, mis(rest));
  };
  std::uint64_t all = n == 64 ? ~0ULL : ((1ULL << n) - 1);
  return mis(all);
}

// Doubling constant of a 1-D point set, exhaustive over every ball B(p, d(p, q)):
// the optimal number of intervals of length diam / 2 needed for the ball.
inline std::size_t doubling_exhaustive_line(const MetricSpace& space) {
  const auto& pm = std::get<simbandit::PointsMetric>(space.descriptor());
  const std::size_t n = space.size();
  std::size_t best = 1;
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t q = 0; q < n; ++q) {
      const double radius = space.distance(c, q);
      std::vector<double> xs;
      for (std::size_t p = 0; p < n; ++p)
        if (space.distance(c, p) <= radius + 1e-12) xs.push_back(pm.coords[p]);
      std::sort(xs.begin(), xs.end());
      const double diam = (xs.back() - xs.front()) * pm.scale;
      if (diam <= 0) continue;
      std::size_t count = 0;
      double start = -1e9;
      for (double x : xs)
        if ((x - start) * pm.scale > diam / 2 + 1e-12) {
          ++count;
          start = x;
        }
      best = std::max(best, count);
    }
  return best;
}

// ---- taxonomy oracles over plain child lists (node 0 is the root) ----

using Children = std::vector<std::vector<std::size_t>>;

inline void collect_leaves(const Children& ch, std::size_t v, std::vector<std::size_t>& out) {
  if (ch[v].empty()) out.push_back(v);
  for (std::size_t c : ch[v]) collect_leaves(ch, c, out);
}

// Leaf payoffs keyed by node id (leaf_mu[v] only meaningful for leaves).
inline double tree_weight(const Children& ch, const std::vector<double>& leaf_mu, std::size_t v) {
  std::vector<std::size_t> leaves;
  collect_leaves(ch, v, leaves);
  double w = 0.0;
  for (std::size_t a : leaves)
    for (std::size_t b : leaves) w = std::max(w, std::abs(leaf_mu[a] - leaf_mu[b]));
  return w;
}

// Reach probabilities from v to every node, by explicit top-down products.
inline std::vector<double> tree_reach(const Children& ch, std::size_t v) {
  std::vector<double> p(ch.size(), 0.0);
  std::function<void(std::size_t, double)> go = [&](std::size_t u, double prob) {
    p[u] = prob;
    for (std::size_t c : ch[u]) go(c, prob / double(ch[u].size()));
  };
  go(v, 1.0);
  return p;
}

inline double tree_payoff(const Children& ch, const std::vector<double>& leaf_mu, std::size_t v) {
  const auto p = tree_reach(ch, v);
  double s = 0.0;
  for (std::size_t u = 0; u < ch.size(); ++u)
    if (ch[u].empty()) s += p[u] * leaf_mu[u];
  return s;
}

inline double tree_quality(const Children& ch, const std::vector<double>& leaf_mu) {
  double best = -1.0;
  for (std::size_t u = 0; u < ch.size(); ++u)
    if (ch[u].empty()) best = std::max(best, leaf_mu[u]);
  double q = 1.0;
  for (std::size_t v = 0; v < ch.size(); ++v) {
    if (ch[v].empty()) continue;
    std::vector<std::size_t> leaves;
    collect_leaves(ch, v, leaves);
    bool has_opt = false;
    for (std::size_t l : leaves) has_opt = has_opt || leaf_mu[l] >= best - 1e-12;
    if (!has_opt) continue;
    const auto p = tree_reach(ch, v);
    const double half = tree_weight(ch, leaf_mu, v) / 2.0;
    double here = 0.0;
    for (std::size_t a = 0; a < ch.size(); ++a)
      for (std::size_t b = 0; b < ch.size(); ++b) {
        if (ch[a].empty() || ch[b].empty() || p[a] == 0.0 || p[b] == 0.0) continue;
        if (std::abs(tree_payoff(ch, leaf_mu, a) - tree_payoff(ch, leaf_mu, b)) >= half - 1e-12)
          here = std::max(here, std::min(p[a], p[b]));
      }
    q = std::min(q, here);
  }
  return q;
}

}  // namespace oracle
