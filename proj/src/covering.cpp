#include "simbandit/covering.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>

namespace simbandit {

namespace {

std::vector<PointId> distinct_sorted(std::span<const PointId> points) {
  std::vector<PointId> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// Small dense bitset over vertex positions.
class Bits {
 public:
  Bits() = default;
  explicit Bits(std::size_t n) : words_((n + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i >> 6] |= (1ULL << (i & 63)); }
  void reset(std::size_t i) { words_[i >> 6] &= ~(1ULL << (i & 63)); }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }
  bool any() const {
    for (auto w : words_)
      if (w) return true;
    return false;
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }
  Bits operator&(const Bits& o) const {
    Bits out = *this;
    for (std::size_t k = 0; k < words_.size(); ++k) out.words_[k] &= o.words_[k];
    return out;
  }
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      std::uint64_t w = words_[k];
      while (w) {
        const int b = __builtin_ctzll(w);
        f(k * 64 + static_cast<std::size_t>(b));
        w &= w - 1;
      }
    }
  }

 private:
  std::vector<std::uint64_t> words_;
};

// Clique of the threshold graph grown from `seed` among still-uncovered points.
std::vector<std::size_t> grow_clique(const MetricSpace& space, const std::vector<PointId>& pts,
                                     const std::vector<char>& covered, std::size_t seed, double r,
                                     std::vector<std::pair<double, std::size_t>>& scratch) {
  scratch.clear();
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (covered[j] || j == seed) continue;
    const double d = space.distance(pts[seed], pts[j]);
    if (within(d, r)) scratch.emplace_back(d, j);
  }
  std::sort(scratch.begin(), scratch.end());
  std::vector<std::size_t> clique{seed};
  for (const auto& [d, j] : scratch) {
    bool ok = true;
    for (std::size_t m : clique) {
      if (m == seed) continue;
      if (!within(space.distance(pts[j], pts[m]), r)) {
        ok = false;
        break;
      }
    }
    if (ok) clique.push_back(j);
  }
  return clique;
}

struct ConflictGraph {
  std::size_t n = 0;
  std::vector<Bits> adj;  // edge iff distance > r
};

ConflictGraph conflict_graph(const MetricSpace& space, const std::vector<PointId>& pts, double r) {
  ConflictGraph g;
  g.n = pts.size();
  g.adj.assign(g.n, Bits(g.n));
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = i + 1; j < g.n; ++j)
      if (!within(space.distance(pts[i], pts[j]), r)) {
        g.adj[i].set(j);
        g.adj[j].set(i);
      }
  return g;
}

// Maximum clique of the conflict graph (= maximum r-packing), MCQ-style search
// with a greedy coloring bound.
class MaxClique {
 public:
  explicit MaxClique(const ConflictGraph& g) : g_(g) {}

  std::vector<std::size_t> solve() {
    Bits all(g_.n);
    for (std::size_t i = 0; i < g_.n; ++i) all.set(i);
    std::vector<std::size_t> current;
    expand(all, current);
    return best_;
  }

 private:
  void expand(const Bits& candidates, std::vector<std::size_t>& current) {
    if (++nodes_ > kBudget) throw std::runtime_error("exact packing: search budget exhausted");
    std::vector<std::size_t> order;
    std::vector<std::size_t> bound;
    color_sort(candidates, order, bound);
    Bits remaining = candidates;
    for (std::size_t k = order.size(); k-- > 0;) {
      if (current.size() + bound[k] <= best_.size()) return;
      const std::size_t v = order[k];
      current.push_back(v);
      Bits next = remaining & g_.adj[v];
      if (!next.any()) {
        if (current.size() > best_.size()) best_ = current;
      } else {
        expand(next, current);
      }
      current.pop_back();
      remaining.reset(v);
    }
  }

  void color_sort(const Bits& candidates, std::vector<std::size_t>& order, std::vector<std::size_t>& bound) const {
    std::vector<std::vector<std::size_t>> classes;
    candidates.for_each([&](std::size_t v) {
      for (auto& cls : classes) {
        bool independent = true;
        for (std::size_t u : cls)
          if (g_.adj[v].test(u)) {
            independent = false;
            break;
          }
        if (independent) {
          cls.push_back(v);
          return;
        }
      }
      classes.push_back({v});
    });
    for (std::size_t c = 0; c < classes.size(); ++c)
      for (std::size_t v : classes[c]) {
        order.push_back(v);
        bound.push_back(c + 1);
      }
  }

  static constexpr std::uint64_t kBudget = 50'000'000;
  const ConflictGraph& g_;
  std::vector<std::size_t> best_;
  std::uint64_t nodes_ = 0;
};

// Exact coloring of the conflict graph by DSATUR branch and bound.
class Dsatur {
 public:
  Dsatur(const ConflictGraph& g, std::size_t lower_bound, std::vector<int> initial, std::size_t initial_colors)
      : g_(g), lower_(lower_bound), best_colors_(initial_colors), best_(std::move(initial)) {}

  std::vector<int> solve() {
    if (best_colors_ <= lower_) return best_;
    color_.assign(g_.n, -1);
    seen_.assign(g_.n * (best_colors_ + 1), 0);
    saturation_.assign(g_.n, 0);
    degree_.assign(g_.n, 0);
    for (std::size_t v = 0; v < g_.n; ++v) degree_[v] = g_.adj[v].count();
    search(0, 0);
    return best_;
  }

  std::size_t colors() const { return best_colors_; }

 private:
  void search(std::size_t colored, std::size_t used) {
    if (done_) return;
    if (++nodes_ > kBudget) throw std::runtime_error("exact cover: search budget exhausted");
    if (colored == g_.n) {
      if (used < best_colors_) {
        best_colors_ = used;
        best_ = color_;
        if (best_colors_ <= lower_) done_ = true;
      }
      return;
    }
    if (used >= best_colors_) return;
    std::size_t v = g_.n;
    for (std::size_t u = 0; u < g_.n; ++u) {
      if (color_[u] >= 0) continue;
      if (v == g_.n || saturation_[u] > saturation_[v] ||
          (saturation_[u] == saturation_[v] && degree_[u] > degree_[v]))
        v = u;
    }
    const std::size_t width = seen_.size() / g_.n;
    for (std::size_t c = 0; c < used && !done_; ++c) {
      if (seen_[v * width + c]) continue;
      assign(v, c, width, +1);
      search(colored + 1, used);
      assign(v, c, width, -1);
    }
    if (!done_ && used + 1 < best_colors_) {
      assign(v, used, width, +1);
      search(colored + 1, used + 1);
      assign(v, used, width, -1);
    }
  }

  void assign(std::size_t v, std::size_t c, std::size_t width, int delta) {
    color_[v] = delta > 0 ? static_cast<int>(c) : -1;
    g_.adj[v].for_each([&](std::size_t u) {
      auto& cnt = seen_[u * width + c];
      if (delta > 0) {
        if (cnt++ == 0) ++saturation_[u];
      } else {
        if (--cnt == 0) --saturation_[u];
      }
    });
  }

  static constexpr std::uint64_t kBudget = 200'000'000;
  const ConflictGraph& g_;
  std::size_t lower_;
  std::size_t best_colors_;
  std::vector<int> best_;
  std::vector<int> color_;
  std::vector<std::uint32_t> seen_;
  std::vector<std::size_t> saturation_;
  std::vector<std::size_t> degree_;
  std::uint64_t nodes_ = 0;
  bool done_ = false;
};

}  // namespace

std::vector<PointId> all_points(const MetricSpace& space) {
  std::vector<PointId> pts(space.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = i;
  return pts;
}

double diameter(const MetricSpace& space, std::span<const PointId> points) {
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) d = std::max(d, space.distance(points[i], points[j]));
  return d;
}

Cover greedy_cover(const MetricSpace& space, std::span<const PointId> points, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("covering: r must be positive");
  const auto pts = distinct_sorted(points);
  Cover cover;
  const std::size_t n = pts.size();
  if (n == 0) return cover;
  std::vector<char> covered(n, 0);
  std::vector<std::pair<double, std::size_t>> scratch;

  // Lazy greedy: a seed's clique size among uncovered points is re-evaluated
  // only when it reaches the top of the queue.
  using Entry = std::pair<std::size_t, std::size_t>;  // (bound, n - 1 - seed) so lower seeds win ties
  std::priority_queue<Entry> queue;
  for (std::size_t i = 0; i < n; ++i) queue.emplace(std::numeric_limits<std::size_t>::max(), n - 1 - i);
  std::size_t remaining = n;
  while (remaining > 0) {
    auto [bound, key] = queue.top();
    queue.pop();
    const std::size_t seed = n - 1 - key;
    if (covered[seed]) continue;
    auto clique = grow_clique(space, pts, covered, seed, r, scratch);
    if (!queue.empty() && clique.size() < queue.top().first) {
      queue.emplace(clique.size(), key);
      continue;
    }
    std::vector<PointId> set;
    set.reserve(clique.size());
    for (std::size_t j : clique) {
      covered[j] = 1;
      set.push_back(pts[j]);
    }
    remaining -= clique.size();
    std::sort(set.begin(), set.end());
    cover.sets.push_back(std::move(set));
  }
  return cover;
}

Cover exact_cover(const MetricSpace& space, std::span<const PointId> points, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("covering: r must be positive");
  const auto pts = distinct_sorted(points);
  if (pts.size() > kExactLimit) throw std::length_error("exact cover: too many points");
  if (pts.empty()) return {};
  Cover greedy = greedy_cover(space, pts, r);
  const auto graph = conflict_graph(space, pts, r);
  const std::size_t lower = MaxClique(graph).solve().size();
  if (greedy.size() <= lower) return greedy;

  std::vector<int> initial(pts.size(), -1);
  for (std::size_t s = 0; s < greedy.sets.size(); ++s)
    for (PointId p : greedy.sets[s]) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(pts.begin(), pts.end(), p) - pts.begin());
      initial[pos] = static_cast<int>(s);
    }
  Dsatur solver(graph, lower, initial, greedy.size());
  const auto colors = solver.solve();
  Cover cover;
  cover.sets.resize(solver.colors());
  for (std::size_t i = 0; i < pts.size(); ++i) cover.sets[static_cast<std::size_t>(colors[i])].push_back(pts[i]);
  return cover;
}

std::size_t covering_number(const MetricSpace& space, std::span<const PointId> points, double r, CoverMode mode) {
  if (points.empty()) return 0;
  return mode == CoverMode::exact ? exact_cover(space, points, r).size() : greedy_cover(space, points, r).size();
}

std::vector<PointId> maximum_packing(const MetricSpace& space, std::span<const PointId> points, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("packing: r must be positive");
  const auto pts = distinct_sorted(points);
  if (pts.size() > 4 * kExactLimit) throw std::length_error("exact packing: too many points");
  if (pts.empty()) return {};
  const auto graph = conflict_graph(space, pts, r);
  auto clique = MaxClique(graph).solve();
  std::vector<PointId> out;
  for (std::size_t v : clique) out.push_back(pts[v]);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t packing_number(const MetricSpace& space, std::span<const PointId> points, double r, CoverMode mode) {
  if (points.empty()) return 0;
  if (mode == CoverMode::exact) return maximum_packing(space, points, r).size();
  return build_r_net(space, points, r).size();
}

std::vector<PointId> build_r_net(const MetricSpace& space, std::span<const PointId> points, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("r-net: r must be positive");
  std::vector<PointId> net;
  for (PointId p : distinct_sorted(points)) {
    bool far = true;
    for (PointId q : net)
      if (within(space.distance(p, q), r)) {
        far = false;
        break;
      }
    if (far) net.push_back(p);
  }
  return net;
}

bool is_r_net(const MetricSpace& space, std::span<const PointId> points, std::span<const PointId> net, double r) {
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = i + 1; j < net.size(); ++j)
      if (within(space.distance(net[i], net[j]), r)) return false;
  for (PointId p : points) {
    bool near = false;
    for (PointId q : net)
      if (within(space.distance(p, q), r)) {
        near = true;
        break;
      }
    if (!near) return false;
  }
  return true;
}

std::size_t doubling_constant_estimate(const MetricSpace& space, std::span<const PointId> points) {
  const auto pts = distinct_sorted(points);
  if (pts.empty()) throw std::invalid_argument("doubling constant: empty point set");
  double min_positive = 1.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = space.distance(pts[i], pts[j]);
      if (d > 0.0) min_positive = std::min(min_positive, d);
    }
  std::size_t best = 1;
  std::vector<PointId> ball;
  for (PointId center : pts) {
    for (double radius = 1.0; radius >= min_positive / 2.0; radius /= 2.0) {
      ball.clear();
      for (PointId p : pts)
        if (within(space.distance(center, p), radius)) ball.push_back(p);
      if (ball.size() <= 1) break;
      const double diam = diameter(space, ball);
      if (diam <= 0.0) continue;
      best = std::max(best, greedy_cover(space, ball, diam / 2.0).size());
    }
  }
  return best;
}

}  // namespace simbandit
