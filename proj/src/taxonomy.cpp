#include "simbandit/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace simbandit {

Taxonomy::Taxonomy(std::vector<std::vector<NodeId>> children) : children_(std::move(children)) {
  const std::size_t n = children_.size();
  if (n == 0) throw std::invalid_argument("taxonomy: empty tree");
  parent_.assign(n, std::nullopt);
  for (NodeId v = 0; v < n; ++v) {
    if (children_[v].size() == 1) throw std::invalid_argument("taxonomy: internal node with a single child");
    max_degree_ = std::max(max_degree_, children_[v].size());
    for (NodeId c : children_[v]) {
      if (c >= n || c == 0) throw std::invalid_argument("taxonomy: bad child id");
      if (parent_[c]) throw std::invalid_argument("taxonomy: node with two parents");
      parent_[c] = v;
    }
  }
  depth_.assign(n, 0);
  pre_in_.assign(n, 0);
  pre_out_.assign(n, 0);
  arm_of_.assign(n, 0);
  // iterative preorder from the root; every node must be reached exactly once
  std::size_t clock = 0, seen = 0;
  std::vector<std::pair<NodeId, std::size_t>> stack{{0, 0}};
  pre_in_[0] = clock++;
  seen = 1;
  while (!stack.empty()) {
    auto& [v, i] = stack.back();
    if (i < children_[v].size()) {
      const NodeId c = children_[v][i++];
      depth_[c] = depth_[v] + 1;
      pre_in_[c] = clock++;
      ++seen;
      stack.emplace_back(c, 0);
    } else {
      pre_out_[v] = clock;
      stack.pop_back();
    }
  }
  if (seen != n) throw std::invalid_argument("taxonomy: nodes unreachable from the root");
  for (NodeId v = 0; v < n; ++v)
    if (children_[v].empty()) {
      arm_of_[v] = leaves_.size();
      leaves_.push_back(v);
    }
}

std::optional<NodeId> Taxonomy::parent(NodeId v) const { return parent_[v]; }

bool Taxonomy::in_subtree(NodeId v, NodeId u) const { return pre_in_[v] <= pre_in_[u] && pre_in_[u] < pre_out_[v]; }

std::vector<NodeId> Taxonomy::subtree(NodeId v) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{v};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    out.push_back(u);
    for (auto it = children_[u].rbegin(); it != children_[u].rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<NodeId> Taxonomy::subtree_leaves(NodeId v) const {
  std::vector<NodeId> out;
  for (NodeId u : subtree(v))
    if (is_leaf(u)) out.push_back(u);
  return out;
}

NodeId Taxonomy::lca(NodeId a, NodeId b) const {
  while (depth_[a] > depth_[b]) a = *parent_[a];
  while (depth_[b] > depth_[a]) b = *parent_[b];
  while (a != b) {
    a = *parent_[a];
    b = *parent_[b];
  }
  return a;
}

double Taxonomy::reach_probability(NodeId v, NodeId u) const {
  if (!in_subtree(v, u)) return 0.0;
  double p = 1.0;
  while (u != v) {
    u = *parent_[u];
    p /= static_cast<double>(children_[u].size());
  }
  return p;
}

NodeId Taxonomy::random_descend(NodeId v, CounterRng& rng) const {
  while (!children_[v].empty()) v = children_[v][rng.below(children_[v].size())];
  return v;
}

Taxonomy random_taxonomy(std::uint64_t seed, std::size_t num_leaves, std::size_t max_degree) {
  if (num_leaves == 0) throw std::invalid_argument("random taxonomy: need a leaf");
  if (max_degree < 2) throw std::invalid_argument("random taxonomy: max degree must be at least 2");
  CounterRng rng(seed, Stream::instance);
  std::vector<std::vector<NodeId>> children;
  std::function<NodeId(std::size_t)> build = [&](std::size_t count) -> NodeId {
    const NodeId id = children.size();
    children.emplace_back();
    if (count == 1) return id;
    const std::size_t deg = 2 + rng.below(std::min(max_degree, count) - 1);
    // random composition of count into deg positive parts
    std::vector<std::size_t> cuts;
    while (cuts.size() < deg - 1) {
      const std::size_t c = 1 + rng.below(count - 1);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(count);
    std::size_t prev = 0;
    for (std::size_t c : cuts) {
      const NodeId child = build(c - prev);
      children[id].push_back(child);
      prev = c;
    }
    return id;
  };
  build(num_leaves);
  return Taxonomy(std::move(children));
}

namespace {

void check_payoffs(const Taxonomy& tax, const std::vector<double>& mu) {
  if (mu.size() != tax.num_leaves()) throw std::invalid_argument("taxonomy: need one payoff per leaf");
}

// Children before parents.
std::vector<NodeId> postorder(const Taxonomy& tax) {
  auto order = tax.subtree(0);
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

std::vector<double> subtree_payoffs(const Taxonomy& tax, const std::vector<double>& mu) {
  check_payoffs(tax, mu);
  std::vector<double> out(tax.size(), 0.0);
  for (NodeId v : postorder(tax)) {
    if (tax.is_leaf(v)) {
      out[v] = mu[tax.arm_of(v)];
      continue;
    }
    double s = 0.0;
    for (NodeId c : tax.children(v)) s += out[c];
    out[v] = s / static_cast<double>(tax.children(v).size());
  }
  return out;
}

double subtree_payoff(const Taxonomy& tax, const std::vector<double>& mu, NodeId v) {
  return subtree_payoffs(tax, mu)[v];
}

double true_weight(const Taxonomy& tax, const std::vector<double>& mu, NodeId v) {
  check_payoffs(tax, mu);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (NodeId leaf : tax.subtree_leaves(v)) {
    lo = std::min(lo, mu[tax.arm_of(leaf)]);
    hi = std::max(hi, mu[tax.arm_of(leaf)]);
  }
  return hi - lo;
}

double true_quality(const Taxonomy& tax, const std::vector<double>& mu) {
  check_payoffs(tax, mu);
  const auto payoff = subtree_payoffs(tax, mu);
  const double best = *std::max_element(mu.begin(), mu.end());
  double quality = 1.0;
  for (NodeId v = 0; v < tax.size(); ++v) {
    if (tax.is_leaf(v)) continue;
    const auto leaves = tax.subtree_leaves(v);
    const bool optimal = std::any_of(leaves.begin(), leaves.end(),
                                     [&](NodeId l) { return mu[tax.arm_of(l)] >= best - 1e-12; });
    if (!optimal) continue;
    const double half = true_weight(tax, mu, v) / 2.0;
    std::vector<NodeId> internal;
    for (NodeId u : tax.subtree(v))
      if (!tax.is_leaf(u)) internal.push_back(u);
    double q = 0.0;
    for (NodeId a : internal)
      for (NodeId b : internal)
        if (std::abs(payoff[a] - payoff[b]) >= half - 1e-12)
          q = std::max(q, std::min(tax.reach_probability(v, a), tax.reach_probability(v, b)));
    quality = std::min(quality, q);
  }
  return quality;
}

Environment make_taxonomy_env(const Taxonomy& tax, const std::vector<double>& mu, std::size_t horizon) {
  check_payoffs(tax, mu);
  for (double m : mu)
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("taxonomy: leaf payoffs must lie in [0, 1]");
  Environment env(std::make_shared<const MetricSpace>(MetricSpace::zero(1)),
                  std::make_shared<const MetricSpace>(MetricSpace::discrete(tax.num_leaves())), mu, {},
                  round_robin_arrivals({0}), horizon);
  env.label = "taxonomy";
  return env;
}

double tax_confidence_radius(std::size_t n, double log_horizon) {
  return std::sqrt(8.0 * log_horizon / (2.0 + static_cast<double>(n)));
}

double tax_k(double q_hat) {
  if (!(q_hat > 0.0 && q_hat <= 1.0)) throw std::invalid_argument("taxonomy: q_hat must lie in (0, 1]");
  return 4.0 * std::sqrt(2.0 / q_hat);
}

TaxonomyPolicy::TaxonomyPolicy(const Taxonomy& tax, std::size_t horizon, double q_hat, std::uint64_t seed,
                               TaxOptions options)
    : tax_(&tax),
      horizon_(horizon),
      q_hat_(q_hat),
      k_(tax_k(q_hat)),
      log_horizon_(options.log_horizon.value_or(std::log(static_cast<double>(std::max<std::size_t>(horizon, 2))))),
      rng_(seed, Stream::algorithm),
      stats_(tax.size()),
      hi_(tax.size()),
      lo_(tax.size()) {
  if (horizon == 0) throw std::invalid_argument("taxonomy: horizon must be positive");
  for (NodeId v : postorder(tax)) {
    hi_[v] = -rad(v);
    lo_[v] = rad(v);
  }
  activate(0);
}

void TaxonomyPolicy::activate(NodeId v) {
  stats_[v].active = true;
  active_.push_back(v);
}

void TaxonomyPolicy::refresh_up(NodeId v) {
  std::optional<NodeId> u = v;
  while (u) {
    const auto& s = stats_[*u];
    double hi = s.mean() - rad(*u), lo = s.mean() + rad(*u);
    for (NodeId c : tax_->children(*u)) {
      hi = std::max(hi, hi_[c]);
      lo = std::min(lo, lo_[c]);
    }
    hi_[*u] = hi;
    lo_[*u] = lo;
    u = tax_->parent(*u);
  }
}

void TaxonomyPolicy::set_stats(NodeId v, std::size_t n, double payoff_sum) {
  stats_[v].n = n;
  stats_[v].payoff_sum = payoff_sum;
  // aggregates of every ancestor of every node may shift; recompute them all
  for (NodeId u : postorder(*tax_)) {
    double hi = stats_[u].mean() - rad(u), lo = stats_[u].mean() + rad(u);
    for (NodeId c : tax_->children(u)) {
      hi = std::max(hi, hi_[c]);
      lo = std::min(lo, lo_[c]);
    }
    hi_[u] = hi;
    lo_[u] = lo;
  }
}

double TaxonomyPolicy::index(NodeId v) const { return stats_[v].mean() + (1.0 + 2.0 * k_) * rad(v); }

double TaxonomyPolicy::weight_estimate(NodeId v) const {
  if (tax_->is_leaf(v)) throw std::domain_error("weight estimate of a leaf");
  return std::max(0.0, hi_[v] - lo_[v]);
}

bool TaxonomyPolicy::invariant_holds(NodeId v) const {
  return tax_->is_leaf(v) || weight_estimate(v) < k_ * rad(v);
}

void TaxonomyPolicy::rebalance() {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const NodeId v = active_[i];
      if (invariant_holds(v)) continue;
      stats_[v].active = false;
      stats_[v].deactivated = true;
      deactivations_.emplace_back(round_, v);
      active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(i));
      for (NodeId c : tax_->children(v)) activate(c);
      changed = true;
      break;
    }
  }
}

std::pair<NodeId, NodeId> TaxonomyPolicy::step() {
  if (pending_) throw std::logic_error("taxonomy: step called twice without feedback");
  NodeId best = active_.front();
  double best_index = -std::numeric_limits<double>::infinity();
  for (NodeId v : active_) {
    const double idx = index(v);
    if (idx > best_index || (idx == best_index && v < best)) {
      best = v;
      best_index = idx;
    }
  }
  ++stats_[best].selected;
  const NodeId leaf = tax_->random_descend(best, rng_);
  pending_ = Pending{best, leaf};
  return {best, leaf};
}

Choice TaxonomyPolicy::choose(std::size_t round, PointId /*context*/) {
  round_ = round;
  rebalance();
  const auto [node, leaf] = step();
  return Choice{tax_->arm_of(leaf), node};
}

void TaxonomyPolicy::feedback(NodeId node, NodeId leaf, double payoff) {
  check_payoff(payoff);
  if (!pending_ || pending_->node != node || pending_->leaf != leaf)
    throw std::logic_error("taxonomy: feedback does not match the pending selection");
  pending_.reset();
  NodeId u = leaf;
  while (true) {
    ++stats_[u].n;
    stats_[u].payoff_sum += payoff;
    if (u == node) break;
    u = *tax_->parent(u);
  }
  refresh_up(leaf);
}

void TaxonomyPolicy::receive(double payoff) {
  if (!pending_) throw std::logic_error("taxonomy: feedback without a pending choice");
  feedback(pending_->node, pending_->leaf, payoff);
}

nlohmann::json TaxonomyPolicy::snapshot() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId v = 0; v < stats_.size(); ++v) {
    const auto& s = stats_[v];
    nodes.push_back({{"node", v},
                     {"n", s.n},
                     {"payoff_sum", s.payoff_sum},
                     {"active", s.active},
                     {"deactivated", s.deactivated},
                     {"selected", s.selected}});
  }
  return {{"algorithm", "taxonomy"},
          {"horizon", horizon_},
          {"q_hat", q_hat_},
          {"k", k_},
          {"log_horizon", log_horizon_},
          {"nodes", std::move(nodes)}};
}

namespace {

class TaxonomyAuditor : public RoundAuditor {
 public:
  TaxonomyAuditor(const TaxonomyPolicy& policy, const Environment& env) : policy_(policy) {
    for (const char* c :
         {"invariant", "active_cover", "path", "p1", "p2", "estimate", "lemma3a", "lemma3b"})
      report_.touch(c);
    const auto& tax = policy.taxonomy();
    std::vector<double> mu(tax.num_leaves());
    for (std::size_t a = 0; a < mu.size(); ++a) mu[a] = env.mu(0, a);
    payoff_ = subtree_payoffs(tax, mu);
    best_ = *std::max_element(mu.begin(), mu.end());
    weight_.resize(tax.size());
    subtrees_.resize(tax.size());
    for (NodeId v = 0; v < tax.size(); ++v) {
      weight_[v] = true_weight(tax, mu, v);
      subtrees_[v] = tax.subtree(v);
    }
  }

  void after_choose(std::size_t round, PointId, const Choice& choice) override {
    const auto& tax = policy_.taxonomy();
    const auto& stats = policy_.stats();
    for (NodeId v : policy_.active()) {
      if (tax.is_leaf(v)) continue;
      report_.record("invariant", round, policy_.invariant_holds(v), "node " + std::to_string(v));
      report_.record("estimate", round, policy_.weight_estimate(v) <= weight_[v] + 1e-12,
                     "node " + std::to_string(v));
    }
    bool cover = true;
    for (NodeId leaf : tax.leaves()) {
      std::size_t hits = 0;
      for (std::optional<NodeId> u = leaf; u; u = tax.parent(*u)) hits += stats[*u].active;
      cover = cover && hits == 1;
    }
    report_.record("active_cover", round, cover, "active nodes do not partition the leaves");
    for (NodeId v = 0; v < stats.size(); ++v) {
      if (stats[v].n == 0) continue;
      report_.record("p1", round, std::abs(stats[v].mean() - payoff_[v]) <= policy_.rad(v),
                     "node " + std::to_string(v));
    }
    const auto& deact = policy_.deactivations();
    for (; seen_deact_ < deact.size(); ++seen_deact_) {
      const NodeId v = deact[seen_deact_].second;
      report_.record("lemma3b", round, best_ - payoff_[v] <= 4.0 * weight_[v] + 1e-12, "node " + std::to_string(v));
    }
    n_before_.resize(stats.size());
    for (NodeId v = 0; v < stats.size(); ++v) n_before_[v] = stats[v].n;
    node_ = choice.cell;
  }

  void after_feedback(std::size_t round, PointId, const Choice& choice, double) override {
    const auto& tax = policy_.taxonomy();
    const auto& stats = policy_.stats();
    const NodeId leaf = tax.leaf(choice.arm);
    std::vector<char> on_path(stats.size(), 0);
    bool ok = tax.in_subtree(node_, leaf);
    if (ok)
      for (NodeId u = leaf;; u = *tax.parent(u)) {
        on_path[u] = 1;
        if (u == node_) break;
      }
    for (NodeId v = 0; v < stats.size() && ok; ++v) ok = stats[v].n == n_before_[v] + on_path[v];
    report_.record("path", round, ok, "updated nodes differ from the selected-to-leaf path");
    const double threshold = 8.0 * policy_.log_horizon();
    for (NodeId v = 0; v < stats.size(); ++v) {
      if (!on_path[v]) continue;
      const double nv = static_cast<double>(stats[v].n);
      for (NodeId u : subtrees_[v]) {
        const double expect = nv * tax.reach_probability(v, u);
        if (expect < threshold) continue;
        report_.record("p2", round, static_cast<double>(stats[u].n) >= 0.5 * expect,
                       "nodes " + std::to_string(v) + ", " + std::to_string(u));
      }
    }
  }

  void finish(std::size_t rounds) override {
    const auto& stats = policy_.stats();
    const double cap = 1e3 * policy_.k() * policy_.k() * policy_.log_horizon();
    for (NodeId v = 0; v < stats.size(); ++v) {
      if (stats[v].selected == 0) continue;
      const double gap = best_ - payoff_[v];
      report_.record("lemma3a", rounds, static_cast<double>(stats[v].selected) * gap * gap <= cap,
                     "node " + std::to_string(v));
    }
  }

 private:
  const TaxonomyPolicy& policy_;
  std::vector<double> payoff_, weight_;
  std::vector<std::vector<NodeId>> subtrees_;
  double best_ = 0.0;
  std::vector<std::size_t> n_before_;
  std::size_t seen_deact_ = 0;
  NodeId node_ = 0;
};

}  // namespace

std::unique_ptr<RoundAuditor> TaxonomyPolicy::make_auditor(const Environment& env) {
  return std::make_unique<TaxonomyAuditor>(*this, env);
}

}  // namespace simbandit
