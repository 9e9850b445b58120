#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "simbandit/environment.hpp"
#include "simbandit/policy.hpp"
#include "simbandit/rng.hpp"

namespace simbandit {

using NodeId = std::size_t;

// Rooted tree over arms. Node 0 is the root; leaves, taken in increasing node
// id, are arms 0, 1, ... Every internal node has at least two children.
class Taxonomy {
 public:
  explicit Taxonomy(std::vector<std::vector<NodeId>> children);

  std::size_t size() const { return children_.size(); }
  std::size_t num_leaves() const { return leaves_.size(); }
  std::size_t max_degree() const { return max_degree_; }
  const std::vector<NodeId>& children(NodeId v) const { return children_[v]; }
  std::optional<NodeId> parent(NodeId v) const;
  bool is_leaf(NodeId v) const { return children_[v].empty(); }
  std::size_t depth(NodeId v) const { return depth_[v]; }
  // Arm index of a leaf node, and the leaf node of an arm.
  std::size_t arm_of(NodeId leaf) const { return arm_of_[leaf]; }
  NodeId leaf(std::size_t arm) const { return leaves_[arm]; }
  const std::vector<NodeId>& leaves() const { return leaves_; }

  bool in_subtree(NodeId v, NodeId u) const;
  // Nodes of T(v) in preorder, v first.
  std::vector<NodeId> subtree(NodeId v) const;
  std::vector<NodeId> subtree_leaves(NodeId v) const;
  NodeId lca(NodeId a, NodeId b) const;
  // Probability that the downward uniform random walk from v reaches u.
  double reach_probability(NodeId v, NodeId u) const;
  // Uniform child at every step down to a leaf.
  NodeId random_descend(NodeId v, CounterRng& rng) const;

 private:
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::optional<NodeId>> parent_;
  std::vector<std::size_t> depth_, arm_of_, pre_in_, pre_out_;
  std::vector<NodeId> leaves_;
  std::size_t max_degree_ = 0;
};

// Random tree over num_leaves leaves with internal degrees in [2, max_degree].
Taxonomy random_taxonomy(std::uint64_t seed, std::size_t num_leaves, std::size_t max_degree);

// ---- ground truth (leaf payoffs indexed by arm) ----

// Payoff of a random sample from T(v).
double subtree_payoff(const Taxonomy& tax, const std::vector<double>& mu, NodeId v);
std::vector<double> subtree_payoffs(const Taxonomy& tax, const std::vector<double>& mu);
// Largest payoff spread among the leaves of T(v).
double true_weight(const Taxonomy& tax, const std::vector<double>& mu, NodeId v);
// Largest q such that every subtree holding an optimal leaf has internal
// u, u' with |mu(u) - mu(u')| >= wgt(v) / 2 and both reach probabilities >= q.
// 1 when every such subtree has weight 0.
double true_quality(const Taxonomy& tax, const std::vector<double>& mu);

// One context with D_X = 0; the taxonomy's leaves are the arms.
Environment make_taxonomy_env(const Taxonomy& tax, const std::vector<double>& mu, std::size_t horizon);

// ---- algorithm ----

// sqrt(8 log T / (2 + n)), natural log.
double tax_confidence_radius(std::size_t n, double log_horizon);
// 4 sqrt(2 / q_hat).
double tax_k(double q_hat);

struct TaxNodeStats {
  std::size_t n = 0;
  double payoff_sum = 0.0;
  bool active = false;
  bool deactivated = false;
  std::size_t selected = 0;  // times chosen in S2

  double mean() const { return n == 0 ? 0.0 : payoff_sum / static_cast<double>(n); }
};

struct TaxOptions {
  std::optional<double> log_horizon;  // overrides ln T
};

class TaxonomyPolicy : public Policy {
 public:
  TaxonomyPolicy(const Taxonomy& tax, std::size_t horizon, double q_hat, std::uint64_t seed, TaxOptions options = {});

  std::string name() const override { return "taxonomy"; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  std::size_t structure_size() const override { return active_.size(); }
  nlohmann::json snapshot() const override;
  std::unique_ptr<RoundAuditor> make_auditor(const Environment& env) override;

  // S1: split active internal nodes that break the invariant until none do.
  void rebalance();
  // S2 and S3 after rebalance(); returns the selected node and the sampled leaf.
  std::pair<NodeId, NodeId> step();
  // Throws std::logic_error unless (node, leaf) is the pending selection.
  void feedback(NodeId node, NodeId leaf, double payoff);

  const Taxonomy& taxonomy() const { return *tax_; }
  const std::vector<TaxNodeStats>& stats() const { return stats_; }
  const std::vector<NodeId>& active() const { return active_; }
  double q_hat() const { return q_hat_; }
  double k() const { return k_; }
  double log_horizon() const { return log_horizon_; }
  double rad(NodeId v) const { return tax_confidence_radius(stats_[v].n, log_horizon_); }
  double index(NodeId v) const;
  // max over u1, u2 in T(v) of max(0, |mu_t(u1) - mu_t(u2)| - rad_t(u1) - rad_t(u2)), from
  // subtree aggregates; throws std::domain_error for a leaf.
  double weight_estimate(NodeId v) const;
  bool invariant_holds(NodeId v) const;
  // (round, node) for every deactivation so far.
  const std::vector<std::pair<std::size_t, NodeId>>& deactivations() const { return deactivations_; }
  // Replace node statistics (synthetic states in tests); active flags are kept.
  void set_stats(NodeId v, std::size_t n, double payoff_sum);

 private:
  void refresh_up(NodeId v);
  void activate(NodeId v);

  const Taxonomy* tax_;
  std::size_t horizon_;
  double q_hat_, k_, log_horizon_;
  CounterRng rng_;
  std::vector<TaxNodeStats> stats_;
  // max over T(v) of mean - rad and min of mean + rad
  std::vector<double> hi_, lo_;
  std::vector<NodeId> active_;
  std::vector<std::pair<std::size_t, NodeId>> deactivations_;
  std::size_t round_ = 0;
  struct Pending {
    NodeId node, leaf;
  };
  std::optional<Pending> pending_;
};

}  // namespace simbandit
