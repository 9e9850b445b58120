#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simbandit/environment.hpp"
#include "simbandit/io.hpp"
#include "simbandit/policy.hpp"

namespace simbandit {

struct RoundRecord {
  std::size_t round = 0;
  PointId context = 0;
  PointId arm = 0;
  std::size_t cell = 0;
  double payoff = 0.0;
  double mu = 0.0;           // expected payoff of the played pair this round
  double inst_regret = 0.0;  // benchmark mean minus mu
  double cum_regret = 0.0;
  std::size_t structure_size = 0;
  std::size_t phase = 0;  // doubling phase, 0 when not wrapped
};

struct RunLog {
  std::string policy;
  std::uint64_t seed = 0;
  // Contexts are rounds (drifting instances): regret is dynamic regret.
  bool dynamic = false;
  std::vector<RoundRecord> rounds;
  std::optional<AuditReport> audit;

  std::size_t horizon() const { return rounds.size(); }
  double total_regret() const { return rounds.empty() ? 0.0 : rounds.back().cum_regret; }
  double average_regret() const { return rounds.empty() ? 0.0 : total_regret() / double(rounds.size()); }
};

struct RunOptions {
  std::size_t horizon = 0;  // 0: the environment's horizon
  std::uint64_t seed = 0;
  bool audit = false;
};

// Benchmark arm per context. Time-invariant instances: the best response.
// Adversarial instances: argmax over arms of mu_t(x, y) summed over all T
// rounds, ties to the lowest arm id.
std::vector<PointId> benchmark_arms(const Environment& env, std::size_t horizon);

// Round loop: reveal x_t, choose, sample the payoff on the noise stream of
// `seed`, feed it back. Throws FeasibilityError if the policy plays an
// infeasible arm and ConfigError if it plays outside the arm space.
RunLog run(const Environment& env, Policy& policy, const RunOptions& options);

// Cumulative regret recomputed from the log's (round, context, arm) against
// the benchmark; independent of the logged regret columns.
std::vector<double> contextual_regret(const RunLog& log, const Environment& env);

// Regret summed per structural cell (ball, node, net cell). Keys are
// (phase, cell) so that doubling phases do not collide.
std::map<std::pair<std::size_t, std::size_t>, double> regret_by_cell(const RunLog& log);

// Fixed schema: round,context_id,arm_id,payoff,inst_regret,cum_regret,structure_size.
void write_csv(const RunLog& log, std::ostream& out);
std::string to_csv(const RunLog& log);

// ---- doubling trick ----

// Fresh policy for one phase; `horizon` is the phase length 2^phase.
using PhaseFactory = std::function<std::unique_ptr<Policy>(std::size_t horizon, std::size_t phase)>;

// Phase i = 1, 2, ... runs a fresh instance for 2^i rounds; the last phase is
// cut off at the overall horizon.
std::vector<std::size_t> doubling_phase_lengths(std::size_t horizon);

class DoublingPolicy : public Policy {
 public:
  explicit DoublingPolicy(PhaseFactory factory, std::string name = "doubling");

  std::string name() const override { return name_; }
  Choice choose(std::size_t round, PointId context) override;
  void receive(double payoff) override;
  std::size_t structure_size() const override { return inner_ ? inner_->structure_size() : 0; }
  nlohmann::json snapshot() const override;
  std::unique_ptr<RoundAuditor> make_auditor(const Environment& env) override;

  std::size_t phase() const { return phase_; }
  std::size_t phase_start() const { return phase_start_; }  // global round of the phase's first round
  Policy* inner() const { return inner_.get(); }
  // Called just before a finished phase's policy is discarded.
  void set_phase_end_hook(std::function<void()> hook) { phase_end_hook_ = std::move(hook); }

 private:
  PhaseFactory factory_;
  std::string name_;
  std::unique_ptr<Policy> inner_;
  std::function<void()> phase_end_hook_;
  std::size_t phase_ = 0, phase_start_ = 1, played_ = 0;
};

// ---- configs ----

struct AlgorithmSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  bool anytime = false;  // wrap in the doubling trick
};

struct ExperimentConfig {
  nlohmann::json environment;  // instance document or generator spec
  AlgorithmSpec algorithm;
  std::size_t horizon = 0;
  std::vector<std::uint64_t> seeds;
  bool audit = false;
  std::filesystem::path output_dir = "out";
  std::string prefix = "run";
  bool snapshots = false;
};

// Validates and resolves "environment_file" relative to base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

// Seed for doubling phase `phase`; phase 1 keeps the run seed.
std::uint64_t phase_seed(std::uint64_t seed, std::size_t phase);

// Builds a policy by name: zooming, uniform, exp3, ucb1, oracle, meta,
// taxonomy. Throws ConfigError when the algorithm does not fit the instance.
std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, const Instance& inst, std::size_t horizon,
                                    std::uint64_t seed);

struct SeedResult {
  RunLog log;
  nlohmann::json snapshot;
};

// One run per seed on `workers` threads; results sorted by seed.
std::vector<SeedResult> run_seeds(const ExperimentConfig& config, const Instance& inst, std::size_t workers);

// Number of workers: SIMBANDIT_WORKERS if set, else hardware concurrency.
std::size_t default_workers();

// ---- audits ----

// Invariant checks on a saved state: {"algorithm": ..., "round": t, "state": snapshot} against the instance.
AuditReport audit_snapshot(const nlohmann::json& snapshot, const Instance& inst);

std::string format_report(const AuditReport& report);

}  // namespace simbandit
