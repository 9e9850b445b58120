#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simbandit/environment.hpp"

namespace simbandit {

// What a policy played and which structural cell (ball, node, net cell)
// was responsible for it.
struct Choice {
  PointId arm = 0;
  std::size_t cell = 0;
};

struct CheckResult {
  std::string name;
  std::size_t events = 0;
  std::size_t violations = 0;
  std::optional<std::size_t> first_violation_round;
  std::string first_detail;

  bool passed() const { return violations == 0; }
  double violation_fraction() const {
    return events == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(events);
  }
};

// Per-check event and violation counts, with the first violating round.
class AuditReport {
 public:
  void record(const std::string& check, std::size_t round, bool ok, const std::string& detail = {});
  // Registers a check with zero events so that it shows up in the report.
  void touch(const std::string& check);
  const CheckResult* find(const std::string& check) const;
  CheckResult& get(const std::string& check);
  const std::vector<CheckResult>& checks() const { return checks_; }
  bool passed() const;
  // Adds other's counts; its rounds are shifted by round_offset.
  void merge(const AuditReport& other, std::size_t round_offset = 0);

 private:
  std::vector<CheckResult> checks_;
};

// Hooks the harness calls around each round. after_choose sees the policy
// before feedback, after_feedback after the update; finish runs once.
class RoundAuditor {
 public:
  virtual ~RoundAuditor() = default;
  virtual void after_choose(std::size_t round, PointId context, const Choice& choice) = 0;
  virtual void after_feedback(std::size_t round, PointId context, const Choice& choice, double payoff) = 0;
  virtual void finish(std::size_t /*rounds*/) {}
  AuditReport& report() { return report_; }

 protected:
  AuditReport report_;
};

// observe context -> choose arm -> receive payoff.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual Choice choose(std::size_t round, PointId context) = 0;
  virtual void receive(double payoff) = 0;
  // Active balls, nodes or cells; 0 when the notion does not apply.
  virtual std::size_t structure_size() const { return 0; }
  virtual nlohmann::json snapshot() const { return nlohmann::json::object(); }
  // Ground-truth auditor for this policy, or nullptr if it has no invariants to check.
  virtual std::unique_ptr<RoundAuditor> make_auditor(const Environment& /*env*/) { return nullptr; }
};

// Validates a payoff passed to receive(); throws std::invalid_argument outside [0, 1].
void check_payoff(double payoff);

}  // namespace simbandit
