#include "simbandit/policy.hpp"

#include <algorithm>
#include <stdexcept>

namespace simbandit {

void AuditReport::touch(const std::string& check) { get(check); }

CheckResult& AuditReport::get(const std::string& check) {
  for (auto& c : checks_)
    if (c.name == check) return c;
  checks_.push_back(CheckResult{check, 0, 0, std::nullopt, {}});
  return checks_.back();
}

const CheckResult* AuditReport::find(const std::string& check) const {
  for (const auto& c : checks_)
    if (c.name == check) return &c;
  return nullptr;
}

void AuditReport::record(const std::string& check, std::size_t round, bool ok, const std::string& detail) {
  auto& c = get(check);
  ++c.events;
  if (ok) return;
  if (c.violations++ == 0) {
    c.first_violation_round = round;
    c.first_detail = detail;
  }
}

bool AuditReport::passed() const {
  return std::all_of(checks_.begin(), checks_.end(), [](const CheckResult& c) { return c.passed(); });
}

void AuditReport::merge(const AuditReport& other, std::size_t round_offset) {
  for (const auto& o : other.checks_) {
    auto& c = get(o.name);
    c.events += o.events;
    if (o.violations > 0 && c.violations == 0) {
      if (o.first_violation_round) c.first_violation_round = *o.first_violation_round + round_offset;
      c.first_detail = o.first_detail;
    }
    c.violations += o.violations;
  }
}

void check_payoff(double payoff) {
  if (!(payoff >= 0.0 && payoff <= 1.0)) throw std::invalid_argument("payoff outside [0, 1]");
}

}  // namespace simbandit
