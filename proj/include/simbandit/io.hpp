#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "simbandit/environment.hpp"
#include "simbandit/metric_space.hpp"
#include "simbandit/taxonomy.hpp"

namespace simbandit {

using nlohmann::json;

// Malformed or inconsistent config, instance or snapshot documents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Space descriptors. Writing always emits the canonical descriptor; reading
// also accepts the shorthands {"kind": "line", "n"} and {"kind": "grid", "nx", "ny"}.
json space_to_json(const MetricSpace& space);
std::shared_ptr<const MetricSpace> space_from_json(const json& j);

json arrivals_to_json(const ArrivalSchedule& a);
// {"kind": "uniform"} without "contexts" means every context.
ArrivalSchedule arrivals_from_json(const json& j, std::size_t num_contexts);

json taxonomy_to_json(const Taxonomy& tax);
Taxonomy taxonomy_from_json(const json& j);

// A problem instance; taxonomy is set when the arms are the leaves of a tree.
struct Instance {
  std::shared_ptr<const Environment> env;
  std::shared_ptr<const Taxonomy> taxonomy;
};

// Explicit, lossless instance document.
json instance_to_json(const Instance& inst);

// Either an explicit document or {"generator": name, ...}. Generator specs
// take their horizon from `horizon` when given, else from the spec's
// "horizon" field. Explicit documents keep their own horizon, which must be
// at least `horizon`.
Instance instance_from_json(const json& j, std::optional<std::size_t> horizon = std::nullopt);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace simbandit
