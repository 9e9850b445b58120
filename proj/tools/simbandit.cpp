#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "simbandit/harness.hpp"
#include "simbandit/io.hpp"
#include "simbandit/zooming_number.hpp"

using namespace simbandit;
namespace fs = std::filesystem;

namespace {

fs::path out_dir(const ExperimentConfig& c, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SIMBANDIT_OUT_DIR"); env && *env) return env;
  return c.output_dir;
}

std::size_t workers(std::size_t flag) { return flag > 0 ? flag : default_workers(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

// Writes per-seed CSVs (and snapshots); returns false if an audit failed.
bool write_runs(const ExperimentConfig& c, const Instance& inst, const std::vector<SeedResult>& results,
                const fs::path& dir, const std::string& prefix) {
  bool ok = true;
  auto summary = open_out(dir / (prefix + "_summary.csv"));
  summary << "seed,policy,horizon,total_regret,average_regret,regret_kind,audit\n";
  for (const auto& r : results) {
    const auto stem = prefix + "_seed" + std::to_string(r.log.seed);
    auto csv = open_out(dir / (stem + ".csv"));
    write_csv(r.log, csv);
    if (c.snapshots) {
      auto snap = r.snapshot;
      snap["instance"] = instance_to_json(inst);
      write_json_file(dir / (stem + "_snapshot.json"), snap);
    }
    std::string audit = "off";
    if (r.log.audit) {
      audit = r.log.audit->passed() ? "pass" : "fail";
      ok = ok && r.log.audit->passed();
      std::cout << "audit seed " << r.log.seed << ":\n" << format_report(*r.log.audit);
    }
    std::ostringstream line;
    line.precision(17);
    line << r.log.seed << ',' << r.log.policy << ',' << r.log.horizon() << ',' << r.log.total_regret() << ','
         << r.log.average_regret() << ',' << (r.log.dynamic ? "dynamic" : "contextual") << ',' << audit;
    summary << line.str() << '\n';
    std::cout << "seed " << r.log.seed << ": " << (r.log.dynamic ? "dynamic" : "contextual")
              << " regret " << r.log.total_regret() << " (average " << r.log.average_regret() << ")\n";
  }
  return ok;
}

// "T=1e3,1e4" -> ("T", {"1e3", "1e4"})
std::pair<std::string, std::vector<std::string>> parse_param(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects NAME=v1,v2,...");
  std::vector<std::string> values;
  std::stringstream rest(s.substr(eq + 1));
  for (std::string v; std::getline(rest, v, ',');)
    if (!v.empty()) values.push_back(v);
  if (values.empty()) throw ConfigError("--param " + s.substr(0, eq) + " has no values");
  return {s.substr(0, eq), values};
}

int cmd_run(const std::string& config_path, const std::string& out_flag, std::size_t worker_flag, bool audit) {
  auto c = parse_config(read_json_file(config_path), fs::path(config_path).parent_path());
  c.audit = c.audit || audit;
  const auto inst = instance_from_json(c.environment, c.horizon);
  const auto results = run_seeds(c, inst, workers(worker_flag));
  return write_runs(c, inst, results, out_dir(c, out_flag), c.prefix) ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& params, const std::string& out_flag,
              std::size_t worker_flag, bool curves) {
  const auto base = parse_config(read_json_file(config_path), fs::path(config_path).parent_path());
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& p : params) axes.push_back(parse_param(p));
  if (axes.empty()) throw ConfigError("sweep needs at least one --param");
  const auto dir = out_dir(base, out_flag);
  auto table = open_out(dir / (base.prefix + "_sweep.csv"));
  for (const auto& [name, _] : axes) table << name << ',';
  table << "seed,total_regret,average_regret\n";

  std::vector<std::size_t> idx(axes.size(), 0);
  bool ok = true;
  for (;;) {
    auto c = base;
    std::string tag;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& name = axes[a].first;
      const auto& value = axes[a].second[idx[a]];
      tag += "_" + name + value;
      if (name == "T") {
        const double t = std::stod(value);
        if (!(t >= 1.0)) throw ConfigError("T must be at least 1");
        c.horizon = static_cast<std::size_t>(t);
      } else {
        c.algorithm.params[name] = nlohmann::json::parse(value, nullptr, false).is_discarded()
                                       ? nlohmann::json(value)
                                       : nlohmann::json::parse(value);
      }
    }
    const auto inst = instance_from_json(c.environment, c.horizon);
    const auto results = run_seeds(c, inst, workers(worker_flag));
    std::vector<double> totals;
    for (const auto& r : results) {
      for (std::size_t a = 0; a < axes.size(); ++a) table << axes[a].second[idx[a]] << ',';
      std::ostringstream line;
      line.precision(17);
      line << r.log.seed << ',' << r.log.total_regret() << ',' << r.log.average_regret();
      table << line.str() << '\n';
      totals.push_back(r.log.total_regret());
      if (r.log.audit) ok = ok && r.log.audit->passed();
    }
    if (curves) ok = write_runs(c, inst, results, dir, c.prefix + tag) && ok;
    std::cout << tag.substr(1) << ": median regret " << median(totals) << " over " << totals.size() << " seeds\n";
    std::size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
    }
    if (a == axes.size()) break;
  }
  return ok ? 0 : 1;
}

int cmd_oracle(const std::string& instance_path, double r, bool exact, double constant) {
  const auto inst = instance_from_json(read_json_file(instance_path));
  const auto& env = *inst.env;
  const auto mode = exact ? CoverMode::exact : CoverMode::greedy;
  const auto pairs = env.feasible_pairs();
  const auto near = near_optimal_pairs(env, r, constant);
  nlohmann::json out{{"r", r},
                     {"mode", exact ? "exact" : "greedy"},
                     {"feasible_pairs", pairs.size()},
                     {"near_optimal_pairs", near.size()},
                     {"zooming_number", zooming_number(env, r, mode, constant)},
                     {"covering_number", covering_number(env.pairs(), pairs, r, mode)},
                     {"packing_number", packing_number(env.pairs(), pairs, r, mode)},
                     {"context_covering_number", covering_number(env.contexts(), all_points(env.contexts()), r, mode)},
                     {"arm_covering_number", covering_number(env.arms(), all_points(env.arms()), r, mode)}};
  std::cout << out.dump(1) << '\n';
  return 0;
}

int cmd_check(const std::string& snapshot_path, const std::string& instance_path,
              const std::vector<std::string>& only) {
  const auto snap = read_json_file(snapshot_path);
  nlohmann::json doc;
  if (!instance_path.empty()) {
    doc = read_json_file(instance_path);
  } else if (snap.contains("instance")) {
    doc = snap["instance"];
  } else {
    throw ConfigError("snapshot has no embedded instance; pass --instance");
  }
  auto report = audit_snapshot(snap, instance_from_json(doc));
  if (!only.empty()) {
    AuditReport picked;
    for (const auto& c : report.checks()) {
      if (std::find(only.begin(), only.end(), c.name) == only.end()) continue;
      picked.get(c.name) = c;
    }
    for (const auto& name : only)
      if (!picked.find(name)) throw ConfigError("unknown check: " + name);
    report = picked;
  }
  std::cout << format_report(report) << (report.passed() ? "all checks passed\n" : "checks FAILED\n");
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual bandit simulator with similarity information"};
  app.require_subcommand(1);

  std::string config, out, instance, snapshot;
  std::size_t nworkers = 0;
  bool audit = false, curves = false, exact = false, all = false;
  std::vector<std::string> params, checks;
  double r = 0.25, constant = kZoomingConstant;

  auto* run = app.add_subcommand("run", "run every seed of a config and write CSV logs");
  run->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory (overrides SIMBANDIT_OUT_DIR and the config)");
  run->add_option("--workers", nworkers, "worker threads (default: SIMBANDIT_WORKERS or all cores)");
  run->add_flag("--audit", audit, "run the per-round invariant audits");

  auto* sweep = app.add_subcommand("sweep", "run a config over a grid of parameter values");
  sweep->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", params, "NAME=v1,v2,... (T or an algorithm parameter)")->required();
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--workers", nworkers, "worker threads");
  sweep->add_flag("--curves", curves, "also write per-run CSV logs");

  auto* oracle = app.add_subcommand("oracle", "print zooming, covering and packing numbers of an instance");
  oracle->add_option("--instance", instance, "instance file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--r", r, "scale r")->check(CLI::PositiveNumber);
  oracle->add_option("--constant", constant, "near-optimality constant of P_r");
  oracle->add_flag("--exact", exact, "exact covering (small instances only)");

  auto* check = app.add_subcommand("check", "audit a saved policy state");
  check->add_option("--snapshot", snapshot, "snapshot file")->required()->check(CLI::ExistingFile);
  check->add_option("--instance", instance, "instance file (default: the one embedded in the snapshot)");
  auto* all_flag = check->add_flag("--all", all, "run every check (default)");
  check->add_option("--check", checks, "run only the named checks")->excludes(all_flag);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, nworkers, audit);
    if (*sweep) return cmd_sweep(config, params, out, nworkers, curves);
    if (*oracle) return cmd_oracle(instance, r, exact, constant);
    if (*check) return cmd_check(snapshot, instance, checks);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
