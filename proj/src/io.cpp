#include "simbandit/io.hpp"

#include <cmath>
#include <fstream>
#include <variant>

namespace simbandit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad field \"") + key + "\": " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.is_object() && j.contains(key) ? field<T>(j, key) : fallback;
}

SpaceKind kind_or(const json& j, SpaceKind fallback) {
  return j.contains("role") ? space_kind_from_string(field<std::string>(j, "role")) : fallback;
}

std::optional<double> declared(const json& j) {
  if (j.contains("dimension")) return field<double>(j, "dimension");
  return std::nullopt;
}

std::string arrival_kind_name(ArrivalKind k) {
  switch (k) {
    case ArrivalKind::explicit_list: return "explicit";
    case ArrivalKind::round_robin: return "round_robin";
    case ArrivalKind::uniform: return "uniform";
  }
  return "explicit";
}

std::vector<double> leaf_payoffs(const json& j, const Taxonomy& tax) {
  if (j.contains("mu")) return field<std::vector<double>>(j, "mu");
  // random payoffs on a 1/20 grid from the instance stream
  CounterRng rng(field_or<std::uint64_t>(j, "mu_seed", 0), Stream::instance, 1);
  std::vector<double> mu(tax.num_leaves());
  for (auto& m : mu) m = std::round(rng.uniform() * 20.0) / 20.0;
  return mu;
}

Instance from_generator(const json& j, std::optional<std::size_t> horizon) {
  const auto name = field<std::string>(j, "generator");
  const std::size_t T = horizon.value_or(field_or<std::size_t>(j, "horizon", 1000));
  const std::uint64_t seed = field_or<std::uint64_t>(j, "seed", 0);
  Instance out;
  auto wrap = [](Environment env) { return std::make_shared<const Environment>(std::move(env)); };
  if (name == "ridge") {
    const auto n_x = field<std::size_t>(j, "n_x");
    const auto arrivals = j.contains("arrivals") ? arrivals_from_json(j["arrivals"], n_x) : uniform_arrivals(n_x, seed);
    out.env = wrap(make_ridge_env(n_x, field<std::size_t>(j, "n_y"), field_or(j, "height", 0.9),
                                  field_or(j, "floor", 0.1), field_or(j, "slope", 1.0), arrivals, T));
  } else if (name == "peaks") {
    auto xs = space_from_json(j.at("contexts"));
    auto ys = space_from_json(j.at("arms"));
    std::vector<Peak> peaks;
    for (const auto& p : j.at("peaks"))
      peaks.push_back(Peak{field<PointId>(p, "x"), field<PointId>(p, "y"), field_or(p, "height", 1.0),
                           field_or(p, "slope_x", 1.0), field_or(p, "slope_y", 1.0)});
    const auto arrivals =
        j.contains("arrivals") ? arrivals_from_json(j["arrivals"], xs->size()) : uniform_arrivals(xs->size(), seed);
    out.env = wrap(make_peaks_env(xs, ys, peaks, field_or(j, "floor", 0.0), arrivals, T));
  } else if (name == "needle") {
    NeedleParams p;
    p.n_x = field_or<std::size_t>(j, "n_x", 1);
    p.n_y = field_or<std::size_t>(j, "n_y", 2);
    p.r = field_or(j, "r", 0.25);
    p.assignment = field_or<std::vector<PointId>>(j, "assignment", {});
    p.seed = seed;
    p.resolution = field_or<std::size_t>(j, "resolution", 0);
    p.horizon = T;
    out.env = wrap(make_needle_instance(p).env);
  } else if (name == "drifting") {
    DriftParams p;
    p.k = field_or<std::size_t>(j, "k", 5);
    p.sigma = field_or(j, "sigma", 0.01);
    p.shape = drift_shape_from_string(field_or<std::string>(j, "shape", "sqrt"));
    p.horizon = T;
    p.seed = seed;
    p.knot_spacing = field_or<std::size_t>(j, "knot_spacing", 16);
    out.env = wrap(make_drifting_env(p));
  } else if (name == "random") {
    out.env = wrap(make_random_env(seed, T, field_or<std::size_t>(j, "max_contexts", 12),
                                   field_or<std::size_t>(j, "max_arms", 12)));
  } else if (name == "sleeping") {
    out.env = wrap(make_sleeping_env(field<std::size_t>(j, "num_arms"),
                                     field<std::vector<std::vector<PointId>>>(j, "awake"),
                                     field<std::vector<double>>(j, "mu")));
  } else if (name == "taxonomy") {
    std::shared_ptr<const Taxonomy> tax;
    if (j.contains("children")) {
      tax = std::make_shared<const Taxonomy>(taxonomy_from_json(j));
    } else {
      tax = std::make_shared<const Taxonomy>(random_taxonomy(seed, field<std::size_t>(j, "leaves"),
                                                             field_or<std::size_t>(j, "max_degree", 3)));
    }
    out.env = wrap(make_taxonomy_env(*tax, leaf_payoffs(j, *tax), T));
    out.taxonomy = std::move(tax);
  } else {
    throw ConfigError("unknown generator: " + name);
  }
  return out;
}

}  // namespace

json space_to_json(const MetricSpace& space) {
  json j = std::visit(
      overloaded{
          [](const PointsMetric& m) -> json {
            return {{"kind", "points"}, {"dim", m.dim}, {"coords", m.coords}, {"norm", to_string(m.norm)},
                    {"scale", m.scale}};
          },
          [](const DiscreteMetric& m) -> json { return {{"kind", "discrete"}, {"n", m.n}}; },
          [](const ZeroMetric& m) -> json { return {{"kind", "zero"}, {"n", m.n}}; },
          [](const TimeMetric& m) -> json {
            return {{"kind", "time"}, {"n", m.n}, {"sigma", m.sigma}, {"shape", to_string(m.shape)}};
          },
          [](const MatrixMetric& m) -> json { return {{"kind", "matrix"}, {"n", m.n}, {"dist", m.dist}}; },
          [](const ProductMetric& m) -> json {
            return {{"kind", "product"}, {"first", space_to_json(*m.first)}, {"second", space_to_json(*m.second)}};
          },
      },
      space.descriptor());
  j["role"] = to_string(space.kind());
  if (auto d = space.declared_dimension()) j["dimension"] = *d;
  return j;
}

std::shared_ptr<const MetricSpace> space_from_json(const json& j) {
  const auto kind = field<std::string>(j, "kind");
  try {
    if (kind == "line") {
      auto s = MetricSpace::line(field<std::size_t>(j, "n"), field_or(j, "scale", 1.0), kind_or(j, SpaceKind::custom));
      return std::make_shared<const MetricSpace>(std::move(s));
    }
    if (kind == "grid") {
      auto s = MetricSpace::grid(field<std::size_t>(j, "nx"), field<std::size_t>(j, "ny"),
                                 norm_from_string(field_or<std::string>(j, "norm", "l1")), field_or(j, "scale", 1.0),
                                 kind_or(j, SpaceKind::custom));
      return std::make_shared<const MetricSpace>(std::move(s));
    }
    MetricDescriptor d;
    SpaceKind role = SpaceKind::custom;
    if (kind == "points") {
      d = PointsMetric{field<std::size_t>(j, "dim"), field<std::vector<double>>(j, "coords"),
                       norm_from_string(field_or<std::string>(j, "norm", "l1")), field_or(j, "scale", 1.0)};
    } else if (kind == "discrete") {
      d = DiscreteMetric{field<std::size_t>(j, "n")};
      role = SpaceKind::arms;
    } else if (kind == "zero") {
      d = ZeroMetric{field<std::size_t>(j, "n")};
      role = SpaceKind::context;
    } else if (kind == "time") {
      d = TimeMetric{field<std::size_t>(j, "n"), field<double>(j, "sigma"),
                     drift_shape_from_string(field_or<std::string>(j, "shape", "linear"))};
      role = SpaceKind::context;
    } else if (kind == "matrix") {
      d = MatrixMetric{field<std::size_t>(j, "n"), field<std::vector<double>>(j, "dist")};
    } else if (kind == "product") {
      d = ProductMetric{space_from_json(j.at("first")), space_from_json(j.at("second"))};
    } else {
      throw ConfigError("unknown space kind: " + kind);
    }
    return std::make_shared<const MetricSpace>(std::move(d), kind_or(j, role), declared(j));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("space: ") + e.what());
  }
}

json arrivals_to_json(const ArrivalSchedule& a) {
  return {{"kind", arrival_kind_name(a.kind)}, {"contexts", a.contexts}, {"seed", a.seed}};
}

ArrivalSchedule arrivals_from_json(const json& j, std::size_t num_contexts) {
  const auto kind = field<std::string>(j, "kind");
  ArrivalSchedule a;
  a.seed = field_or<std::uint64_t>(j, "seed", 0);
  if (kind == "uniform") {
    a = uniform_arrivals(num_contexts, a.seed);
  } else if (kind == "round_robin") {
    a.kind = ArrivalKind::round_robin;
  } else if (kind == "explicit") {
    a.kind = ArrivalKind::explicit_list;
  } else {
    throw ConfigError("unknown arrival kind: " + kind);
  }
  if (j.contains("contexts")) a.contexts = field<std::vector<PointId>>(j, "contexts");
  return a;
}

json taxonomy_to_json(const Taxonomy& tax) {
  json children = json::array();
  for (NodeId v = 0; v < tax.size(); ++v) children.push_back(tax.children(v));
  return {{"children", children}};
}

Taxonomy taxonomy_from_json(const json& j) {
  try {
    return Taxonomy(field<std::vector<std::vector<NodeId>>>(j, "children"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("taxonomy: ") + e.what());
  }
}

json instance_to_json(const Instance& inst) {
  const auto& env = *inst.env;
  json j;
  j["label"] = env.label;
  j["contexts"] = space_to_json(env.contexts());
  j["arms"] = space_to_json(env.arms());
  if (env.all_feasible()) {
    j["feasible"] = "all";
  } else {
    json pairs = json::array();
    for (PointId p : env.feasible_pairs()) {
      const auto [x, y] = env.split(p);
      pairs.push_back({x, y});
    }
    j["feasible"] = pairs;
  }
  j[env.round_varying() ? "mu_by_round" : "mu"] = env.mu_table();
  j["arrivals"] = arrivals_to_json(env.arrivals());
  j["horizon"] = env.horizon();
  j["noise"] = {{"kind", env.noise().kind == NoiseKind::bernoulli ? "bernoulli" : "gaussian"},
                {"sigma", env.noise().sigma}};
  if (inst.taxonomy) j["taxonomy"] = taxonomy_to_json(*inst.taxonomy);
  return j;
}

Instance instance_from_json(const json& j, std::optional<std::size_t> horizon) {
  if (!j.is_object()) throw ConfigError("instance must be an object");
  try {
    if (j.contains("generator")) return from_generator(j, horizon);
    auto xs = space_from_json(j.at("contexts"));
    auto ys = space_from_json(j.at("arms"));
    std::vector<char> feasible;
    if (j.contains("feasible") && !(j["feasible"].is_string() && j["feasible"] == "all")) {
      feasible.assign(xs->size() * ys->size(), 0);
      for (const auto& pair : j["feasible"]) {
        const auto x = pair.at(0).get<PointId>(), y = pair.at(1).get<PointId>();
        if (x >= xs->size() || y >= ys->size()) throw ConfigError("feasible pair out of range");
        feasible[x * ys->size() + y] = 1;
      }
    }
    const auto T = field<std::size_t>(j, "horizon");
    if (horizon && *horizon > T)
      throw ConfigError("instance horizon " + std::to_string(T) + " is shorter than " + std::to_string(*horizon));
    NoiseRule noise;
    if (j.contains("noise")) {
      const auto kind = field_or<std::string>(j["noise"], "kind", "bernoulli");
      if (kind != "bernoulli" && kind != "gaussian") throw ConfigError("unknown noise kind: " + kind);
      noise.kind = kind == "gaussian" ? NoiseKind::gaussian : NoiseKind::bernoulli;
      noise.sigma = field_or(j["noise"], "sigma", noise.sigma);
    }
    const auto arrivals = arrivals_from_json(j.at("arrivals"), xs->size());
    auto env = j.contains("mu_by_round")
                   ? Environment::adversarial(xs, ys, field<std::vector<double>>(j, "mu_by_round"),
                                              std::move(feasible), arrivals, T, noise)
                   : Environment(xs, ys, field<std::vector<double>>(j, "mu"), std::move(feasible), arrivals, T, noise);
    env.label = field_or<std::string>(j, "label", "");
    Instance out;
    out.env = std::make_shared<const Environment>(std::move(env));
    if (j.contains("taxonomy")) {
      out.taxonomy = std::make_shared<const Taxonomy>(taxonomy_from_json(j["taxonomy"]));
      if (out.taxonomy->num_leaves() != ys->size()) throw ConfigError("taxonomy leaves do not match the arms");
    }
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace simbandit
