#include "simbandit/metric_space.hpp"

#include <algorithm>
#include <stdexcept>

#include "simbandit/rng.hpp"

namespace simbandit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t descriptor_size(const MetricDescriptor& d) {
  return std::visit(overloaded{
                        [](const PointsMetric& m) -> std::size_t {
                          if (m.dim == 0) throw std::invalid_argument("points metric: dim must be positive");
                          if (m.coords.size() % m.dim != 0)
                            throw std::invalid_argument("points metric: coords not a multiple of dim");
                          return m.coords.size() / m.dim;
                        },
                        [](const DiscreteMetric& m) -> std::size_t { return m.n; },
                        [](const ZeroMetric& m) -> std::size_t { return m.n; },
                        [](const TimeMetric& m) -> std::size_t { return m.n; },
                        [](const MatrixMetric& m) -> std::size_t {
                          if (m.dist.size() != m.n * m.n)
                            throw std::invalid_argument("matrix metric: table is not n x n");
                          return m.n;
                        },
                        [](const ProductMetric& m) -> std::size_t {
                          if (!m.first || !m.second) throw std::invalid_argument("product metric: missing factor");
                          return m.first->size() * m.second->size();
                        },
                    },
                    d);
}

double descriptor_dimension(const MetricDescriptor& d) {
  return std::visit(overloaded{
                        [](const PointsMetric& m) { return static_cast<double>(m.dim); },
                        [](const DiscreteMetric&) { return 0.0; },
                        [](const ZeroMetric&) { return 0.0; },
                        // sqrt-shaped time metrics have r-covering numbers O(sigma/r)^2
                        [](const TimeMetric& m) { return m.shape == DriftShape::sqrt ? 2.0 : 1.0; },
                        [](const MatrixMetric&) { return 0.0; },
                        [](const ProductMetric& m) { return m.first->dimension() + m.second->dimension(); },
                    },
                    d);
}

}  // namespace

MetricSpace::MetricSpace(MetricDescriptor descriptor, SpaceKind kind, std::optional<double> declared_dimension)
    : descriptor_(std::move(descriptor)), kind_(kind), declared_dimension_(declared_dimension) {
  size_ = descriptor_size(descriptor_);
  dimension_ = declared_dimension_.value_or(descriptor_dimension(descriptor_));
  if (auto* pm = std::get_if<PointsMetric>(&descriptor_); pm && !(pm->scale >= 0.0))
    throw std::invalid_argument("points metric: scale must be nonnegative");
  if (auto* tm = std::get_if<TimeMetric>(&descriptor_); tm && !(tm->sigma >= 0.0))
    throw std::invalid_argument("time metric: sigma must be nonnegative");
  if (is_product()) kind_ = SpaceKind::product;
  if (size_ <= kDenseLimit && !std::holds_alternative<ZeroMetric>(descriptor_) &&
      !std::holds_alternative<DiscreteMetric>(descriptor_)) {
    dense_.resize(size_ * size_);
    for (std::size_t a = 0; a < size_; ++a)
      for (std::size_t b = 0; b < size_; ++b) dense_[a * size_ + b] = compute(a, b);
  }
}

double MetricSpace::compute(PointId a, PointId b) const {
  return std::visit(overloaded{
                        [&](const PointsMetric& m) {
                          double acc = 0.0;
                          for (std::size_t k = 0; k < m.dim; ++k) {
                            const double diff = std::abs(m.coords[a * m.dim + k] - m.coords[b * m.dim + k]);
                            switch (m.norm) {
                              case Norm::l1: acc += diff; break;
                              case Norm::l2: acc += diff * diff; break;
                              case Norm::linf: acc = std::max(acc, diff); break;
                            }
                          }
                          if (m.norm == Norm::l2) acc = std::sqrt(acc);
                          return std::min(1.0, m.scale * acc);
                        },
                        [&](const DiscreteMetric&) { return a == b ? 0.0 : 1.0; },
                        [&](const ZeroMetric&) { return 0.0; },
                        [&](const TimeMetric& m) {
                          const double gap = a > b ? static_cast<double>(a - b) : static_cast<double>(b - a);
                          const double d = m.shape == DriftShape::linear ? m.sigma * gap : m.sigma * std::sqrt(gap);
                          return std::min(1.0, d);
                        },
                        [&](const MatrixMetric& m) { return m.dist[a * m.n + b]; },
                        [&](const ProductMetric& m) {
                          const std::size_t ny = m.second->size();
                          const double dx = m.first->distance(a / ny, b / ny);
                          const double dy = m.second->distance(a % ny, b % ny);
                          return std::min(1.0, dx + dy);
                        },
                    },
                    descriptor_);
}

const MetricSpace& MetricSpace::first() const {
  if (!is_product()) throw std::logic_error("first(): not a product space");
  return *std::get<ProductMetric>(descriptor_).first;
}

const MetricSpace& MetricSpace::second() const {
  if (!is_product()) throw std::logic_error("second(): not a product space");
  return *std::get<ProductMetric>(descriptor_).second;
}

MetricSpace MetricSpace::line(std::size_t n, double scale, SpaceKind kind) {
  if (n == 0) throw std::invalid_argument("line: need at least one point");
  std::vector<double> coords(n, 0.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) coords[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return line_coords(std::move(coords), scale, kind);
}

MetricSpace MetricSpace::line_coords(std::vector<double> coords, double scale, SpaceKind kind) {
  return MetricSpace(PointsMetric{1, std::move(coords), Norm::l1, scale}, kind);
}

MetricSpace MetricSpace::grid(std::size_t nx, std::size_t ny, Norm norm, double scale, SpaceKind kind) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("grid: empty side");
  std::vector<double> coords;
  coords.reserve(2 * nx * ny);
  auto at = [](std::size_t i, std::size_t n) {
    return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
  };
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      coords.push_back(at(i, nx));
      coords.push_back(at(j, ny));
    }
  return MetricSpace(PointsMetric{2, std::move(coords), norm, scale}, kind);
}

MetricSpace MetricSpace::points(std::size_t dim, std::vector<double> coords, Norm norm, double scale,
                                SpaceKind kind) {
  return MetricSpace(PointsMetric{dim, std::move(coords), norm, scale}, kind);
}

MetricSpace MetricSpace::discrete(std::size_t n, SpaceKind kind) { return MetricSpace(DiscreteMetric{n}, kind); }

MetricSpace MetricSpace::zero(std::size_t n, SpaceKind kind) { return MetricSpace(ZeroMetric{n}, kind); }

MetricSpace MetricSpace::time_axis(std::size_t n, double sigma, DriftShape shape) {
  return MetricSpace(TimeMetric{n, sigma, shape}, SpaceKind::context);
}

MetricSpace MetricSpace::matrix(std::size_t n, std::vector<double> dist, SpaceKind kind,
                                std::optional<double> declared_dimension) {
  return MetricSpace(MatrixMetric{n, std::move(dist)}, kind, declared_dimension);
}

MetricSpace MetricSpace::product(std::shared_ptr<const MetricSpace> x, std::shared_ptr<const MetricSpace> y) {
  return MetricSpace(ProductMetric{std::move(x), std::move(y)}, SpaceKind::product);
}

std::string to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::context: return "context";
    case SpaceKind::arms: return "arms";
    case SpaceKind::product: return "product";
    case SpaceKind::custom: return "custom";
  }
  return "custom";
}

SpaceKind space_kind_from_string(const std::string& s) {
  if (s == "context") return SpaceKind::context;
  if (s == "arms") return SpaceKind::arms;
  if (s == "product") return SpaceKind::product;
  if (s == "custom") return SpaceKind::custom;
  throw std::invalid_argument("unknown space kind: " + s);
}

std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::l1: return "l1";
    case Norm::l2: return "l2";
    case Norm::linf: return "linf";
  }
  return "l1";
}

Norm norm_from_string(const std::string& s) {
  if (s == "l1") return Norm::l1;
  if (s == "l2") return Norm::l2;
  if (s == "linf") return Norm::linf;
  throw std::invalid_argument("unknown norm: " + s);
}

std::string to_string(DriftShape shape) { return shape == DriftShape::linear ? "linear" : "sqrt"; }

DriftShape drift_shape_from_string(const std::string& s) {
  if (s == "linear") return DriftShape::linear;
  if (s == "sqrt") return DriftShape::sqrt;
  throw std::invalid_argument("unknown drift shape: " + s);
}

MetricReport validate_metric(const MetricSpace& space, std::size_t exhaustive_limit, std::size_t samples,
                             std::uint64_t seed) {
  MetricReport report;
  const std::size_t n = space.size();
  auto fail = [&](std::string rule, PointId a, PointId b, PointId c, double lhs, double rhs) {
    report.ok = false;
    report.violation = MetricViolation{std::move(rule), a, b, c, lhs, rhs};
  };
  auto check_triple = [&](PointId a, PointId b, PointId c) {
    ++report.checked_triples;
    const double ab = space.distance(a, b);
    const double ba = space.distance(b, a);
    if (space.distance(a, a) != 0.0) return fail("identity", a, a, a, space.distance(a, a), 0.0), false;
    if (ab != ba) return fail("symmetry", a, b, b, ab, ba), false;
    if (ab < 0.0 || ab > 1.0) return fail("bound", a, b, b, ab, 1.0), false;
    const double ac = space.distance(a, c);
    const double cb = space.distance(c, b);
    if (ab > ac + cb + kDistEps) return fail("triangle", a, b, c, ab, ac + cb), false;
    return true;
  };
  if (n == 0) return report;
  if (n <= exhaustive_limit) {
    for (PointId a = 0; a < n; ++a)
      for (PointId b = 0; b < n; ++b)
        for (PointId c = 0; c < n; ++c)
          if (!check_triple(a, b, c)) return report;
    return report;
  }
  CounterRng rng(seed, Stream::audit);
  for (std::size_t s = 0; s < samples; ++s) {
    const PointId a = rng.below(n), b = rng.below(n), c = rng.below(n);
    if (!check_triple(a, b, c)) return report;
  }
  return report;
}

}  // namespace simbandit
