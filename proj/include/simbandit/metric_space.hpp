#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace simbandit {

using PointId = std::size_t;

// Closed-ball tolerance. Membership is dist <= radius + kDistEps so that
// distances like 0.51 - 0.26 that round to 0.25000000000000006 still count.
inline constexpr double kDistEps = 1e-12;

inline bool within(double dist, double radius) { return dist <= radius + kDistEps; }

enum class SpaceKind { context, arms, product, custom };

enum class Norm { l1, l2, linf };

enum class DriftShape { linear, sqrt };

// Explicit coordinates in R^dim; d = min(1, scale * ||a - b||).
struct PointsMetric {
  std::size_t dim = 1;
  std::vector<double> coords;  // row-major, size() * dim entries
  Norm norm = Norm::l1;
  double scale = 1.0;
};

// No similarity information: every pair of distinct points at distance 1.
struct DiscreteMetric {
  std::size_t n = 0;
};

// All distances zero (the sleeping-bandit context space).
struct ZeroMetric {
  std::size_t n = 0;
};

// Points 0..n-1 stand for rounds 1..n; d = min(1, sigma |t-t'|) or min(1, sigma sqrt|t-t'|).
struct TimeMetric {
  std::size_t n = 0;
  double sigma = 0.0;
  DriftShape shape = DriftShape::linear;
};

// Explicit symmetric distance table.
struct MatrixMetric {
  std::size_t n = 0;
  std::vector<double> dist;  // n * n
};

class MetricSpace;

// Product of two spaces; point i * |Y| + j is (i, j), d = min(1, dX + dY).
struct ProductMetric {
  std::shared_ptr<const MetricSpace> first;
  std::shared_ptr<const MetricSpace> second;
};

using MetricDescriptor =
    std::variant<PointsMetric, DiscreteMetric, ZeroMetric, TimeMetric, MatrixMetric, ProductMetric>;

// A finite indexed point set with a distance truncated at 1. Immutable after
// construction; spaces up to kDenseLimit points cache a dense distance table.
class MetricSpace {
 public:
  static constexpr std::size_t kDenseLimit = 2000;

  MetricSpace(MetricDescriptor descriptor, SpaceKind kind = SpaceKind::custom,
              std::optional<double> declared_dimension = std::nullopt);

  // n evenly spaced points on [0, 1] (n >= 2), or the single point 0.
  static MetricSpace line(std::size_t n, double scale = 1.0, SpaceKind kind = SpaceKind::custom);
  static MetricSpace line_coords(std::vector<double> coords, double scale = 1.0,
                                 SpaceKind kind = SpaceKind::custom);
  // nx * ny grid on the unit square, point id = i * ny + j.
  static MetricSpace grid(std::size_t nx, std::size_t ny, Norm norm = Norm::l1, double scale = 1.0,
                          SpaceKind kind = SpaceKind::custom);
  static MetricSpace points(std::size_t dim, std::vector<double> coords, Norm norm = Norm::l1,
                            double scale = 1.0, SpaceKind kind = SpaceKind::custom);
  static MetricSpace discrete(std::size_t n, SpaceKind kind = SpaceKind::arms);
  static MetricSpace zero(std::size_t n, SpaceKind kind = SpaceKind::context);
  static MetricSpace time_axis(std::size_t n, double sigma, DriftShape shape);
  static MetricSpace matrix(std::size_t n, std::vector<double> dist, SpaceKind kind = SpaceKind::custom,
                            std::optional<double> declared_dimension = std::nullopt);
  static MetricSpace product(std::shared_ptr<const MetricSpace> x, std::shared_ptr<const MetricSpace> y);

  std::size_t size() const { return size_; }
  SpaceKind kind() const { return kind_; }
  const MetricDescriptor& descriptor() const { return descriptor_; }

  // Covering dimension declared by the descriptor (used to pick net granularity).
  double dimension() const { return dimension_; }
  bool has_declared_dimension() const { return declared_dimension_.has_value(); }
  std::optional<double> declared_dimension() const { return declared_dimension_; }

  double distance(PointId a, PointId b) const {
    if (!dense_.empty()) return dense_[a * size_ + b];
    return compute(a, b);
  }

  bool is_product() const { return std::holds_alternative<ProductMetric>(descriptor_); }
  // Components of a product space; throws for non-product spaces.
  const MetricSpace& first() const;
  const MetricSpace& second() const;

 private:
  double compute(PointId a, PointId b) const;

  MetricDescriptor descriptor_;
  SpaceKind kind_;
  std::size_t size_ = 0;
  double dimension_ = 0.0;
  std::optional<double> declared_dimension_;
  std::vector<double> dense_;
};

// A ball is the (center, radius) pair, never its point set.
struct Ball {
  PointId center = 0;
  double radius = 1.0;

  friend bool operator==(const Ball&, const Ball&) = default;
};

inline bool contains(const MetricSpace& space, const Ball& ball, PointId p) {
  return within(space.distance(ball.center, p), ball.radius);
}

std::string to_string(SpaceKind kind);
SpaceKind space_kind_from_string(const std::string& s);
std::string to_string(Norm norm);
Norm norm_from_string(const std::string& s);
std::string to_string(DriftShape shape);
DriftShape drift_shape_from_string(const std::string& s);

struct MetricViolation {
  std::string rule;  // "identity", "symmetry", "triangle", "bound"
  PointId a = 0, b = 0, c = 0;
  double lhs = 0.0, rhs = 0.0;
};

struct MetricReport {
  bool ok = true;
  std::size_t checked_triples = 0;
  std::optional<MetricViolation> violation;
};

// Identity, symmetry, triangle inequality and the <= 1 bound. Exhaustive over
// all triples for spaces up to exhaustive_limit points, otherwise `samples`
// random triples drawn from the audit stream of `seed`.
MetricReport validate_metric(const MetricSpace& space, std::size_t exhaustive_limit = 200,
                             std::size_t samples = 100000, std::uint64_t seed = 0);

}  // namespace simbandit
