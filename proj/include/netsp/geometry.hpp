#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace netsp {

/// A city location. Units depend on the metric: plane units, radians
/// (latitude, longitude) for haversine, or TSPLIB DDD.MM degrees for GEO.
struct Point {
  std::vector<double> coords;

  Point() = default;
  Point(double x, double y) : coords{x, y} {}
  explicit Point(std::vector<double> c) : coords(std::move(c)) {}

  std::size_t dim() const { return coords.size(); }
  double operator[](std::size_t k) const { return coords[k]; }
  bool operator==(const Point&) const = default;
};

enum class MetricKind {
  euc2d_cont,
  euc2d_tsplib,
  att_cont,
  att_tsplib,
  haversine,
  geo_tsplib,
  explicit_matrix,
};

std::string_view to_string(MetricKind kind);
MetricKind metric_kind_from_string(std::string_view name);

struct Metric {
  MetricKind kind = MetricKind::euc2d_cont;
  // Sphere radius, only read by the haversine kind.
  double radius = 1.0;

  bool operator==(const Metric&) const = default;
};

/// TSPLIB nint: floor(x + 0.5).
double nint(double x);

double euc2d(const Point& a, const Point& b);
std::int64_t euc2d_tsplib(const Point& a, const Point& b);
double att(const Point& a, const Point& b);
std::int64_t att_tsplib(const Point& a, const Point& b);
double haversine(const Point& a, const Point& b, double radius);
std::int64_t geo_tsplib(const Point& a, const Point& b);

/// TSPLIB DDD.MM coordinate to radians.
double geo_to_radians(double ddd_mm);

/// Distance between two points under `metric`. Not defined for explicit
/// matrices.
double distance(const Metric& metric, const Point& a, const Point& b);

/// Dense symmetric n x n matrix with a zero diagonal. Immutable once built.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  /// Takes ownership of `entries` (row-major n*n) after validating the
  /// matrix invariants; the diagonal is forced to zero.
  DistanceMatrix(std::size_t n, std::vector<double> entries, Metric metric);

  std::size_t size() const { return n_; }
  const Metric& metric() const { return metric_; }

  double operator()(std::size_t i, std::size_t j) const {
    return entries_[i * n_ + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * n_, n_};
  }
  std::span<const double> entries() const { return entries_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
  Metric metric_;
};

/// A permutation of 0..n-1.
struct Tour {
  std::vector<int> order;

  std::size_t size() const { return order.size(); }
  bool operator==(const Tour&) const = default;
};

bool is_permutation(std::span<const int> order, std::size_t n);

/// Throws a validity error unless `order` is a permutation of 0..n-1.
void require_permutation(std::span<const int> order, std::size_t n);

struct Instance {
  std::vector<Point> points;
  Metric metric;
  std::string id;
  // Populated only for explicit-matrix instances.
  std::shared_ptr<const DistanceMatrix> explicit_weights;

  std::size_t size() const {
    return explicit_weights ? explicit_weights->size() : points.size();
  }
};

DistanceMatrix build_matrix(const Instance& instance);

double tour_length(const DistanceMatrix& m, const Tour& t);
double tour_length(const DistanceMatrix& m, std::span<const int> order);

}  // namespace netsp
