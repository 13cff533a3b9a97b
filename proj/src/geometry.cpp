#include "netsp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netsp/error.hpp"

namespace netsp {

namespace {

// TSPLIB's reference implementation truncates pi; GEO optima are defined
// against this constant.
constexpr double kTsplibPi = 3.141592;
constexpr double kTsplibEarthRadius = 6378.388;

void require_finite(const Point& p) {
  for (double c : p.coords) {
    if (!std::isfinite(c)) fail(ErrorKind::input, "non-finite coordinate");
  }
}

void require_same_dim(const Point& a, const Point& b) {
  if (a.dim() != b.dim() || a.dim() == 0) {
    fail(ErrorKind::input, "dimension mismatch: " + std::to_string(a.dim()) +
                               " vs " + std::to_string(b.dim()));
  }
  require_finite(a);
  require_finite(b);
}

void require_2d(const Point& a, const Point& b) {
  require_same_dim(a, b);
  if (a.dim() != 2) fail(ErrorKind::input, "metric requires 2-D points");
}

double squared_euclidean(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::euc2d_cont: return "EUC2D_CONT";
    case MetricKind::euc2d_tsplib: return "EUC2D_TSPLIB";
    case MetricKind::att_cont: return "ATT_CONT";
    case MetricKind::att_tsplib: return "ATT_TSPLIB";
    case MetricKind::haversine: return "HAVERSINE";
    case MetricKind::geo_tsplib: return "GEO_TSPLIB";
    case MetricKind::explicit_matrix: return "EXPLICIT";
  }
  return "?";
}

MetricKind metric_kind_from_string(std::string_view name) {
  for (auto k : {MetricKind::euc2d_cont, MetricKind::euc2d_tsplib,
                 MetricKind::att_cont, MetricKind::att_tsplib,
                 MetricKind::haversine, MetricKind::geo_tsplib,
                 MetricKind::explicit_matrix}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::input, "unknown metric '" + std::string(name) + "'");
}

double nint(double x) { return std::floor(x + 0.5); }

double euc2d(const Point& a, const Point& b) {
  require_same_dim(a, b);
  return std::sqrt(squared_euclidean(a, b));
}

std::int64_t euc2d_tsplib(const Point& a, const Point& b) {
  return static_cast<std::int64_t>(nint(euc2d(a, b)));
}

double att(const Point& a, const Point& b) {
  require_2d(a, b);
  return std::sqrt(squared_euclidean(a, b) / 10.0);
}

std::int64_t att_tsplib(const Point& a, const Point& b) {
  const double r = att(a, b);
  const double t = nint(r);
  return static_cast<std::int64_t>(t < r ? t + 1.0 : t);
}

double haversine(const Point& a, const Point& b, double radius) {
  require_2d(a, b);
  if (!(radius > 0.0)) fail(ErrorKind::input, "haversine radius must be > 0");
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (const Point* p : {&a, &b}) {
    if (std::abs((*p)[0]) > half_pi) {
      fail(ErrorKind::input, "latitude out of range [-pi/2, pi/2]");
    }
    if (std::abs((*p)[1]) > std::numbers::pi) {
      fail(ErrorKind::input, "longitude out of range [-pi, pi]");
    }
  }
  const double dlat = std::sin((b[0] - a[0]) / 2.0);
  const double dlon = std::sin((b[1] - a[1]) / 2.0);
  double h = dlat * dlat + std::cos(a[0]) * std::cos(b[0]) * dlon * dlon;
  h = std::min(1.0, std::max(0.0, h));
  return radius * 2.0 * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

double geo_to_radians(double ddd_mm) {
  if (!std::isfinite(ddd_mm)) fail(ErrorKind::input, "malformed GEO coordinate");
  const double deg = std::trunc(ddd_mm);
  const double min = ddd_mm - deg;
  return kTsplibPi * (deg + 5.0 * min / 3.0) / 180.0;
}

std::int64_t geo_tsplib(const Point& a, const Point& b) {
  require_2d(a, b);
  const double lat_a = geo_to_radians(a[0]);
  const double lon_a = geo_to_radians(a[1]);
  const double lat_b = geo_to_radians(b[0]);
  const double lon_b = geo_to_radians(b[1]);
  const double q1 = std::cos(lon_a - lon_b);
  const double q2 = std::cos(lat_a - lat_b);
  const double q3 = std::cos(lat_a + lat_b);
  return static_cast<std::int64_t>(
      kTsplibEarthRadius *
          std::acos(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)) +
      1.0);
}

double distance(const Metric& metric, const Point& a, const Point& b) {
  switch (metric.kind) {
    case MetricKind::euc2d_cont: return euc2d(a, b);
    case MetricKind::euc2d_tsplib: return static_cast<double>(euc2d_tsplib(a, b));
    case MetricKind::att_cont: return att(a, b);
    case MetricKind::att_tsplib: return static_cast<double>(att_tsplib(a, b));
    case MetricKind::haversine: return haversine(a, b, metric.radius);
    case MetricKind::geo_tsplib: return static_cast<double>(geo_tsplib(a, b));
    case MetricKind::explicit_matrix: break;
  }
  fail(ErrorKind::input, "EXPLICIT metric has no point-wise distance");
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> entries,
                               Metric metric)
    : n_(n), entries_(std::move(entries)), metric_(metric) {
  if (entries_.size() != n_ * n_) {
    fail(ErrorKind::shape, "distance matrix needs " + std::to_string(n_ * n_) +
                               " entries, got " +
                               std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < n_; ++i) {
    entries_[i * n_ + i] = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double a = entries_[i * n_ + j];
      const double b = entries_[j * n_ + i];
      if (!std::isfinite(a) || a < 0.0 || a != b) {
        fail(ErrorKind::validity,
             "distance matrix must be finite, non-negative and symmetric at (" +
                 std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

bool is_permutation(std::span<const int> order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (int c : order) {
    if (c < 0 || static_cast<std::size_t>(c) >= n || seen[c]) return false;
    seen[c] = 1;
  }
  return true;
}

void require_permutation(std::span<const int> order, std::size_t n) {
  if (!is_permutation(order, n)) {
    fail(ErrorKind::validity, "tour is not a permutation of " +
                                  std::to_string(n) + " cities");
  }
}

DistanceMatrix build_matrix(const Instance& instance) {
  if (instance.metric.kind == MetricKind::explicit_matrix) {
    if (!instance.explicit_weights) {
      fail(ErrorKind::validity, "EXPLICIT instance without a matrix");
    }
    return *instance.explicit_weights;
  }
  const std::size_t n = instance.points.size();
  std::vector<double> entries(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(instance.metric, instance.points[i],
                                instance.points[j]);
      entries[i * n + j] = d;
      entries[j * n + i] = d;
    }
  }
  return DistanceMatrix(n, std::move(entries), instance.metric);
}

double tour_length(const DistanceMatrix& m, std::span<const int> order) {
  require_permutation(order, m.size());
  const std::size_t n = order.size();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) total += m(order[i], order[i + 1]);
  if (n > 1) total += m(order[n - 1], order[0]);
  return total;
}

double tour_length(const DistanceMatrix& m, const Tour& t) {
  return tour_length(m, t.order);
}

}  // namespace netsp
