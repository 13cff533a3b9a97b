#include "netsp/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "netsp/error.hpp"

namespace netsp::exact {

namespace {

// Lengths within this relative distance are treated as ties.
constexpr double kTieTolerance = 1e-12;

double tie_slack(double value) {
  return kTieTolerance * std::max(1.0, std::abs(value));
}

void require_size(const DistanceMatrix& m, std::size_t max_n, const char* who) {
  if (m.size() < 2 || m.size() > max_n) {
    fail(ErrorKind::size, std::string(who) + " supports 2 <= n <= " +
                              std::to_string(max_n) + ", got n = " +
                              std::to_string(m.size()));
  }
}

}  // namespace

ExactResult brute_force(const DistanceMatrix& m) {
  require_size(m, kBruteForceMaxCities, "brute_force");
  const std::size_t n = m.size();
  std::vector<int> rest(n - 1);
  std::iota(rest.begin(), rest.end(), 1);

  ExactResult best;
  best.length = std::numeric_limits<double>::infinity();
  do {
    if (rest.front() > rest.back()) continue;
    ++best.nodes_expanded;
    double len = m(0, rest.front()) + m(rest.back(), 0);
    for (std::size_t i = 0; i + 1 < rest.size(); ++i) len += m(rest[i], rest[i + 1]);
    if (len < best.length - tie_slack(best.length) || best.tour.order.empty()) {
      best.length = len;
      best.tour.order.assign(1, 0);
      best.tour.order.insert(best.tour.order.end(), rest.begin(), rest.end());
    }
  } while (std::next_permutation(rest.begin(), rest.end()));
  return best;
}

ExactResult held_karp(const DistanceMatrix& m) {
  require_size(m, kHeldKarpMaxCities, "held_karp");
  const std::size_t n = m.size();
  const std::size_t k = n - 1;  // cities 1..n-1 live in bits 0..k-1
  const std::size_t subsets = std::size_t{1} << k;
  constexpr double inf = std::numeric_limits<double>::infinity();

  // cost[S * k + j]: cheapest path that starts at city j+1, visits every city
  // of S exactly once and ends at city 0 (j not in S).
  std::vector<double> cost(subsets * k, inf);
  std::vector<double> dist(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) dist[a * k + b] = m(a + 1, b + 1);
  }
  for (std::size_t j = 0; j < k; ++j) cost[j] = m(j + 1, 0);

  ExactResult result;
  // The predecessor costs depend only on S, so gather them once per subset
  // instead of once per (S, j); this keeps the scattered reads to |S|.
  std::vector<std::size_t> members(k);
  std::vector<double> tail(k);
  for (std::size_t s = 1; s < subsets; ++s) {
    std::size_t count = 0;
    for (std::size_t bits = s; bits; bits &= bits - 1) {
      const std::size_t next = static_cast<std::size_t>(__builtin_ctzll(bits));
      members[count] = next;
      tail[count] = cost[(s ^ (std::size_t{1} << next)) * k + next];
      ++count;
    }
    double* row = cost.data() + s * k;
    for (std::size_t j = 0; j < k; ++j) {
      if (s & (std::size_t{1} << j)) continue;
      const double* dj = dist.data() + j * k;
      double best = inf;
      for (std::size_t t = 0; t < count; ++t) best = std::min(best, dj[members[t]] + tail[t]);
      row[j] = best;
      ++result.nodes_expanded;
    }
  }

  // Forward reconstruction, lowest successor among (near-)optimal choices.
  const std::size_t all = subsets - 1;
  double target = inf;
  for (std::size_t j = 0; j < k; ++j) {
    target = std::min(target, m(0, j + 1) + cost[(all ^ (std::size_t{1} << j)) * k + j]);
  }
  result.length = target;

  result.tour.order.reserve(n);
  result.tour.order.push_back(0);
  std::size_t remaining = all;
  int current = 0;
  while (remaining) {
    int chosen = -1;
    for (std::size_t bits = remaining; bits; bits &= bits - 1) {
      const std::size_t next = static_cast<std::size_t>(__builtin_ctzll(bits));
      const std::size_t rest = remaining ^ (std::size_t{1} << next);
      const double c = m(current, next + 1) + cost[rest * k + next];
      if (c <= target + tie_slack(target)) {
        chosen = static_cast<int>(next);
        break;
      }
    }
    remaining ^= std::size_t{1} << chosen;
    target = cost[remaining * k + chosen];
    current = chosen + 1;
    result.tour.order.push_back(current);
  }
  result.length = tour_length(m, result.tour);
  return result;
}

}  // namespace netsp::exact
