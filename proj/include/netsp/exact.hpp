#pragma once

#include <cstdint>

#include "netsp/geometry.hpp"

namespace netsp::exact {

inline constexpr std::size_t kBruteForceMaxCities = 10;
inline constexpr std::size_t kHeldKarpMaxCities = 20;

struct ExactResult {
  Tour tour;  // canonical
  double length = 0.0;
  std::uint64_t nodes_expanded = 0;
};

/// Enumerates the (n-1)!/2 canonical tours (city 0 first, second < last) in
/// lexicographic order; ties keep the lexicographically smallest tour.
ExactResult brute_force(const DistanceMatrix& m);

/// Bitmask dynamic program over subsets of {1..n-1}. The tour is rebuilt
/// forward from city 0 picking the lowest optimal successor at each step, so
/// ties resolve to the lexicographically smallest canonical tour, matching
/// brute_force.
ExactResult held_karp(const DistanceMatrix& m);

}  // namespace netsp::exact
