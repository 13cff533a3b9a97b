#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "netsp/geometry.hpp"

namespace netsp::heuristics {

enum class TwoOptMode { off, first_improvement, best_improvement };
enum class InsertionVariant { nearest, farthest, random, cheapest };
enum class Matching { exact, greedy };

std::string_view to_string(InsertionVariant v);

inline constexpr double kTwoOptThreshold = 1e-10;
// Largest odd-vertex set matched exactly by the subset DP.
inline constexpr std::size_t kExactMatchingMaxVertices = 18;

struct HeuristicConfig {
  std::optional<int> start_city = 0;  // nullopt: drawn from `seed`
  std::uint64_t seed = 0;
  TwoOptMode two_opt = TwoOptMode::off;
  unsigned restarts = 1;
};

Tour nearest_neighbor(const DistanceMatrix& m, const HeuristicConfig& cfg = {});

Tour insertion(const DistanceMatrix& m, InsertionVariant variant,
               const HeuristicConfig& cfg = {});

Tour cheapest_link(const DistanceMatrix& m);

/// Prim's tree rooted at 0 (lowest index on ties) walked in preorder with
/// children in ascending index order.
Tour mst_walk(const DistanceMatrix& m);

struct ChristofidesResult {
  Tour tour;
  Matching matching = Matching::exact;
  std::size_t odd_vertices = 0;
};

ChristofidesResult christofides(const DistanceMatrix& m);

/// Parent array of the minimum spanning tree used by mst_walk and
/// christofides (parent[0] = -1).
std::vector<int> minimum_spanning_tree(const DistanceMatrix& m);

/// Minimum-weight perfect matching of `vertices` (even count) by subset DP.
/// Returns pairs of entries of `vertices`.
std::vector<std::pair<int, int>> exact_matching(const DistanceMatrix& m,
                                                const std::vector<int>& vertices);
std::vector<std::pair<int, int>> greedy_matching(const DistanceMatrix& m,
                                                 const std::vector<int>& vertices);

/// Applies improving 2-exchanges until none remains.
Tour two_opt(const DistanceMatrix& m, const Tour& t,
             TwoOptMode mode = TwoOptMode::best_improvement);

/// True when no 2-exchange improves `t` by more than kTwoOptThreshold.
bool is_two_opt_optimal(const DistanceMatrix& m, const Tour& t);

/// Applies cfg.two_opt to `t` (identity when off) and canonicalises.
Tour refine(const DistanceMatrix& m, const Tour& t, const HeuristicConfig& cfg);

}  // namespace netsp::heuristics
