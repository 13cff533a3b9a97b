#include "netsp/heuristics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "netsp/error.hpp"
#include "netsp/instances.hpp"
#include "netsp/rng.hpp"

namespace netsp::heuristics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Tour identity_tour(std::size_t n) {
  Tour t;
  t.order.resize(n);
  std::iota(t.order.begin(), t.order.end(), 0);
  return t;
}

int pick_start(const DistanceMatrix& m, const HeuristicConfig& cfg) {
  const std::size_t n = m.size();
  if (cfg.start_city) {
    if (*cfg.start_city < 0 || static_cast<std::size_t>(*cfg.start_city) >= n) {
      fail(ErrorKind::config, "start_city " + std::to_string(*cfg.start_city) +
                                  " out of range for n = " + std::to_string(n));
    }
    return *cfg.start_city;
  }
  Rng rng(cfg.seed);
  return static_cast<int>(rng.below(n));
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

// Gain of replacing edges (t[i], t[i+1]) and (t[j], t[j+1]) by
// (t[i], t[j]) and (t[i+1], t[j+1]).
double exchange_gain(const DistanceMatrix& m, const std::vector<int>& t,
                     std::size_t i, std::size_t j) {
  const std::size_t n = t.size();
  const int a = t[i], b = t[i + 1], c = t[j], d = t[(j + 1) % n];
  return m(a, b) + m(c, d) - m(a, c) - m(b, d);
}

template <typename Visit>
void for_each_exchange(std::size_t n, Visit&& visit) {
  for (std::size_t i = 0; i + 2 < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // edges share city t[0]
      if (!visit(i, j)) return;
    }
  }
}

}  // namespace

std::string_view to_string(InsertionVariant v) {
  switch (v) {
    case InsertionVariant::nearest: return "nearest";
    case InsertionVariant::farthest: return "farthest";
    case InsertionVariant::random: return "random";
    case InsertionVariant::cheapest: return "cheapest";
  }
  return "?";
}

Tour nearest_neighbor(const DistanceMatrix& m, const HeuristicConfig& cfg) {
  const std::size_t n = m.size();
  if (n < 2) return identity_tour(n);
  std::vector<char> visited(n, 0);
  Tour t;
  t.order.reserve(n);
  int current = pick_start(m, cfg);
  visited[current] = 1;
  t.order.push_back(current);
  for (std::size_t step = 1; step < n; ++step) {
    int best = -1;
    double best_d = kInf;
    for (std::size_t c = 0; c < n; ++c) {
      if (!visited[c] && m(current, c) < best_d) {
        best_d = m(current, c);
        best = static_cast<int>(c);
      }
    }
    visited[best] = 1;
    t.order.push_back(best);
    current = best;
  }
  return canonicalize(t);
}

Tour insertion(const DistanceMatrix& m, InsertionVariant variant,
               const HeuristicConfig& cfg) {
  const std::size_t n = m.size();
  if (n < 3) return identity_tour(n);

  // Seed pair: globally closest (farthest for the farthest variant) pair,
  // lexicographic on ties.
  int sa = 0, sb = 1;
  double seed_d = m(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = m(i, j);
      const bool better = variant == InsertionVariant::farthest ? d > seed_d : d < seed_d;
      if (better) {
        seed_d = d;
        sa = static_cast<int>(i);
        sb = static_cast<int>(j);
      }
    }
  }

  std::vector<int> tour{sa, sb};
  std::vector<char> in_tour(n, 0);
  in_tour[sa] = in_tour[sb] = 1;
  std::vector<double> to_tour(n, kInf);  // min distance to any tour city
  for (std::size_t c = 0; c < n; ++c) to_tour[c] = std::min(m(c, sa), m(c, sb));

  Rng rng(cfg.seed);

  auto best_position = [&](int c, double& delta) {
    std::size_t pos = 0;
    delta = kInf;
    for (std::size_t p = 0; p < tour.size(); ++p) {
      const int a = tour[p];
      const int b = tour[(p + 1) % tour.size()];
      const double dl = m(a, c) + m(c, b) - m(a, b);
      if (dl < delta) {
        delta = dl;
        pos = p;
      }
    }
    return pos;
  };

  while (tour.size() < n) {
    int next = -1;
    std::size_t pos = 0;
    double delta = 0.0;
    switch (variant) {
      case InsertionVariant::nearest:
      case InsertionVariant::farthest: {
        const bool nearest = variant == InsertionVariant::nearest;
        double key = nearest ? kInf : -kInf;
        for (std::size_t c = 0; c < n; ++c) {
          if (in_tour[c]) continue;
          if (nearest ? to_tour[c] < key : to_tour[c] > key) {
            key = to_tour[c];
            next = static_cast<int>(c);
          }
        }
        pos = best_position(next, delta);
        break;
      }
      case InsertionVariant::random: {
        const std::uint64_t k = rng.below(n - tour.size());
        std::uint64_t seen = 0;
        for (std::size_t c = 0; c < n; ++c) {
          if (in_tour[c]) continue;
          if (seen++ == k) {
            next = static_cast<int>(c);
            break;
          }
        }
        pos = best_position(next, delta);
        break;
      }
      case InsertionVariant::cheapest: {
        double best = kInf;
        for (std::size_t c = 0; c < n; ++c) {
          if (in_tour[c]) continue;
          double d = 0.0;
          const std::size_t p = best_position(static_cast<int>(c), d);
          if (d < best) {
            best = d;
            next = static_cast<int>(c);
            pos = p;
          }
        }
        break;
      }
    }
    tour.insert(tour.begin() + static_cast<std::ptrdiff_t>(pos) + 1, next);
    in_tour[next] = 1;
    for (std::size_t c = 0; c < n; ++c) to_tour[c] = std::min(to_tour[c], m(c, next));
  }
  return canonicalize(Tour{std::move(tour)});
}

Tour cheapest_link(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  if (n < 3) return identity_tour(n);
  struct Edge {
    double w;
    int i, j;
  };
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      edges.push_back({m(i, j), static_cast<int>(i), static_cast<int>(j)});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  DisjointSets sets(n);
  std::vector<int> degree(n, 0);
  std::vector<std::vector<int>> adj(n);
  std::size_t added = 0;
  for (const auto& e : edges) {
    if (added == n - 1) break;
    if (degree[e.i] == 2 || degree[e.j] == 2) continue;
    if (!sets.unite(e.i, e.j)) continue;  // would close a sub-circuit
    ++degree[e.i];
    ++degree[e.j];
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
    ++added;
  }

  // The chosen edges form a Hamiltonian path; walk it from its lower endpoint.
  int start = -1;
  for (std::size_t c = 0; c < n; ++c) {
    if (degree[c] == 1) {
      start = static_cast<int>(c);
      break;
    }
  }
  Tour t;
  t.order.reserve(n);
  int prev = -1, cur = start;
  while (cur != -1) {
    t.order.push_back(cur);
    int nxt = -1;
    for (int v : adj[cur]) {
      if (v != prev) nxt = v;
    }
    prev = cur;
    cur = nxt;
  }
  return canonicalize(t);
}

std::vector<int> minimum_spanning_tree(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  std::vector<int> parent(n, -1);
  std::vector<double> key(n, kInf);
  std::vector<char> done(n, 0);
  if (n == 0) return parent;
  key[0] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    int u = -1;
    for (std::size_t c = 0; c < n; ++c) {
      if (!done[c] && (u == -1 || key[c] < key[u])) u = static_cast<int>(c);
    }
    done[u] = 1;
    for (std::size_t c = 0; c < n; ++c) {
      if (!done[c] && m(u, c) < key[c]) {
        key[c] = m(u, c);
        parent[c] = u;
      }
    }
  }
  return parent;
}

Tour mst_walk(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  if (n < 2) return identity_tour(n);
  const auto parent = minimum_spanning_tree(m);
  std::vector<std::vector<int>> children(n);
  for (std::size_t c = 1; c < n; ++c) children[parent[c]].push_back(static_cast<int>(c));

  Tour t;
  t.order.reserve(n);
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    t.order.push_back(u);
    // children were appended in ascending order; push reversed so the
    // smallest is visited first
    for (auto it = children[u].rbegin(); it != children[u].rend(); ++it) stack.push_back(*it);
  }
  return canonicalize(t);
}

std::vector<std::pair<int, int>> exact_matching(const DistanceMatrix& m,
                                                const std::vector<int>& vertices) {
  const std::size_t k = vertices.size();
  if (k % 2 != 0) fail(ErrorKind::input, "perfect matching needs an even vertex count");
  if (k > kExactMatchingMaxVertices) {
    fail(ErrorKind::size, "exact matching supports at most " +
                              std::to_string(kExactMatchingMaxVertices) + " vertices");
  }
  const std::size_t full = (std::size_t{1} << k) - 1;
  std::vector<double> best(full + 1, kInf);
  std::vector<int> partner(full + 1, -1);
  best[0] = 0.0;
  // Only masks whose lowest missing vertex is matched next are reachable;
  // iterate all masks and skip odd popcounts.
  for (std::size_t mask = 1; mask <= full; ++mask) {
    if (__builtin_popcountll(mask) % 2) continue;
    const int i = __builtin_ctzll(mask);
    const std::size_t without_i = mask ^ (std::size_t{1} << i);
    for (std::size_t bits = without_i; bits; bits &= bits - 1) {
      const int j = __builtin_ctzll(bits);
      const double c = m(vertices[i], vertices[j]) + best[without_i ^ (std::size_t{1} << j)];
      if (c < best[mask]) {
        best[mask] = c;
        partner[mask] = j;
      }
    }
  }
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t mask = full; mask;) {
    const int i = __builtin_ctzll(mask);
    const int j = partner[mask];
    pairs.emplace_back(vertices[i], vertices[j]);
    mask ^= (std::size_t{1} << i) | (std::size_t{1} << j);
  }
  return pairs;
}

std::vector<std::pair<int, int>> greedy_matching(const DistanceMatrix& m,
                                                 const std::vector<int>& vertices) {
  if (vertices.size() % 2 != 0) {
    fail(ErrorKind::input, "perfect matching needs an even vertex count");
  }
  struct Cand {
    double w;
    std::size_t a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a < vertices.size(); ++a)
    for (std::size_t b = a + 1; b < vertices.size(); ++b)
      cands.push_back({m(vertices[a], vertices[b]), a, b});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& x, const Cand& y) { return x.w < y.w; });
  std::vector<char> used(vertices.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& c : cands) {
    if (used[c.a] || used[c.b]) continue;
    used[c.a] = used[c.b] = 1;
    pairs.emplace_back(vertices[c.a], vertices[c.b]);
  }
  return pairs;
}

ChristofidesResult christofides(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  ChristofidesResult result;
  if (n < 3) {
    result.tour = identity_tour(n);
    return result;
  }
  const auto parent = minimum_spanning_tree(m);
  std::vector<std::vector<int>> adj(n);
  for (std::size_t c = 1; c < n; ++c) {
    adj[c].push_back(parent[c]);
    adj[parent[c]].push_back(static_cast<int>(c));
  }
  std::vector<int> odd;
  for (std::size_t c = 0; c < n; ++c) {
    if (adj[c].size() % 2 == 1) odd.push_back(static_cast<int>(c));
  }
  result.odd_vertices = odd.size();
  std::vector<std::pair<int, int>> matching;
  if (odd.size() <= kExactMatchingMaxVertices) {
    matching = exact_matching(m, odd);
    result.matching = Matching::exact;
  } else {
    matching = greedy_matching(m, odd);
    result.matching = Matching::greedy;
  }
  for (auto [a, b] : matching) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }

  // Hierholzer on the multigraph, neighbours consumed in ascending order.
  for (auto& a : adj) std::sort(a.begin(), a.end(), std::greater<>());
  std::vector<int> circuit;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int u = stack.back();
    if (adj[u].empty()) {
      circuit.push_back(u);
      stack.pop_back();
      continue;
    }
    const int v = adj[u].back();
    adj[u].pop_back();
    auto& back = adj[v];
    back.erase(std::find(back.begin(), back.end(), u));
    stack.push_back(v);
  }
  std::reverse(circuit.begin(), circuit.end());

  std::vector<char> seen(n, 0);
  Tour t;
  t.order.reserve(n);
  for (int c : circuit) {
    if (!seen[c]) {
      seen[c] = 1;
      t.order.push_back(c);
    }
  }
  result.tour = canonicalize(t);
  return result;
}

Tour two_opt(const DistanceMatrix& m, const Tour& input, TwoOptMode mode) {
  require_permutation(input.order, m.size());
  std::vector<int> t = input.order;
  const std::size_t n = t.size();
  if (mode == TwoOptMode::off || n < 4) return canonicalize(Tour{t});

  for (;;) {
    std::size_t bi = 0, bj = 0;
    double best = kTwoOptThreshold;
    bool found = false;
    for_each_exchange(n, [&](std::size_t i, std::size_t j) {
      const double g = exchange_gain(m, t, i, j);
      if (g > best) {
        best = g;
        bi = i;
        bj = j;
        found = true;
        return mode == TwoOptMode::best_improvement;
      }
      return true;
    });
    if (!found) break;
    std::reverse(t.begin() + static_cast<std::ptrdiff_t>(bi) + 1,
                 t.begin() + static_cast<std::ptrdiff_t>(bj) + 1);
  }
  return canonicalize(Tour{std::move(t)});
}

bool is_two_opt_optimal(const DistanceMatrix& m, const Tour& t) {
  require_permutation(t.order, m.size());
  bool optimal = true;
  for_each_exchange(t.size(), [&](std::size_t i, std::size_t j) {
    if (exchange_gain(m, t.order, i, j) > kTwoOptThreshold) optimal = false;
    return optimal;
  });
  return optimal;
}

Tour refine(const DistanceMatrix& m, const Tour& t, const HeuristicConfig& cfg) {
  return two_opt(m, t, cfg.two_opt);
}

}  // namespace netsp::heuristics
