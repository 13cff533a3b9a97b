#include <gtest/gtest.h>

#include "netsp/exact.hpp"
#include "netsp/instances.hpp"
#include "netsp/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace netsp;
using testutil::expect_error;

namespace {

DistanceMatrix matrix_of(const std::vector<Point>& pts, MetricKind kind = MetricKind::euc2d_cont) {
  Instance inst;
  inst.points = pts;
  inst.metric.kind = kind;
  return build_matrix(inst);
}

DistanceMatrix random_matrix(Rng& rng, int n) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(rng.uniform(), rng.uniform());
  return matrix_of(pts);
}

}  // namespace

TEST(BruteForce, SmallClosedForms) {
  const auto sq = exact::brute_force(matrix_of({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  EXPECT_DOUBLE_EQ(sq.length, 4.0);
  EXPECT_EQ(sq.tour.order, (std::vector<int>{0, 1, 2, 3}));

  const auto two = exact::brute_force(matrix_of({{0, 0}, {3, 4}}));
  EXPECT_DOUBLE_EQ(two.length, 10.0);

  const auto line = exact::brute_force(matrix_of({{0, 0}, {1, 0}, {2, 0}}));
  EXPECT_DOUBLE_EQ(line.length, 4.0);
}

TEST(BruteForce, EnumeratesHalfThePermutations) {
  Rng rng(2);
  const auto r = exact::brute_force(random_matrix(rng, 7));
  EXPECT_EQ(r.nodes_expanded, 360u);  // 6!/2
}

TEST(Exact, SizeLimits) {
  Rng rng(1);
  expect_error(ErrorKind::size, [&] { exact::brute_force(random_matrix(rng, 11)); });
  expect_error(ErrorKind::size, [&] { exact::held_karp(random_matrix(rng, 21)); });
  expect_error(ErrorKind::size, [&] { exact::held_karp(random_matrix(rng, 1)); });
  expect_error(ErrorKind::size, [&] { exact::brute_force(random_matrix(rng, 1)); });
}

TEST(HeldKarp, MatchesPermutationOracleAcrossMetrics) {
  Rng rng(31);
  const MetricKind kinds[] = {MetricKind::euc2d_cont, MetricKind::euc2d_tsplib, MetricKind::att_cont,
                              MetricKind::att_tsplib};
  for (int t = 0; t < 120; ++t) {
    const int n = 4 + static_cast<int>(rng.below(5));
    const MetricKind kind = kinds[t % 4];
    const double scale = (kind == MetricKind::euc2d_cont || kind == MetricKind::att_cont) ? 1.0 : 500.0;
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(scale * rng.uniform(), scale * rng.uniform());
    const auto m = matrix_of(pts, kind);
    const double ref = oracle::optimum_by_permutations(oracle::to_matrix(m));
    const auto hk = exact::held_karp(m);
    EXPECT_NEAR(hk.length, ref, 1e-9 * ref);
    EXPECT_EQ(hk.length, tour_length(m, hk.tour));
    EXPECT_EQ(hk.tour, canonicalize(hk.tour));
  }
}

TEST(HeldKarp, TiesResolveLikeBruteForce) {
  // Integer grid distances produce many equal-length optima.
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const int n = 4 + static_cast<int>(rng.below(6));
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(static_cast<double>(rng.below(3)), static_cast<double>(rng.below(3)));
    }
    const auto m = matrix_of(pts, MetricKind::euc2d_tsplib);
    EXPECT_EQ(exact::held_karp(m).tour, exact::brute_force(m).tour);
  }
}

TEST(HeldKarp, NoRandomTourIsShorter) {
  Rng rng(6);
  const auto m = random_matrix(rng, 12);
  const double opt = exact::held_karp(m).length;
  std::vector<int> order(12);
  std::iota(order.begin(), order.end(), 0);
  for (int t = 0; t < 10000; ++t) {
    for (int i = 11; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    ASSERT_GE(tour_length(m, order), opt - 1e-12);
  }
}

TEST(HeldKarp, RelabelingAndConstantShift) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const int n = 6 + static_cast<int>(rng.below(8));
    const auto m = random_matrix(rng, n);
    const double opt = exact::held_karp(m).length;

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<double> relabeled(n * n), shifted(n * n);
    const double c = 0.25;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        relabeled[perm[i] * n + perm[j]] = m(i, j);
        shifted[i * n + j] = i == j ? 0.0 : m(i, j) + c;
      }
    }
    const double opt_relabeled = exact::held_karp(DistanceMatrix(n, relabeled, m.metric())).length;
    const double opt_shifted = exact::held_karp(DistanceMatrix(n, shifted, m.metric())).length;
    EXPECT_NEAR(opt_relabeled, opt, 1e-12);
    EXPECT_NEAR(opt_shifted, opt + n * c, 1e-12);
  }
}
