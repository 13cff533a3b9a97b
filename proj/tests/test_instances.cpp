#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "netsp/exact.hpp"
#include "netsp/heuristics.hpp"
#include "netsp/instances.hpp"
#include "netsp/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace netsp;
using testutil::expect_error;

namespace {

Instance unit_square() {
  Instance inst;
  inst.points = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  inst.id = "square";
  return inst;
}

std::vector<int> random_permutation(Rng& rng, int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
  return p;
}

}  // namespace

TEST(Generate, DeterministicAndInUnitSquare) {
  const auto a = generate_uniform(20, 1000, 7);
  const auto b = generate_uniform(20, 1000, 7);
  ASSERT_EQ(a.size(), 1000u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].points, b[i].points);
    EXPECT_EQ(a[i].id, b[i].id);
    for (const auto& p : a[i].points) {
      EXPECT_GE(p[0], 0.0);
      EXPECT_LT(p[0], 1.0);
      EXPECT_GE(p[1], 0.0);
      EXPECT_LT(p[1], 1.0);
    }
  }
  EXPECT_NE(generate_uniform(20, 1, 8)[0].points, a[0].points);
}

TEST(Generate, DocumentedStreamOrder) {
  // Point c of instance i takes draws 2*(i*n + c) and 2*(i*n + c) + 1.
  const auto insts = generate_uniform(3, 4, 99);
  for (std::uint64_t i = 0; i < 4; ++i) {
    for (std::uint64_t c = 0; c < 3; ++c) {
      const std::uint64_t k = 2 * (i * 3 + c);
      const double x = static_cast<double>(Rng::at(99, k) >> 11) * 0x1.0p-53;
      const double y = static_cast<double>(Rng::at(99, k + 1) >> 11) * 0x1.0p-53;
      EXPECT_EQ(insts[i].points[c][0], x);
      EXPECT_EQ(insts[i].points[c][1], y);
    }
  }
}

TEST(Generate, MeanCoordinateNearHalf) {
  const auto insts = generate_uniform(100, 1000, 5);
  double sum = 0.0;
  for (const auto& inst : insts) {
    for (const auto& p : inst.points) sum += p[0];
  }
  EXPECT_NEAR(sum / 1e5, 0.5, 0.01);
}

TEST(Generate, RejectsSingleCity) {
  expect_error(ErrorKind::config, [] { generate_uniform(1, 3, 0); });
}

TEST(Canonicalize, Examples) {
  EXPECT_EQ(canonicalize(Tour{{2, 0, 3, 1}}).order, (std::vector<int>{0, 2, 1, 3}));
  EXPECT_EQ(canonicalize(Tour{{0, 1, 2, 3}}).order, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(canonicalize(Tour{{0}}).order, std::vector<int>{0});
  EXPECT_EQ(canonicalize(Tour{{1, 0}}).order, (std::vector<int>{0, 1}));
}

TEST(Canonicalize, IdempotentAndReversalInvariant) {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng.below(12));
    Tour tour{random_permutation(rng, n)};
    const Tour c = canonicalize(tour);
    EXPECT_EQ(canonicalize(c), c);
    EXPECT_EQ(c.order.front(), 0);
    if (n > 2) {
      EXPECT_LT(c.order[1], c.order.back());
    }
    Tour rev = tour;
    std::reverse(rev.order.begin(), rev.order.end());
    EXPECT_EQ(canonicalize(rev), c);
  }
}

TEST(Label, BruteOnUnitSquareIsPerimeter) {
  const auto pairs = label({unit_square()}, Oracle::brute);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].tour.order, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(tour_length(build_matrix(pairs[0].instance), pairs[0].tour), 4.0);
}

TEST(Label, HeldKarpAndBruteAgreeWithPermutationOracle) {
  Rng rng(23);
  std::vector<Instance> insts;
  for (int t = 0; t < 200; ++t) {
    const int n = 4 + static_cast<int>(rng.below(5));  // up to 8 keeps the oracle fast
    auto one = generate_uniform(n, 1, rng.next_u64());
    insts.push_back(one[0]);
  }
  const auto hk = label(insts, Oracle::held_karp);
  const auto bf = label(insts, Oracle::brute);
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const auto m = build_matrix(insts[i]);
    const double ref = oracle::optimum_by_permutations(oracle::to_matrix(m));
    EXPECT_NEAR(tour_length(m, hk[i].tour), ref, 1e-12);
    EXPECT_EQ(hk[i].tour, bf[i].tour);
    EXPECT_EQ(hk[i].tour, canonicalize(hk[i].tour));
    // Optimal tours admit no improving exchange.
    EXPECT_TRUE(oracle::no_improving_exchange(oracle::to_matrix(m), hk[i].tour.order, 1e-12));
  }
}

TEST(Label, HeuristicBestNeverBeatsOptimum) {
  const auto insts = generate_uniform(14, 40, 3);
  const auto hk = label(insts, Oracle::held_karp);
  const auto hb = label(insts, Oracle::heuristic_best, LabelConfig{3, 5, ""});
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const auto m = build_matrix(insts[i]);
    EXPECT_GE(tour_length(m, hb[i].tour), tour_length(m, hk[i].tour) - 1e-12);
    EXPECT_EQ(hb[i].oracle, Oracle::heuristic_best);
    EXPECT_EQ(hb[i].tour, canonicalize(hb[i].tour));
  }
}

TEST(Label, OracleSizeMismatchIsConfigError) {
  const auto big = generate_uniform(11, 1, 0);
  expect_error(ErrorKind::config, [&] { label(big, Oracle::brute); });
  const auto huge = generate_uniform(21, 1, 0);
  expect_error(ErrorKind::config, [&] { label(huge, Oracle::held_karp); });
  expect_error(ErrorKind::config, [&] { label(big, Oracle::external); });
}

TEST(Label, ExternalReadsSidecar) {
  const auto dir = testutil::scratch_dir("sidecar");
  auto insts = generate_uniform(5, 2, 1);
  {
    std::ofstream out(dir + "/tours.jsonl");
    out << "{\"id\": \"" << insts[0].id << "\", \"tour\": [3, 1, 0, 2, 4]}\n";
    out << "{\"id\": \"" << insts[1].id << "\", \"tour\": [0, 1, 2, 3, 4]}\n";
  }
  const auto pairs = label(insts, Oracle::external, LabelConfig{1, 0, dir + "/tours.jsonl"});
  EXPECT_EQ(pairs[0].tour, canonicalize(Tour{{3, 1, 0, 2, 4}}));
  EXPECT_EQ(pairs[1].tour.order, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Oracle, NamesRoundTrip) {
  for (auto o : {Oracle::brute, Oracle::held_karp, Oracle::heuristic_best, Oracle::external}) {
    EXPECT_EQ(oracle_from_string(to_string(o)), o);
  }
  EXPECT_EQ(oracle_from_string("held-karp"), Oracle::held_karp);
  expect_error(ErrorKind::config, [] { oracle_from_string("concorde"); });
}

TEST(Hardness, UnitSquareClosedForms) {
  const auto b = hardness_indicator(unit_square(), 4.0);
  EXPECT_DOUBLE_EQ(b.indicator, 2.0);
  EXPECT_DOUBLE_EQ(b.rank, 1.25);
  EXPECT_EQ(b.form, HardnessForm::ratio);
  const auto a = hardness_indicator(unit_square(), 4.0, AreaConvention::bbox, HardnessForm::sqrt_ratio);
  EXPECT_DOUBLE_EQ(a.indicator, 1.0);
  EXPECT_DOUBLE_EQ(a.rank, 0.25);
  EXPECT_DOUBLE_EQ(hardness_indicator(unit_square(), 4.0, AreaConvention::hull).indicator, 2.0);
}

TEST(Hardness, FormBScaleInvariantFormANot) {
  const auto inst = generate_uniform(30, 1, 12)[0];
  const double len = tour_length(build_matrix(inst), heuristics::nearest_neighbor(build_matrix(inst)));
  for (auto area : {AreaConvention::bbox, AreaConvention::hull}) {
    const double base = hardness_indicator(inst, len, area).indicator;
    for (double s : {0.5, 2.0, 10.0}) {
      Instance scaled = inst;
      for (auto& p : scaled.points) p = Point(s * p[0], s * p[1]);
      const double v = hardness_indicator(scaled, s * len, area).indicator;
      EXPECT_LE(std::abs(v - base) / base, 1e-12);
    }
    Instance doubled = inst;
    for (auto& p : doubled.points) p = Point(2 * p[0], 2 * p[1]);
    const double a1 = hardness_indicator(inst, len, area, HardnessForm::sqrt_ratio).indicator;
    const double a2 = hardness_indicator(doubled, 2 * len, area, HardnessForm::sqrt_ratio).indicator;
    EXPECT_LT(a2, a1);  // sqrt(2l / (N 4A)) = a1 / sqrt(2)
  }
}

TEST(Hardness, HullAreaOfRegularPolygonWithInteriorPoints) {
  Rng rng(8);
  for (int k : {3, 5, 8, 13}) {
    std::vector<Point> pts;
    for (int i = 0; i < k; ++i) {
      const double a = 2.0 * std::numbers::pi * i / k + 0.1;
      pts.emplace_back(std::cos(a), std::sin(a));
    }
    for (int i = 0; i < 50; ++i) pts.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    const double expected = 0.5 * k * std::sin(2.0 * std::numbers::pi / k);
    EXPECT_NEAR(covered_area(pts, AreaConvention::hull), expected, 1e-12);
    EXPECT_EQ(convex_hull(pts).size(), static_cast<std::size_t>(k));
  }
}

TEST(Hardness, Errors) {
  Instance line;
  line.points = {{0, 0}, {1, 1}, {2, 2}};
  expect_error(ErrorKind::degenerate_area, [&] { hardness_indicator(line, 4.0, AreaConvention::hull); });
  Instance flat;
  flat.points = {{0, 0}, {1, 0}, {2, 0}};
  expect_error(ErrorKind::degenerate_area, [&] { hardness_indicator(flat, 4.0); });
  expect_error(ErrorKind::input, [] { hardness_indicator(unit_square(), 0.0); });
  Instance two;
  two.points = {{0, 0}, {1, 1}};
  expect_error(ErrorKind::input, [&] { hardness_indicator(two, 2.0, AreaConvention::hull); });
}

TEST(Dataset, RoundTripIsExact) {
  const auto dir = testutil::scratch_dir("dataset");
  const auto pairs = label(generate_uniform(8, 1000, 4), Oracle::held_karp);
  save_dataset(dir + "/d.jsonl", pairs);
  const auto back = load_dataset(dir + "/d.jsonl");
  ASSERT_EQ(back.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(back[i].instance.points, pairs[i].instance.points);
    EXPECT_EQ(back[i].instance.id, pairs[i].instance.id);
    EXPECT_EQ(back[i].instance.metric, pairs[i].instance.metric);
    EXPECT_EQ(back[i].tour, pairs[i].tour);
    EXPECT_EQ(back[i].oracle, pairs[i].oracle);
  }
}

TEST(Dataset, EmptyFileAndMissingTour) {
  const auto dir = testutil::scratch_dir("dataset-err");
  { std::ofstream(dir + "/empty.jsonl"); }
  EXPECT_TRUE(load_dataset(dir + "/empty.jsonl").empty());
  {
    std::ofstream out(dir + "/bad.jsonl");
    out << R"({"id":"a","metric":"EUC2D_CONT","coords":[[0,0],[1,0]],"tour":[0,1],"oracle":"BRUTE"})" << "\n";
    out << R"({"id":"b","metric":"EUC2D_CONT","coords":[[0,0],[1,0]],"oracle":"BRUTE"})" << "\n";
  }
  try {
    load_dataset(dir + "/bad.jsonl");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  // The same file loads as unlabeled instances.
  EXPECT_EQ(load_instances(dir + "/bad.jsonl").size(), 2u);
  expect_error(ErrorKind::io, [&] { load_dataset(dir + "/missing.jsonl"); });
}
