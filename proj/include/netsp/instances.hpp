#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "netsp/geometry.hpp"

namespace netsp {

enum class Oracle { brute, held_karp, heuristic_best, external };

std::string_view to_string(Oracle o);
Oracle oracle_from_string(std::string_view name);

struct LabeledPair {
  Instance instance;
  Tour tour;  // canonical
  Oracle oracle = Oracle::held_karp;
};

struct LabelConfig {
  unsigned restarts = 1;
  std::uint64_t seed = 0;
  // JSONL of {"id", "tour"}; read by the external oracle.
  std::string sidecar_path;
};

enum class AreaConvention { bbox, hull };
enum class HardnessForm {
  ratio,     // l / sqrt(N * A), scale invariant (default)
  sqrt_ratio // sqrt(l / (N * A))
};

std::string_view to_string(AreaConvention a);
std::string_view to_string(HardnessForm f);

struct HardnessReport {
  double indicator = 0.0;
  double rank = 0.0;  // |indicator - 0.75|; smaller is harder
  AreaConvention area_convention = AreaConvention::bbox;
  HardnessForm form = HardnessForm::ratio;
  std::string tour_source;
};

/// `count` instances of `n` i.i.d. uniform points in [0,1]^2 under
/// EUC2D_CONT. Coordinates are drawn from Rng(seed) in instance-major order,
/// x before y for each point.
std::vector<Instance> generate_uniform(std::size_t n, std::size_t count,
                                       std::uint64_t seed);

/// Rotates city 0 to the front and orients the tour so that the second city
/// is smaller than the last one.
Tour canonicalize(const Tour& t);

std::vector<LabeledPair> label(const std::vector<Instance>& instances,
                               Oracle oracle, const LabelConfig& config = {});

double polygon_area(const std::vector<Point>& polygon);
std::vector<Point> convex_hull(std::vector<Point> points);
double covered_area(const std::vector<Point>& points, AreaConvention area);

HardnessReport hardness_indicator(const Instance& instance, double tour_len,
                                  AreaConvention area = AreaConvention::bbox,
                                  HardnessForm form = HardnessForm::ratio);

void save_dataset(const std::string& path, const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> load_dataset(const std::string& path);

/// Reads a dataset whose lines may omit "tour"/"oracle" (unlabeled
/// instances, as written by `gen`).
std::vector<Instance> load_instances(const std::string& path);
void save_instances(const std::string& path, const std::vector<Instance>& instances);

}  // namespace netsp
