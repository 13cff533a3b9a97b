#include "netsp/instances.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "netsp/error.hpp"
#include "netsp/exact.hpp"
#include "netsp/heuristics.hpp"
#include "netsp/parallel.hpp"
#include "netsp/rng.hpp"

namespace netsp {

using nlohmann::json;

namespace {

Tour heuristic_best(const DistanceMatrix& m, const LabelConfig& config) {
  using namespace heuristics;
  const std::size_t n = m.size();
  Tour best;
  double best_len = std::numeric_limits<double>::infinity();
  auto consider = [&](const Tour& t) {
    const Tour refined = two_opt(m, t, TwoOptMode::best_improvement);
    const double len = tour_length(m, refined);
    if (best.order.empty() || len < best_len - 1e-12 * std::max(1.0, best_len)) {
      best_len = len;
      best = refined;
    }
  };
  const unsigned restarts = std::max(1u, config.restarts);
  for (unsigned r = 0; r < restarts; ++r) {
    HeuristicConfig cfg;
    cfg.seed = Rng::at(config.seed, r);
    if (r == 0) {
      cfg.start_city = 0;
    } else {
      cfg.start_city.reset();
    }
    consider(nearest_neighbor(m, cfg));
    if (n >= 3) {
      for (auto v : {InsertionVariant::nearest, InsertionVariant::farthest,
                     InsertionVariant::random, InsertionVariant::cheapest}) {
        consider(insertion(m, v, cfg));
      }
    }
  }
  return best;
}

std::unordered_map<std::string, Tour> load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open sidecar '" + path + "'");
  std::unordered_map<std::string, Tour> tours;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      tours[j.at("id").get<std::string>()] = Tour{j.at("tour").get<std::vector<int>>()};
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tours;
}

json coords_to_json(const Instance& inst) {
  json coords = json::array();
  for (const auto& p : inst.points) coords.push_back(p.coords);
  return coords;
}

Instance instance_from_json(const json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.metric.kind = metric_kind_from_string(j.at("metric").get<std::string>());
  if (inst.metric.kind == MetricKind::explicit_matrix) {
    fail(ErrorKind::input, "EXPLICIT instances cannot be stored as coordinates");
  }
  if (j.contains("radius")) inst.metric.radius = j.at("radius").get<double>();
  for (const auto& c : j.at("coords")) inst.points.emplace_back(c.get<std::vector<double>>());
  if (inst.points.empty()) fail(ErrorKind::input, "instance has no cities");
  return inst;
}

template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void write_lines(const std::string& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

}  // namespace

std::string_view to_string(Oracle o) {
  switch (o) {
    case Oracle::brute: return "BRUTE";
    case Oracle::held_karp: return "HELD_KARP";
    case Oracle::heuristic_best: return "HEURISTIC_BEST";
    case Oracle::external: return "EXTERNAL";
  }
  return "?";
}

Oracle oracle_from_string(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::toupper(c));
  });
  if (s == "BRUTE" || s == "BRUTE_FORCE") return Oracle::brute;
  if (s == "HELD_KARP") return Oracle::held_karp;
  if (s == "HEURISTIC_BEST") return Oracle::heuristic_best;
  if (s == "EXTERNAL") return Oracle::external;
  fail(ErrorKind::config, "unknown oracle '" + std::string(name) + "'");
}

std::string_view to_string(AreaConvention a) {
  return a == AreaConvention::bbox ? "BBOX" : "HULL";
}

std::string_view to_string(HardnessForm f) {
  return f == HardnessForm::ratio ? "B" : "A";
}

std::vector<Instance> generate_uniform(std::size_t n, std::size_t count,
                                       std::uint64_t seed) {
  if (n < 2) fail(ErrorKind::config, "generate_uniform needs n >= 2");
  Rng rng(seed);
  std::vector<Instance> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Instance& inst = out[i];
    inst.metric = Metric{MetricKind::euc2d_cont, 1.0};
    inst.id = "u" + std::to_string(n) + "-" + std::to_string(seed) + "-" + std::to_string(i);
    inst.points.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
      const double x = rng.uniform();
      const double y = rng.uniform();
      inst.points.emplace_back(x, y);
    }
  }
  return out;
}

Tour canonicalize(const Tour& t) {
  const std::size_t n = t.order.size();
  if (n == 0) return t;
  const auto zero = std::find(t.order.begin(), t.order.end(), 0);
  if (zero == t.order.end()) fail(ErrorKind::validity, "tour does not contain city 0");
  Tour out;
  out.order.reserve(n);
  out.order.insert(out.order.end(), zero, t.order.end());
  out.order.insert(out.order.end(), t.order.begin(), zero);
  if (n > 2 && out.order[1] > out.order[n - 1]) std::reverse(out.order.begin() + 1, out.order.end());
  return out;
}

std::vector<LabeledPair> label(const std::vector<Instance>& instances,
                               Oracle oracle, const LabelConfig& config) {
  const std::size_t limit = oracle == Oracle::brute      ? exact::kBruteForceMaxCities
                            : oracle == Oracle::held_karp ? exact::kHeldKarpMaxCities
                                                          : std::numeric_limits<std::size_t>::max();
  for (const auto& inst : instances) {
    if (inst.size() > limit) {
      fail(ErrorKind::config, std::string(to_string(oracle)) + " oracle supports n <= " +
                                  std::to_string(limit) + "; instance '" + inst.id +
                                  "' has " + std::to_string(inst.size()));
    }
    if (inst.size() < 2) {
      fail(ErrorKind::config, "instance '" + inst.id + "' has fewer than 2 cities");
    }
  }

  std::unordered_map<std::string, Tour> sidecar;
  if (oracle == Oracle::external) {
    if (config.sidecar_path.empty()) {
      fail(ErrorKind::config, "EXTERNAL oracle needs a sidecar tour file");
    }
    sidecar = load_sidecar(config.sidecar_path);
  }

  std::vector<LabeledPair> out(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    const Instance& inst = instances[i];
    LabeledPair& pair = out[i];
    pair.instance = inst;
    pair.oracle = oracle;
    switch (oracle) {
      case Oracle::brute:
        pair.tour = exact::brute_force(build_matrix(inst)).tour;
        break;
      case Oracle::held_karp:
        pair.tour = exact::held_karp(build_matrix(inst)).tour;
        break;
      case Oracle::heuristic_best:
        pair.tour = heuristic_best(build_matrix(inst), config);
        break;
      case Oracle::external: {
        auto it = sidecar.find(inst.id);
        if (it == sidecar.end()) {
          fail(ErrorKind::config, "sidecar has no tour for '" + inst.id + "'");
        }
        require_permutation(it->second.order, inst.size());
        pair.tour = canonicalize(it->second);
        break;
      }
    }
  });
  return out;
}

double polygon_area(const std::vector<Point>& polygon) {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % n];
    twice += a[0] * b[1] - b[0] * a[1];
  }
  return std::abs(twice) / 2.0;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double covered_area(const std::vector<Point>& points, AreaConvention area) {
  if (area == AreaConvention::hull) return polygon_area(convex_hull(points));
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  return (hi_x - lo_x) * (hi_y - lo_y);
}

HardnessReport hardness_indicator(const Instance& instance, double tour_len,
                                  AreaConvention area, HardnessForm form) {
  if (!(tour_len > 0.0)) fail(ErrorKind::input, "tour length must be positive");
  if (instance.points.empty()) {
    fail(ErrorKind::input, "hardness needs city coordinates");
  }
  for (const auto& p : instance.points) {
    if (p.dim() != 2) fail(ErrorKind::input, "hardness needs 2-D coordinates");
  }
  if (area == AreaConvention::hull && instance.points.size() < 3) {
    fail(ErrorKind::input, "hull area needs at least 3 cities");
  }
  const double a = covered_area(instance.points, area);
  if (!(a > 0.0)) fail(ErrorKind::degenerate_area, "cities cover zero area");
  const double n = static_cast<double>(instance.points.size());

  HardnessReport r;
  r.area_convention = area;
  r.form = form;
  r.indicator = form == HardnessForm::ratio ? tour_len / std::sqrt(n * a)
                                            : std::sqrt(tour_len / (n * a));
  r.rank = std::abs(r.indicator - 0.75);
  return r;
}

void save_instances(const std::string& path, const std::vector<Instance>& instances) {
  std::vector<json> rows;
  rows.reserve(instances.size());
  for (const auto& inst : instances) {
    json j;
    j["id"] = inst.id;
    j["metric"] = std::string(to_string(inst.metric.kind));
    j["coords"] = coords_to_json(inst);
    rows.push_back(std::move(j));
  }
  write_lines(path, rows);
}

std::vector<Instance> load_instances(const std::string& path) {
  std::vector<Instance> out;
  for_each_line(path, [&](const json& j) { out.push_back(instance_from_json(j)); });
  return out;
}

void save_dataset(const std::string& path, const std::vector<LabeledPair>& pairs) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    json j;
    j["id"] = p.instance.id;
    j["metric"] = std::string(to_string(p.instance.metric.kind));
    j["coords"] = coords_to_json(p.instance);
    j["tour"] = p.tour.order;
    j["oracle"] = std::string(to_string(p.oracle));
    rows.push_back(std::move(j));
  }
  write_lines(path, rows);
}

std::vector<LabeledPair> load_dataset(const std::string& path) {
  std::vector<LabeledPair> out;
  for_each_line(path, [&](const json& j) {
    LabeledPair p;
    p.instance = instance_from_json(j);
    p.tour.order = j.at("tour").get<std::vector<int>>();
    require_permutation(p.tour.order, p.instance.size());
    p.oracle = oracle_from_string(j.at("oracle").get<std::string>());
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace netsp
