// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails. `--only N` runs one criterion.

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "netsp/exact.hpp"
#include "netsp/harness.hpp"
#include "netsp/heuristics.hpp"
#include "netsp/instances.hpp"
#include "netsp/model.hpp"
#include "netsp/rng.hpp"
#include "netsp/tsplib.hpp"
#include "oracles.hpp"

using namespace netsp;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

const std::vector<std::pair<std::string, double>> kKnownOptima = {
    {"eil51", 426}, {"eil76", 538}, {"eil101", 629}, {"st70", 675},
    {"ch130", 6110}, {"ch150", 6528}, {"berlin52", 7542}};

std::string fixture(const std::string& name) { return std::string(NETSP_FIXTURE_DIR) + "/" + name; }

std::string scratch(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("netsp-accept-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args, const std::string& cwd = "") {
  Run r;
  std::string cmd = std::string(NETSP_CLI_PATH) + " " + args;
  if (!cwd.empty()) cmd = "cd '" + cwd + "' && " + cmd;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// 1. Bundled optimal tours reproduce the published optima exactly.
Outcome tsplib_optima() {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  for (const auto& [name, expected] : kKnownOptima) {
    const auto inst = tsplib::to_instance(tsplib::load_instance(fixture(name + ".tsp")));
    const auto tour = tsplib::load_tour(fixture(name + ".opt.tour"));
    // Independent evaluation: nint(sqrt(dx^2 + dy^2)) summed over the cycle.
    double len = 0.0;
    const auto& ord = tour.tour.order;
    for (std::size_t i = 0; i < ord.size(); ++i) {
      const auto& a = inst.points[ord[i]];
      const auto& b = inst.points[ord[(i + 1) % ord.size()]];
      len += std::floor(std::hypot(a[0] - b[0], a[1] - b[1]) + 0.5);
    }
    const double lib = tour_length(build_matrix(inst), tour.tour);
    ok = ok && len == expected && lib == expected;
    detail += fmt("%s=%.0f ", name.c_str(), lib);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 1.0;
  return {ok, detail + fmt("in %.3fs", secs)};
}

// 2. Held-Karp against brute force over every metric.
Outcome exact_cross_validation() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  const MetricKind kinds[] = {MetricKind::euc2d_cont, MetricKind::euc2d_tsplib, MetricKind::att_cont,
                              MetricKind::att_tsplib, MetricKind::haversine,    MetricKind::geo_tsplib,
                              MetricKind::explicit_matrix};
  double worst = 0.0;
  int agree = 0;
  for (int t = 0; t < 500; ++t) {
    const int n = 4 + static_cast<int>(rng.below(7));
    const MetricKind kind = kinds[t % 7];
    Instance inst;
    inst.metric.kind = kind;
    if (kind == MetricKind::explicit_matrix) {
      std::vector<double> w(n * n, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) w[i * n + j] = w[j * n + i] = std::floor(rng.uniform(1, 1000));
      }
      inst.explicit_weights = std::make_shared<DistanceMatrix>(n, w, inst.metric);
    } else {
      for (int i = 0; i < n; ++i) {
        switch (kind) {
          case MetricKind::haversine:
            inst.metric.radius = 6371.0;
            inst.points.emplace_back(rng.uniform(-1.4, 1.4), rng.uniform(-3.1, 3.1));
            break;
          case MetricKind::geo_tsplib:
            inst.points.emplace_back(rng.uniform(-60, 60), rng.uniform(-170, 170));
            break;
          case MetricKind::euc2d_tsplib:
          case MetricKind::att_tsplib:
            inst.points.emplace_back(rng.uniform(0, 2000), rng.uniform(0, 2000));
            break;
          default:
            inst.points.emplace_back(rng.uniform(), rng.uniform());
        }
      }
    }
    const auto m = build_matrix(inst);
    const double hk = exact::held_karp(m).length;
    const double bf = exact::brute_force(m).length;
    const double rel = std::abs(hk - bf) / std::max(1e-300, std::abs(bf));
    worst = std::max(worst, rel);
    if (rel <= 1e-9) ++agree;
  }
  const double secs = seconds_since(t0);
  return {agree == 500 && secs < 60.0,
          fmt("%d/500 agree, worst rel diff %.2e, %.1fs", agree, worst, secs)};
}

// 3. Mean optimum over 1000 uniform TSP20 instances.
Outcome tsp20_optimum() {
  const auto t0 = Clock::now();
  const auto insts = generate_uniform(20, 1000, 7);
  const auto pairs = label(insts, Oracle::held_karp);
  std::vector<double> lens;
  for (const auto& p : pairs) lens.push_back(tour_length(build_matrix(p.instance), p.tour));
  const double m = mean(lens);
  return {std::abs(m - 3.84) <= 0.03, fmt("mean %.4f (target 3.84 +- 0.03), %.1fs", m, seconds_since(t0))};
}

// 4. Construction heuristic means on TSP20/50/100.
Outcome heuristic_rows() {
  using namespace heuristics;
  struct Row {
    const char* name;
    std::function<Tour(const DistanceMatrix&)> run;
    double reference[3];
  };
  const std::vector<Row> rows = {
      {"nn", [](const DistanceMatrix& m) { return nearest_neighbor(m); }, {4.50, 7.00, 9.68}},
      {"nearest-insertion", [](const DistanceMatrix& m) { return insertion(m, InsertionVariant::nearest); },
       {4.33, 6.78, 9.45}},
      {"random-insertion", [](const DistanceMatrix& m) { return insertion(m, InsertionVariant::random); },
       {4.00, 6.13, 8.51}},
      {"farthest-insertion", [](const DistanceMatrix& m) { return insertion(m, InsertionVariant::farthest); },
       {3.92, 6.01, 8.35}},
  };
  const std::size_t sizes[] = {20, 50, 100};
  bool ok = true;
  std::string detail;
  for (int s = 0; s < 3; ++s) {
    const auto insts = generate_uniform(sizes[s], 1000, 7);
    std::vector<DistanceMatrix> mats;
    for (const auto& inst : insts) mats.push_back(build_matrix(inst));
    for (const auto& row : rows) {
      std::vector<double> lens;
      for (const auto& m : mats) lens.push_back(tour_length(m, row.run(m)));
      const double got = mean(lens);
      const bool within = std::abs(got - row.reference[s]) <= 0.02 * row.reference[s];
      ok = ok && within;
      detail += fmt("%s@%zu=%.3f/%.2f%s ", row.name, sizes[s], got, row.reference[s], within ? "" : "!");
    }
  }
  return {ok, detail};
}

// 5. Approximation bounds and 2-opt local optimality against Held-Karp.
Outcome approximation_bounds() {
  using namespace heuristics;
  Rng rng(55);
  int checked = 0, violations = 0, exact_matchings = 0;
  double worst_mst = 0.0, worst_christo = 0.0;
  for (int t = 0; t < 600; ++t) {
    const int n = 3 + static_cast<int>(rng.below(10));
    Instance inst;
    inst.metric.kind = t % 3 == 0 ? MetricKind::att_cont : MetricKind::euc2d_cont;
    for (int i = 0; i < n; ++i) inst.points.emplace_back(rng.uniform(), rng.uniform());
    const auto m = build_matrix(inst);
    const double opt = exact::held_karp(m).length;
    const double mst = tour_length(m, mst_walk(m));
    const auto ch = christofides(m);
    worst_mst = std::max(worst_mst, mst / opt);
    if (mst > 2.0 * opt * (1 + 1e-12)) ++violations;
    if (ch.matching == Matching::exact) {
      ++exact_matchings;
      const double c = tour_length(m, ch.tour);
      worst_christo = std::max(worst_christo, c / opt);
      if (c > 1.5 * opt * (1 + 1e-12)) ++violations;
    }
    std::vector<int> start(n);
    std::iota(start.begin(), start.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(start[i], start[rng.below(i + 1)]);
    for (auto mode : {TwoOptMode::first_improvement, TwoOptMode::best_improvement}) {
      const Tour out = two_opt(m, Tour{start}, mode);
      if (tour_length(m, out) > tour_length(m, start) + 1e-12) ++violations;
      if (!oracle::no_improving_exchange(oracle::to_matrix(m), out.order, kTwoOptThreshold)) ++violations;
    }
    ++checked;
  }
  return {violations == 0 && exact_matchings == checked,
          fmt("%d instances, worst mst/opt %.3f, worst christofides/opt %.3f, %d violations", checked,
              worst_mst, worst_christo, violations)};
}

// 6. Gradients, uniform-logit likelihood and decoding under random parameters.
Outcome model_gradients() {
  using namespace model;
  ModelConfig c;
  c.hidden_dim = 8;
  c.glimpses = 1;
  c.embed_kernel_width = 3;
  c.precision = Precision::f64;
  const auto t0 = Clock::now();
  const auto report = grad_check(c, 100, 6, 6060);
  const double gc_secs = seconds_since(t0);
  bool ok = report.max_rel_error <= 1e-4;

  Rng rng(66);
  double worst_uniform = 0.0;
  for (int n : {3, 5, 8}) {
    auto p = init_params<double>(c, rng.next_u64());
    p.ptr_v.setZero();
    p.glimpse_v.setZero();
    const auto inst = generate_uniform(n, 1, rng.next_u64())[0];
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    const double nll = sequence_nll(inst, canonicalize(Tour{order}), p);
    worst_uniform = std::max(worst_uniform, std::abs(nll - oracle::log_factorial(n)));
  }
  ok = ok && worst_uniform <= 1e-6;

  int invalid = 0, leaked = 0;
  for (int t = 0; t < 1000; ++t) {
    ModelConfig fc;
    fc.hidden_dim = 4 + static_cast<int>(rng.below(13));
    fc.glimpses = static_cast<int>(rng.below(3));
    fc.embed_kernel_width = 1 + 2 * static_cast<int>(rng.below(2));
    auto p = init_params<float>(fc, rng.next_u64());
    const float scale = static_cast<float>(std::exp(rng.uniform(-2.0, 3.0)));
    for (auto& e : p.tensors()) *e.tensor *= scale;
    const int n = 2 + static_cast<int>(rng.below(14));
    const auto inst = generate_uniform(n, 1, rng.next_u64())[0];
    const Tour tour = decode_greedy(inst, p);
    if (!is_permutation(tour.order, n)) {
      ++invalid;
      continue;
    }
    // Replay the decoded tour step by step and inspect every distribution.
    const auto emb = embed(model_inputs<float>(inst), p);
    const auto enc = encode(emb, p);
    auto state = initial_state(enc);
    for (int step = 0; step < n; ++step) {
      const Mat<float> prev = step == 0 ? Mat<float>(Mat<float>::Zero(1, fc.hidden_dim))
                                        : Mat<float>(emb.row(tour.order[step - 1]));
      const auto s = decode_step(state, prev, enc.refs, p);
      for (int i = 0; i < n; ++i) {
        if (state.visited[i] && s.probabilities[i] != 0.0f) ++leaked;
      }
      state = advance(state, s, tour.order[step]);
    }
  }
  ok = ok && invalid == 0 && leaked == 0;
  return {ok, fmt("grad max rel err %.2e (%s, %zu entries, %.1fs); |nll-log n!| max %.1e; "
                  "fuzz: %d invalid tours, %d masked leaks",
                  report.max_rel_error, report.worst_tensor.c_str(), report.entries, gc_secs, worst_uniform,
                  invalid, leaked)};
}

// 7. Tiny-scale supervised learning on TSP10.
Outcome tiny_learning() {
  const auto config = model::load_config(std::string(NETSP_CONFIG_DIR) + "/tsp10_tiny.json");
  const auto t0 = Clock::now();
  const auto train_set = label(generate_uniform(10, 10000, 1001), Oracle::held_karp);
  const auto result = model::train(train_set, config);
  const double train_secs = seconds_since(t0);

  const auto test = generate_uniform(10, 1000, 2002);
  const auto tours = model::decode_greedy_batch(test, result.params);
  std::vector<double> model_gap, nn_gap;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto m = build_matrix(test[i]);
    const double opt = exact::held_karp(m).length;
    model_gap.push_back(100.0 * (tour_length(m, tours[i]) - opt) / opt);
    nn_gap.push_back(100.0 * (tour_length(m, heuristics::nearest_neighbor(m)) - opt) / opt);
  }
  const auto& e = result.epoch_mean_loss;
  int rises = 0;
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (!(e[i] < e[i - 1])) ++rises;
  }
  std::string curve;
  for (double v : e) curve += fmt("%.3f ", v);
  const double mg = mean(model_gap), ng = mean(nn_gap);
  const double total = seconds_since(t0);
  return {mg < ng && rises == 0 && total <= 1800.0,
          fmt("model gap %.2f%% vs nn gap %.2f%%; %zu epochs, %d non-decreasing; train %.0fs, total %.0fs; "
              "epoch means: ",
              mg, ng, e.size(), rises, train_secs, total) +
              curve};
}

// 8. Two identical CLI pipelines produce identical bytes.
Outcome pipeline_determinism() {
  std::vector<std::string> dirs = {scratch("run-a"), scratch("run-b")};
  for (const auto& d : dirs) {
    // Relative paths keep the checkpoint's method label identical across runs.
    const std::vector<std::string> steps = {
        "gen --n 10 --count 2000 --seed 81 --out train.jsonl",
        "gen --n 10 --count 200 --seed 82 --out test.jsonl",
        "label --in train.jsonl --oracle held_karp --out labeled.jsonl",
        "train --data labeled.jsonl --out-checkpoint model.bin --log loss.csv --max-steps 500 --epochs 1000 --quiet",
        "eval --data test.jsonl --methods nn,farthest-insertion,model:model.bin --oracle held-karp "
        "--out-csv records.csv --table-csv table.csv --no-timing",
    };
    for (const auto& s : steps) {
      const auto r = cli(s + " > /dev/null", d);
      if (r.code != 0) return {false, "command failed (" + std::to_string(r.code) + "): netsp " + s};
    }
  }
  const char* files[] = {"train.jsonl", "test.jsonl", "labeled.jsonl", "loss.csv", "model.bin",
                         "records.csv", "table.csv"};
  std::string detail;
  bool ok = true;
  for (const char* f : files) {
    const auto a = slurp(dirs[0] + "/" + f);
    const auto b = slurp(dirs[1] + "/" + f);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += fmt("%s %s (%zu B) ", f, same ? "identical" : "DIFFERENT", a.size());
  }
  const auto log = slurp(dirs[0] + "/loss.csv");
  const long lines = std::count(log.begin(), log.end(), '\n');
  ok = ok && lines == 501;
  return {ok, detail + fmt("; loss log has %ld steps", lines - 1)};
}

// 9. Form-B scale invariance and the CLI hardness ranking.
Outcome hardness() {
  double worst = 0.0;
  std::vector<Instance> insts;
  for (const auto& [name, _] : kKnownOptima) {
    insts.push_back(tsplib::to_instance(tsplib::load_instance(fixture(name + ".tsp"))));
  }
  for (auto& inst : generate_uniform(50, 20, 909)) insts.push_back(inst);
  for (const auto& inst : insts) {
    const auto m = build_matrix(inst);
    const double len = tour_length(m, heuristics::nearest_neighbor(m));
    for (auto area : {AreaConvention::bbox, AreaConvention::hull}) {
      const double base = hardness_indicator(inst, len, area).indicator;
      for (double s : {0.5, 2.0, 10.0}) {
        Instance scaled = inst;
        for (auto& p : scaled.points) p = Point(s * p[0], s * p[1]);
        const double v = hardness_indicator(scaled, s * len, area).indicator;
        worst = std::max(worst, std::abs(v - base) / base);
      }
    }
  }
  std::string files;
  for (const auto& [name, _] : kKnownOptima) files += " " + fixture(name + ".tsp");
  const auto r = cli("hardness --tsplib" + files + " --form B --area hull --tour-source fixture");
  std::string ranking;
  const auto at = r.out.find("hardest-first");
  if (at != std::string::npos) ranking = r.out.substr(at, r.out.find('\n', at) - at);
  bool all_named = !ranking.empty();
  for (const auto& [name, _] : kKnownOptima) all_named = all_named && ranking.find(name) != std::string::npos;
  return {worst <= 1e-12 && r.code == 0 && all_named,
          fmt("worst relative change %.2e over %zu instances; ", worst, insts.size()) + ranking};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"TSPLIB optimum verification", tsplib_optima}},
      {2, {"exact solver cross-validation", exact_cross_validation}},
      {3, {"TSP20 mean optimum", tsp20_optimum}},
      {4, {"heuristic mean tour lengths", heuristic_rows}},
      {5, {"approximation-ratio properties", approximation_bounds}},
      {6, {"model gradient suite", model_gradients}},
      {7, {"tiny-scale learning", tiny_learning}},
      {8, {"pipeline determinism", pipeline_determinism}},
      {9, {"hardness indicator", hardness}},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  if (only != 0 && !criteria.count(only)) {
    std::fprintf(stderr, "usage: %s [--only 1..9]\n", argv[0]);
    return 2;
  }
  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (only != 0 && id != only) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id, entry.first, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
