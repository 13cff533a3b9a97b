#include "netsp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "netsp/error.hpp"
#include "netsp/exact.hpp"
#include "netsp/heuristics.hpp"
#include "netsp/model.hpp"
#include "netsp/parallel.hpp"
#include "netsp/tsplib.hpp"

namespace netsp::harness {

namespace fs = std::filesystem;
namespace h = netsp::heuristics;

namespace {

constexpr std::string_view kModelPrefix = "model:";

bool is_model(const std::string& method) { return method.rfind(kModelPrefix, 0) == 0; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string_view to_string(OptimumSource s) {
  switch (s) {
    case OptimumSource::none: return "none";
    case OptimumSource::held_karp: return "held-karp";
    case OptimumSource::fixture: return "fixture";
  }
  return "none";
}

OptimumSource optimum_source_from_string(std::string_view name) {
  if (name == "none") return OptimumSource::none;
  if (name == "held-karp") return OptimumSource::held_karp;
  if (name == "fixture") return OptimumSource::fixture;
  fail(ErrorKind::config, "unknown oracle '" + std::string(name) +
                              "' (expected held-karp, fixture or none)");
}

const std::vector<std::string>& builtin_methods() {
  static const std::vector<std::string> names = {
      "nn",           "nearest-insertion", "farthest-insertion", "random-insertion",
      "cheapest-insertion", "cheapest-link", "mst",              "christofides",
      "2opt",         "held-karp",         "brute-force",        "fixture"};
  return names;
}

void validate_method(const std::string& method) {
  if (is_model(method)) {
    if (method.size() == kModelPrefix.size()) {
      fail(ErrorKind::config, "model method needs a checkpoint path: model:<file>");
    }
    return;
  }
  const auto& names = builtin_methods();
  if (std::find(names.begin(), names.end(), method) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorKind::config,
         "unknown method '" + method + "' (known: " + known + ", model:<checkpoint>)");
  }
}

Tour run_method(const std::string& method, const DistanceMatrix& m,
                const std::optional<Tour>& fixture) {
  if (method == "nn") return h::nearest_neighbor(m);
  if (method == "nearest-insertion") return h::insertion(m, h::InsertionVariant::nearest);
  if (method == "farthest-insertion") return h::insertion(m, h::InsertionVariant::farthest);
  if (method == "random-insertion") return h::insertion(m, h::InsertionVariant::random);
  if (method == "cheapest-insertion") return h::insertion(m, h::InsertionVariant::cheapest);
  if (method == "cheapest-link") return h::cheapest_link(m);
  if (method == "mst") return h::mst_walk(m);
  if (method == "christofides") return h::christofides(m).tour;
  if (method == "2opt") {
    return h::two_opt(m, h::nearest_neighbor(m), h::TwoOptMode::best_improvement);
  }
  if (method == "held-karp") return exact::held_karp(m).tour;
  if (method == "brute-force") return exact::brute_force(m).tour;
  if (method == "fixture") {
    if (!fixture) fail(ErrorKind::config, "method 'fixture' needs a bundled .opt.tour");
    require_permutation(fixture->order, m.size());
    return *fixture;
  }
  validate_method(method);
  fail(ErrorKind::config, "method '" + method + "' cannot run on a bare distance matrix");
}

std::vector<EvalRecord> evaluate(const std::vector<EvalInstance>& instances,
                                 const std::vector<std::string>& methods,
                                 OptimumSource oracle, const EvalOptions& options) {
  if (methods.empty()) fail(ErrorKind::config, "no methods given");
  for (const auto& m : methods) validate_method(m);

  const std::size_t count = instances.size();
  std::vector<DistanceMatrix> matrices(count);
  std::vector<std::optional<double>> optimum(count);
  parallel_for(count, [&](std::size_t i) {
    const EvalInstance& e = instances[i];
    matrices[i] = build_matrix(e.instance);
    switch (oracle) {
      case OptimumSource::none:
        break;
      case OptimumSource::held_karp:
        if (e.instance.size() > exact::kHeldKarpMaxCities) {
          fail(ErrorKind::config, "held-karp oracle is limited to n <= " +
                                      std::to_string(exact::kHeldKarpMaxCities) + "; '" +
                                      e.instance.id + "' has " +
                                      std::to_string(e.instance.size()) + " cities");
        }
        optimum[i] = exact::held_karp(matrices[i]).length;
        break;
      case OptimumSource::fixture:
        if (!e.fixture) {
          fail(ErrorKind::config, "no .opt.tour fixture for '" + e.instance.id + "'");
        }
        optimum[i] = tour_length(matrices[i], *e.fixture);
        break;
    }
  });

  const std::size_t width = methods.size();
  std::vector<EvalRecord> records(count * width);
  auto fill = [&](std::size_t i, std::size_t k, const Tour& tour, double ms) {
    EvalRecord& r = records[i * width + k];
    r.instance_id = instances[i].instance.id;
    r.method = methods[k];
    r.tour_len = tour_length(matrices[i], tour);
    r.opt_len = optimum[i];
    if (optimum[i] && *optimum[i] > 0.0) {
      r.gap_pct = 100.0 * (r.tour_len - *optimum[i]) / *optimum[i];
    }
    r.wall_ms = options.measure_time ? ms : 0.0;
  };

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      if (!is_model(methods[k])) jobs.emplace_back(i, k);
    }
  }
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto [i, k] = jobs[j];
    const double start = now_ms();
    Tour tour = run_method(methods[k], matrices[i], instances[i].fixture);
    fill(i, k, tour, now_ms() - start);
  });

  // Model methods decode in size-grouped batches; the batch wall time is
  // spread evenly over its instances.
  for (std::size_t k = 0; k < width; ++k) {
    if (!is_model(methods[k]) || count == 0) continue;
    const auto params = model::load_params(methods[k].substr(kModelPrefix.size()));
    std::vector<Instance> plain;
    plain.reserve(count);
    for (const auto& e : instances) plain.push_back(e.instance);
    const double start = now_ms();
    const auto tours = model::decode_greedy_batch<float>(plain, params, options.model_batch);
    const double per = (now_ms() - start) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) fill(i, k, tours[i], per);
  }
  return records;
}

std::vector<TableRow> table(const std::vector<EvalRecord>& records) {
  if (records.empty()) fail(ErrorKind::input, "cannot tabulate an empty record set");
  std::vector<TableRow> rows;
  std::map<std::string, std::size_t> index;
  std::vector<double> gap_sum;
  std::vector<std::size_t> gap_count;
  for (const auto& r : records) {
    auto [it, fresh] = index.emplace(r.method, rows.size());
    if (fresh) {
      TableRow fresh_row;
      fresh_row.method = r.method;
      rows.push_back(std::move(fresh_row));
      gap_sum.push_back(0.0);
      gap_count.push_back(0);
    }
    TableRow& row = rows[it->second];
    ++row.count;
    row.mean_tour_len += r.tour_len;
    row.mean_wall_ms += r.wall_ms;
    if (r.gap_pct) {
      gap_sum[it->second] += *r.gap_pct;
      ++gap_count[it->second];
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = static_cast<double>(rows[i].count);
    rows[i].mean_tour_len /= c;
    rows[i].mean_wall_ms /= c;
    if (gap_count[i]) rows[i].mean_gap_pct = gap_sum[i] / static_cast<double>(gap_count[i]);
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt_field(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::string records_csv(const std::vector<EvalRecord>& records) {
  std::string out = "instance_id,method,tour_len,opt_len,gap_pct,wall_ms\n";
  for (const auto& r : records) {
    out += csv_field(r.instance_id) + ',' + csv_field(r.method) + ',' + fmt(r.tour_len) + ',' +
           opt_field(r.opt_len) + ',' + opt_field(r.gap_pct) + ',' + fmt(r.wall_ms) + '\n';
  }
  return out;
}

std::vector<EvalRecord> parse_records_csv(std::string_view text) {
  std::vector<EvalRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto f = split_csv_line(line, line_no);
    if (f.size() != 6) {
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected 6 fields");
    }
    if (line_no == 1 && f[0] == "instance_id") continue;
    EvalRecord r;
    r.instance_id = f[0];
    r.method = f[1];
    r.tour_len = parse_number(f[2], line_no);
    if (!f[3].empty()) r.opt_len = parse_number(f[3], line_no);
    if (!f[4].empty()) r.gap_pct = parse_number(f[4], line_no);
    r.wall_ms = parse_number(f[5], line_no);
    records.push_back(std::move(r));
  }
  return records;
}

std::string table_csv(const std::vector<TableRow>& rows) {
  std::string out = "method,count,mean_tour_len,mean_gap_pct,mean_wall_ms\n";
  for (const auto& r : rows) {
    out += csv_field(r.method) + ',' + std::to_string(r.count) + ',' + fmt(r.mean_tour_len) +
           ',' + opt_field(r.mean_gap_pct) + ',' + fmt(r.mean_wall_ms) + '\n';
  }
  return out;
}

std::string table_text(const std::vector<TableRow>& rows) {
  std::size_t wm = std::string_view("method").size();
  for (const auto& r : rows) wm = std::max(wm, r.method.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %14s %10s %12s\n", static_cast<int>(wm), "method",
                "count", "tour_len", "gap_pct", "wall_ms");
  out += buf;
  for (const auto& r : rows) {
    char gap[32] = "-";
    if (r.mean_gap_pct) std::snprintf(gap, sizeof(gap), "%.2f%%", *r.mean_gap_pct);
    std::snprintf(buf, sizeof(buf), "%-*s %8zu %14.4f %10s %12.3f\n", static_cast<int>(wm),
                  r.method.c_str(), r.count, r.mean_tour_len, gap, r.mean_wall_ms);
    out += buf;
  }
  return out;
}

std::vector<EvalInstance> load_tsplib_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::io, "'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsp") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalInstance> out;
  for (const auto& path : files) {
    EvalInstance e;
    e.instance = tsplib::to_instance(tsplib::load_instance(path.string()));
    e.instance.id = path.stem().string();
    fs::path tour_path = path;
    tour_path.replace_extension(".opt.tour");
    if (fs::exists(tour_path)) {
      const auto tf = tsplib::load_tour(tour_path.string());
      if (tf.tour.order.size() != e.instance.size()) {
        fail(ErrorKind::validity, tour_path.string() + ": tour dimension does not match instance");
      }
      e.fixture = tf.tour;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<FixtureCheck> check_fixtures(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::io, "'" + dir + "' is not a directory");
  std::map<std::string, double> expected;
  const fs::path manifest = fs::path(dir) / "expected.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    try {
      const nlohmann::json manifest_json = nlohmann::json::parse(in);
      for (const auto& [name, value] : manifest_json.items()) {
        expected[name] = value.get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, manifest.string() + ": " + e.what());
    }
  }

  std::vector<fs::path> tours;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 9 &&
        name.compare(name.size() - 9, 9, ".opt.tour") == 0) {
      tours.push_back(entry.path());
    }
  }
  std::sort(tours.begin(), tours.end());

  std::vector<FixtureCheck> out;
  std::map<std::string, bool> seen;
  for (const auto& tour_path : tours) {
    const std::string file = tour_path.filename().string();
    FixtureCheck c;
    c.name = file.substr(0, file.size() - 9);
    seen[c.name] = true;
    if (auto it = expected.find(c.name); it != expected.end()) c.expected = it->second;
    try {
      const fs::path tsp = fs::path(dir) / (c.name + ".tsp");
      const Instance inst = tsplib::to_instance(tsplib::load_instance(tsp.string()));
      const auto tf = tsplib::load_tour(tour_path.string());
      const DistanceMatrix m = build_matrix(inst);
      c.length = tour_length(m, tf.tour);
      c.ok = !c.expected || c.length == *c.expected;
      if (!c.ok) c.detail = "expected " + fmt(*c.expected);
    } catch (const Error& e) {
      c.ok = false;
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  }
  for (const auto& [name, value] : expected) {
    if (seen.count(name)) continue;
    FixtureCheck c;
    c.name = name;
    c.expected = value;
    c.detail = "missing " + name + ".opt.tour";
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace netsp::harness
