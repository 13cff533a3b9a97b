#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netsp/geometry.hpp"
#include "netsp/instances.hpp"

namespace netsp::harness {

struct EvalRecord {
  std::string instance_id;
  std::string method;
  double tour_len = 0.0;
  std::optional<double> opt_len;
  std::optional<double> gap_pct;
  double wall_ms = 0.0;
};

/// An instance plus its reference tour when one is bundled.
struct EvalInstance {
  Instance instance;
  std::optional<Tour> fixture;
};

enum class OptimumSource { none, held_karp, fixture };

std::string_view to_string(OptimumSource s);
OptimumSource optimum_source_from_string(std::string_view name);

struct EvalOptions {
  bool measure_time = true;  // false records wall_ms = 0 for reproducible output
  std::size_t model_batch = 256;
};

/// Method names accepted by evaluate() besides "model:<checkpoint>".
const std::vector<std::string>& builtin_methods();

/// Throws a config error for names that are neither built in nor model:<path>.
void validate_method(const std::string& method);

/// Runs one built-in method. `fixture` is used only by the "fixture" method.
Tour run_method(const std::string& method, const DistanceMatrix& m,
                const std::optional<Tour>& fixture = std::nullopt);

/// Every method on every instance; records come back instance-major in the
/// given method order, independent of scheduling.
std::vector<EvalRecord> evaluate(const std::vector<EvalInstance>& instances,
                                 const std::vector<std::string>& methods,
                                 OptimumSource oracle, const EvalOptions& options = {});

struct TableRow {
  std::string method;
  std::size_t count = 0;
  double mean_tour_len = 0.0;
  std::optional<double> mean_gap_pct;  // over records that carry a gap
  double mean_wall_ms = 0.0;
};

/// One row per method in order of first appearance; sums run in record order.
std::vector<TableRow> table(const std::vector<EvalRecord>& records);

std::string records_csv(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> parse_records_csv(std::string_view text);
std::string table_csv(const std::vector<TableRow>& rows);
std::string table_text(const std::vector<TableRow>& rows);

/// Every *.tsp in `dir` (sorted by name) with its .opt.tour when present.
std::vector<EvalInstance> load_tsplib_dir(const std::string& dir);

struct FixtureCheck {
  std::string name;
  double length = 0.0;
  std::optional<double> expected;
  bool ok = false;
  std::string detail;  // empty when ok
};

/// Checks each .opt.tour in `dir` against `expected.json` ({name: length});
/// fixtures without an expected value are checked for validity only.
std::vector<FixtureCheck> check_fixtures(const std::string& dir);

}  // namespace netsp::harness
