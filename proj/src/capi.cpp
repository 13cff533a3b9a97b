#include "netsp/netsp.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "netsp/error.hpp"
#include "netsp/exact.hpp"
#include "netsp/geometry.hpp"
#include "netsp/harness.hpp"
#include "netsp/instances.hpp"
#include "netsp/model.hpp"
#include "netsp/tsplib.hpp"

struct netsp_instance {
  netsp::Instance instance;
  netsp::DistanceMatrix matrix;
};

struct netsp_model {
  netsp::model::Params<float> params;
};

namespace {

thread_local std::string g_last_error;

netsp_status status_of(netsp::ErrorKind kind) {
  using netsp::ErrorKind;
  switch (kind) {
    case ErrorKind::input: return NETSP_ERR_INPUT;
    case ErrorKind::validity: return NETSP_ERR_VALIDITY;
    case ErrorKind::parse: return NETSP_ERR_PARSE;
    case ErrorKind::size: return NETSP_ERR_SIZE;
    case ErrorKind::config: return NETSP_ERR_CONFIG;
    case ErrorKind::state: return NETSP_ERR_STATE;
    case ErrorKind::shape: return NETSP_ERR_SHAPE;
    case ErrorKind::load: return NETSP_ERR_LOAD;
    case ErrorKind::degenerate_area: return NETSP_ERR_DEGENERATE_AREA;
    case ErrorKind::io: return NETSP_ERR_IO;
  }
  return NETSP_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
netsp_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NETSP_OK;
  } catch (const netsp::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return NETSP_ERR_INTERNAL;
}

#define NETSP_REQUIRE_ARG(cond, msg) \
  do {                               \
    if (!(cond)) {                   \
      g_last_error = (msg);          \
      return NETSP_ERR_ARGUMENT;     \
    }                                \
  } while (0)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_methods(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

netsp_instance* wrap(netsp::Instance inst) {
  auto out = std::make_unique<netsp_instance>();
  out->matrix = netsp::build_matrix(inst);
  out->instance = std::move(inst);
  return out.release();
}

}  // namespace

extern "C" {

const char* netsp_last_error(void) { return g_last_error.c_str(); }

const char* netsp_status_name(netsp_status status) {
  switch (status) {
    case NETSP_OK: return "ok";
    case NETSP_ERR_INPUT: return "input error";
    case NETSP_ERR_VALIDITY: return "validity error";
    case NETSP_ERR_PARSE: return "parse error";
    case NETSP_ERR_SIZE: return "size error";
    case NETSP_ERR_CONFIG: return "config error";
    case NETSP_ERR_STATE: return "state error";
    case NETSP_ERR_SHAPE: return "shape error";
    case NETSP_ERR_LOAD: return "load error";
    case NETSP_ERR_DEGENERATE_AREA: return "degenerate-area error";
    case NETSP_ERR_IO: return "io error";
    case NETSP_ERR_ARGUMENT: return "argument error";
    case NETSP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void netsp_free_string(char* s) { std::free(s); }

netsp_status netsp_instance_create(const double* xy, size_t n, const char* metric,
                                   const char* id, netsp_instance** out) {
  NETSP_REQUIRE_ARG(xy && metric && out, "null argument");
  return guarded([&] {
    netsp::Instance inst;
    inst.metric.kind = netsp::metric_kind_from_string(metric);
    inst.id = id ? id : "";
    for (size_t i = 0; i < n; ++i) inst.points.push_back(netsp::Point{{xy[2 * i], xy[2 * i + 1]}});
    *out = wrap(std::move(inst));
  });
}

netsp_status netsp_instance_load_tsplib(const char* path, netsp_instance** out) {
  NETSP_REQUIRE_ARG(path && out, "null argument");
  return guarded([&] {
    *out = wrap(netsp::tsplib::to_instance(netsp::tsplib::load_instance(path)));
  });
}

void netsp_instance_free(netsp_instance* instance) { delete instance; }

size_t netsp_instance_size(const netsp_instance* instance) {
  return instance ? instance->instance.size() : 0;
}

netsp_status netsp_instance_id(const netsp_instance* instance, char** out) {
  NETSP_REQUIRE_ARG(instance && out, "null argument");
  return guarded([&] { *out = dup_string(instance->instance.id); });
}

netsp_status netsp_load_tour(const char* path, int* order, size_t cap, size_t* n) {
  NETSP_REQUIRE_ARG(path && n, "null argument");
  std::vector<int> tour;
  const netsp_status st = guarded([&] { tour = netsp::tsplib::load_tour(path).tour.order; });
  if (st != NETSP_OK) return st;
  *n = tour.size();
  NETSP_REQUIRE_ARG(order != nullptr && cap >= tour.size(), "tour buffer too small");
  std::copy(tour.begin(), tour.end(), order);
  return NETSP_OK;
}

netsp_status netsp_tour_length(const netsp_instance* instance, const int* order, size_t n,
                               double* length) {
  NETSP_REQUIRE_ARG(instance && order && length, "null argument");
  return guarded([&] {
    *length = netsp::tour_length(instance->matrix, std::span<const int>(order, n));
  });
}

netsp_status netsp_solve(const netsp_instance* instance, const char* method, int* order,
                         double* length) {
  NETSP_REQUIRE_ARG(instance && method && order && length, "null argument");
  return guarded([&] {
    const netsp::Tour t = netsp::harness::run_method(method, instance->matrix);
    std::copy(t.order.begin(), t.order.end(), order);
    *length = netsp::tour_length(instance->matrix, t);
  });
}

netsp_status netsp_validate_method(const char* method) {
  NETSP_REQUIRE_ARG(method, "null argument");
  return guarded([&] { netsp::harness::validate_method(method); });
}

netsp_status netsp_validate_oracle(const char* oracle) {
  NETSP_REQUIRE_ARG(oracle, "null argument");
  return guarded([&] { netsp::harness::optimum_source_from_string(oracle); });
}

netsp_status netsp_hardness(const netsp_instance* instance, double tour_len, const char* form,
                            const char* area, double* indicator, double* rank) {
  NETSP_REQUIRE_ARG(instance && form && area && indicator && rank, "null argument");
  return guarded([&] {
    const std::string f = form, a = area;
    netsp::HardnessForm hf;
    if (f == "A" || f == "a") hf = netsp::HardnessForm::sqrt_ratio;
    else if (f == "B" || f == "b") hf = netsp::HardnessForm::ratio;
    else throw netsp::Error(netsp::ErrorKind::config, "form must be A or B");
    netsp::AreaConvention ac;
    if (a == "bbox") ac = netsp::AreaConvention::bbox;
    else if (a == "hull") ac = netsp::AreaConvention::hull;
    else throw netsp::Error(netsp::ErrorKind::config, "area must be bbox or hull");
    const auto r = netsp::hardness_indicator(instance->instance, tour_len, ac, hf);
    *indicator = r.indicator;
    *rank = r.rank;
  });
}

netsp_status netsp_generate(size_t n, size_t count, uint64_t seed, const char* out_path) {
  NETSP_REQUIRE_ARG(out_path, "null argument");
  return guarded([&] {
    netsp::save_instances(out_path, netsp::generate_uniform(n, count, seed));
  });
}

netsp_status netsp_label(const char* in_path, const char* oracle, unsigned restarts,
                         uint64_t seed, const char* sidecar, const char* out_path) {
  NETSP_REQUIRE_ARG(in_path && oracle && out_path, "null argument");
  return guarded([&] {
    netsp::LabelConfig cfg;
    cfg.restarts = restarts;
    cfg.seed = seed;
    if (sidecar) cfg.sidecar_path = sidecar;
    const auto kind = netsp::oracle_from_string(oracle);
    netsp::save_dataset(out_path, netsp::label(netsp::load_instances(in_path), kind, cfg));
  });
}

netsp_status netsp_train(const char* data_path, const char* config_path, long max_steps,
                         int epochs, const char* checkpoint_out, const char* log_out,
                         netsp_progress_fn progress, void* user) {
  NETSP_REQUIRE_ARG(data_path && checkpoint_out, "null argument");
  return guarded([&] {
    namespace m = netsp::model;
    m::ModelConfig cfg = config_path ? m::load_config(config_path) : m::ModelConfig{};
    if (max_steps >= 0) cfg.max_steps = max_steps;
    if (epochs > 0) cfg.epochs = epochs;
    cfg.validate();
    const auto data = netsp::load_dataset(data_path);
    std::function<void(const m::TrainLogEntry&)> cb;
    if (progress) cb = [&](const m::TrainLogEntry& e) { progress(e.step, e.lr, e.loss, user); };
    const auto result = m::train(data, cfg, cb);
    m::save_params(checkpoint_out, result.params);
    if (log_out) m::write_training_log(log_out, result.log);
  });
}

netsp_status netsp_model_load(const char* path, netsp_model** out) {
  NETSP_REQUIRE_ARG(path && out, "null argument");
  return guarded([&] {
    auto m = std::make_unique<netsp_model>();
    m->params = netsp::model::load_params(path);
    *out = m.release();
  });
}

void netsp_model_free(netsp_model* model) { delete model; }

netsp_status netsp_model_decode(const netsp_model* model, const netsp_instance* instance,
                                int* order) {
  NETSP_REQUIRE_ARG(model && instance && order, "null argument");
  return guarded([&] {
    const auto t = netsp::model::decode_greedy<float>(instance->instance, model->params);
    std::copy(t.order.begin(), t.order.end(), order);
  });
}

netsp_status netsp_grad_check(int trials, size_t n, int hidden_dim, int glimpses,
                              int kernel_width, uint64_t seed, char** report_json) {
  NETSP_REQUIRE_ARG(report_json, "null argument");
  return guarded([&] {
    netsp::model::ModelConfig cfg;
    cfg.hidden_dim = hidden_dim;
    cfg.glimpses = glimpses;
    cfg.embed_kernel_width = kernel_width;
    cfg.precision = netsp::model::Precision::f64;
    const auto r = netsp::model::grad_check(cfg, trials, n, seed);
    nlohmann::json j{{"trials", r.trials},
                     {"entries", r.entries},
                     {"max_rel_error", r.max_rel_error},
                     {"worst_tensor", r.worst_tensor}};
    for (const auto& [name, err] : r.per_tensor) j["per_tensor"][name] = err;
    *report_json = dup_string(j.dump(2));
  });
}

netsp_status netsp_evaluate(const char* data_path, const char* tsplib_dir, const char* methods,
                            const char* oracle, int measure_time, char** records_csv,
                            char** table_csv, char** table_text) {
  NETSP_REQUIRE_ARG(methods && oracle, "null argument");
  NETSP_REQUIRE_ARG((data_path == nullptr) != (tsplib_dir == nullptr),
                    "exactly one of data path and TSPLIB directory is required");
  return guarded([&] {
    namespace hn = netsp::harness;
    std::vector<hn::EvalInstance> instances;
    if (data_path) {
      for (auto& inst : netsp::load_instances(data_path)) {
        instances.push_back(hn::EvalInstance{std::move(inst), std::nullopt});
      }
    } else {
      instances = hn::load_tsplib_dir(tsplib_dir);
    }
    hn::EvalOptions opts;
    opts.measure_time = measure_time != 0;
    const auto records = hn::evaluate(instances, split_methods(methods),
                                      hn::optimum_source_from_string(oracle), opts);
    const auto rows = hn::table(records);
    std::string rec = hn::records_csv(records), tab = hn::table_csv(rows),
                txt = hn::table_text(rows);
    if (records_csv) *records_csv = dup_string(rec);
    if (table_csv) *table_csv = dup_string(tab);
    if (table_text) *table_text = dup_string(txt);
  });
}

netsp_status netsp_tsplib_check(const char* dir, char** report, int* all_ok) {
  NETSP_REQUIRE_ARG(dir && report && all_ok, "null argument");
  return guarded([&] {
    const auto checks = netsp::harness::check_fixtures(dir);
    std::ostringstream out;
    bool ok = !checks.empty();
    for (const auto& c : checks) {
      out << c.name << ' ';
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.10g", c.length);
      out << buf << (c.ok ? " OK" : " FAIL");
      if (c.ok && !c.expected) out << " (valid tour, no reference value)";
      if (!c.detail.empty()) out << ": " << c.detail;
      out << '\n';
      ok = ok && c.ok;
    }
    if (checks.empty()) out << "no .opt.tour fixtures found in " << dir << '\n';
    *all_ok = ok ? 1 : 0;
    *report = dup_string(out.str());
  });
}

}  // extern "C"
