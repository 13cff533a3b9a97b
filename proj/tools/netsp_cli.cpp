// Command-line front end. Talks to the library only through the C API.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "netsp/netsp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Reports a library failure; configuration mistakes count as usage errors.
int report(netsp_status s) {
  std::cerr << "error: " << netsp_status_name(s) << ": " << netsp_last_error() << '\n';
  return s == NETSP_ERR_CONFIG || s == NETSP_ERR_ARGUMENT ? kExitUsage : kExitFailure;
}

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { netsp_free_string(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

struct InstanceHandle {
  netsp_instance* ptr = nullptr;
  ~InstanceHandle() { netsp_instance_free(ptr); }
};

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return false;
  }
  return true;
}

std::string fmt_len(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Tour of `inst` from the named source: "fixture" reads the sibling
// .opt.tour, "model:<ckpt>" decodes, anything else is a solver method.
netsp_status tour_from_source(const netsp_instance* inst, const std::string& tsp_path,
                              const std::string& source, std::vector<int>& order) {
  const size_t n = netsp_instance_size(inst);
  order.assign(n, 0);
  if (source == "fixture") {
    std::filesystem::path p(tsp_path);
    p.replace_extension(".opt.tour");
    size_t got = 0;
    netsp_status s = netsp_load_tour(p.string().c_str(), order.data(), order.size(), &got);
    if (s == NETSP_OK && got != n) {
      std::cerr << "error: " << p.string() << " has " << got << " cities, instance has " << n
                << '\n';
      return NETSP_ERR_VALIDITY;
    }
    return s;
  }
  if (source.rfind("model:", 0) == 0) {
    netsp_model* model = nullptr;
    netsp_status s = netsp_model_load(source.substr(6).c_str(), &model);
    if (s != NETSP_OK) return s;
    s = netsp_model_decode(model, inst, order.data());
    netsp_model_free(model);
    return s;
  }
  double len = 0.0;
  return netsp_solve(inst, source.c_str(), order.data(), &len);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TSP learning-to-optimize laboratory"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate uniform random instances (JSONL)");
  size_t gen_n = 0, gen_count = 0;
  uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Cities per instance")->required()->check(CLI::Range(2, 100000));
  gen->add_option("--count", gen_count, "Number of instances")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--out", gen_out, "Output JSONL path")->required();

  // label
  auto* lab = app.add_subcommand("label", "Attach oracle tours to instances");
  std::string lab_in, lab_oracle, lab_out, lab_sidecar;
  unsigned lab_restarts = 1;
  uint64_t lab_seed = 0;
  lab->add_option("--in", lab_in, "Input JSONL instances")->required();
  lab->add_option("--oracle", lab_oracle, "BRUTE, HELD_KARP, HEURISTIC_BEST or EXTERNAL")->required();
  lab->add_option("--out", lab_out, "Output labeled JSONL")->required();
  lab->add_option("--restarts", lab_restarts, "Restarts for HEURISTIC_BEST")->check(CLI::PositiveNumber);
  lab->add_option("--seed", lab_seed, "Seed for randomized restarts");
  lab->add_option("--sidecar", lab_sidecar, "JSONL of {id, tour} for EXTERNAL");

  // train
  auto* tr = app.add_subcommand("train", "Train the pointer model on labeled pairs");
  std::string tr_data, tr_config, tr_ckpt, tr_log;
  long tr_max_steps = -1;
  int tr_epochs = 0;
  bool tr_quiet = false;
  tr->add_option("--data", tr_data, "Labeled JSONL dataset")->required();
  tr->add_option("--config", tr_config, "Model config JSON (defaults when omitted)");
  tr->add_option("--out-checkpoint", tr_ckpt, "Checkpoint output path")->required();
  tr->add_option("--log", tr_log, "Training log CSV (step,lr,loss)");
  tr->add_option("--max-steps", tr_max_steps, "Override the step cap")->check(CLI::NonNegativeNumber);
  tr->add_option("--epochs", tr_epochs, "Override the epoch count")->check(CLI::PositiveNumber);
  tr->add_flag("--quiet", tr_quiet, "No progress output");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate methods and write result tables");
  std::string ev_data, ev_dir, ev_methods, ev_oracle = "none", ev_csv, ev_table;
  bool ev_no_timing = false;
  auto* ev_data_opt = ev->add_option("--data", ev_data, "JSONL instances");
  auto* ev_dir_opt = ev->add_option("--tsplib-dir", ev_dir, "Directory of .tsp files");
  ev_data_opt->excludes(ev_dir_opt);
  ev->add_option("--methods", ev_methods, "Comma-separated methods")->required();
  ev->add_option("--oracle", ev_oracle, "held-karp, fixture or none");
  ev->add_option("--out-csv", ev_csv, "Per-record CSV output")->required();
  ev->add_option("--table-csv", ev_table, "Aggregated per-method CSV output");
  ev->add_flag("--no-timing", ev_no_timing, "Record wall_ms as 0 for reproducible output");

  // solve
  auto* so = app.add_subcommand("solve", "Solve one TSPLIB instance");
  std::string so_file, so_method;
  so->add_option("--tsplib", so_file, "TSPLIB .tsp file")->required();
  so->add_option("--method", so_method, "Method name or model:<checkpoint>")->required();

  // hardness
  auto* hd = app.add_subcommand("hardness", "Hardness indicator of TSPLIB instances");
  std::vector<std::string> hd_files;
  std::string hd_form = "B", hd_area = "bbox", hd_source = "fixture";
  hd->add_option("--tsplib", hd_files, "One or more .tsp files")->required();
  hd->add_option("--form", hd_form, "A = sqrt(l/(N*A)), B = l/sqrt(N*A)")
      ->check(CLI::IsMember({"A", "B"}));
  hd->add_option("--area", hd_area, "Area convention")->check(CLI::IsMember({"bbox", "hull"}));
  hd->add_option("--tour-source", hd_source, "fixture, a method name or model:<checkpoint>");

  // tsplib-check
  auto* tc = app.add_subcommand("tsplib-check", "Verify bundled .opt.tour lengths");
  std::string tc_dir = "data/tsplib";
  tc->add_option("--dir", tc_dir, "Fixture directory");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of model gradients");
  int gc_trials = 100, gc_hidden = 8, gc_glimpses = 1, gc_width = 1;
  size_t gc_n = 5;
  uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  gc->add_option("--trials", gc_trials, "Random trials")->check(CLI::PositiveNumber);
  gc->add_option("--n", gc_n, "Cities per trial")->check(CLI::Range(2, 6));
  gc->add_option("--hidden", gc_hidden, "Hidden size")->check(CLI::Range(1, 8));
  gc->add_option("--glimpses", gc_glimpses, "Glimpse rounds")->check(CLI::NonNegativeNumber);
  gc->add_option("--kernel-width", gc_width, "Embedding kernel width (odd)");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_option("--tolerance", gc_tol, "Maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  netsp_status s = NETSP_OK;

  if (*gen) {
    s = netsp_generate(gen_n, gen_count, gen_seed, gen_out.c_str());
    return s == NETSP_OK ? kExitOk : report(s);
  }

  if (*lab) {
    s = netsp_label(lab_in.c_str(), lab_oracle.c_str(), lab_restarts, lab_seed,
                    lab_sidecar.empty() ? nullptr : lab_sidecar.c_str(), lab_out.c_str());
    return s == NETSP_OK ? kExitOk : report(s);
  }

  if (*tr) {
    auto progress = [](long step, double lr, double loss, void* user) {
      if (*static_cast<bool*>(user) || step % 50 != 0) return;
      std::fprintf(stderr, "step %ld lr %.6g loss %.6f\n", step, lr, loss);
    };
    s = netsp_train(tr_data.c_str(), tr_config.empty() ? nullptr : tr_config.c_str(), tr_max_steps,
                    tr_epochs, tr_ckpt.c_str(), tr_log.empty() ? nullptr : tr_log.c_str(),
                    progress, &tr_quiet);
    return s == NETSP_OK ? kExitOk : report(s);
  }

  if (*ev) {
    if (ev_data.empty() == ev_dir.empty()) {
      std::cerr << "error: eval needs exactly one of --data and --tsplib-dir\n";
      return kExitUsage;
    }
    if ((s = netsp_validate_oracle(ev_oracle.c_str())) != NETSP_OK) return report(s);
    OwnedString rec, tab, txt;
    s = netsp_evaluate(ev_data.empty() ? nullptr : ev_data.c_str(),
                       ev_dir.empty() ? nullptr : ev_dir.c_str(), ev_methods.c_str(),
                       ev_oracle.c_str(), ev_no_timing ? 0 : 1, &rec.ptr, &tab.ptr, &txt.ptr);
    if (s != NETSP_OK) return report(s);
    if (!write_file(ev_csv, rec.str())) return kExitFailure;
    if (!ev_table.empty() && !write_file(ev_table, tab.str())) return kExitFailure;
    std::cout << txt.str();
    return kExitOk;
  }

  if (*so) {
    if ((s = netsp_validate_method(so_method.c_str())) != NETSP_OK) return report(s);
    InstanceHandle inst;
    if ((s = netsp_instance_load_tsplib(so_file.c_str(), &inst.ptr)) != NETSP_OK) return report(s);
    std::vector<int> order;
    if ((s = tour_from_source(inst.ptr, so_file, so_method, order)) != NETSP_OK) return report(s);
    double len = 0.0;
    if ((s = netsp_tour_length(inst.ptr, order.data(), order.size(), &len)) != NETSP_OK) {
      return report(s);
    }
    OwnedString id;
    netsp_instance_id(inst.ptr, &id.ptr);
    std::cout << id.str() << ' ' << so_method << ' ' << fmt_len(len) << '\n' << "tour";
    for (int c : order) std::cout << ' ' << c + 1;
    std::cout << '\n';
    return kExitOk;
  }

  if (*hd) {
    if (hd_source != "fixture" && (s = netsp_validate_method(hd_source.c_str())) != NETSP_OK) {
      return report(s);
    }
    struct Row {
      std::string id;
      double length, indicator, rank;
    };
    std::vector<Row> rows;
    for (const auto& file : hd_files) {
      InstanceHandle inst;
      if ((s = netsp_instance_load_tsplib(file.c_str(), &inst.ptr)) != NETSP_OK) return report(s);
      std::vector<int> order;
      if ((s = tour_from_source(inst.ptr, file, hd_source, order)) != NETSP_OK) return report(s);
      Row r{};
      if ((s = netsp_tour_length(inst.ptr, order.data(), order.size(), &r.length)) != NETSP_OK ||
          (s = netsp_hardness(inst.ptr, r.length, hd_form.c_str(), hd_area.c_str(), &r.indicator,
                              &r.rank)) != NETSP_OK) {
        return report(s);
      }
      OwnedString id;
      netsp_instance_id(inst.ptr, &id.ptr);
      r.id = id.str();
      rows.push_back(r);
    }
    std::printf("%-12s %12s %12s %12s\n", "instance", "tour_len", "indicator", "rank");
    for (const auto& r : rows) {
      std::printf("%-12s %12s %12.6f %12.6f\n", r.id.c_str(), fmt_len(r.length).c_str(),
                  r.indicator, r.rank);
    }
    std::vector<Row> ordered = rows;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    std::printf("hardest-first (form %s, area %s):", hd_form.c_str(), hd_area.c_str());
    for (const auto& r : ordered) std::printf(" %s", r.id.c_str());
    std::printf("\n");
    return kExitOk;
  }

  if (*tc) {
    OwnedString rep;
    int all_ok = 0;
    if ((s = netsp_tsplib_check(tc_dir.c_str(), &rep.ptr, &all_ok)) != NETSP_OK) return report(s);
    std::cout << rep.str();
    return all_ok ? kExitOk : kExitFailure;
  }

  if (*gc) {
    OwnedString rep;
    s = netsp_grad_check(gc_trials, gc_n, gc_hidden, gc_glimpses, gc_width, gc_seed, &rep.ptr);
    if (s != NETSP_OK) return report(s);
    std::cout << rep.str() << '\n';
    const std::string text = rep.str();
    const auto pos = text.find("\"max_rel_error\":");
    const double err = std::stod(text.substr(pos + 16));
    if (err > gc_tol) {
      std::cerr << "gradient check failed: max relative error " << err << " > " << gc_tol << '\n';
      return kExitFailure;
    }
    return kExitOk;
  }
  return kExitUsage;
}
