#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "netsp/netsp.h"

namespace {

std::string fixture(const std::string& name) { return std::string(NETSP_FIXTURE_DIR) + "/" + name; }

std::string scratch(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("netsp-capi-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded and captures stdout.
Run cli(const std::string& args) {
  Run r;
  const std::string cmd = std::string(NETSP_CLI_PATH) + " " + args + " 2>/dev/null";
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

struct Instance {
  netsp_instance* ptr = nullptr;
  ~Instance() { netsp_instance_free(ptr); }
};

}  // namespace

TEST(CApi, InstanceAndTourLength) {
  const double xy[] = {0, 0, 1, 0, 1, 1, 0, 1};
  Instance inst;
  ASSERT_EQ(netsp_instance_create(xy, 4, "EUC2D_CONT", "sq", &inst.ptr), NETSP_OK);
  EXPECT_EQ(netsp_instance_size(inst.ptr), 4u);
  char* id = nullptr;
  ASSERT_EQ(netsp_instance_id(inst.ptr, &id), NETSP_OK);
  EXPECT_STREQ(id, "sq");
  netsp_free_string(id);

  const int order[] = {0, 2, 1, 3};
  double len = 0;
  ASSERT_EQ(netsp_tour_length(inst.ptr, order, 4, &len), NETSP_OK);
  EXPECT_NEAR(len, 2 + 2 * std::sqrt(2.0), 1e-12);
  const int bad[] = {0, 1, 1, 3};
  EXPECT_EQ(netsp_tour_length(inst.ptr, bad, 4, &len), NETSP_ERR_VALIDITY);
  EXPECT_NE(std::string(netsp_last_error()).size(), 0u);

  int best[4];
  ASSERT_EQ(netsp_solve(inst.ptr, "held-karp", best, &len), NETSP_OK);
  EXPECT_DOUBLE_EQ(len, 4.0);
  EXPECT_EQ(netsp_solve(inst.ptr, "lkh", best, &len), NETSP_ERR_CONFIG);
}

TEST(CApi, ArgumentAndMetricErrors) {
  const double xy[] = {0, 0, 1, 0};
  netsp_instance* out = nullptr;
  EXPECT_EQ(netsp_instance_create(nullptr, 2, "EUC2D_CONT", "x", &out), NETSP_ERR_ARGUMENT);
  EXPECT_EQ(netsp_instance_create(xy, 2, "MANHATTAN", "x", &out), NETSP_ERR_INPUT);
  EXPECT_EQ(out, nullptr);
  EXPECT_STREQ(netsp_status_name(NETSP_ERR_SHAPE), "shape error");
  EXPECT_STREQ(netsp_status_name(static_cast<netsp_status>(99)), "unknown status");
}

TEST(CApi, TsplibFixtureAndHardness) {
  Instance inst;
  ASSERT_EQ(netsp_instance_load_tsplib(fixture("berlin52.tsp").c_str(), &inst.ptr), NETSP_OK);
  std::vector<int> order(64);
  size_t n = 0;
  ASSERT_EQ(netsp_load_tour(fixture("berlin52.opt.tour").c_str(), order.data(), order.size(), &n), NETSP_OK);
  ASSERT_EQ(n, 52u);
  double len = 0;
  ASSERT_EQ(netsp_tour_length(inst.ptr, order.data(), n, &len), NETSP_OK);
  EXPECT_EQ(len, 7542.0);
  EXPECT_EQ(netsp_load_tour(fixture("berlin52.opt.tour").c_str(), order.data(), 10, &n), NETSP_ERR_ARGUMENT);
  EXPECT_EQ(n, 52u);

  double ind = 0, rank = 0;
  ASSERT_EQ(netsp_hardness(inst.ptr, len, "B", "hull", &ind, &rank), NETSP_OK);
  EXPECT_GT(ind, 0.0);
  EXPECT_DOUBLE_EQ(rank, std::abs(ind - 0.75));
  EXPECT_EQ(netsp_hardness(inst.ptr, len, "C", "hull", &ind, &rank), NETSP_ERR_CONFIG);
}

TEST(CApi, GradCheckReport) {
  char* json = nullptr;
  ASSERT_EQ(netsp_grad_check(2, 4, 4, 1, 1, 3, &json), NETSP_OK);
  EXPECT_NE(std::string(json).find("max_rel_error"), std::string::npos);
  netsp_free_string(json);
  EXPECT_EQ(netsp_grad_check(1, 9, 4, 1, 1, 3, &json), NETSP_ERR_CONFIG);
}

TEST(CApi, TsplibCheckAllOk) {
  char* report = nullptr;
  int ok = 0;
  ASSERT_EQ(netsp_tsplib_check(NETSP_FIXTURE_DIR, &report, &ok), NETSP_OK);
  EXPECT_EQ(ok, 1);
  EXPECT_NE(std::string(report).find("berlin52 7542 OK"), std::string::npos);
  netsp_free_string(report);
}

TEST(Cli, TsplibCheckAndSolve) {
  const auto check = cli("tsplib-check --dir " + std::string(NETSP_FIXTURE_DIR));
  EXPECT_EQ(check.code, 0);
  EXPECT_NE(check.out.find("berlin52 7542 OK"), std::string::npos);

  const auto solved = cli("solve --tsplib " + fixture("ulysses16.tsp") + " --method held-karp");
  EXPECT_EQ(solved.code, 0);
  // The fixture tour of ulysses16 evaluates to 6859 under GEO.
  Instance inst;
  ASSERT_EQ(netsp_instance_load_tsplib(fixture("ulysses16.tsp").c_str(), &inst.ptr), NETSP_OK);
  std::vector<int> order(16);
  size_t n = 0;
  ASSERT_EQ(netsp_load_tour(fixture("ulysses16.opt.tour").c_str(), order.data(), 16, &n), NETSP_OK);
  double len = 0;
  ASSERT_EQ(netsp_tour_length(inst.ptr, order.data(), n, &len), NETSP_OK);
  EXPECT_NE(solved.out.find(" held-karp " + std::to_string(static_cast<long>(len))), std::string::npos)
      << solved.out;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("solve --tsplib " + fixture("eil51.tsp") + " --method lkh").code, 2);
  EXPECT_EQ(cli("gen --n 5").code, 2);
}

TEST(Cli, RuntimeFailuresExitOne) {
  EXPECT_EQ(cli("solve --tsplib /nonexistent.tsp --method nn").code, 1);
  const auto dir = scratch("fail");
  EXPECT_EQ(cli("gen --n 12 --count 2 --seed 1 --out " + dir + "/g.jsonl").code, 0);
  EXPECT_EQ(cli("label --in " + dir + "/g.jsonl --oracle brute --out " + dir + "/l.jsonl").code, 2);
}

TEST(Cli, GenIsReproducibleAndEvalWritesCsv) {
  const auto dir = scratch("gen");
  ASSERT_EQ(cli("gen --n 8 --count 20 --seed 4 --out " + dir + "/a.jsonl").code, 0);
  ASSERT_EQ(cli("gen --n 8 --count 20 --seed 4 --out " + dir + "/b.jsonl").code, 0);
  EXPECT_EQ(slurp(dir + "/a.jsonl"), slurp(dir + "/b.jsonl"));

  const auto ev = cli("eval --data " + dir + "/a.jsonl --methods nn,held-karp --oracle held-karp --out-csv " +
                      dir + "/r.csv --table-csv " + dir + "/t.csv --no-timing");
  ASSERT_EQ(ev.code, 0);
  const auto csv = slurp(dir + "/r.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
  EXPECT_NE(slurp(dir + "/t.csv").find("held-karp,20,"), std::string::npos);
  EXPECT_NE(ev.out.find("nn"), std::string::npos);
}

TEST(Cli, HardnessRanksInstances) {
  const auto r = cli("hardness --tsplib " + fixture("eil51.tsp") + " " + fixture("berlin52.tsp") +
                     " --form B --area hull");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("hardest-first"), std::string::npos);
  EXPECT_EQ(cli("hardness --tsplib " + fixture("eil51.tsp") + " --form C").code, 2);
}
