/* Copyright 2026 The scalelimits Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>

#include "json.hpp"
#include "scalelimits/report.hpp"

using nlohmann::json;

namespace {

struct Run {
  int rc = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("SCALELIMITS_PRESET_DIR='") + SCALELIMITS_PRESET_DIR + "' '" + SCALELIMITS_CLI +
                          "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

json structured(const std::string& args) {
  auto r = cli(args + " --format structured");
  EXPECT_EQ(r.rc, 0) << args;
  return json::parse(r.out);
}

}  // namespace

TEST(Cli, Presets) {
  auto d = structured("presets");
  EXPECT_EQ(d["schema_version"], "1");
  EXPECT_EQ(d["kind"], "presets");
  EXPECT_GE(d["data"]["clusters"].size(), 8u);
  auto t = cli("presets");
  EXPECT_EQ(t.rc, 0);
  EXPECT_NE(t.out.find("dgx-h100"), std::string::npos);
}

TEST(Cli, ClosedFormSparsityDividesCompute) {
  auto base = structured("closed-form --preset dgx-h100");
  auto sparse = structured("closed-form --preset dgx-h100 --sparsity 4");
  const auto& a = base["data"]["report"];
  const auto& b = sparse["data"]["report"];
  EXPECT_NEAR(a["T_critical_bandwidth_flop"].get<double>() / b["T_critical_bandwidth_flop"].get<double>(), 4.0, 1e-12);
  EXPECT_NEAR(a["T_critical_latency_flop"].get<double>() / b["T_critical_latency_flop"].get<double>(), 4.0, 1e-12);
  EXPECT_NEAR(a["d_prime"].get<double>(), 26400.0, 1e-6);
  EXPECT_EQ(a["operative"], "bandwidth");
}

TEST(Cli, SimulatePinnedConfig) {
  auto d = structured(
      "simulate --preset dgx-a100 --d-model 1024 --d-ff 4096 --layers 4 --batch 4096 --dp 2 --pp 2 "
      "--microbatches 4 --schedule naive");
  EXPECT_EQ(d["kind"], "simulate");
  EXPECT_EQ(d["data"]["n_gpu"], 4);
  EXPECT_NEAR(d["data"]["breakdown"]["t_step_s"].get<double>(), 1.2154818274986666e-3, 1e-15);
}

TEST(Cli, SinglePointSweepMatchesSearch) {
  auto s = structured("search --T 1e22");
  auto w = structured("sweep --points 1e22");
  ASSERT_EQ(w["data"]["records"].size(), 1u);
  const auto& r = w["data"]["records"][0];
  EXPECT_TRUE(r["feasible"].get<bool>());
  EXPECT_EQ(r["n_gpu"], s["data"]["n_gpu"]);
  EXPECT_EQ(r["config"], s["data"]["config"]);
  EXPECT_EQ(r["breakdown"], s["data"]["breakdown"]);
}

TEST(Cli, CsvSweep) {
  auto r = cli("sweep --points 1e22 1e23 --format csv");
  ASSERT_EQ(r.rc, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), scalelimits::csv_header());
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

TEST(Cli, TableOutput) {
  auto r = cli("sweep --points 1e22");
  ASSERT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("linear scaling"), std::string::npos);
  r = cli("closed-form");
  ASSERT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("operative limit"), std::string::npos);
}

TEST(Cli, RequestFileEqualsFlags) {
  const std::string path = testing::TempDir() + "cli_request.json";
  {
    std::ofstream f(path);
    f << json{{"cluster", "dgx-h100"}, {"T_flop", 1e22}}.dump();
  }
  auto a = structured("search --request '" + path + "'");
  auto b = structured("search --T 1e22");
  EXPECT_EQ(a["data"]["config"], b["data"]["config"]);
  std::remove(path.c_str());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("presets").rc, 0);
  EXPECT_EQ(cli("").rc, 2);
  EXPECT_EQ(cli("frobnicate").rc, 2);
  EXPECT_EQ(cli("search --T 1e22 --bogus").rc, 2);
  EXPECT_EQ(cli("search").rc, 2);
  EXPECT_EQ(cli("search --T 1e22 --max-gpus 0").rc, 2);
  EXPECT_EQ(cli("search --d-model 1024").rc, 2);
  EXPECT_EQ(cli("search --T 1e22 --preset no-such-cluster").rc, 2);
  // Pipeline depth that does not divide the layers.
  EXPECT_EQ(cli("simulate --d-model 1024 --d-ff 4096 --layers 4 --batch 4096 --pp 3").rc, 3);
  // Past the latency wall on a capped cluster.
  EXPECT_EQ(cli("search --T 1e32 --max-gpus 1024").rc, 3);
}
