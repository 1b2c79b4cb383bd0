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

#include <string>

#include "json.hpp"
#include "scalelimits/hwspec.hpp"

namespace sl = scalelimits;
using nlohmann::json;

namespace {

const std::string kPresetDir = SCALELIMITS_PRESET_DIR;

json minimal_cluster() {
  return json::parse(R"({
    "name": "toy",
    "device": {"peak_arithmetic": {"value": 1e12, "unit": "MAC/s"}},
    "memory_levels": [
      {"name": "DRAM", "capacity": {"value": 1e9, "unit": "words"},
       "bandwidth": {"value": 1e11, "unit": "words/s"}}
    ],
    "network_levels": [
      {"group_size": 4, "bandwidth": {"value": 1e10, "unit": "words/s"}},
      {"group_size": "unbounded", "bandwidth": {"value": 1e9, "unit": "words/s"}}
    ]
  })");
}

void expect_rel(double got, double want, double tol = 1e-12) {
  EXPECT_NEAR(got, want, tol * std::fabs(want)) << "got " << got << " want " << want;
}

}  // namespace

TEST(Hwspec, H100NodeFiguresFromPresetFile) {
  auto c = sl::load_cluster_spec(kPresetDir + "/dgx-h100.json");
  auto n = sl::node_summary(c);
  expect_rel(n.mac_per_s, 3.96e15);
  expect_rel(n.network_words_per_s, 2.0e11);
  expect_rel(n.dram_words_per_s, 6.7e12);
  expect_rel(n.sram_words, 487e6);
}

TEST(Hwspec, A100NodeFigures) {
  auto n = sl::node_summary(sl::preset("dgx-a100"));
  expect_rel(n.mac_per_s, 1.25e15);
  expect_rel(n.network_words_per_s, 1.0e11);
  expect_rel(n.dram_words_per_s, 3.1e12);
  expect_rel(n.sram_words, 366e6, 1e-3);
}

TEST(Hwspec, PresetFilesMatchBuiltins) {
  for (const char* name : {"dgx1-v100", "dgx-a100", "dgx-h100", "dgx-h100-superpod"}) {
    SCOPED_TRACE(name);
    auto f = sl::load_cluster_spec(kPresetDir + "/" + std::string(name) + ".json");
    auto b = sl::preset(name);
    expect_rel(f.device.peak_mac_per_s, b.device.peak_mac_per_s);
    ASSERT_EQ(f.device.memory.size(), b.device.memory.size());
    for (std::size_t k = 0; k < f.device.memory.size(); ++k) {
      EXPECT_EQ(f.device.memory[k].kind, b.device.memory[k].kind);
      expect_rel(f.device.memory[k].capacity_words, b.device.memory[k].capacity_words);
      expect_rel(f.device.memory[k].bandwidth_words_per_s, b.device.memory[k].bandwidth_words_per_s);
    }
    ASSERT_EQ(f.network.size(), b.network.size());
    for (std::size_t k = 0; k < f.network.size(); ++k) {
      EXPECT_EQ(f.network[k].group_size, b.network[k].group_size);
      expect_rel(f.network[k].bandwidth_words_per_s, b.network[k].bandwidth_words_per_s);
      expect_rel(f.network[k].latency_s, b.network[k].latency_s);
    }
  }
}

TEST(Hwspec, LowLatencyDividesEveryLatency) {
  auto base = sl::preset("dgx-h100");
  auto ll = sl::preset("h100-low-latency");
  expect_rel(ll.device.kernel_latency_s, base.device.kernel_latency_s / 10.0);
  ASSERT_EQ(ll.network.size(), base.network.size());
  for (std::size_t k = 0; k < ll.network.size(); ++k) {
    expect_rel(ll.network[k].latency_s, base.network[k].latency_s / 10.0);
    EXPECT_EQ(ll.network[k].bandwidth_words_per_s, base.network[k].bandwidth_words_per_s);
  }
  EXPECT_EQ(ll.device.peak_mac_per_s, base.device.peak_mac_per_s);
}

TEST(Hwspec, GlobalNvlinkIsOneLevelAtNvlinkBandwidth) {
  auto g = sl::preset("h100-global-nvlink");
  ASSERT_EQ(g.levels(), 1u);
  EXPECT_TRUE(g.network[0].unbounded());
  EXPECT_EQ(g.network[0].bandwidth_words_per_s, sl::preset("dgx-h100").network[0].bandwidth_words_per_s);
  // One hop from any GPU to any other costs what a node-to-node hop did.
  expect_rel(g.path_latency(1), sl::preset("dgx-h100").path_latency(2));
}

TEST(Hwspec, InfiniteNetworkHasInfiniteBandwidth) {
  auto c = sl::preset("h100-infinite-network-ll");
  EXPECT_TRUE(std::isinf(c.network[0].bandwidth_words_per_s));
  EXPECT_GT(c.network[0].latency_s, 0.0);
}

TEST(Hwspec, UnknownPresetThrows) { EXPECT_THROW(sl::preset("nonexistent"), sl::InvariantViolation); }

TEST(Hwspec, EveryPresetPassesInvariants) {
  EXPECT_GE(sl::preset_names().size(), 8u);
  for (const auto& n : sl::preset_names()) {
    SCOPED_TRACE(n);
    EXPECT_NO_THROW(sl::validate(sl::preset(n)));
  }
}

TEST(Hwspec, DefaultLatenciesGiveNineMicroseconds) {
  auto c = sl::preset("dgx-h100");
  expect_rel(c.device.kernel_latency_s + c.path_latency(2), 9e-6);
}

TEST(Hwspec, ZeroBandwidthIsInvariantViolation) {
  auto j = minimal_cluster();
  j["network_levels"][1]["bandwidth"]["value"] = 0;
  try {
    sl::cluster_from_json(j);
    FAIL() << "expected InvariantViolation";
  } catch (const sl::InvariantViolation& e) {
    EXPECT_EQ(e.field(), "network_levels[1].bandwidth");
  }
}

TEST(Hwspec, NegativeMemoryBandwidthNamesField) {
  auto j = minimal_cluster();
  j["memory_levels"][0]["bandwidth"]["value"] = -1;
  try {
    sl::cluster_from_json(j);
    FAIL() << "expected InvariantViolation";
  } catch (const sl::InvariantViolation& e) {
    EXPECT_NE(e.field().find("memory_levels[0]"), std::string::npos) << e.field();
  }
}

TEST(Hwspec, MissingSectionIsParseError) {
  auto j = minimal_cluster();
  j.erase("network_levels");
  EXPECT_THROW(sl::cluster_from_json(j), sl::ParseError);
  EXPECT_THROW(sl::load_cluster_spec("/nonexistent/file.json"), sl::ParseError);
}

TEST(Hwspec, ByteUnitsBecomeWords) {
  auto j = minimal_cluster();
  j["device"]["word_size_bytes"] = 2;
  j["network_levels"][0]["bandwidth"] = {{"value", 300}, {"unit", "GB/s"}};
  j["network_levels"][1]["bandwidth"] = {{"value", 100}, {"unit", "GB/s"}, {"direction", "bidirectional"}};
  auto c = sl::cluster_from_json(j);
  expect_rel(c.network[0].bandwidth_words_per_s, 300e9 / 2.0);
  expect_rel(c.network[1].bandwidth_words_per_s, 100e9 / 2.0 / 2.0);
  // words x word size = the bytes given in the file (after halving a
  // bidirectional figure).
  expect_rel(sl::words_to_bytes(c.network[0].bandwidth_words_per_s, c.device.word_bytes), 300e9);

  j["device"]["word_size_bytes"] = 1;
  auto c1 = sl::cluster_from_json(j);
  expect_rel(c1.network[0].bandwidth_words_per_s, 300e9);
}

TEST(Hwspec, FlopPerSecondIsHalved) {
  auto j = minimal_cluster();
  j["device"]["peak_arithmetic"] = {{"value", 2e12}, {"unit", "FLOP/s"}};
  expect_rel(sl::cluster_from_json(j).device.peak_mac_per_s, 1e12);
}

TEST(Hwspec, OrderingInvariants) {
  auto j = minimal_cluster();
  j["network_levels"][1]["bandwidth"]["value"] = 1e12;  // faster than level 1
  EXPECT_THROW(sl::cluster_from_json(j), sl::InvariantViolation);

  j = minimal_cluster();
  j["network_levels"][0]["group_size"] = "unbounded";
  EXPECT_THROW(sl::cluster_from_json(j), sl::InvariantViolation);

  j = minimal_cluster();
  j["device"]["sustained_clock_factor"] = 1.5;
  EXPECT_THROW(sl::cluster_from_json(j), sl::InvariantViolation);
}

TEST(Hwspec, RoundTripIsExact) {
  for (const auto& n : sl::preset_names()) {
    SCOPED_TRACE(n);
    auto c = sl::preset(n);
    auto j = sl::to_json(c);
    auto back = sl::cluster_from_json(j);
    EXPECT_EQ(sl::to_json(back), j);
    EXPECT_EQ(back.device.peak_mac_per_s, c.device.peak_mac_per_s);
    EXPECT_EQ(back.device.kernel_latency_s, c.device.kernel_latency_s);
    for (std::size_t k = 0; k < c.network.size(); ++k) {
      EXPECT_EQ(back.network[k].bandwidth_words_per_s, c.network[k].bandwidth_words_per_s);
      EXPECT_EQ(back.network[k].latency_s, c.network[k].latency_s);
      EXPECT_EQ(back.network[k].group_size, c.network[k].group_size);
    }
    // Serialised text survives a parse too.
    EXPECT_EQ(sl::to_json(sl::cluster_from_json(json::parse(j.dump()))), j);
  }
}

TEST(Hwspec, PathLatencyAccumulates) {
  auto c = sl::preset("dgx-h100-superpod");
  expect_rel(c.path_latency(1), 2.25e-6);
  expect_rel(c.path_latency(2), 4.5e-6);
  expect_rel(c.path_latency(3), 6.75e-6);
  EXPECT_EQ(c.fan_out(1), 8);
  EXPECT_EQ(c.fan_out(2), 32);
  EXPECT_EQ(c.fan_out(3), 0);
}
