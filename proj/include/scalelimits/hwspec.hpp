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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/units.hpp"

namespace scalelimits {

enum class MemoryKind { DRAM, L2, SharedMem, Registers };

inline std::string_view to_string(MemoryKind k) {
  switch (k) {
    case MemoryKind::DRAM: return "DRAM";
    case MemoryKind::L2: return "L2";
    case MemoryKind::SharedMem: return "SharedMem";
    case MemoryKind::Registers: return "Registers";
  }
  return "?";
}

inline std::optional<MemoryKind> memory_kind_from_string(std::string_view s) {
  if (s == "DRAM") return MemoryKind::DRAM;
  if (s == "L2") return MemoryKind::L2;
  if (s == "SharedMem") return MemoryKind::SharedMem;
  if (s == "Registers") return MemoryKind::Registers;
  return std::nullopt;
}

struct MemoryLevel {
  MemoryKind kind = MemoryKind::DRAM;
  double capacity_words = 0.0;
  double bandwidth_words_per_s = 0.0;  // unidirectional
  double access_latency_s = 0.0;
};

struct Tile {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
};

struct DeviceSpec {
  std::string name;
  double peak_mac_per_s = 0.0;  // C
  double sustained_clock_factor = 1.0;
  double kernel_latency_s = 4.5e-6;
  double word_bytes = kDefaultWordBytes;
  std::vector<MemoryLevel> memory;  // outermost (DRAM) first
  Tile sm_tile{128, 128};
  Tile warp_tile{64, 64};

  double sustained_mac_per_s() const { return peak_mac_per_s * sustained_clock_factor; }

  const MemoryLevel* find(MemoryKind k) const {
    for (const auto& m : memory)
      if (m.kind == k) return &m;
    return nullptr;
  }

  // Aggregate on-chip capacity, i.e. everything except DRAM.
  double sram_words() const {
    double s = 0.0;
    for (const auto& m : memory)
      if (m.kind != MemoryKind::DRAM) s += m.capacity_words;
    return s;
  }
};

// One level of the network hierarchy, h = 1 is the fastest. group_size is
// the number of GPUs reachable at this level or below; 0 marks the
// unbounded top level.
struct NetworkLevel {
  std::string name;
  std::int64_t group_size = 0;
  double bandwidth_words_per_s = 0.0;  // per GPU, unidirectional
  double latency_s = 0.0;              // one way, added on top of the levels below

  bool unbounded() const { return group_size == 0; }
};

struct ClusterSpec {
  std::string name;
  DeviceSpec device;
  std::vector<NetworkLevel> network;
  std::int64_t node_size = 8;

  std::size_t levels() const { return network.size(); }

  // Number of sub-groups of level h-1 inside one group of level h
  // (h is 1-based). Returns 0 for the unbounded level.
  std::int64_t fan_out(std::size_t h) const {
    const auto& lvl = network.at(h - 1);
    if (lvl.unbounded()) return 0;
    std::int64_t below = h == 1 ? 1 : network[h - 2].group_size;
    return lvl.group_size / below;
  }

  // One-way latency of a message that has to climb to level h (1-based):
  // it crosses every fabric below on the way.
  double path_latency(std::size_t h) const {
    double t = 0.0;
    for (std::size_t k = 0; k < h; ++k) t += network.at(k).latency_s;
    return t;
  }

  // Largest cluster this hierarchy can hold, 0 when unbounded.
  std::int64_t max_gpus() const { return network.empty() ? 0 : network.back().group_size; }
};

inline void validate(const DeviceSpec& d, const std::string& path = "device") {
  auto bad = [&](const std::string& f, const std::string& m) {
    throw InvariantViolation(path + "." + f, m);
  };
  if (!(d.peak_mac_per_s > 0.0) || !std::isfinite(d.peak_mac_per_s))
    bad("peak_arithmetic", "must be positive and finite");
  if (!(d.sustained_clock_factor > 0.0 && d.sustained_clock_factor <= 1.0))
    bad("sustained_clock_factor", "must lie in (0, 1]");
  if (!(d.kernel_latency_s >= 0.0) || !std::isfinite(d.kernel_latency_s))
    bad("kernel_latency_s", "must be non-negative");
  if (!(d.word_bytes > 0.0)) bad("word_size_bytes", "must be positive");
  if (d.sm_tile.rows < 1 || d.sm_tile.cols < 1) bad("sm_tile", "must be positive");
  if (d.warp_tile.rows < 1 || d.warp_tile.cols < 1) bad("warp_tile", "must be positive");
  if (d.memory.empty()) throw InvariantViolation("memory_levels", "at least one level required");
  if (d.memory.front().kind != MemoryKind::DRAM)
    throw InvariantViolation("memory_levels[0].name", "outermost level must be DRAM");
  for (std::size_t j = 0; j < d.memory.size(); ++j) {
    const auto& m = d.memory[j];
    std::string f = "memory_levels[" + std::to_string(j) + "]";
    if (!(m.capacity_words > 0.0)) throw InvariantViolation(f + ".capacity", "must be positive");
    if (!(m.bandwidth_words_per_s > 0.0))
      throw InvariantViolation(f + ".bandwidth", "must be positive");
    if (!(m.access_latency_s >= 0.0))
      throw InvariantViolation(f + ".access_latency_s", "must be non-negative");
    if (j > 0) {
      if (static_cast<int>(m.kind) <= static_cast<int>(d.memory[j - 1].kind))
        throw InvariantViolation(f + ".name", "levels must go outermost to innermost without repeats");
      if (m.bandwidth_words_per_s < d.memory[j - 1].bandwidth_words_per_s)
        throw InvariantViolation(f + ".bandwidth", "must not be lower than the level outside it");
    }
  }
}

inline void validate(const ClusterSpec& c) {
  validate(c.device);
  if (c.network.empty()) throw InvariantViolation("network_levels", "at least one level required");
  if (c.node_size < 1) throw InvariantViolation("node_size", "must be at least 1");
  std::int64_t below = 1;
  for (std::size_t j = 0; j < c.network.size(); ++j) {
    const auto& n = c.network[j];
    std::string f = "network_levels[" + std::to_string(j) + "]";
    if (n.unbounded()) {
      if (j + 1 != c.network.size())
        throw InvariantViolation(f + ".group_size", "only the top level may be unbounded");
    } else {
      if (n.group_size < 1) throw InvariantViolation(f + ".group_size", "must be at least 1");
      if (n.group_size <= below && j > 0)
        throw InvariantViolation(f + ".group_size", "must grow with the level");
      if (n.group_size % below != 0)
        throw InvariantViolation(f + ".group_size", "must be a multiple of the level below");
      below = n.group_size;
    }
    if (!(n.bandwidth_words_per_s > 0.0))
      throw InvariantViolation(f + ".bandwidth", "must be positive");
    if (!(n.latency_s >= 0.0) || !std::isfinite(n.latency_s))
      throw InvariantViolation(f + ".latency_s", "must be non-negative");
    if (j > 0 && n.bandwidth_words_per_s > c.network[j - 1].bandwidth_words_per_s)
      throw InvariantViolation(f + ".bandwidth", "must not exceed the bandwidth of the level below");
  }
}

// Node-level view used by the closed-form limits: the whole node acts as
// one accelerator talking over the first link that leaves the node.
struct NodeSummary {
  std::int64_t gpus = 0;
  double mac_per_s = 0.0;
  double network_words_per_s = 0.0;
  double dram_words_per_s = 0.0;
  double sram_words = 0.0;
  double t_L_s = 0.0;  // one kernel plus one message out of the node
};

inline NodeSummary node_summary(const ClusterSpec& c) {
  NodeSummary s;
  s.gpus = c.node_size;
  const double g = static_cast<double>(c.node_size);
  s.mac_per_s = g * c.device.peak_mac_per_s;
  std::size_t out = c.network.size();
  for (std::size_t h = 0; h < c.network.size(); ++h) {
    if (c.network[h].unbounded() || c.network[h].group_size > c.node_size) {
      out = h + 1;
      break;
    }
  }
  s.network_words_per_s = g * c.network[out - 1].bandwidth_words_per_s;
  s.t_L_s = c.device.kernel_latency_s + c.path_latency(out);
  s.dram_words_per_s = g * c.device.memory.front().bandwidth_words_per_s;
  s.sram_words = g * c.device.sram_words();
  return s;
}

// ---------------------------------------------------------------------------
// Presets. Values are per GPU; multiplied by the node size they give the
// node-level FP16 figures of the DGX generations.

namespace detail {

inline DeviceSpec h100_device() {
  DeviceSpec d;
  d.name = "H100 SXM";
  d.peak_mac_per_s = 4.95e14;
  d.memory = {
      {MemoryKind::DRAM, 40e9, 8.375e11, 0.0},
      {MemoryKind::L2, 25e6, 5e12, 0.0},
      {MemoryKind::SharedMem, 16e6, 1e13, 0.0},
      {MemoryKind::Registers, 19.875e6, 1e14, 0.0},
  };
  return d;
}

inline DeviceSpec a100_device() {
  DeviceSpec d;
  d.name = "A100 SXM";
  d.peak_mac_per_s = 1.5625e14;
  d.memory = {
      {MemoryKind::DRAM, 40e9, 3.875e11, 0.0},
      {MemoryKind::L2, 20e6, 1.75e12, 0.0},
      {MemoryKind::SharedMem, 10.37e6, 4.87e12, 0.0},
      {MemoryKind::Registers, 15.38e6, 1e14, 0.0},
  };
  return d;
}

inline DeviceSpec v100_device() {
  DeviceSpec d;
  d.name = "V100 SXM2";
  d.peak_mac_per_s = 6.25e13;
  d.memory = {
      {MemoryKind::DRAM, 16e9, 2.25e11, 0.0},
      {MemoryKind::L2, 3e6, 7.5e11, 0.0},
      {MemoryKind::SharedMem, 5.12e6, 3.9e12, 0.0},
      {MemoryKind::Registers, 10.755e6, 1e14, 0.0},
  };
  return d;
}

inline constexpr double kHopLatency = 2.25e-6;

inline ClusterSpec dgx(std::string name, DeviceSpec dev, double nvlink, double ib) {
  ClusterSpec c;
  c.name = std::move(name);
  c.device = std::move(dev);
  c.network = {{"nvlink", 8, nvlink, kHopLatency}, {"infiniband", 0, ib, kHopLatency}};
  return c;
}

inline ClusterSpec low_latency(ClusterSpec c, std::string name) {
  c.name = std::move(name);
  c.device.kernel_latency_s /= 10.0;
  for (auto& m : c.device.memory) m.access_latency_s /= 10.0;
  for (auto& n : c.network) n.latency_s /= 10.0;
  return c;
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "dgx1-v100",           "dgx-a100",
      "dgx-h100",            "dgx-h100-superpod",
      "h100-low-latency",    "h100-global-nvlink",
      "h100-global-nvlink-ll", "h100-infinite-network-ll",
  };
  return names;
}

inline ClusterSpec preset(std::string_view name) {
  using namespace detail;
  if (name == "dgx1-v100") return dgx("dgx1-v100", v100_device(), 7.5e10, 3.125e9);
  if (name == "dgx-a100") return dgx("dgx-a100", a100_device(), 1.5e11, 1.25e10);
  if (name == "dgx-h100") return dgx("dgx-h100", h100_device(), 2.25e11, 2.5e10);
  if (name == "dgx-h100-superpod") {
    ClusterSpec c;
    c.name = "dgx-h100-superpod";
    c.device = h100_device();
    c.network = {{"nvlink", 8, 2.25e11, kHopLatency},
                 {"nvlink-switch", 256, 1.125e11, kHopLatency},
                 {"infiniband", 0, 2.5e10, kHopLatency}};
    return c;
  }
  if (name == "h100-low-latency") return low_latency(preset("dgx-h100"), "h100-low-latency");
  if (name == "h100-global-nvlink") {
    ClusterSpec c;
    c.name = "h100-global-nvlink";
    c.device = h100_device();
    // Bandwidth changes only: a hop keeps the node-to-node latency.
    c.network = {{"global-nvlink", 0, 2.25e11, 2.0 * kHopLatency}};
    return c;
  }
  if (name == "h100-global-nvlink-ll")
    return low_latency(preset("h100-global-nvlink"), "h100-global-nvlink-ll");
  if (name == "h100-infinite-network-ll") {
    ClusterSpec c;
    c.name = "h100-infinite-network";
    c.device = h100_device();
    c.network = {{"infinite", 0, kInfinity, 2.0 * kHopLatency}};
    return low_latency(c, "h100-infinite-network-ll");
  }
  throw InvariantViolation("preset", "unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Configuration files (JSON). See docs/config-schema.md.

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "." + key, "missing field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfinity;
  }
  throw ParseError(path, "expected a number");
}

inline double optional_number(const json& j, const std::string& key, double def,
                              const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? def : number(*it, path + "." + key);
}

// {"value": x, "unit": "...", "direction": "..."} -> unidirectional words/s
inline double bandwidth(const json& j, double word_bytes, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected {value, unit}");
  double v = number(require(j, "value", path), path + ".value");
  std::string unit = require(j, "unit", path).get<std::string>();
  double words;
  if (unit == "words/s")
    words = v;
  else if (unit == "B/s")
    words = bytes_to_words(v, word_bytes);
  else if (unit == "GB/s")
    words = bytes_to_words(v * 1e9, word_bytes);
  else if (unit == "TB/s")
    words = bytes_to_words(v * 1e12, word_bytes);
  else
    throw ParseError(path + ".unit", "unknown bandwidth unit '" + unit + "'");
  std::string dir = j.value("direction", std::string("unidirectional"));
  if (dir == "bidirectional")
    words /= 2.0;
  else if (dir != "unidirectional")
    throw ParseError(path + ".direction", "expected unidirectional or bidirectional");
  return words;
}

inline double capacity(const json& j, double word_bytes, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_object()) throw ParseError(path, "expected {value, unit}");
  double v = number(require(j, "value", path), path + ".value");
  std::string unit = require(j, "unit", path).get<std::string>();
  if (unit == "words") return v;
  if (unit == "bytes") return bytes_to_words(v, word_bytes);
  if (unit == "MB") return bytes_to_words(v * 1e6, word_bytes);
  if (unit == "GB") return bytes_to_words(v * 1e9, word_bytes);
  throw ParseError(path + ".unit", "unknown capacity unit '" + unit + "'");
}

inline Tile tile(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ParseError(path, "expected [rows, cols]");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

inline json number_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace detail

inline ClusterSpec cluster_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ParseError("", "top level must be an object");
  ClusterSpec c;
  try {
    c.name = j.value("name", std::string("custom"));
    c.node_size = j.value("node_size", std::int64_t{8});
    const json& dj = require(j, "device", "");
    DeviceSpec& d = c.device;
    d.name = dj.value("name", std::string("device"));
    d.word_bytes = optional_number(dj, "word_size_bytes", kDefaultWordBytes, "device");
    {
      const json& pj = require(dj, "peak_arithmetic", "device");
      double v = number(require(pj, "value", "device.peak_arithmetic"), "device.peak_arithmetic.value");
      std::string unit = require(pj, "unit", "device.peak_arithmetic").get<std::string>();
      if (unit == "MAC/s")
        d.peak_mac_per_s = v;
      else if (unit == "FLOP/s")
        d.peak_mac_per_s = v / kFlopPerMac;
      else
        throw ParseError("device.peak_arithmetic.unit", "expected MAC/s or FLOP/s");
    }
    d.sustained_clock_factor = optional_number(dj, "sustained_clock_factor", 1.0, "device");
    d.kernel_latency_s = optional_number(dj, "kernel_latency_s", 4.5e-6, "device");
    if (dj.contains("sm_tile")) d.sm_tile = tile(dj["sm_tile"], "device.sm_tile");
    if (dj.contains("warp_tile")) d.warp_tile = tile(dj["warp_tile"], "device.warp_tile");

    const json& mj = require(j, "memory_levels", "");
    if (!mj.is_array()) throw ParseError("memory_levels", "expected an array");
    for (std::size_t k = 0; k < mj.size(); ++k) {
      std::string p = "memory_levels[" + std::to_string(k) + "]";
      MemoryLevel m;
      auto kind = memory_kind_from_string(require(mj[k], "name", p).get<std::string>());
      if (!kind) throw ParseError(p + ".name", "expected DRAM, L2, SharedMem or Registers");
      m.kind = *kind;
      m.capacity_words = capacity(require(mj[k], "capacity", p), d.word_bytes, p + ".capacity");
      m.bandwidth_words_per_s = bandwidth(require(mj[k], "bandwidth", p), d.word_bytes, p + ".bandwidth");
      m.access_latency_s = optional_number(mj[k], "access_latency_s", 0.0, p);
      d.memory.push_back(m);
    }

    const json& nj = require(j, "network_levels", "");
    if (!nj.is_array()) throw ParseError("network_levels", "expected an array");
    for (std::size_t k = 0; k < nj.size(); ++k) {
      std::string p = "network_levels[" + std::to_string(k) + "]";
      NetworkLevel n;
      n.name = nj[k].value("name", "level" + std::to_string(k + 1));
      const json& g = require(nj[k], "group_size", p);
      if (g.is_string() && g.get<std::string>() == "unbounded")
        n.group_size = 0;
      else if (g.is_number_integer())
        n.group_size = g.get<std::int64_t>();
      else
        throw ParseError(p + ".group_size", "expected an integer or \"unbounded\"");
      if (n.group_size == 0 && !g.is_string())
        throw InvariantViolation(p + ".group_size", "must be at least 1");
      n.bandwidth_words_per_s = bandwidth(require(nj[k], "bandwidth", p), d.word_bytes, p + ".bandwidth");
      n.latency_s = optional_number(nj[k], "latency_s", 2.25e-6, p);
      c.network.push_back(n);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("", e.what());
  }
  validate(c);
  return c;
}

inline nlohmann::json to_json(const ClusterSpec& c) {
  using detail::number_json;
  nlohmann::json j;
  j["name"] = c.name;
  j["node_size"] = c.node_size;
  const DeviceSpec& d = c.device;
  j["device"] = {
      {"name", d.name},
      {"peak_arithmetic", {{"value", d.peak_mac_per_s}, {"unit", "MAC/s"}}},
      {"sustained_clock_factor", d.sustained_clock_factor},
      {"kernel_latency_s", d.kernel_latency_s},
      {"word_size_bytes", d.word_bytes},
      {"sm_tile", {d.sm_tile.rows, d.sm_tile.cols}},
      {"warp_tile", {d.warp_tile.rows, d.warp_tile.cols}},
  };
  j["memory_levels"] = nlohmann::json::array();
  for (const auto& m : d.memory) {
    j["memory_levels"].push_back({
        {"name", std::string(to_string(m.kind))},
        {"capacity", {{"value", m.capacity_words}, {"unit", "words"}}},
        {"bandwidth", {{"value", number_json(m.bandwidth_words_per_s)}, {"unit", "words/s"}}},
        {"access_latency_s", m.access_latency_s},
    });
  }
  j["network_levels"] = nlohmann::json::array();
  for (const auto& n : c.network) {
    nlohmann::json g = n.unbounded() ? nlohmann::json("unbounded") : nlohmann::json(n.group_size);
    j["network_levels"].push_back({
        {"name", n.name},
        {"group_size", g},
        {"bandwidth", {{"value", number_json(n.bandwidth_words_per_s)}, {"unit", "words/s"}}},
        {"latency_s", n.latency_s},
    });
  }
  return j;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

inline ClusterSpec load_cluster_spec(const std::string& path) {
  return cluster_from_json(read_json_file(path));
}

}  // namespace scalelimits
