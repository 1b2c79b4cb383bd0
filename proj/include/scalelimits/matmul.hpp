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
#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"

namespace scalelimits {

// (m x k) * (k x n) -> (m x n). Dimensions are real so that bounds can be
// evaluated at fractional nanobatch sizes.
struct MatmulShape {
  double m = 1.0;
  double k = 1.0;
  double n = 1.0;
};

// Which operands skip DRAM. When the weights of a replica fit on chip the
// weight operand (A) or the weight-gradient output (C) never leave SRAM.
struct MatmulTraffic {
  bool a_resident = false;
  bool c_resident = false;
  bool accumulate_c = false;  // C is read, added to and written back
};

enum class Bound { Latency, Arithmetic, DRAM, L2, SharedMem, Registers };

inline std::string_view to_string(Bound b) {
  switch (b) {
    case Bound::Latency: return "latency";
    case Bound::Arithmetic: return "arithmetic";
    case Bound::DRAM: return "DRAM";
    case Bound::L2: return "L2";
    case Bound::SharedMem: return "SharedMem";
    case Bound::Registers: return "Registers";
  }
  return "?";
}

struct LevelTime {
  MemoryKind level = MemoryKind::DRAM;
  double words = 0.0;
  double seconds = 0.0;
};

struct MatmulTime {
  double t_arith = 0.0;
  double t_latency = 0.0;
  double total = 0.0;
  std::array<LevelTime, 4> levels{};
  std::size_t n_levels = 0;
  Bound bound_by = Bound::Latency;

  double level_max() const {
    double t = 0.0;
    for (std::size_t j = 0; j < n_levels; ++j) t = std::max(t, levels[j].seconds);
    return t;
  }
};

namespace detail {

inline Bound bound_of(MemoryKind k) {
  switch (k) {
    case MemoryKind::DRAM: return Bound::DRAM;
    case MemoryKind::L2: return Bound::L2;
    case MemoryKind::SharedMem: return Bound::SharedMem;
    case MemoryKind::Registers: return Bound::Registers;
  }
  return Bound::DRAM;
}

// Words moved out of a level when the output is blocked in tm x tn tiles:
// every tile column re-reads A, every tile row re-reads B.
inline double tiled_words(const MatmulShape& s, const Tile& t, double c_factor) {
  double tm = std::min(static_cast<double>(t.rows), s.m);
  double tn = std::min(static_cast<double>(t.cols), s.n);
  return (s.n / tn) * s.m * s.k + (s.m / tm) * s.k * s.n + c_factor * s.m * s.n;
}

}  // namespace detail

// Traffic at each level is served at twice its unidirectional bandwidth
// (reads and writes proceed concurrently).
inline MatmulTime matmul_time(const MatmulShape& s, const DeviceSpec& dev, MatmulTraffic tr = {}) {
  MatmulTime r;
  r.t_arith = s.m * s.k * s.n / dev.sustained_mac_per_s();
  r.t_latency = dev.kernel_latency_s;
  const double c_on_chip = tr.accumulate_c ? 2.0 : 1.0;
  for (const auto& lvl : dev.memory) {
    double words;
    switch (lvl.kind) {
      case MemoryKind::DRAM:
        words = (tr.a_resident ? 0.0 : s.m * s.k) + s.k * s.n +
                (tr.c_resident ? 0.0 : c_on_chip * s.m * s.n);
        break;
      case MemoryKind::L2:
        words = detail::tiled_words(s, dev.sm_tile, c_on_chip);
        break;
      case MemoryKind::SharedMem:
        words = detail::tiled_words(s, dev.warp_tile, c_on_chip);
        break;
      case MemoryKind::Registers:
      default:
        continue;
    }
    r.levels[r.n_levels++] = {lvl.kind, words, transfer_time(words, 2.0 * lvl.bandwidth_words_per_s)};
  }
  double body = r.t_arith;
  r.bound_by = Bound::Arithmetic;
  for (std::size_t j = 0; j < r.n_levels; ++j) {
    if (r.levels[j].seconds > body) {
      body = r.levels[j].seconds;
      r.bound_by = detail::bound_of(r.levels[j].level);
    }
  }
  if (r.t_latency >= body) r.bound_by = Bound::Latency;
  r.total = r.t_latency + body;
  return r;
}

// Fraction of peak arithmetic achieved.
inline double matmul_utilization(const MatmulShape& s, const DeviceSpec& dev, const MatmulTime& t) {
  return s.m * s.k * s.n / dev.peak_mac_per_s / t.total;
}

// Smallest square dimension whose DRAM traffic (3 d^2 words, ideal cache)
// takes no longer than its arithmetic (d^3 MAC).
inline std::int64_t balanced_square_dim(const DeviceSpec& dev, double word_bytes) {
  const MemoryLevel* dram = dev.find(MemoryKind::DRAM);
  if (dram == nullptr) throw InvariantViolation("device.memory_levels", "no DRAM level");
  double bytes_per_s = 2.0 * dram->bandwidth_words_per_s * dev.word_bytes;
  return static_cast<std::int64_t>(std::ceil(3.0 * dev.peak_mac_per_s * word_bytes / bytes_per_s));
}

// Utilization of a very large square GEMM: the best one device sustains.
inline double sustained_utilization(const DeviceSpec& dev) {
  MatmulShape s{16384.0, 16384.0, 16384.0};
  return matmul_utilization(s, dev, matmul_time(s, dev));
}

}  // namespace scalelimits
