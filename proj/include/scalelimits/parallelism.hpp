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

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>

#include "json.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/pipeline.hpp"
#include "scalelimits/scaling.hpp"

namespace scalelimits {

inline constexpr std::size_t kMaxLevels = 4;

enum class Method { DP = 0, TPff = 1, TPmodel = 2, PP = 3, EP = 4 };
inline constexpr std::array<Method, 5> kMethods = {Method::DP, Method::TPff, Method::TPmodel,
                                                   Method::PP, Method::EP};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::DP: return "dp";
    case Method::TPff: return "tp_ff";
    case Method::TPmodel: return "tp_model";
    case Method::PP: return "pp";
    case Method::EP: return "ep";
  }
  return "?";
}

// Per-level factors N_X(h), index 0 is level h = 1.
using Levels = std::array<std::int64_t, kMaxLevels>;

inline constexpr Levels ones() { return {1, 1, 1, 1}; }

inline std::int64_t product(const Levels& l) {
  std::int64_t p = 1;
  for (auto v : l) p *= v;
  return p;
}

// Highest level (1-based) with a factor above one, 0 if none.
inline std::size_t top_level(const Levels& l) {
  for (std::size_t h = kMaxLevels; h > 0; --h)
    if (l[h - 1] > 1) return h;
  return 0;
}

struct LevelAssignment {
  std::array<Levels, 5> f{ones(), ones(), ones(), ones(), ones()};
  const Levels& operator[](Method m) const { return f[static_cast<std::size_t>(m)]; }
  Levels& operator[](Method m) { return f[static_cast<std::size_t>(m)]; }
};

struct ParallelismConfig {
  std::int64_t n_dp = 1;
  std::int64_t n_tp_ff = 1;
  std::int64_t n_tp_model = 1;
  std::int64_t n_pp = 1;
  std::int64_t n_ep = 1;
  std::int64_t i = 1;  // interleaving factor
  std::int64_t m = 1;  // microbatches per step
  Schedule schedule = Schedule::Interleaved;
  LevelAssignment levels;

  std::int64_t n_tp() const { return n_tp_ff * n_tp_model; }
  std::int64_t n_gpu() const { return n_dp * n_tp_ff * n_tp_model * n_pp * n_ep; }
  std::int64_t degree(Method x) const {
    switch (x) {
      case Method::DP: return n_dp;
      case Method::TPff: return n_tp_ff;
      case Method::TPmodel: return n_tp_model;
      case Method::PP: return n_pp;
      case Method::EP: return n_ep;
    }
    return 1;
  }
  // Key for the final deterministic tie-break.
  std::array<std::int64_t, 8> lex_key() const {
    return {n_dp, n_tp_ff, n_tp_model, n_pp, n_ep, i, m, static_cast<std::int64_t>(schedule)};
  }
};

// Tokens each expert slice sees per microbatch on one device, before rounding.
inline double nanobatch_real(const ModelShape& s, std::int64_t n_dp, std::int64_t m) {
  return static_cast<double>(s.b) / (static_cast<double>(s.E) * static_cast<double>(n_dp) *
                                     static_cast<double>(m));
}

inline double nanobatch(const ModelShape& s, std::int64_t n_dp, std::int64_t m) {
  return std::ceil(nanobatch_real(s, n_dp, m));
}

// Structural checks that do not involve the network.
inline void check_degrees(const ModelShape& s, const ParallelismConfig& c) {
  for (Method x : kMethods)
    if (c.degree(x) < 1) throw InvariantViolation("config.n_" + std::string(to_string(x)), "must be at least 1");
  if (s.E % c.n_ep != 0)
    throw Infeasible("ep_divides_E", "N_EP = " + std::to_string(c.n_ep) + " does not divide E = " + std::to_string(s.E));
  if (s.d_ff % c.n_tp_ff != 0)
    throw Infeasible("tp_ff_divides_d_ff", "N_TP,ff = " + std::to_string(c.n_tp_ff) + " does not divide d_ff");
  if (s.d_model % c.n_tp_model != 0)
    throw Infeasible("tp_model_divides_d_model",
                     "N_TP,model = " + std::to_string(c.n_tp_model) + " does not divide d_model");
  check_stage_split(s.L, c.n_pp, c.i);
  check_schedule(c.schedule, c.n_pp, c.m, c.i);
  if (nanobatch_real(s, c.n_dp, c.m) < 1.0)
    throw Infeasible("nanobatch_at_least_one", "b/(E*N_DP*m) must be at least 1");
}

// Capacity of each network level for a cluster of n GPUs: level h gets the
// part of n that fits in its fan-out, the unbounded level takes the rest.
inline Levels level_capacities(const ClusterSpec& c, std::int64_t n) {
  if (c.levels() > kMaxLevels)
    throw InvariantViolation("network_levels", "at most " + std::to_string(kMaxLevels) + " levels supported");
  Levels cap = ones();
  std::int64_t rem = n;
  for (std::size_t h = 1; h <= c.levels(); ++h) {
    std::int64_t fo = c.fan_out(h);
    std::int64_t take = fo == 0 ? rem : std::gcd(rem, fo);
    cap[h - 1] = take;
    rem /= take;
  }
  if (rem != 1)
    throw Infeasible("cluster_capacity", std::to_string(n) + " GPUs do not fit the network hierarchy of " + c.name);
  return cap;
}

inline void check_levels(const ClusterSpec& cl, const ParallelismConfig& c) {
  Levels cap = level_capacities(cl, c.n_gpu());
  Levels used = ones();
  for (Method x : kMethods) {
    const Levels& f = c.levels[x];
    if (product(f) != c.degree(x))
      throw Infeasible("level_assignment",
                       "level factors of " + std::string(to_string(x)) + " do not multiply to its degree");
    for (std::size_t h = 0; h < kMaxLevels; ++h) {
      if (f[h] < 1) throw InvariantViolation("config.levels", "factors must be positive");
      if (h >= cl.levels() && f[h] != 1)
        throw Infeasible("level_assignment", "factor placed on a level the cluster does not have");
      used[h] *= f[h];
    }
  }
  for (std::size_t h = 0; h < cl.levels(); ++h)
    if (used[h] != cap[h])
      throw Infeasible("level_assignment", "level " + std::to_string(h + 1) + " holds " + std::to_string(used[h]) +
                                               " GPUs, its share of the cluster is " + std::to_string(cap[h]));
}

// Words each device receives per step for every method, evaluated at i = 1.
// Used only to rank methods when packing them onto the hierarchy.
inline std::array<double, 5> per_gpu_volume(const ModelShape& s, const ParallelismConfig& c) {
  const double n = static_cast<double>(c.n_gpu());
  const double b = static_cast<double>(s.b), dm = static_cast<double>(s.d_model),
               dff = static_cast<double>(s.d_ff), L = static_cast<double>(s.L);
  auto frac = [](std::int64_t k) { return static_cast<double>(k - 1) / static_cast<double>(k); };
  const double tokens = b / static_cast<double>(c.n_dp * c.n_ep);
  const double blocks = L / static_cast<double>(c.n_pp);
  std::array<double, 5> v{};
  v[static_cast<std::size_t>(Method::DP)] =
      2.0 * s.N_p / static_cast<double>(c.n_tp() * c.n_pp * c.n_ep) * frac(c.n_dp);
  v[static_cast<std::size_t>(Method::TPmodel)] =
      4.0 * tokens * blocks * dff / static_cast<double>(c.n_tp_ff) * frac(c.n_tp_model);
  v[static_cast<std::size_t>(Method::TPff)] =
      4.0 * tokens * blocks * dm / static_cast<double>(c.n_tp_model) * frac(c.n_tp_ff);
  v[static_cast<std::size_t>(Method::PP)] = 2.0 * b * dm * static_cast<double>(c.n_pp - 1) / n;
  v[static_cast<std::size_t>(Method::EP)] =
      2.0 * b * dm * (L - static_cast<double>(c.n_pp)) * frac(c.n_ep) / n;
  return v;
}

// Canonical packing: methods with more traffic per device take the fastest
// levels first; each takes the gcd of its remaining degree and the room left.
inline LevelAssignment assign_levels(const ModelShape& s, const ParallelismConfig& c, const ClusterSpec& cl) {
  Levels cap = level_capacities(cl, c.n_gpu());
  auto vol = per_gpu_volume(s, c);
  std::array<Method, 5> order = {Method::TPmodel, Method::TPff, Method::EP, Method::PP, Method::DP};
  std::stable_sort(order.begin(), order.end(), [&](Method a, Method b) {
    return vol[static_cast<std::size_t>(a)] > vol[static_cast<std::size_t>(b)];
  });
  LevelAssignment a;
  for (Method x : order) {
    std::int64_t d = c.degree(x);
    for (std::size_t h = 0; h < cl.levels() && d > 1; ++h) {
      std::int64_t take = std::gcd(d, cap[h]);
      a[x][h] = take;
      cap[h] /= take;
      d /= take;
    }
    if (d != 1) throw Infeasible("level_assignment", "degrees cannot be packed onto the hierarchy");
  }
  return a;
}

inline nlohmann::json to_json(const ParallelismConfig& c, std::size_t n_levels) {
  nlohmann::json lv = nlohmann::json::object();
  for (Method x : kMethods) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t h = 0; h < n_levels; ++h) a.push_back(c.levels[x][h]);
    lv[std::string(to_string(x))] = a;
  }
  return {{"n_dp", c.n_dp},
          {"n_tp_ff", c.n_tp_ff},
          {"n_tp_model", c.n_tp_model},
          {"n_pp", c.n_pp},
          {"n_ep", c.n_ep},
          {"interleave", c.i},
          {"microbatches", c.m},
          {"schedule", std::string(to_string(c.schedule))},
          {"level_factors", lv}};
}

}  // namespace scalelimits
