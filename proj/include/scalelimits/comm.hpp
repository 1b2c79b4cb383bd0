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
#include <vector>

#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/parallelism.hpp"
#include "scalelimits/rational.hpp"
#include "scalelimits/units.hpp"

namespace scalelimits {

// Words each of N participants must receive to all-reduce w words.
inline double allreduce_words_per_gpu(double w, std::int64_t N) {
  if (N < 1) throw InvariantViolation("N", "must be at least 1");
  return 2.0 * w * static_cast<double>(N - 1) / static_cast<double>(N);
}

// Total words moved when an (I x J) * (J x K) product is cut N_I, N_J, N_K
// ways along its three axes.
inline double slicing_volume(std::int64_t I, std::int64_t J, std::int64_t K, std::int64_t NI,
                             std::int64_t NJ, std::int64_t NK) {
  if (I < 1 || J < 1 || K < 1 || NI < 1 || NJ < 1 || NK < 1)
    throw InvariantViolation("slicing", "dimensions and cuts must be positive");
  if (I % NI != 0 || J % NJ != 0 || K % NK != 0)
    throw Infeasible("slice_divisibility", "each cut must divide its dimension");
  auto d = [](std::int64_t v) { return static_cast<double>(v); };
  return 2.0 * (d(I) * d(J) * d(NK - 1) + d(K) * d(J) * d(NI - 1) + d(I) * d(K) * d(NJ - 1));
}

// Cluster-wide received words per batch.
struct CommVolumes {
  double M_DP = 0.0;
  double M_TP = 0.0;
  double M_PP = 0.0;
  double M_EP = 0.0;
};

inline CommVolumes batch_comm_volumes(const ModelShape& s, const ParallelismConfig& c) {
  const double b = static_cast<double>(s.b), dm = static_cast<double>(s.d_model),
               dff = static_cast<double>(s.d_ff), L = static_cast<double>(s.L);
  const double virt = static_cast<double>(c.n_pp * c.i);
  CommVolumes v;
  v.M_DP = 2.0 * s.N_p * static_cast<double>(c.n_dp - 1);
  v.M_TP = 4.0 * L * b * (dff * static_cast<double>(c.n_tp_model - 1) + dm * static_cast<double>(c.n_tp_ff - 1));
  v.M_PP = c.n_pp > 1 ? 2.0 * b * dm * (virt - 1.0) : 0.0;
  double boundaries = c.n_pp > 1 ? L - virt : L - 1.0;
  v.M_EP = 2.0 * b * dm * boundaries * (1.0 - 1.0 / static_cast<double>(c.n_ep));
  return v;
}

namespace detail {

// Number of block interfaces (out of L-1) whose pipeline hop crosses exactly
// level h, index 0 meaning both sides sit on the same stage.
inline std::array<std::int64_t, kMaxLevels + 1> pp_interface_counts(std::int64_t L, const Levels& pp,
                                                                    std::int64_t i) {
  std::array<std::int64_t, kMaxLevels + 1> n{};
  const std::int64_t n_pp = product(pp);
  const std::size_t hs = top_level(pp);
  if (n_pp == 1 || hs == 0) {
    n[0] = L - 1;
    return n;
  }
  n[hs] = i * pp[hs - 1] - 1;
  for (std::size_t h = 1; h < hs; ++h) {
    std::int64_t above = 1;
    for (std::size_t k = h + 1; k <= hs; ++k) above *= pp[k - 1];
    n[h] = i * above * (pp[h - 1] - 1);
  }
  n[0] = L - i * n_pp;
  return n;
}

}  // namespace detail

// P[h] for h = 0..H: probability that a block interface needs a
// point-to-point transfer whose highest crossed level is h.
template <class Real = double>
std::vector<Real> pp_frequencies(std::int64_t L, const Levels& pp, std::int64_t i, std::size_t H) {
  std::vector<Real> p(H + 1, Real(0));
  if (L == 1) {
    p[0] = Real(1);
    return p;
  }
  auto n = detail::pp_interface_counts(L, pp, i);
  for (std::size_t h = 0; h <= H; ++h) p[h] = Real(n[h]) / Real(L - 1);
  return p;
}

template <class Real = double>
std::vector<Real> ep_frequencies(const Levels& ep, std::size_t H) {
  std::vector<Real> p(H + 1, Real(0));
  p[0] = Real(1) / Real(product(ep));
  for (std::size_t h = 1; h <= H; ++h) {
    std::int64_t tail = 1;
    for (std::size_t k = h; k <= H; ++k) tail *= ep[k - 1];
    p[h] = Real(ep[h - 1] - 1) / Real(tail);
  }
  return p;
}

template <class Real = double>
std::vector<Real> p2p_frequencies(std::int64_t L, const Levels& pp, std::int64_t i, const Levels& ep,
                                  std::size_t H) {
  if (H > kMaxLevels) throw InvariantViolation("levels", "too many network levels");
  for (std::size_t h = H; h < kMaxLevels; ++h)
    if (pp[h] != 1 || ep[h] != 1) throw InvariantViolation("levels", "factor beyond the top level");
  const std::int64_t n_pp = product(pp);
  if (n_pp > 1) check_stage_split(L, n_pp, i);
  auto a = pp_frequencies<Real>(L, pp, i, H);
  auto e = ep_frequencies<Real>(ep, H);
  std::vector<Real> p(H + 1, Real(0));
  for (std::size_t x = 0; x <= H; ++x)
    for (std::size_t y = 0; y <= H; ++y) p[std::max(x, y)] += a[x] * e[y];
  return p;
}

struct AllReduceCost {
  double time = 0.0;  // bandwidth seconds
  std::array<std::int64_t, kMaxLevels> latency_events{};
  double latency_s = 0.0;
};

// One all-reduce per participating level, bottom up. Bandwidth terms add;
// each level is one serial latency event.
inline AllReduceCost hierarchical_allreduce(double words, const Levels& factors, const ClusterSpec& c) {
  AllReduceCost r;
  for (std::size_t h = 0; h < kMaxLevels; ++h) {
    if (factors[h] < 1) throw InvariantViolation("factors", "must be positive");
    if (factors[h] == 1) continue;
    if (h >= c.levels()) throw Infeasible("level_assignment", "factor placed on a missing level");
    std::int64_t fo = c.fan_out(h + 1);
    if (fo != 0 && fo % factors[h] != 0)
      throw Infeasible("level_group_size", "factor " + std::to_string(factors[h]) + " exceeds level " +
                                               std::to_string(h + 1) + " group");
    r.time += transfer_time(allreduce_words_per_gpu(words, factors[h]), c.network[h].bandwidth_words_per_s);
    r.latency_events[h] = 1;
    r.latency_s += c.path_latency(h + 1);
  }
  return r;
}

struct OverlapPolicy {
  double efficiency = 1.0;             // share of overlappable comm that hides
  bool overlap_data_parallel = false;  // DP all-reduce exposed by default
};

struct CommTimes {
  double t_dp = 0.0;   // raw bandwidth seconds per step
  double t_tp = 0.0;
  double t_p2p = 0.0;
  double t_DP_overlap = 0.0;
  double t_DP_exposed = 0.0;
  double t_nDP_overlap = 0.0;
  double t_nDP_exposed = 0.0;
  double t_latency = 0.0;
  std::array<double, kMaxLevels> serial_latency_events{};

  double bandwidth_total() const { return t_dp + t_tp + t_p2p; }
};

namespace detail {

// Pieces of CommTimes that depend only on the degrees and their placement.
struct TupleComm {
  double t_dp = 0.0;
  double t_tp = 0.0;
  double dp_latency = 0.0;
  std::array<double, kMaxLevels> dp_events{};
  double tp_latency_per_pass = 0.0;  // one block, forward + backward
  std::array<double, kMaxLevels> tp_events_per_pass{};
  double p2p_words = 0.0;  // 2 b d_model (L-1) / N_GPU
  std::array<double, kMaxLevels + 1> ep_p{};
  std::size_t ep_top = 0;
};

inline TupleComm tuple_comm(const ModelShape& s, const ParallelismConfig& c, const ClusterSpec& cl) {
  TupleComm t;
  const std::size_t H = cl.levels();
  const double w_dp = s.N_p / static_cast<double>(c.n_tp() * c.n_pp * c.n_ep);
  auto dp = hierarchical_allreduce(w_dp, c.levels[Method::DP], cl);
  t.t_dp = dp.time;
  for (std::size_t h = 0; h < H; ++h) {
    t.dp_events[h] = 2.0 * static_cast<double>(dp.latency_events[h]);
    t.dp_latency += t.dp_events[h] * cl.path_latency(h + 1);
  }

  const double tokens = static_cast<double>(s.b) / static_cast<double>(c.n_dp * c.n_ep);
  const double blocks = static_cast<double>(s.L) / static_cast<double>(c.n_pp);
  const double dff_local = static_cast<double>(s.d_ff / c.n_tp_ff);
  const double dm_local = static_cast<double>(s.d_model / c.n_tp_model);
  auto tm = hierarchical_allreduce(dff_local, c.levels[Method::TPmodel], cl);
  auto tf = hierarchical_allreduce(dm_local, c.levels[Method::TPff], cl);
  t.t_tp = 2.0 * tokens * blocks * (tm.time + tf.time);
  for (std::size_t h = 0; h < H; ++h) {
    t.tp_events_per_pass[h] = 2.0 * static_cast<double>(tm.latency_events[h] + tf.latency_events[h]);
    t.tp_latency_per_pass += t.tp_events_per_pass[h] * cl.path_latency(h + 1);
  }

  t.p2p_words = 2.0 * static_cast<double>(s.b) * static_cast<double>(s.d_model) *
                static_cast<double>(s.L - 1) / static_cast<double>(c.n_gpu());
  auto e = ep_frequencies<double>(c.levels[Method::EP], H);
  for (std::size_t h = 0; h <= H; ++h) t.ep_p[h] = e[h];
  t.ep_top = top_level(c.levels[Method::EP]);
  return t;
}

struct P2PComm {
  double t_bw = 0.0;
  double latency = 0.0;  // one forward plus one backward traversal
  std::array<double, kMaxLevels> events{};
};

inline P2PComm p2p_comm(const ModelShape& s, const ParallelismConfig& c, const ClusterSpec& cl,
                        const TupleComm& t) {
  P2PComm r;
  const std::size_t H = cl.levels();
  if (s.L == 1) return r;
  auto n = pp_interface_counts(s.L, c.levels[Method::PP], c.i);
  const double lm1 = static_cast<double>(s.L - 1);
  std::array<double, kMaxLevels + 1> p{};
  for (std::size_t x = 0; x <= H; ++x)
    for (std::size_t y = 0; y <= H; ++y) p[std::max(x, y)] += static_cast<double>(n[x]) / lm1 * t.ep_p[y];
  for (std::size_t h = 1; h <= H; ++h)
    r.t_bw += transfer_time(t.p2p_words * p[h], cl.network[h - 1].bandwidth_words_per_s);
  // Latency: every interface waits for its slowest token, so expert
  // routing is charged at its top level.
  for (std::size_t x = 0; x <= H; ++x) {
    std::size_t lvl = std::max(x, t.ep_top);
    if (lvl == 0 || n[x] == 0) continue;
    r.events[lvl - 1] += 2.0 * static_cast<double>(n[x]);
  }
  for (std::size_t h = 0; h < H; ++h) r.latency += r.events[h] * cl.path_latency(h + 1);
  return r;
}

inline CommTimes compose_comm(const TupleComm& t, const P2PComm& p, const ParallelismConfig& c, double passes,
                              const OverlapPolicy& pol) {
  CommTimes r;
  r.t_dp = t.t_dp;
  r.t_tp = t.t_tp;
  r.t_p2p = p.t_bw;
  const double eta = pol.efficiency;
  if (pol.overlap_data_parallel) {
    r.t_DP_overlap = eta * t.t_dp;
    r.t_DP_exposed = (1.0 - eta) * t.t_dp;
  } else {
    r.t_DP_exposed = t.t_dp;
  }
  const double ndp = t.t_tp + p.t_bw;
  r.t_nDP_overlap = eta * ndp;
  r.t_nDP_exposed = (1.0 - eta) * ndp;
  r.t_latency = t.dp_latency;
  for (std::size_t h = 0; h < kMaxLevels; ++h) r.serial_latency_events[h] = t.dp_events[h];
  if (!hides_non_dp_latency(c.schedule, c.n_pp)) {
    r.t_latency += passes * t.tp_latency_per_pass + p.latency;
    for (std::size_t h = 0; h < kMaxLevels; ++h)
      r.serial_latency_events[h] += passes * t.tp_events_per_pass[h] + p.events[h];
  }
  return r;
}

}  // namespace detail

// TP passes on the critical path: every block a device owns, for every
// microbatch, stretched by the bubble.
inline double tp_passes(const ModelShape& s, const ParallelismConfig& c, double f_b) {
  return static_cast<double>(s.L / c.n_pp) * static_cast<double>(c.m) / (1.0 - f_b);
}

inline CommTimes comm_times(const ModelShape& s, const ParallelismConfig& c, const ClusterSpec& cl, double f_b,
                            const OverlapPolicy& pol = {}) {
  auto t = detail::tuple_comm(s, c, cl);
  auto p = detail::p2p_comm(s, c, cl, t);
  return detail::compose_comm(t, p, c, tp_passes(s, c, f_b), pol);
}

}  // namespace scalelimits
