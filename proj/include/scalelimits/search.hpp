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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scalelimits/comm.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/matmul.hpp"
#include "scalelimits/parallelism.hpp"
#include "scalelimits/pipeline.hpp"
#include "scalelimits/scaling.hpp"
#include "scalelimits/simulate.hpp"

namespace scalelimits {

struct SearchOptions {
  SimulationOptions sim;
  unsigned threads = 1;
  bool interleaved = true;
  bool zero_bubble = true;
  std::int64_t max_gpus = std::int64_t{1} << 30;
  // Optional early stop for min_cluster: give up when the best step time
  // improves by less than plateau_improvement over plateau_octaves
  // consecutive octaves. 0 scans the whole lattice up to max_gpus.
  double plateau_improvement = 0.01;
  int plateau_octaves = 0;
};

struct SearchResult {
  bool feasible = false;
  ParallelismConfig best;
  StepTimeBreakdown breakdown;
  std::int64_t n_gpu = 0;
  std::int64_t evaluated = 0;  // (schedule, i, m) points simulated
  std::int64_t tuples = 0;     // degree tuples considered
  double lower_bound = kInfinity;
  std::string message;
};

// ---------------------------------------------------------------------------
// Divisor lattice.

inline std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> small, large;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d != 0) continue;
    small.push_back(d);
    if (d != n / d) large.push_back(n / d);
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

inline std::int64_t odd_part(std::int64_t n) {
  while (n > 0 && n % 2 == 0) n /= 2;
  return n;
}

struct DegreeTuple {
  std::int64_t dp = 1, tp_ff = 1, tp_model = 1, pp = 1, ep = 1;
};

// All (N_DP, N_TP,ff, N_TP,model, N_PP, N_EP) with product n where each
// sliced dimension is divided exactly and every DP shard gets at least one
// token per expert.
inline std::vector<DegreeTuple> degree_tuples(const ModelShape& s, std::int64_t n) {
  std::vector<DegreeTuple> out;
  for (auto pp : divisors(std::gcd(n, s.L))) {
    const std::int64_t r1 = n / pp;
    for (auto ep : divisors(std::gcd(r1, s.E))) {
      const std::int64_t r2 = r1 / ep;
      for (auto tm : divisors(std::gcd(r2, s.d_model))) {
        const std::int64_t r3 = r2 / tm;
        for (auto tf : divisors(std::gcd(r3, s.d_ff))) {
          const std::int64_t dp = r3 / tf;
          if (nanobatch_real(s, dp, 1) < 1.0) continue;
          out.push_back({dp, tf, tm, pp, ep});
        }
      }
    }
  }
  return out;
}

inline std::vector<std::int64_t> microbatch_options(const ModelShape& s, std::int64_t dp, std::int64_t pp,
                                                    Schedule sched) {
  std::vector<std::int64_t> out;
  std::int64_t lo = sched == Schedule::ZeroBubble ? 2 * pp - 1 : 1;
  if (nanobatch_real(s, dp, lo) < 1.0) return out;
  out.push_back(lo);
  for (std::int64_t m = 1; m <= (std::int64_t{1} << 40); m *= 2) {
    if (m <= lo) continue;
    if (nanobatch_real(s, dp, m) < 1.0) break;
    out.push_back(m);
  }
  return out;
}

inline std::vector<std::int64_t> interleave_options(const ModelShape& s, std::int64_t pp, Schedule sched) {
  if (pp == 1 || sched != Schedule::Interleaved) return {1};
  return divisors(s.L / pp);
}

inline ParallelismConfig base_config(const DegreeTuple& t) {
  ParallelismConfig c;
  c.n_dp = t.dp;
  c.n_tp_ff = t.tp_ff;
  c.n_tp_model = t.tp_model;
  c.n_pp = t.pp;
  c.n_ep = t.ep;
  return c;
}

// With one stage both schedules reduce to the same plain loop; keep one.
inline std::vector<Schedule> schedules(const SearchOptions& o, std::int64_t pp) {
  std::vector<Schedule> s;
  if (o.interleaved) s.push_back(Schedule::Interleaved);
  if (o.zero_bubble && (pp > 1 || s.empty())) s.push_back(Schedule::ZeroBubble);
  return s;
}

inline std::vector<ParallelismConfig> enumerate_configs(const ModelShape& s, std::int64_t n, const ClusterSpec& cl,
                                                        const SearchOptions& o = {}) {
  if (n < 1) throw InvariantViolation("n_gpu", "must be at least 1");
  level_capacities(cl, n);
  std::vector<ParallelismConfig> out;
  for (const auto& t : degree_tuples(s, n)) {
    ParallelismConfig c = base_config(t);
    c.levels = assign_levels(s, c, cl);
    for (Schedule sched : schedules(o, t.pp)) {
      c.schedule = sched;
      for (auto i : interleave_options(s, t.pp, sched)) {
        c.i = i;
        for (auto m : microbatch_options(s, t.dp, t.pp, sched)) {
          c.m = m;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

// Strict total order: step time, then total communication, then degrees.
inline bool better(double t_a, double comm_a, const ParallelismConfig& a, double t_b, double comm_b,
                   const ParallelismConfig& b) {
  if (t_a != t_b) return t_a < t_b;
  if (comm_a != comm_b) return comm_a < comm_b;
  return a.lex_key() < b.lex_key();
}

namespace detail {

struct TupleOutcome {
  bool found = false;
  ParallelismConfig config;
  StepTimeBreakdown breakdown;
  std::int64_t evaluated = 0;
};

inline TupleOutcome best_in_tuple(const ModelShape& s, const DegreeTuple& t, const ClusterSpec& cl,
                                  const SearchOptions& o, double sustained) {
  TupleOutcome out;
  ParallelismConfig c = base_config(t);
  c.levels = assign_levels(s, c, cl);
  const TupleComm tc = tuple_comm(s, c, cl);
  const bool wis = weights_fit_in_sram(s, c.n_tp(), c.n_pp, c.n_ep, cl.device);
  double best_t = kInfinity, best_comm = kInfinity;
  std::vector<std::pair<std::int64_t, P2PComm>> p2p_cache;
  auto p2p_for = [&](std::int64_t i) -> const P2PComm& {
    for (const auto& e : p2p_cache)
      if (e.first == i) return e.second;
    ParallelismConfig ci = c;
    ci.i = i;
    p2p_cache.emplace_back(i, p2p_comm(s, ci, cl, tc));
    return p2p_cache.back().second;
  };
  for (Schedule sched : schedules(o, t.pp)) {
    c.schedule = sched;
    const auto is = interleave_options(s, t.pp, sched);
    for (auto m : microbatch_options(s, t.dp, t.pp, sched)) {
      c.m = m;
      const double nano = nanobatch(s, c.n_dp, m);
      const MatmulStep mm = matmul_step(s, c, cl.device, nano, wis);
      for (auto i : is) {
        c.i = i;
        const double f_b = bubble_fraction(sched, c.n_pp, m, i);
        const P2PComm& pc = p2p_for(i);
        const CommTimes comm = compose_comm(tc, pc, c, tp_passes(s, c, f_b), o.sim.overlap);
        const double t_step = compose_step(mm.t_matmul, comm, f_b);
        const double ct = comm.bandwidth_total() + comm.t_latency;
        ++out.evaluated;
        if (!out.found || better(t_step, ct, c, best_t, best_comm, out.config)) {
          out.found = true;
          best_t = t_step;
          best_comm = ct;
          out.config = c;
          out.breakdown = finish(s, c, cl, mm, comm, f_b, nano, wis, sustained);
        }
      }
    }
  }
  return out;
}

// Lower bound on the step time of every (schedule, i, m) completion of a
// degree tuple. Relies on m * t(b'/m) being non-decreasing in m, which the
// tiled traffic model guarantees.
inline double tuple_lower_bound(const ModelShape& s, const DegreeTuple& t, const ClusterSpec& cl,
                                const SearchOptions& o) {
  ParallelismConfig c = base_config(t);
  c.levels = assign_levels(s, c, cl);
  const TupleComm tc = tuple_comm(s, c, cl);
  const bool wis = weights_fit_in_sram(s, c.n_tp(), c.n_pp, c.n_ep, cl.device);
  c.m = 1;
  const double x = nanobatch_real(s, c.n_dp, 1);
  const double A1 = matmul_step(s, c, cl.device, x, wis).t_matmul;
  const double K = static_cast<double>(s.L / c.n_pp) * static_cast<double>(s.E / c.n_ep);
  const double kappa = std::min(A1, 6.0 * K * cl.device.kernel_latency_s);
  const double eta = o.sim.overlap.efficiency;
  const double dp_y = o.sim.overlap.overlap_data_parallel ? eta * tc.t_dp : 0.0;
  const double dp_n = o.sim.overlap.overlap_data_parallel ? (1.0 - eta) * tc.t_dp : tc.t_dp;
  const double head = tc.dp_latency + dp_n;
  double lb = kInfinity;
  if (o.zero_bubble && c.n_pp > 1) {
    const std::int64_t m0 = 2 * c.n_pp - 1;
    if (nanobatch_real(s, c.n_dp, m0) >= 1.0) {
      const double A0 = A1 + static_cast<double>(m0 - 1) * kappa;
      const double inner = std::max(A0, eta * tc.t_tp) + (1.0 - eta) * tc.t_tp;
      lb = std::min(lb, head + std::max(dp_y, inner));
    }
  }
  if (o.interleaved || c.n_pp == 1) {
    const double N = static_cast<double>(c.n_pp);
    const double i_max = c.n_pp > 1 ? static_cast<double>(s.L / c.n_pp) : 1.0;
    const double cc = (N - 1.0) / i_max;
    const double blocks = static_cast<double>(s.L / c.n_pp);
    const double ell = tc.tp_latency_per_pass;
    ParallelismConfig c1 = c;
    c1.i = 1;
    const double p2p_lat = p2p_comm(s, c1, cl, tc).latency;
    const double slope = kappa + blocks * ell;
    const double xy = (A1 - kappa) + cc * kappa + cc * blocks * ell + p2p_lat +
                      2.0 * std::sqrt(slope * cc * (A1 - kappa));
    const double y_min = blocks * (1.0 + cc) * ell + p2p_lat;
    lb = std::min(lb, head + std::max(xy, dp_y + y_min));
  }
  return lb * (1.0 - 1e-12);
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  unsigned w = std::min<std::size_t>(threads, n);
  for (unsigned j = 0; j < w; ++j) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          f(k);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

// Time-minimal configuration for exactly n GPUs. Tuples are visited in order
// of their lower bound and skipped once the bound exceeds the best step time
// found (or step_budget, when the caller only cares about configurations
// that meet it).
inline SearchResult best_config(const ModelShape& s, std::int64_t n, const ClusterSpec& cl,
                                const SearchOptions& o = {}, double step_budget = kInfinity) {
  validate(s);
  SearchResult r;
  r.n_gpu = n;
  if (n < 1) throw InvariantViolation("n_gpu", "must be at least 1");
  if (o.threads < 1) throw InvariantViolation("threads", "must be at least 1");
  level_capacities(cl, n);
  const auto tuples = degree_tuples(s, n);
  r.tuples = static_cast<std::int64_t>(tuples.size());
  if (tuples.empty()) {
    r.message = "no degree tuple satisfies the divisibility and batch constraints";
    return r;
  }
  const double sustained = sustained_utilization(cl.device);

  std::vector<double> lb(tuples.size());
  detail::parallel_for(tuples.size(), o.threads,
                       [&](std::size_t k) { lb[k] = detail::tuple_lower_bound(s, tuples[k], cl, o); });
  std::vector<std::size_t> order(tuples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lb[a] != lb[b]) return lb[a] < lb[b];
    return a < b;
  });
  r.lower_bound = lb[order.front()];

  const std::size_t chunk = o.threads <= 1 ? 1 : 2 * static_cast<std::size_t>(o.threads);
  std::vector<detail::TupleOutcome> outcomes(chunk);
  for (std::size_t start = 0; start < order.size(); start += chunk) {
    const double cut = std::min(step_budget, r.feasible ? r.breakdown.t_step : kInfinity);
    if (lb[order[start]] > cut) break;
    const std::size_t len = std::min(chunk, order.size() - start);
    detail::parallel_for(len, o.threads, [&](std::size_t k) {
      const std::size_t idx = order[start + k];
      outcomes[k] = lb[idx] > cut ? detail::TupleOutcome{} : detail::best_in_tuple(s, tuples[idx], cl, o, sustained);
    });
    for (std::size_t k = 0; k < len; ++k) {
      const auto& oc = outcomes[k];
      r.evaluated += oc.evaluated;
      if (!oc.found) continue;
      if (!r.feasible || better(oc.breakdown.t_step, oc.breakdown.comm_total(), oc.config, r.breakdown.t_step,
                                r.breakdown.comm_total(), r.best)) {
        r.feasible = true;
        r.best = oc.config;
        r.breakdown = oc.breakdown;
      }
    }
  }
  if (!r.feasible) r.message = "no configuration meets the step-time budget";
  return r;
}

// ---------------------------------------------------------------------------
// Minimum cluster size.

enum class Failure { None, LatencyWall, Plateau, CapExhausted, Shape };

inline std::string_view to_string(Failure f) {
  switch (f) {
    case Failure::None: return "none";
    case Failure::LatencyWall: return "latency_wall";
    case Failure::Plateau: return "plateau";
    case Failure::CapExhausted: return "cap_exhausted";
    case Failure::Shape: return "shape";
  }
  return "?";
}

struct ClusterSearch {
  bool feasible = false;
  Failure failure = Failure::None;
  std::string message;
  ModelShape shape;
  SearchResult result;
  std::int64_t sizes_tried = 0;
};

// Cluster sizes the search visits: node size times a power of two times an
// odd factor shared with L or E, so deep pipelines and odd expert counts
// stay reachable.
inline std::vector<std::int64_t> cluster_lattice(const ModelShape& s, const ClusterSpec& cl, std::int64_t lo,
                                                 std::int64_t hi) {
  std::set<std::int64_t> odd;
  for (auto a : divisors(odd_part(s.L)))
    for (auto b : divisors(odd_part(s.E))) odd.insert(a * b);
  std::set<std::int64_t> out;
  for (auto q : odd) {
    for (std::int64_t p = 1;; p *= 2) {
      const double v = static_cast<double>(cl.node_size) * static_cast<double>(p) * static_cast<double>(q);
      if (v > static_cast<double>(hi)) break;
      const std::int64_t n = cl.node_size * p * q;
      if (n >= lo) out.insert(n);
    }
  }
  const std::int64_t cap = cl.max_gpus();
  std::vector<std::int64_t> v;
  for (auto n : out)
    if (cap == 0 || n <= cap) v.push_back(n);
  return v;
}

// Per-step time no configuration can beat: every microbatch passes through
// all L blocks, six kernels each, and the pipeline keeps at most one block
// of work per device in flight.
inline double step_time_floor(const ModelShape& s, const ClusterSpec& cl) {
  return 6.0 * static_cast<double>(s.L) * cl.device.kernel_latency_s;
}

inline ClusterSearch min_cluster_for_shape(const ModelShape& s, double t_train, const ClusterSpec& cl,
                                           const SearchOptions& o = {}) {
  ClusterSearch out;
  out.shape = s;
  if (!(t_train > 0.0)) throw InvariantViolation("t_train", "must be positive");
  const double steps = detail::steps_for(s);
  const double budget = t_train / steps;
  if (step_time_floor(s, cl) * steps > t_train) {
    std::ostringstream os;
    os << "kernel latency alone needs " << step_time_floor(s, cl) * steps << " s over " << steps
       << " steps, more than t_train = " << t_train << " s";
    out.failure = Failure::LatencyWall;
    out.message = os.str();
    return out;
  }
  const double n_lo = training_compute(s).in_mac() / (cl.device.peak_mac_per_s * t_train);
  const std::int64_t lo = static_cast<std::int64_t>(std::min(std::ceil(n_lo), 9.0e18));
  const auto sizes = cluster_lattice(s, cl, std::max<std::int64_t>(lo, 1), o.max_gpus);

  double best_seen = kInfinity;
  std::int64_t octave = -1;
  double octave_best = kInfinity;
  std::vector<double> history;
  auto close_octave = [&]() {
    if (octave < 0 || o.plateau_octaves == 0) return false;
    history.push_back(octave_best);
    const std::size_t k = history.size();
    const std::size_t w = static_cast<std::size_t>(o.plateau_octaves);
    if (k > w) {
      const double before = history[k - 1 - w];
      if (history[k - 1] > before * (1.0 - o.plateau_improvement)) return true;
    }
    return false;
  };

  for (auto n : sizes) {
    const std::int64_t oct =
        static_cast<std::int64_t>(std::floor(std::log2(static_cast<double>(n) / static_cast<double>(cl.node_size))));
    if (oct != octave) {
      if (close_octave()) {
        std::ostringstream os;
        os << "best step time " << best_seen << " s stopped improving; budget is " << budget << " s per step";
        out.failure = Failure::Plateau;
        out.message = os.str();
        return out;
      }
      octave = oct;
      octave_best = kInfinity;
    }
    ++out.sizes_tried;
    SearchResult r = best_config(s, n, cl, o, budget);
    const double seen = r.feasible ? r.breakdown.t_step : r.lower_bound;
    octave_best = std::min(octave_best, seen);
    best_seen = std::min(best_seen, seen);
    if (r.feasible && r.breakdown.t_run <= t_train) {
      out.feasible = true;
      out.result = std::move(r);
      return out;
    }
  }
  std::ostringstream os;
  os << "no cluster up to " << o.max_gpus << " GPUs meets t_train; best step time " << best_seen
     << " s against a budget of " << budget << " s";
  out.failure = Failure::CapExhausted;
  out.message = os.str();
  return out;
}

inline ClusterSearch min_cluster(Compute T, double t_train, const ScalingLaws& laws, const ClusterSpec& cl, Mode mode,
                                 const SearchOptions& o = {}) {
  ModelShape s;
  try {
    s = shape_from_compute(T, laws, mode);
  } catch (const Infeasible& e) {
    ClusterSearch out;
    out.failure = Failure::Shape;
    out.message = e.what();
    return out;
  }
  return min_cluster_for_shape(s, t_train, cl, o);
}

// ---------------------------------------------------------------------------
// Sweeps.

inline constexpr double kLinearScalingThreshold = 0.8;

struct SweepRecord {
  double T_flop = 0.0;
  bool feasible = false;
  Failure failure = Failure::None;
  std::string message;
  ModelShape shape;
  ParallelismConfig config;
  StepTimeBreakdown breakdown;
  std::int64_t n_gpu = 0;

  // log(N_X) / log(N_GPU) for dp, tp, pp, ep.
  std::array<double, 4> parallelism_fractions() const {
    std::array<double, 4> f{};
    if (!feasible || n_gpu <= 1) return f;
    const double ln = std::log(static_cast<double>(n_gpu));
    f[0] = std::log(static_cast<double>(config.n_dp)) / ln;
    f[1] = std::log(static_cast<double>(config.n_tp())) / ln;
    f[2] = std::log(static_cast<double>(config.n_pp)) / ln;
    f[3] = std::log(static_cast<double>(config.n_ep)) / ln;
    return f;
  }
};

struct SweepResult {
  std::vector<SweepRecord> records;
  std::optional<double> endpoint_flop;  // first T below the 80% rule
};

// per_decade log-spaced values from lo to hi inclusive.
inline std::vector<double> log_points(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi >= lo)) throw InvariantViolation("T_range", "need 0 < lo <= hi");
  if (per_decade < 1) throw InvariantViolation("points_per_decade", "must be at least 1");
  const double a = std::log10(lo), b = std::log10(hi);
  const auto n = static_cast<std::int64_t>(std::llround((b - a) * per_decade));
  std::vector<double> v;
  for (std::int64_t k = 0; k <= n; ++k)
    v.push_back(n == 0 ? lo : std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(n)));
  return v;
}

inline SweepRecord sweep_point(double T_flop, double t_train, const ScalingLaws& laws, const ClusterSpec& cl,
                               Mode mode, const SearchOptions& o) {
  SweepRecord rec;
  rec.T_flop = T_flop;
  ClusterSearch cs = min_cluster(Compute::flop(T_flop), t_train, laws, cl, mode, o);
  rec.shape = cs.shape;
  rec.feasible = cs.feasible;
  rec.failure = cs.failure;
  rec.message = cs.message;
  if (cs.feasible) {
    rec.config = cs.result.best;
    rec.breakdown = cs.result.breakdown;
    rec.n_gpu = cs.result.n_gpu;
  }
  return rec;
}

inline std::optional<double> linear_scaling_endpoint(const std::vector<SweepRecord>& records) {
  for (const auto& r : records)
    if (!r.feasible || r.breakdown.normalized_utilization < kLinearScalingThreshold) return r.T_flop;
  return std::nullopt;
}

using SweepProgress = std::function<void(std::size_t index, const SweepRecord&)>;

// Points run concurrently across o.threads workers; each point's own search
// is single threaded. Output is ordered by T.
inline SweepResult sweep(std::vector<double> T_flop, double t_train, const ScalingLaws& laws, const ClusterSpec& cl,
                         Mode mode, const SearchOptions& o = {}, const SweepProgress& progress = {},
                         const std::atomic<bool>* cancel = nullptr) {
  std::sort(T_flop.begin(), T_flop.end());
  SweepResult res;
  res.records.resize(T_flop.size());
  SearchOptions inner = o;
  inner.threads = 1;
  std::mutex mu;
  detail::parallel_for(T_flop.size(), o.threads, [&](std::size_t k) {
    if (cancel != nullptr && cancel->load()) return;
    SweepRecord rec = sweep_point(T_flop[k], t_train, laws, cl, mode, inner);
    std::lock_guard<std::mutex> g(mu);
    res.records[k] = rec;
    if (progress) progress(k, res.records[k]);
  });
  if (cancel != nullptr && cancel->load()) throw Error("sweep cancelled");
  res.endpoint_flop = linear_scaling_endpoint(res.records);
  return res;
}

}  // namespace scalelimits
