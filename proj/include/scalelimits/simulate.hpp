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

#include "json.hpp"
#include "scalelimits/comm.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/matmul.hpp"
#include "scalelimits/parallelism.hpp"
#include "scalelimits/pipeline.hpp"
#include "scalelimits/scaling.hpp"

namespace scalelimits {

struct StepTimeBreakdown {
  double t_matmul = 0.0;
  CommTimes comm;
  double f_b = 0.0;
  double t_step = 0.0;
  double n_steps = 0.0;
  double t_run = 0.0;
  double mfu = 0.0;
  double normalized_utilization = 0.0;
  bool weights_in_sram = false;
  double nanobatch = 0.0;
  Bound matmul_bound = Bound::Arithmetic;

  // Total communication time, overlappable or not; the secondary search key.
  double comm_total() const { return comm.bandwidth_total() + comm.t_latency; }
};

struct SimulationOptions {
  OverlapPolicy overlap;
};

// Weights and their gradients of one device's share fit on chip.
inline bool weights_fit_in_sram(const ModelShape& s, std::int64_t n_tp, std::int64_t n_pp, std::int64_t n_ep,
                                const DeviceSpec& dev) {
  double per_device = s.N_p / static_cast<double>(n_tp * n_pp * n_ep);
  return dev.sram_words() >= 2.0 * per_device;
}

namespace detail {

struct MatmulStep {
  double t_matmul = 0.0;
  double per_pass = 0.0;  // one microbatch through one block of one expert
  Bound bound = Bound::Arithmetic;
};

// Six matmuls per block per microbatch: two forward, two for activation
// gradients, two for weight gradients.
inline MatmulStep matmul_step(const ModelShape& s, const ParallelismConfig& c, const DeviceSpec& dev,
                              double nano, bool wis) {
  const double dff = static_cast<double>(s.d_ff / c.n_tp_ff);
  const double dm = static_cast<double>(s.d_model / c.n_tp_model);
  MatmulTraffic act{wis, false, false};
  MatmulTraffic grad{false, wis, true};
  MatmulTime a = matmul_time({dff, dm, nano}, dev, act);
  MatmulTime b = matmul_time({dm, dff, nano}, dev, act);
  MatmulTime g1 = matmul_time({dff, nano, dm}, dev, grad);
  MatmulTime g2 = matmul_time({dm, nano, dff}, dev, grad);
  MatmulStep r;
  r.per_pass = 2.0 * a.total + 2.0 * b.total + g1.total + g2.total;
  const double count = static_cast<double>(c.m) * static_cast<double>(s.L / c.n_pp) *
                       static_cast<double>(s.E / c.n_ep);
  r.t_matmul = count * r.per_pass;
  // Report the bound of the largest contributor.
  const MatmulTime* big = &a;
  for (const MatmulTime* t : {&b, &g1, &g2})
    if (t->total > big->total) big = t;
  r.bound = big->bound_by;
  return r;
}

inline double compose_step(double t_matmul, const CommTimes& c, double f_b) {
  return c.t_latency + c.t_DP_exposed +
         std::max(c.t_DP_overlap, (std::max(t_matmul, c.t_nDP_overlap) + c.t_nDP_exposed) / (1.0 - f_b));
}

inline double steps_for(const ModelShape& s) { return std::ceil(s.D / static_cast<double>(s.b)); }

inline StepTimeBreakdown finish(const ModelShape& s, const ParallelismConfig& c, const ClusterSpec& cl,
                                const MatmulStep& mm, const CommTimes& comm, double f_b, double nano,
                                bool wis, double sustained) {
  StepTimeBreakdown r;
  r.t_matmul = mm.t_matmul;
  r.comm = comm;
  r.f_b = f_b;
  r.t_step = compose_step(mm.t_matmul, comm, f_b);
  r.n_steps = steps_for(s);
  r.t_run = r.n_steps * r.t_step;
  r.mfu = training_compute(s).in_mac() /
          (static_cast<double>(c.n_gpu()) * cl.device.peak_mac_per_s * r.t_run);
  r.normalized_utilization = r.mfu / sustained;
  r.weights_in_sram = wis;
  r.nanobatch = nano;
  r.matmul_bound = mm.bound;
  return r;
}

inline bool is_unassigned(const ParallelismConfig& c) {
  for (Method x : kMethods)
    if (product(c.levels[x]) != 1) return false;
  return true;
}

}  // namespace detail

// Fill in the canonical level assignment if the caller left it empty.
inline ParallelismConfig with_levels(const ModelShape& s, ParallelismConfig c, const ClusterSpec& cl) {
  if (c.n_gpu() > 1 && detail::is_unassigned(c)) c.levels = assign_levels(s, c, cl);
  return c;
}

inline StepTimeBreakdown step_time(const ModelShape& s, const ParallelismConfig& config, const ClusterSpec& cl,
                                   const SimulationOptions& opt = {}) {
  validate(s);
  check_degrees(s, config);
  ParallelismConfig c = with_levels(s, config, cl);
  check_levels(cl, c);
  if (!(opt.overlap.efficiency >= 0.0 && opt.overlap.efficiency <= 1.0))
    throw InvariantViolation("overlap_efficiency", "must lie in [0, 1]");
  const double f_b = bubble_fraction(c.schedule, c.n_pp, c.m, c.i);
  const double nano = nanobatch(s, c.n_dp, c.m);
  const bool wis = weights_fit_in_sram(s, c.n_tp(), c.n_pp, c.n_ep, cl.device);
  auto mm = detail::matmul_step(s, c, cl.device, nano, wis);
  auto tc = detail::tuple_comm(s, c, cl);
  auto pc = detail::p2p_comm(s, c, cl, tc);
  auto comm = detail::compose_comm(tc, pc, c, tp_passes(s, c, f_b), opt.overlap);
  return detail::finish(s, c, cl, mm, comm, f_b, nano, wis, sustained_utilization(cl.device));
}

inline double run_time(const ModelShape& s, const StepTimeBreakdown& b) { return detail::steps_for(s) * b.t_step; }

inline double mfu(const ModelShape& s, std::int64_t n_gpu, const ClusterSpec& cl, double t_run) {
  if (!(t_run > 0.0)) throw InvariantViolation("t_run", "must be positive");
  return training_compute(s).in_mac() / (static_cast<double>(n_gpu) * cl.device.peak_mac_per_s * t_run);
}

inline nlohmann::json to_json(const CommTimes& c, std::size_t n_levels) {
  nlohmann::json ev = nlohmann::json::array();
  for (std::size_t h = 0; h < n_levels; ++h) ev.push_back(c.serial_latency_events[h]);
  return {{"t_dp_bandwidth_s", c.t_dp},
          {"t_tp_bandwidth_s", c.t_tp},
          {"t_p2p_bandwidth_s", c.t_p2p},
          {"t_dp_overlap_s", c.t_DP_overlap},
          {"t_dp_exposed_s", c.t_DP_exposed},
          {"t_ndp_overlap_s", c.t_nDP_overlap},
          {"t_ndp_exposed_s", c.t_nDP_exposed},
          {"t_latency_s", c.t_latency},
          {"serial_latency_events", ev}};
}

inline nlohmann::json to_json(const StepTimeBreakdown& b, std::size_t n_levels) {
  return {{"t_matmul_s", b.t_matmul},
          {"comm", to_json(b.comm, n_levels)},
          {"bubble_fraction", b.f_b},
          {"t_step_s", b.t_step},
          {"n_steps", b.n_steps},
          {"t_run_s", b.t_run},
          {"mfu", b.mfu},
          {"normalized_utilization", b.normalized_utilization},
          {"weights_in_sram", b.weights_in_sram},
          {"nanobatch", b.nanobatch},
          {"matmul_bound", std::string(to_string(b.matmul_bound))}};
}

}  // namespace scalelimits
