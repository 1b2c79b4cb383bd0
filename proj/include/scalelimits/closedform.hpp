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
#include <string>
#include <utility>

#include "json.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/units.hpp"

namespace scalelimits {

struct ClosedFormInputs {
  double b = 4e6;                 // tokens per batch
  double L = 100.0;               // blocks
  double E = 1.0;                 // sparsity
  double C = 0.0;                 // MAC/s
  double t_train = kThreeMonths;  // s
  double t_L = 9e-6;              // s, kernel plus one network hop
  double B_net = 0.0;             // words/s, unidirectional
  double B_DRAM = 0.0;            // words/s, unidirectional
  double S = 0.0;                 // on-chip words
  // Power-law generalisation: alpha = alpha_b - alpha_L.
  double alpha = 0.0;
  double b0 = 4e6;
  double L0 = 100.0;
  Compute T0 = Compute::flop(3e23);
};

inline ClosedFormInputs inputs_from_node(const NodeSummary& n) {
  ClosedFormInputs in;
  in.C = n.mac_per_s;
  in.B_net = n.network_words_per_s;
  in.B_DRAM = n.dram_words_per_s;
  in.S = n.sram_words;
  if (n.t_L_s > 0.0) in.t_L = n.t_L_s;
  return in;
}

inline void require_positive(double v, const char* field) {
  if (!(v > 0.0) || std::isnan(v)) throw InvariantViolation(field, "must be positive");
}

inline double critical_d(double C, double B_net) {
  require_positive(C, "C");
  require_positive(B_net, "B_net");
  return 4.0 * C / (3.0 * B_net);
}

struct Nanobatch {
  double b_prime = 0.0;
  bool sram_regime = false;
};

// The SRAM regime boundary S / d'^2 = 4 counts as inside.
inline Nanobatch critical_nanobatch(double C, double B_DRAM, double S, double d_prime) {
  require_positive(C, "C");
  require_positive(B_DRAM, "B_DRAM");
  require_positive(S, "S");
  require_positive(d_prime, "d_prime");
  if (S / (d_prime * d_prime) >= 4.0) return {16.0, true};
  return {C / B_DRAM, false};
}

inline double critical_cluster(double b, double N_p, double L, double E, double d_prime, double b_prime) {
  for (auto [v, f] : {std::pair{b, "b"}, {N_p, "N_p"}, {L, "L"}, {E, "E"}, {d_prime, "d_prime"}, {b_prime, "b_prime"}})
    require_positive(v, f);
  return (1.0 / (4.0 * L * E)) * (b * N_p) / (d_prime * d_prime * b_prime);
}

// Parameter count at the bandwidth-limited critical run.
inline double critical_params(double b, double L, double C, double t_train, double d_prime, double b_prime) {
  return (b / L) * C * t_train / (240.0 * d_prime * d_prime * b_prime);
}

inline Compute t_critical_bandwidth(const ClosedFormInputs& in, double d_prime, double b_prime) {
  for (auto [v, f] : {std::pair{in.b, "b"}, {in.L, "L"}, {in.E, "E"}, {in.C, "C"}, {in.t_train, "t_train"}})
    require_positive(v, f);
  const double x = (in.b / in.L) * (in.C * in.t_train) / (d_prime * d_prime * b_prime);
  return Compute::mac(1.0 / (960.0 * in.E) * x * x);
}

inline Compute t_critical_latency(double b, double L, double E, double t_train, double t_L) {
  for (auto [v, f] : {std::pair{b, "b"}, {L, "L"}, {E, "E"}, {t_train, "t_train"}, {t_L, "t_L"}})
    require_positive(v, f);
  const double x = (b / L) * (t_train / t_L);
  return Compute::mac(1.0 / (960.0 * E) * x * x);
}

struct LatencyWall {
  double N_p = 0.0;
  Compute T_limit;
};

inline LatencyWall latency_wall(double b, double L, double E, double t_train, double t_L) {
  for (auto [v, f] : {std::pair{b, "b"}, {L, "L"}, {E, "E"}, {t_train, "t_train"}, {t_L, "t_L"}})
    require_positive(v, f);
  const double x = (b / L) * (t_train / t_L);
  return {(b / L) * t_train / (80.0 * t_L), Compute::mac(3.0 / (320.0 * E) * x * x)};
}

struct AlphaBounds {
  Compute T_critical;  // bandwidth limited
  Compute T_limit;
};

// b / L replaced by (b0 / L0) T0^-alpha and the squared bracket raised to
// 1 / (1 - 2 alpha). T and T0 are both in MAC here.
inline AlphaBounds alpha_generalized(const ClosedFormInputs& in, double d_prime, double b_prime) {
  if (!(in.alpha < 0.5))
    throw InvariantViolation("alpha", "must be below 0.5; the bound diverges at alpha >= 0.5");
  require_positive(in.b0, "b0");
  require_positive(in.L0, "L0");
  require_positive(in.T0.in_mac(), "T0");
  const double ratio = (in.b0 / in.L0) / std::pow(in.T0.in_mac(), in.alpha);
  const double p = 1.0 / (1.0 - 2.0 * in.alpha);
  const double xb = ratio * (in.C * in.t_train) / (d_prime * d_prime * b_prime);
  const double xl = ratio * (in.t_train / in.t_L);
  return {Compute::mac(std::pow(1.0 / (960.0 * in.E) * xb * xb, p)),
          Compute::mac(std::pow(3.0 / (320.0 * in.E) * xl * xl, p))};
}

struct ClosedFormReport {
  double d_prime = 0.0;
  double b_prime = 0.0;
  bool sram_regime = false;
  double N_critical = 0.0;
  double N_p_critical = 0.0;
  Compute T_critical_bandwidth;
  Compute T_critical_latency;
  Compute T_limit;
  double N_p_limit = 0.0;
  Compute operative_limit;  // min of the two critical values
  std::string operative;    // "bandwidth" or "latency"
  bool alpha_applied = false;
};

inline ClosedFormReport closed_form_report(const ClosedFormInputs& in) {
  ClosedFormReport r;
  r.d_prime = critical_d(in.C, in.B_net);
  auto nb = critical_nanobatch(in.C, in.B_DRAM, in.S, r.d_prime);
  r.b_prime = nb.b_prime;
  r.sram_regime = nb.sram_regime;
  if (in.alpha != 0.0) {
    auto a = alpha_generalized(in, r.d_prime, r.b_prime);
    r.T_critical_bandwidth = a.T_critical;
    r.T_limit = a.T_limit;
    r.T_critical_latency = Compute::mac(a.T_limit.in_mac() / 9.0);
    r.alpha_applied = true;
    // Effective b/L at the critical run, for the parameter counts below.
    const double bl = (in.b0 / in.L0) * std::pow(r.T_critical_bandwidth.in_mac() / in.T0.in_mac(), in.alpha);
    r.N_p_critical = bl * in.C * in.t_train / (240.0 * r.d_prime * r.d_prime * r.b_prime);
    const double bl_lim = (in.b0 / in.L0) * std::pow(r.T_limit.in_mac() / in.T0.in_mac(), in.alpha);
    r.N_p_limit = bl_lim * in.t_train / (80.0 * in.t_L);
  } else {
    r.T_critical_bandwidth = t_critical_bandwidth(in, r.d_prime, r.b_prime);
    r.T_critical_latency = t_critical_latency(in.b, in.L, in.E, in.t_train, in.t_L);
    auto w = latency_wall(in.b, in.L, in.E, in.t_train, in.t_L);
    r.T_limit = w.T_limit;
    r.N_p_limit = w.N_p;
    r.N_p_critical = critical_params(in.b, in.L, in.C, in.t_train, r.d_prime, r.b_prime);
  }
  double b_over_L = in.b / in.L;
  if (r.alpha_applied)
    b_over_L = (in.b0 / in.L0) * std::pow(r.T_critical_bandwidth.in_mac() / in.T0.in_mac(), in.alpha);
  r.N_critical = critical_cluster(b_over_L, r.N_p_critical, 1.0, in.E, r.d_prime, r.b_prime);
  if (r.T_critical_bandwidth <= r.T_critical_latency) {
    r.operative_limit = r.T_critical_bandwidth;
    r.operative = "bandwidth";
  } else {
    r.operative_limit = r.T_critical_latency;
    r.operative = "latency";
  }
  return r;
}

inline nlohmann::json to_json(const ClosedFormReport& r) {
  return {{"d_prime", r.d_prime},
          {"b_prime", r.b_prime},
          {"sram_regime", r.sram_regime},
          {"N_critical", r.N_critical},
          {"N_p_critical", r.N_p_critical},
          {"T_critical_bandwidth_flop", r.T_critical_bandwidth.in_flop()},
          {"T_critical_latency_flop", r.T_critical_latency.in_flop()},
          {"T_limit_flop", r.T_limit.in_flop()},
          {"N_p_limit", r.N_p_limit},
          {"operative_limit_flop", r.operative_limit.in_flop()},
          {"operative", r.operative},
          {"alpha_applied", r.alpha_applied}};
}

}  // namespace scalelimits
