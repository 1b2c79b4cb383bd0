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

#include <cmath>
#include <string>

#include "json.hpp"
#include "scalelimits/closedform.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/rational.hpp"

namespace sl = scalelimits;

namespace {

// x rounded to one significant figure.
double one_sig(double x) {
  const double e = std::pow(10.0, std::floor(std::log10(x)));
  return std::round(x / e) * e;
}

bool same_one_sig(double a, double b) { return std::fabs(one_sig(a) - one_sig(b)) <= 1e-9 * one_sig(b); }

sl::ClosedFormReport row(const char* preset) {
  return sl::closed_form_report(sl::inputs_from_node(sl::node_summary(sl::preset(preset))));
}

struct Row {
  const char* preset;
  double d_prime, b_prime, T_flop;
};

const Row kTable[] = {
    {"dgx1-v100", 26.7e3, 278.0, 1e27},
    {"dgx-a100", 16.7e3, 401.0, 3e28},
    {"dgx-h100", 26.4e3, 591.0, 2e28},
    {"dgx-h100-superpod", 5.9e3, 16.0, 1e34},
};

}  // namespace

TEST(ClosedForm, TableRows) {
  for (const auto& r : kTable) {
    SCOPED_TRACE(r.preset);
    auto rep = row(r.preset);
    EXPECT_NEAR(rep.d_prime / r.d_prime, 1.0, 0.02);
    if (std::string(r.preset) == "dgx-h100-superpod") {
      EXPECT_EQ(rep.b_prime, 16.0);
      EXPECT_TRUE(rep.sram_regime);
    } else {
      EXPECT_NEAR(rep.b_prime / r.b_prime, 1.0, 0.02);
      EXPECT_FALSE(rep.sram_regime);
    }
    EXPECT_TRUE(same_one_sig(rep.T_critical_bandwidth.in_flop(), r.T_flop)) << rep.T_critical_bandwidth.in_flop();
  }
}

TEST(ClosedForm, CriticalDExamples) {
  EXPECT_NEAR(sl::critical_d(3.96e15, 2.0e11), 26400.0, 1e-9);
  EXPECT_NEAR(sl::critical_d(5.0e14, 2.5e10), 26666.666666666668, 1e-9);
  EXPECT_DOUBLE_EQ(sl::critical_d(1e15, 2e11), 2.0 * sl::critical_d(1e15, 4e11));
  EXPECT_THROW(sl::critical_d(0.0, 1.0), sl::InvariantViolation);
}

TEST(ClosedForm, NanobatchRegimes) {
  auto a = sl::critical_nanobatch(5e14, 1.8e12, 151e6, 26667.0);
  EXPECT_FALSE(a.sram_regime);
  EXPECT_NEAR(a.b_prime, 278.0, 0.5);
  auto b = sl::critical_nanobatch(3.96e15, 6.7e12, 487e6, 5867.0);
  EXPECT_TRUE(b.sram_regime);
  EXPECT_EQ(b.b_prime, 16.0);
  // Boundary S = 4 d'^2 counts as the SRAM regime.
  EXPECT_TRUE(sl::critical_nanobatch(1e15, 1e12, 4.0 * 1000.0 * 1000.0, 1000.0).sram_regime);
  EXPECT_FALSE(sl::critical_nanobatch(1e15, 1e12, std::nextafter(4e6, 0.0), 1000.0).sram_regime);
}

TEST(ClosedForm, BoxedLatencyLimits) {
  const double tl = 9e-6;
  auto lat = sl::t_critical_latency(4e6, 100, 1, sl::kThreeMonths, tl);
  EXPECT_TRUE(same_one_sig(lat.in_flop(), 3e30)) << lat.in_flop();
  auto w = sl::latency_wall(4e6, 100, 1, sl::kThreeMonths, tl);
  EXPECT_TRUE(same_one_sig(w.N_p, 4e14)) << w.N_p;
  EXPECT_TRUE(same_one_sig(w.T_limit.in_flop(), 2e31)) << w.T_limit.in_flop();
  EXPECT_DOUBLE_EQ(w.T_limit.in_mac() / lat.in_mac(), 9.0);
  // The two prefactors differ by exactly nine.
  EXPECT_EQ(sl::Rational(3, 320) / sl::Rational(1, 960), sl::Rational(9));
}

TEST(ClosedForm, NineTimesHoldsEverywhere) {
  for (double b : {1e5, 4e6, 3e7})
    for (double L : {10.0, 100.0, 300.0})
      for (double E : {1.0, 4.0})
        for (double tl : {1e-7, 9e-6})
          EXPECT_NEAR(sl::latency_wall(b, L, E, 1e7, tl).T_limit.in_mac() / sl::t_critical_latency(b, L, E, 1e7, tl).in_mac(),
                      9.0, 1e-12);
}

TEST(ClosedForm, LatencyScaling) {
  const double base = sl::t_critical_latency(4e6, 100, 1, sl::kThreeMonths, 9e-6).in_mac();
  EXPECT_NEAR(sl::t_critical_latency(4e6, 100, 1, sl::kThreeMonths, 9e-7).in_mac() / base, 100.0, 1e-9);
  EXPECT_NEAR(base / sl::t_critical_latency(4e6, 100, 4, sl::kThreeMonths, 9e-6).in_mac(), 4.0, 1e-12);
  const double np = sl::latency_wall(4e6, 100, 1, sl::kThreeMonths, 9e-6).N_p;
  EXPECT_NEAR(sl::latency_wall(8e6, 100, 1, sl::kThreeMonths, 9e-6).N_p / np, 2.0, 1e-12);
}

TEST(ClosedForm, BandwidthScaling) {
  auto in = sl::inputs_from_node(sl::node_summary(sl::preset("dgx-h100")));
  const double dp = sl::critical_d(in.C, in.B_net);
  const double bp = sl::critical_nanobatch(in.C, in.B_DRAM, in.S, dp).b_prime;
  const double base = sl::t_critical_bandwidth(in, dp, bp).in_mac();
  auto e4 = in;
  e4.E = 4;
  EXPECT_NEAR(base / sl::t_critical_bandwidth(e4, dp, bp).in_mac(), 4.0, 1e-12);
  // Doubling both bandwidths halves d' and b' (still outside the SRAM
  // regime), so the bracket grows 8x and the compute 64x.
  auto scaled = in;
  scaled.B_net *= 2.0;
  scaled.B_DRAM *= 2.0;
  const double dp2 = sl::critical_d(scaled.C, scaled.B_net);
  const double bp2 = sl::critical_nanobatch(scaled.C, scaled.B_DRAM, scaled.S, dp2).b_prime;
  EXPECT_NEAR(dp2, dp / 2.0, 1e-9);
  EXPECT_NEAR(bp2, bp / 2.0, 1e-9);
  EXPECT_NEAR(sl::t_critical_bandwidth(scaled, dp2, bp2).in_mac() / base, std::pow(8.0, 2.0), 1e-9);
}

TEST(ClosedForm, CriticalClusterIdentity) {
  // N_critical * C * t_train equals the critical compute.
  auto in = sl::inputs_from_node(sl::node_summary(sl::preset("dgx-h100")));
  auto rep = sl::closed_form_report(in);
  const double T = rep.T_critical_bandwidth.in_mac();
  EXPECT_NEAR(rep.N_critical * in.C * in.t_train / T, 1.0, 1e-9);
  // and N_p from the compute identity T = 60 N_p^2 / E.
  EXPECT_NEAR(60.0 * rep.N_p_critical * rep.N_p_critical / T, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(sl::critical_cluster(2e6, 1e12, 100, 1, 2e4, 300) * 2.0, sl::critical_cluster(4e6, 1e12, 100, 1, 2e4, 300));
  EXPECT_DOUBLE_EQ(sl::critical_cluster(2e6, 1e12, 100, 1, 2e4, 300), 4.0 * sl::critical_cluster(2e6, 1e12, 100, 1, 4e4, 300));
}

TEST(ClosedForm, AlphaGeneralization) {
  auto in = sl::inputs_from_node(sl::node_summary(sl::preset("dgx-h100")));
  auto base = sl::closed_form_report(in);

  // alpha = 0 with b0/L0 equal to b/L is the base formula.
  auto zero = sl::alpha_generalized(in, base.d_prime, base.b_prime);
  EXPECT_NEAR(zero.T_critical.in_mac() / base.T_critical_bandwidth.in_mac(), 1.0, 1e-12);
  EXPECT_NEAR(zero.T_limit.in_mac() / base.T_limit.in_mac(), 1.0, 1e-12);

  in.alpha = 0.2;
  auto rep = sl::closed_form_report(in);
  const double oom = std::log10(rep.T_critical_bandwidth.in_flop() / base.T_critical_bandwidth.in_flop());
  EXPECT_GE(oom, 2.5);
  EXPECT_LE(oom, 3.5);
  EXPECT_GE(rep.T_limit.in_flop(), 1e36);
  EXPECT_LE(rep.T_limit.in_flop(), 9e36);
  EXPECT_TRUE(rep.alpha_applied);

  in.alpha = 0.5;
  EXPECT_THROW(sl::closed_form_report(in), sl::InvariantViolation);
  in.alpha = 0.7;
  EXPECT_THROW(sl::alpha_generalized(in, base.d_prime, base.b_prime), sl::InvariantViolation);
}

TEST(ClosedForm, AlphaMonotone) {
  auto in = sl::inputs_from_node(sl::node_summary(sl::preset("dgx-h100")));
  double prev = 0.0;
  for (double a = 0.0; a < 0.3; a += 0.05) {
    in.alpha = a;
    auto r = sl::alpha_generalized(in, 26400.0, 591.0);
    EXPECT_GT(r.T_limit.in_mac(), prev);
    prev = r.T_limit.in_mac();
  }
}

TEST(ClosedForm, OperativeLimitIsTheSmaller) {
  auto h = row("dgx-h100");
  EXPECT_EQ(h.operative, "bandwidth");
  EXPECT_EQ(h.operative_limit.in_mac(), h.T_critical_bandwidth.in_mac());
  auto sp = row("dgx-h100-superpod");
  EXPECT_EQ(sp.operative, "latency");
  EXPECT_EQ(sp.operative_limit.in_mac(), sp.T_critical_latency.in_mac());
}

TEST(ClosedForm, JsonReport) {
  auto j = sl::to_json(row("dgx-h100"));
  for (const char* k : {"d_prime", "b_prime", "sram_regime", "N_critical", "T_critical_bandwidth_flop",
                        "T_critical_latency_flop", "T_limit_flop", "N_p_limit", "operative"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_NEAR(j["d_prime"].get<double>(), 26400.0, 1e-6);
}

TEST(ClosedForm, RejectsNonPositiveInputs) {
  EXPECT_THROW(sl::t_critical_latency(0, 100, 1, 1e7, 9e-6), sl::InvariantViolation);
  EXPECT_THROW(sl::latency_wall(4e6, 100, 1, 1e7, -1.0), sl::InvariantViolation);
  EXPECT_THROW(sl::critical_nanobatch(1e15, 1e12, 0.0, 100.0), sl::InvariantViolation);
}

TEST(ClosedForm, LatencyInputComesFromCluster) {
  for (const char* p : {"dgx1-v100", "dgx-a100", "dgx-h100", "dgx-h100-superpod", "h100-global-nvlink"})
    EXPECT_NEAR(sl::node_summary(sl::preset(p)).t_L_s, 9e-6, 1e-18) << p;
  auto fast = sl::inputs_from_node(sl::node_summary(sl::preset("h100-low-latency")));
  EXPECT_NEAR(fast.t_L, 9e-7, 1e-19);
  auto a = row("dgx-h100"), b = sl::closed_form_report(fast);
  EXPECT_NEAR(b.T_critical_latency.in_mac() / a.T_critical_latency.in_mac(), 100.0, 1e-9);
  EXPECT_EQ(b.T_critical_bandwidth.in_mac(), a.T_critical_bandwidth.in_mac());
}
