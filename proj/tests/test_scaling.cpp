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
#include "scalelimits/scaling.hpp"

namespace sl = scalelimits;

namespace {

const sl::ScalingLaws kDefault = sl::scaling_preset("default");

}  // namespace

TEST(Scaling, CriticalBatchReference) {
  EXPECT_EQ(sl::critical_batch(sl::Compute::flop(3e23), 1, kDefault), 4194304);
  EXPECT_EQ(sl::critical_batch(sl::Compute::flop(3e23), 4, kDefault), 8388608);
  EXPECT_EQ(sl::critical_batch(sl::Compute::flop(3e29), 1, kDefault), 41943040);
}

TEST(Scaling, CriticalBatchHomogeneity) {
  for (double T : {1e22, 3e25, 7e28}) {
    for (double k : {2.0, 3.0, 10.0}) {
      const double b1 = static_cast<double>(sl::critical_batch(sl::Compute::flop(T), 1, kDefault));
      const double bk = static_cast<double>(sl::critical_batch(sl::Compute::flop(std::pow(k, 6) * T), 1, kDefault));
      EXPECT_NEAR(bk, k * b1, k + 1.0) << T << " " << k;
    }
  }
}

TEST(Scaling, LayerCountDefaultLaw) {
  // Independent evaluation: 0.10056 * (12288 * 49152)^0.3751.
  const double w = 12288.0 * 49152.0;
  const double expect = 0.10056 * std::exp(0.3751 * std::log(w));
  EXPECT_NEAR(expect, 198.0, 1.0);
  EXPECT_EQ(sl::layer_count(w, kDefault), std::llround(expect));
}

TEST(Scaling, LayerCountParamLaw) {
  auto laws = sl::scaling_preset("param-depth");
  EXPECT_EQ(sl::layer_count_from_params(70e9, laws.layers), 75);
}

TEST(Scaling, LayerCountMonotone) {
  std::int64_t prev = 0;
  for (double w = 1e6; w < 1e14; w *= 3.7) {
    auto L = sl::layer_count(w, kDefault);
    EXPECT_GE(L, prev);
    prev = L;
  }
}

TEST(Scaling, SparsityFactor) {
  const double ref = 12288.0 * 4.0 * 12288.0;
  EXPECT_EQ(sl::sparsity_factor(ref, kDefault, sl::Mode::Sparse), 8);
  EXPECT_EQ(sl::sparsity_factor(4.0 * ref, kDefault, sl::Mode::Sparse), 16);
  EXPECT_EQ(sl::sparsity_factor(ref, kDefault, sl::Mode::Dense), 1);
  EXPECT_EQ(sl::sparsity_factor(1e3, kDefault, sl::Mode::Sparse), 1);
}

TEST(Scaling, ShapeRoundTripWithinFivePercent) {
  for (double T : {1e24, 1e27, 1e30}) {
    for (auto mode : {sl::Mode::Dense, sl::Mode::Sparse}) {
      auto s = sl::shape_from_compute(sl::Compute::flop(T), kDefault, mode);
      SCOPED_TRACE(T);
      // Oracle: the compute identity evaluated from the emitted integers.
      const double Np = 2.0 * s.L * s.E * static_cast<double>(s.d_model) * static_cast<double>(s.d_ff);
      const double T_mac = 3.0 * Np * (20.0 * Np) / static_cast<double>(s.E);
      EXPECT_LE(std::fabs(2.0 * T_mac - T) / T, 0.05);
      EXPECT_EQ(s.d_model % 128, 0);
      EXPECT_EQ(s.d_ff, 4 * s.d_model);
    }
  }
}

TEST(Scaling, ShapeIdentities) {
  int emitted = 0;
  for (double T = 1e21; T < 1e38; T *= 31.0) {
    for (auto mode : {sl::Mode::Dense, sl::Mode::Sparse}) {
      SCOPED_TRACE(T);
      sl::ModelShape s;
      try {
        s = sl::shape_from_compute(sl::Compute::flop(T), kDefault, mode);
      } catch (const sl::Infeasible&) {
        // Width granularity can miss small T by more than 5%.
        EXPECT_LT(T, 1e23);
        continue;
      }
      ++emitted;
      EXPECT_EQ(s.N_p, 2.0 * static_cast<double>(s.L) * static_cast<double>(s.E) *
                           static_cast<double>(s.d_model) * static_cast<double>(s.d_ff));
      EXPECT_EQ(s.D, 20.0 * s.N_p);
      if (mode == sl::Mode::Dense) {
        EXPECT_EQ(s.E, 1);
        EXPECT_DOUBLE_EQ(s.T.in_mac(), 60.0 * s.N_p * s.N_p);
      }
      EXPECT_GT(s.b, 0);
    }
  }
  EXPECT_GT(emitted, 20);
}

TEST(Scaling, ShapeMonotone) {
  double prev_np = 0.0;
  std::int64_t prev_d = 0;
  for (double T = 1e22; T < 1e36; T *= 10.0) {
    auto s = sl::shape_from_compute(sl::Compute::flop(T), kDefault, sl::Mode::Dense);
    EXPECT_GT(s.N_p, prev_np);
    EXPECT_GE(s.d_model, prev_d);
    prev_np = s.N_p;
    prev_d = s.d_model;
  }
}

TEST(Scaling, DomainEdges) {
  // The low edge is inside the domain; it may still miss the 5% tolerance
  // after rounding, which is a different error.
  try {
    sl::shape_from_compute(sl::Compute::flop(1e20), kDefault, sl::Mode::Dense);
  } catch (const sl::InvariantViolation&) {
    FAIL() << "1e20 FLOP is inside the domain";
  } catch (const sl::Infeasible& e) {
    EXPECT_NE(std::string(e.what()).find("misses"), std::string::npos);
  }
  EXPECT_NO_THROW(sl::shape_from_compute(sl::Compute::flop(1e40), kDefault, sl::Mode::Dense));
  EXPECT_THROW(sl::shape_from_compute(sl::Compute::flop(1e19), kDefault, sl::Mode::Dense), sl::InvariantViolation);
  EXPECT_THROW(sl::shape_from_compute(sl::Compute::flop(1e41), kDefault, sl::Mode::Dense), sl::InvariantViolation);
}

TEST(Scaling, EqualExponentsKeepBatchPerLayerConstant) {
  // With the batch exponent equal to the depth exponent in T, b/L stays
  // put. The depth exponent is measured from two emitted shapes.
  auto laws = sl::scaling_preset("param-depth");
  auto s1 = sl::shape_from_compute(sl::Compute::flop(1e24), laws, sl::Mode::Dense);
  auto s2 = sl::shape_from_compute(sl::Compute::flop(1e34), laws, sl::Mode::Dense);
  const double aL = std::log(static_cast<double>(s2.L) / static_cast<double>(s1.L)) /
                    std::log(s2.T.in_mac() / s1.T.in_mac());
  laws.batch.exponent = aL;
  double ref = 0.0;
  for (double T : {1e24, 1e27, 1e30, 1e34}) {
    auto s = sl::shape_from_compute(sl::Compute::flop(T), laws, sl::Mode::Dense);
    const double r = static_cast<double>(s.b) / static_cast<double>(s.L);
    if (ref == 0.0) ref = r;
    EXPECT_NEAR(r / ref, 1.0, 0.10) << T;
  }
}

TEST(Scaling, DeepseekAndFixedBatchPresets) {
  auto ds = sl::scaling_preset("deepseek");
  EXPECT_DOUBLE_EQ(ds.batch.exponent, 0.3271);
  EXPECT_DOUBLE_EQ(ds.batch.reference_batch, 4e6);
  EXPECT_DOUBLE_EQ(ds.batch.reference_compute.in_flop(), 3e23);
  auto fb = sl::scaling_preset("fixed-batch");
  for (double T : {1e24, 1e30})
    EXPECT_EQ(sl::critical_batch(sl::Compute::flop(T), 1, fb), 4194304);
  EXPECT_THROW(sl::scaling_preset("nope"), sl::InvariantViolation);
}

TEST(Scaling, JsonOverrides) {
  auto j = nlohmann::json::parse(R"({"preset": "deepseek", "batch": {"exponent": 0.25}, "ff_ratio": 2})");
  auto s = sl::laws_from_json(j);
  EXPECT_DOUBLE_EQ(s.batch.exponent, 0.25);
  EXPECT_DOUBLE_EQ(s.batch.reference_batch, 4e6);
  EXPECT_DOUBLE_EQ(s.ff_ratio, 2.0);
  auto back = sl::laws_from_json(sl::to_json(s));
  EXPECT_EQ(sl::to_json(back), sl::to_json(s));
  EXPECT_THROW(sl::laws_from_json(nlohmann::json::parse(R"({"ff_ratio": -1})")), sl::InvariantViolation);
}
