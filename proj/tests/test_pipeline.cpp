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

#include <cstdint>
#include <vector>

#include "scalelimits/pipeline.hpp"
#include "scalelimits/rational.hpp"
#include "oracles.hpp"

namespace sl = scalelimits;
using oracle::simulate_last_stage;

TEST(Pipeline, FormulaMatchesScheduleSimulation) {
  for (std::int64_t n = 1; n <= 6; ++n)
    for (std::int64_t m = 1; m <= 12; ++m)
      for (std::int64_t i = 1; i <= 3; ++i) {
        const auto sched = i == 1 ? sl::Schedule::Naive : sl::Schedule::Interleaved;
        EXPECT_EQ(sl::bubble_fraction_exact(sched, n, m, i), simulate_last_stage(n, m, i))
            << "N_PP=" << n << " m=" << m << " i=" << i;
      }
}

TEST(Pipeline, NaiveExamples) {
  EXPECT_EQ(sl::bubble_fraction_exact(sl::Schedule::Naive, 1, 5, 1), sl::Rational(0));
  EXPECT_EQ(sl::bubble_fraction_exact(sl::Schedule::Naive, 4, 4, 1), sl::Rational(3, 7));
  EXPECT_EQ(simulate_last_stage(4, 4, 1), sl::Rational(3, 7));
}

TEST(Pipeline, InterleavedWithOneEqualsNaive) {
  for (std::int64_t n = 1; n <= 8; ++n)
    for (std::int64_t m = 1; m <= 16; ++m)
      EXPECT_EQ(sl::bubble_fraction_exact(sl::Schedule::Interleaved, n, m, 1),
                sl::bubble_fraction_exact(sl::Schedule::Naive, n, m, 1));
}

TEST(Pipeline, InterleavingMultipliesMicrobatches) {
  for (std::int64_t n : {2, 4, 8})
    for (std::int64_t i : {2, 3, 4}) {
      const std::int64_t m = 2 * n;
      EXPECT_EQ(sl::bubble_fraction_exact(sl::Schedule::Interleaved, n, m, i), sl::Rational(n - 1, n - 1 + i * m));
    }
}

TEST(Pipeline, BubbleBoundsAndLimit) {
  for (auto s : {sl::Schedule::Naive, sl::Schedule::Interleaved})
    for (std::int64_t n = 1; n <= 16; n *= 2) {
      const std::int64_t i = s == sl::Schedule::Naive ? 1 : 2;
      double prev = 1.0;
      for (std::int64_t m = 1; m <= 1 << 20; m *= 4) {
        const double f = sl::bubble_fraction(s, n, m, i);
        EXPECT_GE(f, 0.0);
        EXPECT_LT(f, 1.0);
        EXPECT_LE(f, prev);
        prev = f;
      }
      EXPECT_LT(prev, 1e-4);
    }
}

TEST(Pipeline, ZeroBubble) {
  EXPECT_EQ(sl::bubble_fraction(sl::Schedule::ZeroBubble, 4, 7, 1), 0.0);
  try {
    sl::bubble_fraction(sl::Schedule::ZeroBubble, 4, 6, 1);
    FAIL();
  } catch (const sl::Infeasible& e) {
    EXPECT_EQ(e.invariant(), "zero_bubble_microbatches");
  }
  EXPECT_THROW(sl::bubble_fraction(sl::Schedule::Naive, 4, 8, 2), sl::Infeasible);
  EXPECT_THROW(sl::bubble_fraction(sl::Schedule::Naive, 0, 8, 1), sl::InvariantViolation);
  EXPECT_FALSE(sl::hides_non_dp_latency(sl::Schedule::ZeroBubble, 1));
  EXPECT_TRUE(sl::hides_non_dp_latency(sl::Schedule::ZeroBubble, 2));
  EXPECT_TRUE(sl::make_plan(sl::Schedule::ZeroBubble, 2, 3, 1).doubled_activation_memory);
}

TEST(Pipeline, StageMappingTables) {
  // Twelve blocks on three stages, without and with two-way interleaving.
  const std::int64_t plain[12] = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  const std::int64_t inter[12] = {0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2};
  for (std::int64_t l = 0; l < 12; ++l) {
    EXPECT_EQ(sl::block_to_stage(l, 12, 3, 1), plain[l]) << l;
    EXPECT_EQ(sl::block_to_stage(l, 12, 3, 2), inter[l]) << l;
  }
  EXPECT_EQ(sl::block_to_stage(5, 12, 3, 2), 2);
  EXPECT_EQ(sl::block_to_stage(7, 12, 3, 1), 1);
  EXPECT_THROW(sl::block_to_stage(0, 10, 3, 1), sl::Infeasible);
  EXPECT_THROW(sl::block_to_stage(12, 12, 3, 1), sl::InvariantViolation);
}

TEST(Pipeline, InterfaceCountMatchesMapping) {
  EXPECT_EQ(sl::virtual_stage_interfaces(3, 2), 5);
  EXPECT_EQ(sl::virtual_stage_interfaces(1, 1), 0);
  for (std::int64_t L : {12, 24, 36})
    for (std::int64_t n = 1; n <= 6; ++n)
      for (std::int64_t i = 1; i <= 3; ++i) {
        if (L % (n * i) != 0) continue;
        std::int64_t changes = 0;
        for (std::int64_t l = 0; l + 1 < L; ++l)
          changes += sl::block_to_stage(l, L, n, i) != sl::block_to_stage(l + 1, L, n, i);
        // With one stage every interface stays on the same device.
        EXPECT_EQ(changes, n == 1 ? 0 : sl::virtual_stage_interfaces(n, i)) << L << " " << n << " " << i;
      }
  EXPECT_EQ(sl::virtual_stage_interfaces(12, 1), 11);
}
