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
#include <cstdint>
#include <string>
#include <string_view>

#include "scalelimits/error.hpp"
#include "scalelimits/rational.hpp"

namespace scalelimits {

enum class Schedule { Naive, Interleaved, ZeroBubble };

inline std::string_view to_string(Schedule s) {
  switch (s) {
    case Schedule::Naive: return "naive";
    case Schedule::Interleaved: return "interleaved";
    case Schedule::ZeroBubble: return "zero-bubble";
  }
  return "?";
}

inline Schedule schedule_from_string(std::string_view s) {
  if (s == "naive") return Schedule::Naive;
  if (s == "interleaved") return Schedule::Interleaved;
  if (s == "zero-bubble") return Schedule::ZeroBubble;
  throw InvariantViolation("schedule", "expected naive, interleaved or zero-bubble");
}

inline void check_schedule(Schedule s, std::int64_t n_pp, std::int64_t m, std::int64_t i) {
  if (n_pp < 1) throw InvariantViolation("n_pp", "must be at least 1");
  if (m < 1) throw InvariantViolation("microbatches", "must be at least 1");
  if (i < 1) throw InvariantViolation("interleave", "must be at least 1");
  if (s == Schedule::Naive && i != 1)
    throw Infeasible("naive_schedule_interleave", "the naive schedule has no interleaving (i must be 1)");
  if (s == Schedule::ZeroBubble && m < 2 * n_pp - 1)
    throw Infeasible("zero_bubble_microbatches",
                     "zero-bubble schedule needs at least 2*N_PP-1 = " + std::to_string(2 * n_pp - 1) +
                         " microbatches, got " + std::to_string(m));
}

// Deferred weight-gradient work only has idle slots to move into when there
// is more than one stage.
inline bool hides_non_dp_latency(Schedule s, std::int64_t n_pp) { return s == Schedule::ZeroBubble && n_pp > 1; }

// Idle share of the pipeline, as numerator / denominator of whole
// virtual-stage slots.
inline Rational bubble_fraction_exact(Schedule s, std::int64_t n_pp, std::int64_t m, std::int64_t i) {
  check_schedule(s, n_pp, m, i);
  switch (s) {
    case Schedule::ZeroBubble:
      return Rational(0);
    case Schedule::Naive:
      return Rational(n_pp - 1, n_pp - 1 + m);
    case Schedule::Interleaved: {
      std::int64_t z = (i - 1) * std::max<std::int64_t>(0, n_pp - m);
      return Rational((n_pp - 1) + z, (n_pp - 1) + z + i * m);
    }
  }
  return Rational(0);
}

inline double bubble_fraction(Schedule s, std::int64_t n_pp, std::int64_t m, std::int64_t i) {
  return bubble_fraction_exact(s, n_pp, m, i).to_double();
}

inline void check_stage_split(std::int64_t L, std::int64_t n_pp, std::int64_t i) {
  if (L < 1 || n_pp < 1 || i < 1) throw InvariantViolation("pipeline", "L, N_PP and i must be positive");
  if (L % (n_pp * i) != 0)
    throw Infeasible("pipeline_divisibility", "N_PP*i = " + std::to_string(n_pp * i) +
                                                  " does not divide L = " + std::to_string(L));
}

// Blocks are cut into N_PP*i contiguous chunks dealt round-robin to stages.
inline std::int64_t block_to_stage(std::int64_t l, std::int64_t L, std::int64_t n_pp, std::int64_t i) {
  check_stage_split(L, n_pp, i);
  if (l < 0 || l >= L) throw InvariantViolation("block", "index out of range");
  return (l / (L / (n_pp * i))) % n_pp;
}

inline std::int64_t virtual_stage_interfaces(std::int64_t n_pp, std::int64_t i) { return n_pp * i - 1; }

struct PipelinePlan {
  Schedule schedule = Schedule::Interleaved;
  std::int64_t n_pp = 1;
  std::int64_t m = 1;
  std::int64_t i = 1;
  double f_b = 0.0;
  // ZB-H2 holds roughly twice the activations; tracked, not enforced.
  bool doubled_activation_memory = false;
};

inline PipelinePlan make_plan(Schedule s, std::int64_t n_pp, std::int64_t m, std::int64_t i) {
  PipelinePlan p{s, n_pp, m, i, bubble_fraction(s, n_pp, m, i), hides_non_dp_latency(s, n_pp)};
  return p;
}

}  // namespace scalelimits
