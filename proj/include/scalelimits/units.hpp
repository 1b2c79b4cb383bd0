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

#include <cmath>
#include <limits>

namespace scalelimits {

// Internally all arithmetic work is counted in MAC, data in words and time
// in seconds. FLOP only shows up when reading or printing.
inline constexpr double kFlopPerMac = 2.0;
inline constexpr double kDefaultWordBytes = 2.0;
inline constexpr double kSecondsPerDay = 86400.0;
// A quarter of a Julian year: 7.889e6 s.
inline constexpr double kThreeMonths = 365.25 / 4.0 * kSecondsPerDay;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Amount of arithmetic work. Construct through flop() or mac() so the unit
// is always spelled out at the call site.
class Compute {
 public:
  constexpr Compute() = default;
  static constexpr Compute mac(double v) { return Compute(v); }
  static constexpr Compute flop(double v) { return Compute(v / kFlopPerMac); }

  constexpr double in_mac() const { return mac_; }
  constexpr double in_flop() const { return mac_ * kFlopPerMac; }

  friend constexpr bool operator==(Compute, Compute) = default;
  friend constexpr auto operator<=>(Compute a, Compute b) { return a.mac_ <=> b.mac_; }

 private:
  explicit constexpr Compute(double mac) : mac_(mac) {}
  double mac_ = 0.0;
};

inline double bytes_to_words(double bytes, double word_bytes) { return bytes / word_bytes; }
inline double words_to_bytes(double words, double word_bytes) { return words * word_bytes; }

// Time spent moving `words` over a link of `words_per_s`. An infinite
// link costs nothing.
inline double transfer_time(double words, double words_per_s) {
  if (words <= 0.0 || std::isinf(words_per_s)) return 0.0;
  return words / words_per_s;
}

}  // namespace scalelimits
