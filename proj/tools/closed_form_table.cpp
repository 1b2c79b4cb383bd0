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

// Prints the analytic limits for every built-in cluster preset at the
// default batch, depth and three-month budget.

#include <cstdio>

#include "scalelimits/closedform.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"

namespace sl = scalelimits;

int main() {
  std::printf("%-26s %9s %7s %5s %11s %11s %11s %9s\n", "cluster", "d'", "b'", "sram", "T_crit_bw", "T_crit_lat",
              "T_limit", "binds");
  for (const auto& name : sl::preset_names()) {
    sl::ClosedFormReport r;
    try {
      r = sl::closed_form_report(sl::inputs_from_node(sl::node_summary(sl::preset(name))));
    } catch (const sl::Error& e) {
      // Infinite network bandwidth leaves d' undefined.
      std::printf("%-26s %s\n", name.c_str(), e.what());
      continue;
    }
    std::printf("%-26s %9.4g %7.4g %5s %11.2g %11.2g %11.2g %9s\n", name.c_str(), r.d_prime, r.b_prime,
                r.sram_regime ? "yes" : "no", r.T_critical_bandwidth.in_flop(), r.T_critical_latency.in_flop(),
                r.T_limit.in_flop(), r.operative.c_str());
  }
  return 0;
}
