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

// Step time of one hand-picked configuration: a small dense model on one
// A100 node (DP 2, PP 2), printed term by term.

#include <cstdio>

#include "scalelimits/hwspec.hpp"
#include "scalelimits/simulate.hpp"

namespace sl = scalelimits;

int main() {
  auto cl = sl::preset("dgx-a100");
  auto s = sl::ModelShape::make(1024, 4096, 4, 1, 4096);
  sl::ParallelismConfig c;
  c.n_dp = 2;
  c.n_pp = 2;
  c.m = 4;
  c.schedule = sl::Schedule::Naive;
  auto b = sl::step_time(s, c, cl);

  std::printf("shape       d_model=%lld d_ff=%lld L=%lld b=%lld N_p=%.3g\n", static_cast<long long>(s.d_model),
              static_cast<long long>(s.d_ff), static_cast<long long>(s.L), static_cast<long long>(s.b), s.N_p);
  std::printf("config      dp=%lld pp=%lld m=%lld naive, %lld GPUs\n", static_cast<long long>(c.n_dp),
              static_cast<long long>(c.n_pp), static_cast<long long>(c.m), static_cast<long long>(c.n_gpu()));
  std::printf("matmul      %.6g s (nanobatch %g, weights %s)\n", b.t_matmul, b.nanobatch,
              b.weights_in_sram ? "in SRAM" : "in DRAM");
  std::printf("dp          %.6g s\n", b.comm.t_dp);
  std::printf("p2p         %.6g s\n", b.comm.t_p2p);
  std::printf("latency     %.6g s\n", b.comm.t_latency);
  std::printf("bubble      %.4f\n", b.f_b);
  std::printf("step        %.10g s\n", b.t_step);
  std::printf("mfu         %.4f\n", b.mfu);
  return 0;
}
