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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalelimits/closedform.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/hwspec.hpp"
#include "scalelimits/report.hpp"
#include "scalelimits/scaling.hpp"
#include "scalelimits/search.hpp"
#include "scalelimits/simulate.hpp"

// Request documents shared by the command line and the HTTP service. The
// CLI turns its flags into the same JSON the service receives, so both
// produce identical bytes. Field reference: docs/api-schema.md.

namespace scalelimits {

inline constexpr std::size_t kMaxSyncSweepPoints = 64;
inline constexpr const char* kPresetDirEnv = "SCALELIMITS_PRESET_DIR";

inline std::string preset_dir_from_env() {
  const char* v = std::getenv(kPresetDirEnv);
  return v == nullptr ? std::string() : std::string(v);
}

namespace detail {

using nlohmann::json;

template <class T>
T field(const json& j, const std::string& key, T def, const std::string& path = "") {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return def;
  const std::string p = path.empty() ? key : path + "." + key;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (it->is_string()) return number(*it, p);
      if (!it->is_number()) throw ParseError(p, "expected a number");
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (it->is_number_float()) {
        double v = it->get<double>();
        if (v != std::floor(v)) throw ParseError(p, "expected an integer");
        return static_cast<std::int64_t>(v);
      }
      if (!it->is_number_integer()) throw ParseError(p, "expected an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ParseError(p, "expected true or false");
    } else {
      if (!it->is_string()) throw ParseError(p, "expected a string");
    }
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(p, e.what());
  }
}

inline const json& object_at(const json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(key, "missing field");
  return *it;
}

}  // namespace detail

// A preset name is looked up in preset_dir first (<name>.json), then in the
// built-in table. An object is a full cluster description.
inline ClusterSpec resolve_cluster(const nlohmann::json& j, const std::string& preset_dir = preset_dir_from_env()) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (!preset_dir.empty()) {
      const auto path = std::filesystem::path(preset_dir) / (name + ".json");
      if (std::filesystem::exists(path)) return load_cluster_spec(path.string());
    }
    try {
      return preset(name);
    } catch (const InvariantViolation& e) {
      throw ParseError("cluster", e.what());
    }
  }
  if (j.is_object()) {
    try {
      return cluster_from_json(j);
    } catch (const ParseError& e) {
      throw ParseError(e.field().empty() ? "cluster" : "cluster." + e.field(), e.what());
    } catch (const InvariantViolation& e) {
      throw InvariantViolation("cluster." + e.field(), e.what());
    }
  }
  throw ParseError("cluster", "expected a preset name or a cluster object");
}

inline std::vector<std::string> available_presets(const std::string& preset_dir = preset_dir_from_env()) {
  std::vector<std::string> names = preset_names();
  if (!preset_dir.empty() && std::filesystem::is_directory(preset_dir)) {
    std::vector<std::string> extra;
    for (const auto& e : std::filesystem::directory_iterator(preset_dir))
      if (e.path().extension() == ".json") extra.push_back(e.path().stem().string());
    std::sort(extra.begin(), extra.end());
    for (auto& x : extra)
      if (std::find(names.begin(), names.end(), x) == names.end()) names.push_back(x);
  }
  return names;
}

inline nlohmann::json run_presets(const std::string& preset_dir = preset_dir_from_env()) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& n : available_presets(preset_dir)) {
    ClusterSpec c = resolve_cluster(nlohmann::json(n), preset_dir);
    list.push_back({{"name", n}, {"cluster", to_json(c)}});
  }
  nlohmann::json laws = nlohmann::json::array();
  for (const auto& n : scaling_preset_names()) laws.push_back({{"name", n}, {"scaling", to_json(scaling_preset(n))}});
  return envelope("presets", {{"clusters", list}, {"scaling", laws}});
}

// ---------------------------------------------------------------------------
// Closed form.

inline nlohmann::json run_closed_form(const nlohmann::json& req, const std::string& preset_dir = preset_dir_from_env()) {
  using detail::field;
  if (!req.is_object()) throw ParseError("", "request must be an object");
  const ClusterSpec cl = resolve_cluster(req.value("cluster", nlohmann::json("dgx-h100")), preset_dir);
  ClosedFormInputs in = inputs_from_node(node_summary(cl));
  in.b = field<double>(req, "b", in.b);
  in.L = field<double>(req, "L", in.L);
  in.E = field<double>(req, "E", in.E);
  in.t_train = field<double>(req, "t_train_s", in.t_train);
  in.t_L = field<double>(req, "t_L_s", in.t_L);
  in.alpha = field<double>(req, "alpha", in.alpha);
  in.b0 = field<double>(req, "b0", in.b0);
  in.L0 = field<double>(req, "L0", in.L0);
  in.T0 = Compute::flop(field<double>(req, "T0_flop", in.T0.in_flop()));
  const ClosedFormReport r = closed_form_report(in);
  const NodeSummary ns = node_summary(cl);
  nlohmann::json inputs = {{"b", in.b},
                           {"L", in.L},
                           {"E", in.E},
                           {"C_mac_per_s", in.C},
                           {"t_train_s", in.t_train},
                           {"t_L_s", in.t_L},
                           {"B_net_words_per_s", in.B_net},
                           {"B_DRAM_words_per_s", in.B_DRAM},
                           {"S_words", in.S},
                           {"alpha", in.alpha},
                           {"b0", in.b0},
                           {"L0", in.L0},
                           {"T0_flop", in.T0.in_flop()},
                           {"node_gpus", ns.gpus}};
  return envelope("closed_form", {{"cluster", cl.name}, {"inputs", inputs}, {"report", to_json(r)}});
}

// ---------------------------------------------------------------------------
// Shared pieces of simulate / search / sweep.

struct RunContext {
  ClusterSpec cluster;
  ScalingLaws laws;
  Mode mode = Mode::Dense;
  double t_train = kThreeMonths;
  SearchOptions options;
};

inline RunContext parse_context(const nlohmann::json& req, const std::string& preset_dir) {
  using detail::field;
  if (!req.is_object()) throw ParseError("", "request must be an object");
  RunContext c;
  c.cluster = resolve_cluster(req.value("cluster", nlohmann::json("dgx-h100")), preset_dir);
  try {
    c.laws = laws_from_json(req.value("scaling", nlohmann::json("default")));
  } catch (const InvariantViolation& e) {
    throw ParseError(e.field(), e.what());
  }
  try {
    c.mode = mode_from_string(field<std::string>(req, "mode", "dense"));
  } catch (const Error& e) {
    throw ParseError("mode", e.what());
  }
  c.t_train = field<double>(req, "t_train_s", kThreeMonths);
  if (!(c.t_train > 0.0)) throw InvariantViolation("t_train_s", "must be positive");
  if (auto it = req.find("options"); it != req.end()) {
    if (!it->is_object()) throw ParseError("options", "expected an object");
    const auto& o = *it;
    c.options.interleaved = field<bool>(o, "interleaved", true, "options");
    c.options.zero_bubble = field<bool>(o, "zero_bubble", true, "options");
    c.options.max_gpus = field<std::int64_t>(o, "max_gpus", c.options.max_gpus, "options");
    c.options.threads = static_cast<unsigned>(field<std::int64_t>(o, "threads", 1, "options"));
    c.options.sim.overlap.efficiency = field<double>(o, "overlap_efficiency", 1.0, "options");
    c.options.sim.overlap.overlap_data_parallel = field<bool>(o, "overlap_data_parallel", false, "options");
    c.options.plateau_octaves = static_cast<int>(field<std::int64_t>(o, "plateau_octaves", 0, "options"));
  }
  if (!c.options.interleaved && !c.options.zero_bubble)
    throw InvariantViolation("options", "at least one of interleaved and zero_bubble must be enabled");
  if (c.options.max_gpus < 1) throw InvariantViolation("options.max_gpus", "must be positive");
  if (c.options.threads < 1) throw InvariantViolation("options.threads", "must be at least 1");
  const double eta = c.options.sim.overlap.efficiency;
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvariantViolation("options.overlap_efficiency", "must be in [0, 1]");
  return c;
}

// Either "shape": {d_model, d_ff, L, E, b} or "T_flop" solved through the
// scaling laws.
inline ModelShape parse_shape(const nlohmann::json& req, const RunContext& ctx) {
  using detail::field;
  if (auto it = req.find("shape"); it != req.end()) {
    const auto& s = *it;
    if (!s.is_object()) throw ParseError("shape", "expected an object");
    ModelShape m = ModelShape::make(field<std::int64_t>(s, "d_model", 0, "shape"),
                                    field<std::int64_t>(s, "d_ff", 0, "shape"),
                                    field<std::int64_t>(s, "L", 0, "shape"), field<std::int64_t>(s, "E", 1, "shape"),
                                    field<std::int64_t>(s, "b", 0, "shape"), ctx.laws.tokens_per_param);
    validate(m);
    return m;
  }
  if (!req.contains("T_flop")) throw ParseError("T_flop", "give either T_flop or shape");
  return shape_from_compute(Compute::flop(field<double>(req, "T_flop", 0.0)), ctx.laws, ctx.mode);
}

inline ParallelismConfig parse_config(const nlohmann::json& j, std::size_t n_levels) {
  using detail::field;
  if (!j.is_object()) throw ParseError("config", "expected an object");
  ParallelismConfig c;
  c.n_dp = field<std::int64_t>(j, "n_dp", 1, "config");
  c.n_tp_ff = field<std::int64_t>(j, "n_tp_ff", 1, "config");
  c.n_tp_model = field<std::int64_t>(j, "n_tp_model", 1, "config");
  c.n_pp = field<std::int64_t>(j, "n_pp", 1, "config");
  c.n_ep = field<std::int64_t>(j, "n_ep", 1, "config");
  c.i = field<std::int64_t>(j, "interleave", 1, "config");
  c.m = field<std::int64_t>(j, "microbatches", 1, "config");
  try {
    c.schedule = schedule_from_string(field<std::string>(j, "schedule", "interleaved", "config"));
  } catch (const Error& e) {
    throw ParseError("config.schedule", e.what());
  }
  for (auto [v, f] : {std::pair{c.n_dp, "n_dp"}, {c.n_tp_ff, "n_tp_ff"}, {c.n_tp_model, "n_tp_model"},
                      {c.n_pp, "n_pp"}, {c.n_ep, "n_ep"}, {c.i, "interleave"}, {c.m, "microbatches"}})
    if (v < 1) throw InvariantViolation(std::string("config.") + f, "must be at least 1");
  if (auto it = j.find("level_factors"); it != j.end()) {
    if (!it->is_object()) throw ParseError("config.level_factors", "expected an object");
    for (Method x : kMethods) {
      const std::string key(to_string(x));
      auto jt = it->find(key);
      if (jt == it->end()) continue;
      const std::string p = "config.level_factors." + key;
      if (!jt->is_array() || jt->size() > n_levels) throw ParseError(p, "expected one factor per network level");
      for (std::size_t h = 0; h < jt->size(); ++h) {
        if (!(*jt)[h].is_number_integer()) throw ParseError(p, "expected integers");
        c.levels[x][h] = (*jt)[h].get<std::int64_t>();
      }
    }
  }
  return c;
}

inline nlohmann::json context_json(const RunContext& c) {
  return {{"cluster", c.cluster.name},
          {"scaling", c.laws.name},
          {"mode", std::string(to_string(c.mode))},
          {"t_train_s", c.t_train}};
}

// ---------------------------------------------------------------------------
// Simulate: one pinned configuration.

inline nlohmann::json run_simulate(const nlohmann::json& req, const std::string& preset_dir = preset_dir_from_env()) {
  RunContext ctx = parse_context(req, preset_dir);
  ModelShape s = parse_shape(req, ctx);
  ParallelismConfig c = req.contains("config") ? parse_config(req["config"], ctx.cluster.levels()) : ParallelismConfig{};
  c = with_levels(s, c, ctx.cluster);
  StepTimeBreakdown b = step_time(s, c, ctx.cluster, ctx.options.sim);
  const std::size_t H = ctx.cluster.levels();
  return envelope("simulate", {{"context", context_json(ctx)},
                               {"shape", to_json(s)},
                               {"n_gpu", c.n_gpu()},
                               {"config", to_json(c, H)},
                               {"breakdown", to_json(b, H)},
                               {"meets_t_train", b.t_run <= ctx.t_train}});
}

// ---------------------------------------------------------------------------
// Search: best configuration at a fixed size, or the smallest cluster.

inline nlohmann::json run_search(const nlohmann::json& req, const std::string& preset_dir = preset_dir_from_env()) {
  RunContext ctx = parse_context(req, preset_dir);
  ModelShape s = parse_shape(req, ctx);
  const std::size_t H = ctx.cluster.levels();
  nlohmann::json out = {{"context", context_json(ctx)}, {"shape", to_json(s)}};
  if (req.contains("n_gpu")) {
    const auto n = detail::field<std::int64_t>(req, "n_gpu", 0);
    if (n < 1) throw InvariantViolation("n_gpu", "must be at least 1");
    SearchResult r = best_config(s, n, ctx.cluster, ctx.options);
    if (!r.feasible) throw Infeasible("configuration_exists", r.message);
    out["n_gpu"] = n;
    out["config"] = to_json(r.best, H);
    out["breakdown"] = to_json(r.breakdown, H);
    out["evaluated"] = r.evaluated;
    out["meets_t_train"] = r.breakdown.t_run <= ctx.t_train;
    return envelope("search", out);
  }
  ClusterSearch cs = min_cluster_for_shape(s, ctx.t_train, ctx.cluster, ctx.options);
  if (!cs.feasible) throw Infeasible(std::string(to_string(cs.failure)), cs.message);
  out["n_gpu"] = cs.result.n_gpu;
  out["config"] = to_json(cs.result.best, H);
  out["breakdown"] = to_json(cs.result.breakdown, H);
  out["evaluated"] = cs.result.evaluated;
  out["sizes_tried"] = cs.sizes_tried;
  out["meets_t_train"] = true;
  return envelope("search", out);
}

// ---------------------------------------------------------------------------
// Sweep.

inline constexpr int kDefaultPointsPerDecade = 16;

inline std::vector<double> parse_sweep_points(const nlohmann::json& req) {
  using detail::field;
  if (auto it = req.find("T_flop"); it != req.end()) {
    if (!it->is_array() || it->empty()) throw ParseError("T_flop", "expected a non-empty array of numbers");
    std::vector<double> v;
    for (std::size_t k = 0; k < it->size(); ++k) {
      if (!(*it)[k].is_number()) throw ParseError("T_flop[" + std::to_string(k) + "]", "expected a number");
      v.push_back((*it)[k].get<double>());
    }
    return v;
  }
  const double lo = field<double>(req, "T_min_flop", 0.0);
  const double hi = field<double>(req, "T_max_flop", lo);
  if (!req.contains("T_min_flop")) throw ParseError("T_min_flop", "give T_flop or T_min_flop/T_max_flop");
  const auto per = field<std::int64_t>(req, "points_per_decade", kDefaultPointsPerDecade);
  return log_points(lo, hi, static_cast<int>(per));
}

struct SweepRun {
  RunContext ctx;
  SweepResult result;
};

inline SweepRun execute_sweep(const nlohmann::json& req, const std::string& preset_dir, std::size_t max_points,
                              const SweepProgress& progress = {}, const std::atomic<bool>* cancel = nullptr) {
  RunContext ctx = parse_context(req, preset_dir);
  auto pts = parse_sweep_points(req);
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (!(pts[k] > 0.0)) throw InvariantViolation("T_flop[" + std::to_string(k) + "]", "must be positive");
  if (max_points != 0 && pts.size() > max_points)
    throw InvariantViolation("T_flop", "at most " + std::to_string(max_points) +
                                           " points per synchronous sweep; submit larger sweeps as a job");
  SweepRun r{ctx, sweep(pts, ctx.t_train, ctx.laws, ctx.cluster, ctx.mode, ctx.options, progress, cancel)};
  return r;
}

inline nlohmann::json sweep_document(const SweepRun& r) {
  nlohmann::json data = to_json(r.result, r.ctx.cluster.levels());
  data["context"] = context_json(r.ctx);
  return envelope("sweep", data);
}

inline nlohmann::json run_sweep(const nlohmann::json& req, const std::string& preset_dir = preset_dir_from_env(),
                                std::size_t max_points = kMaxSyncSweepPoints) {
  return sweep_document(execute_sweep(req, preset_dir, max_points));
}

}  // namespace scalelimits
