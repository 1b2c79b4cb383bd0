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

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalelimits/closedform.hpp"
#include "scalelimits/search.hpp"

namespace scalelimits {

inline constexpr const char* kSchemaVersion = "1";

inline nlohmann::json units_json() {
  return {{"time", "s"},          {"compute", "FLOP"},        {"arithmetic", "MAC/s"},
          {"bandwidth", "words/s"}, {"data", "words"},         {"model_dims", "units"},
          {"batch", "tokens"},    {"utilization", "fraction"}};
}

// Every structured document, CLI or HTTP, goes through here.
inline nlohmann::json envelope(const std::string& kind, nlohmann::json data) {
  return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"units", units_json()}, {"data", std::move(data)}};
}

inline nlohmann::json error_json(const std::string& code, const std::string& message, const std::string& field = "",
                                 const std::string& invariant = "") {
  nlohmann::json e = {{"code", code}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  if (!invariant.empty()) e["violated_invariant"] = invariant;
  return {{"schema_version", kSchemaVersion}, {"error", e}};
}

inline nlohmann::json to_json(const SweepRecord& r, std::size_t n_levels) {
  nlohmann::json j = {{"T_flop", r.T_flop},
                      {"feasible", r.feasible},
                      {"failure", std::string(to_string(r.failure))},
                      {"shape", r.shape.d_model > 0 ? to_json(r.shape) : nlohmann::json(nullptr)}};
  if (!r.message.empty()) j["message"] = r.message;
  if (r.feasible) {
    const auto f = r.parallelism_fractions();
    j["n_gpu"] = r.n_gpu;
    j["config"] = to_json(r.config, n_levels);
    j["breakdown"] = to_json(r.breakdown, n_levels);
    j["parallelism_fractions"] = {{"dp", f[0]}, {"tp", f[1]}, {"pp", f[2]}, {"ep", f[3]}};
  }
  return j;
}

inline nlohmann::json to_json(const SweepResult& r, std::size_t n_levels) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& x : r.records) recs.push_back(to_json(x, n_levels));
  return {{"records", recs},
          {"linear_scaling_threshold", kLinearScalingThreshold},
          {"endpoint_flop", r.endpoint_flop ? nlohmann::json(*r.endpoint_flop) : nlohmann::json(nullptr)}};
}

// ---------------------------------------------------------------------------
// CSV. Column order is part of the public interface.

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "T_flop", "n_gpu",      "mfu",          "norm_util",    "n_dp",         "n_tp_ff",
      "n_tp_model", "n_pp",   "n_ep",         "interleave",   "microbatches", "schedule",
      "t_step_s", "t_matmul_s", "t_comm_exposed_s", "t_latency_s", "bubble_fraction"};
  return cols;
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_header() {
  std::string s;
  for (const auto& c : csv_columns()) s += (s.empty() ? "" : ",") + c;
  return s;
}

// Built from the structured record (T_flop, feasible, n_gpu, config,
// breakdown) so CSV and JSON cannot disagree. Infeasible points keep T and
// leave the remaining cells empty.
inline std::string csv_row(const nlohmann::json& rec) {
  std::string s = csv_number(rec.at("T_flop").get<double>());
  if (!rec.value("feasible", true)) return s + std::string(csv_columns().size() - 1, ',');
  const auto& c = rec.at("config");
  const auto& b = rec.at("breakdown");
  const auto& m = b.at("comm");
  auto i = [&](const nlohmann::json& o, const char* k) { return std::to_string(o.at(k).get<std::int64_t>()); };
  auto d = [&](const nlohmann::json& o, const char* k) { return csv_number(o.at(k).get<double>()); };
  std::vector<std::string> cells = {
      i(rec, "n_gpu"),         d(b, "mfu"),          d(b, "normalized_utilization"),
      i(c, "n_dp"),            i(c, "n_tp_ff"),      i(c, "n_tp_model"),
      i(c, "n_pp"),            i(c, "n_ep"),         i(c, "interleave"),
      i(c, "microbatches"),    c.at("schedule").get<std::string>(),
      d(b, "t_step_s"),        d(b, "t_matmul_s"),
      csv_number(m.at("t_dp_exposed_s").get<double>() + m.at("t_ndp_exposed_s").get<double>()),
      d(m, "t_latency_s"),     d(b, "bubble_fraction")};
  for (const auto& x : cells) s += "," + x;
  return s;
}

inline std::string csv_row(const SweepRecord& r, std::size_t n_levels) { return csv_row(to_json(r, n_levels)); }

inline std::string records_csv(const nlohmann::json& records) {
  std::string s = csv_header() + "\n";
  for (const auto& x : records) s += csv_row(x) + "\n";
  return s;
}

}  // namespace scalelimits
