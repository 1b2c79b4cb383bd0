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
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/units.hpp"

namespace scalelimits {

enum class Mode { Dense, Sparse };

inline std::string_view to_string(Mode m) { return m == Mode::Dense ? "dense" : "sparse"; }

inline Mode mode_from_string(std::string_view s) {
  if (s == "dense") return Mode::Dense;
  if (s == "sparse") return Mode::Sparse;
  throw InvariantViolation("mode", "expected dense or sparse");
}

// b = b0 * E^sparsity_exponent * (T / T0)^exponent
struct BatchLaw {
  double reference_batch = 4194304.0;
  Compute reference_compute = Compute::flop(3e23);
  double exponent = 1.0 / 6.0;
  double sparsity_exponent = 0.5;
};

// L = coefficient * x^exponent with x = d_model * d_ff, or x = N_p / reference.
struct LayerLaw {
  enum class Basis { WidthProduct, Params };
  Basis basis = Basis::WidthProduct;
  double coefficient = 0.10056;
  double exponent = 0.3751;
  double reference = 1.0;
};

// E = coefficient * (d_model * d_ff / reference_width_product)^exponent,
// or a fixed value when fixed > 0.
struct SparsityLaw {
  double coefficient = 8.0;
  double reference_width_product = 4.0 * 12288.0 * 12288.0;
  double exponent = 0.5;
  std::int64_t fixed = 0;
};

struct ScalingLaws {
  std::string name = "default";
  BatchLaw batch;
  LayerLaw layers;
  SparsityLaw sparsity;
  double ff_ratio = 4.0;
  double tokens_per_param = 20.0;
};

inline void validate(const ScalingLaws& s) {
  auto pos = [](double v, const char* f) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvariantViolation(f, "must be positive and finite");
  };
  auto fin = [](double v, const char* f) {
    if (!std::isfinite(v)) throw InvariantViolation(f, "must be finite");
  };
  pos(s.batch.reference_batch, "scaling.batch.reference_batch");
  pos(s.batch.reference_compute.in_mac(), "scaling.batch.reference_compute_flop");
  fin(s.batch.exponent, "scaling.batch.exponent");
  fin(s.batch.sparsity_exponent, "scaling.batch.sparsity_exponent");
  pos(s.layers.coefficient, "scaling.layers.coefficient");
  pos(s.layers.reference, "scaling.layers.reference");
  fin(s.layers.exponent, "scaling.layers.exponent");
  if (s.layers.basis == LayerLaw::Basis::Params && !(s.layers.exponent < 1.0))
    throw InvariantViolation("scaling.layers.exponent", "parameter-based law needs exponent < 1");
  pos(s.sparsity.coefficient, "scaling.sparsity.coefficient");
  pos(s.sparsity.reference_width_product, "scaling.sparsity.reference_width_product");
  fin(s.sparsity.exponent, "scaling.sparsity.exponent");
  if (s.sparsity.fixed < 0) throw InvariantViolation("scaling.sparsity.fixed", "must be >= 1");
  pos(s.ff_ratio, "scaling.ff_ratio");
  pos(s.tokens_per_param, "scaling.tokens_per_param");
}

inline ScalingLaws scaling_preset(std::string_view name) {
  ScalingLaws s;
  if (name == "default") return s;
  if (name == "deepseek") {
    s.name = "deepseek";
    s.batch.reference_batch = 4e6;
    s.batch.exponent = 0.3271;
    return s;
  }
  if (name == "fixed-batch") {
    s.name = "fixed-batch";
    s.batch.exponent = 0.0;
    s.batch.sparsity_exponent = 0.0;
    return s;
  }
  if (name == "param-depth") {
    s.name = "param-depth";
    s.layers = {LayerLaw::Basis::Params, 3.67, 0.27, 1e6};
    return s;
  }
  throw InvariantViolation("laws", "unknown scaling preset '" + std::string(name) + "'");
}

inline const std::vector<std::string>& scaling_preset_names() {
  static const std::vector<std::string> n = {"default", "deepseek", "fixed-batch", "param-depth"};
  return n;
}

struct ModelShape {
  std::int64_t d_model = 0;
  std::int64_t d_ff = 0;
  std::int64_t L = 0;
  std::int64_t E = 1;
  double N_p = 0.0;  // parameters, integral valued
  double D = 0.0;    // dataset tokens
  std::int64_t b = 0;
  Compute T;  // 3 * N_p * D / E

  // Build a shape from explicit dimensions; N_p, D and T follow.
  static ModelShape make(std::int64_t d_model, std::int64_t d_ff, std::int64_t L, std::int64_t E,
                         std::int64_t b, double tokens_per_param = 20.0) {
    ModelShape s;
    s.d_model = d_model;
    s.d_ff = d_ff;
    s.L = L;
    s.E = E;
    s.b = b;
    s.N_p = 2.0 * static_cast<double>(L) * static_cast<double>(E) * static_cast<double>(d_model) *
            static_cast<double>(d_ff);
    s.D = tokens_per_param * s.N_p;
    s.T = Compute::mac(3.0 * s.N_p * s.D / static_cast<double>(E));
    return s;
  }
};

inline void validate(const ModelShape& s) {
  if (s.d_model < 1) throw InvariantViolation("shape.d_model", "must be positive");
  if (s.d_ff < 1) throw InvariantViolation("shape.d_ff", "must be positive");
  if (s.L < 1) throw InvariantViolation("shape.L", "must be positive");
  if (s.E < 1) throw InvariantViolation("shape.E", "must be positive");
  if (s.b < 1) throw InvariantViolation("shape.b", "must be positive");
  if (!(s.D > 0.0)) throw InvariantViolation("shape.D", "must be positive");
}

inline Compute training_compute(double N_p, double D, double E) {
  return Compute::mac(3.0 * N_p * D / E);
}

inline Compute training_compute(const ModelShape& s) {
  return training_compute(s.N_p, s.D, static_cast<double>(s.E));
}

inline std::int64_t critical_batch(Compute T, double E, const ScalingLaws& laws) {
  if (!(T.in_mac() > 0.0)) throw InvariantViolation("T", "must be positive");
  if (!(E >= 1.0)) throw InvariantViolation("E", "must be at least 1");
  const BatchLaw& bl = laws.batch;
  double b = bl.reference_batch * std::pow(E, bl.sparsity_exponent) *
             std::pow(T.in_mac() / bl.reference_compute.in_mac(), bl.exponent);
  return std::max<std::int64_t>(1, std::llround(b));
}

namespace detail {

// Continuous layer count. For the parameter-based law N_p itself depends
// on L, so solve L = c * (2 L E w / ref)^e for L.
inline double layer_count_real(double width_product, double E, const LayerLaw& law) {
  if (law.basis == LayerLaw::Basis::WidthProduct)
    return law.coefficient * std::pow(width_product, law.exponent);
  double k = law.coefficient * std::pow(2.0 * E * width_product / law.reference, law.exponent);
  return std::pow(k, 1.0 / (1.0 - law.exponent));
}

inline double sparsity_real(double width_product, const ScalingLaws& laws, Mode mode) {
  if (mode == Mode::Dense) return 1.0;
  if (laws.sparsity.fixed > 0) return static_cast<double>(laws.sparsity.fixed);
  double e = laws.sparsity.coefficient *
             std::pow(width_product / laws.sparsity.reference_width_product, laws.sparsity.exponent);
  return std::max(1.0, e);
}

}  // namespace detail

inline std::int64_t layer_count(double width_product, const ScalingLaws& laws, double E = 1.0) {
  if (!(width_product > 0.0)) throw InvariantViolation("width_product", "must be positive");
  return std::max<std::int64_t>(1, std::llround(detail::layer_count_real(width_product, E, laws.layers)));
}

inline std::int64_t layer_count_from_params(double N_p, const LayerLaw& law) {
  if (!(N_p > 0.0)) throw InvariantViolation("N_p", "must be positive");
  return std::max<std::int64_t>(1, std::llround(law.coefficient * std::pow(N_p / law.reference, law.exponent)));
}

inline std::int64_t sparsity_factor(double width_product, const ScalingLaws& laws, Mode mode) {
  if (!(width_product > 0.0)) throw InvariantViolation("width_product", "must be positive");
  return std::max<std::int64_t>(1, std::llround(detail::sparsity_real(width_product, laws, mode)));
}

inline constexpr double kShapeTolerance = 0.05;
inline constexpr double kMinDModel = 64.0;
inline constexpr double kMaxDModel = 16777216.0;  // 2^24
inline constexpr std::int64_t kWidthQuantum = 128;

inline ModelShape shape_from_compute(Compute T, const ScalingLaws& laws, Mode mode) {
  validate(laws);
  const double target = T.in_mac();
  if (!(T.in_flop() >= 1e20 && T.in_flop() <= 1e40))
    throw InvariantViolation("T", "training compute must lie in [1e20, 1e40] FLOP");

  // Compute as a function of continuous d_model; E is either tracked
  // continuously or pinned.
  auto compute_at = [&](double d, double E_pinned) {
    double w = laws.ff_ratio * d * d;
    double E = E_pinned > 0.0 ? E_pinned : detail::sparsity_real(w, laws, mode);
    double L = detail::layer_count_real(w, E, laws.layers);
    double Np = 2.0 * L * E * w;
    return 3.0 * Np * (laws.tokens_per_param * Np) / E;
  };
  auto solve = [&](double E_pinned) {
    double lo = std::log(kMinDModel), hi = std::log(kMaxDModel);
    if (compute_at(std::exp(lo), E_pinned) > target || compute_at(std::exp(hi), E_pinned) < target) {
      std::ostringstream os;
      os << "no d_model in [" << kMinDModel << ", " << kMaxDModel << "] reaches T = " << T.in_flop()
         << " FLOP";
      throw Infeasible("shape_from_compute.bracket", os.str());
    }
    while (hi - lo > 1e-6 * std::max(1.0, std::fabs(hi))) {
      double mid = 0.5 * (lo + hi);
      if (compute_at(std::exp(mid), E_pinned) < target)
        lo = mid;
      else
        hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
  };

  double d = solve(0.0);
  double E_pinned = 0.0;
  std::int64_t E = 1;
  if (mode == Mode::Sparse) {
    E = std::max<std::int64_t>(1, std::llround(detail::sparsity_real(laws.ff_ratio * d * d, laws, mode)));
    E_pinned = static_cast<double>(E);
    d = solve(E_pinned);
  }

  const double q = static_cast<double>(kWidthQuantum);
  double d_lo = std::max(q, std::floor(d / q) * q);
  ModelShape best;
  double best_err = kInfinity;
  for (double dc : {d_lo, d_lo + q}) {
    auto dm = static_cast<std::int64_t>(dc);
    auto dff = std::llround(laws.ff_ratio * dc);
    double w = static_cast<double>(dm) * static_cast<double>(dff);
    double Lr = detail::layer_count_real(w, static_cast<double>(E), laws.layers);
    for (double Lc : {std::floor(Lr), std::ceil(Lr)}) {
      auto L = std::max<std::int64_t>(1, static_cast<std::int64_t>(Lc));
      ModelShape s = ModelShape::make(dm, dff, L, E, 1, laws.tokens_per_param);
      double err = std::fabs(s.T.in_mac() - target) / target;
      if (err < best_err) {
        best_err = err;
        best = s;
      }
    }
  }
  if (best_err > kShapeTolerance) {
    std::ostringstream os;
    os << "integer shape misses T = " << T.in_flop() << " FLOP by " << best_err * 100.0 << "%";
    throw Infeasible("shape_from_compute.rounding_tolerance", os.str());
  }
  best.b = critical_batch(best.T, static_cast<double>(best.E), laws);
  return best;
}

// ---------------------------------------------------------------------------
// JSON section "scaling". Starts from a named preset and applies overrides.

inline ScalingLaws laws_from_json(const nlohmann::json& j) {
  if (j.is_string()) return scaling_preset(j.get<std::string>());
  if (!j.is_object()) throw ParseError("scaling", "expected an object or a preset name");
  ScalingLaws s = scaling_preset(j.value("preset", std::string("default")));
  try {
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (auto it = j.find("batch"); it != j.end()) {
      const auto& b = *it;
      s.batch.reference_batch = b.value("reference_batch", s.batch.reference_batch);
      if (b.contains("reference_compute_flop"))
        s.batch.reference_compute = Compute::flop(b["reference_compute_flop"].get<double>());
      s.batch.exponent = b.value("exponent", s.batch.exponent);
      s.batch.sparsity_exponent = b.value("sparsity_exponent", s.batch.sparsity_exponent);
    }
    if (auto it = j.find("layers"); it != j.end()) {
      const auto& l = *it;
      std::string basis = l.value("basis", std::string(s.layers.basis == LayerLaw::Basis::Params
                                                           ? "params"
                                                           : "width_product"));
      if (basis == "params")
        s.layers.basis = LayerLaw::Basis::Params;
      else if (basis == "width_product")
        s.layers.basis = LayerLaw::Basis::WidthProduct;
      else
        throw ParseError("scaling.layers.basis", "expected width_product or params");
      s.layers.coefficient = l.value("coefficient", s.layers.coefficient);
      s.layers.exponent = l.value("exponent", s.layers.exponent);
      s.layers.reference = l.value("reference", s.layers.reference);
    }
    if (auto it = j.find("sparsity"); it != j.end()) {
      const auto& p = *it;
      s.sparsity.coefficient = p.value("coefficient", s.sparsity.coefficient);
      s.sparsity.reference_width_product =
          p.value("reference_width_product", s.sparsity.reference_width_product);
      s.sparsity.exponent = p.value("exponent", s.sparsity.exponent);
      s.sparsity.fixed = p.value("fixed", s.sparsity.fixed);
    }
    s.ff_ratio = j.value("ff_ratio", s.ff_ratio);
    s.tokens_per_param = j.value("tokens_per_param", s.tokens_per_param);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scaling", e.what());
  }
  validate(s);
  return s;
}

inline nlohmann::json to_json(const ScalingLaws& s) {
  return {
      {"name", s.name},
      {"batch",
       {{"reference_batch", s.batch.reference_batch},
        {"reference_compute_flop", s.batch.reference_compute.in_flop()},
        {"exponent", s.batch.exponent},
        {"sparsity_exponent", s.batch.sparsity_exponent}}},
      {"layers",
       {{"basis", s.layers.basis == LayerLaw::Basis::Params ? "params" : "width_product"},
        {"coefficient", s.layers.coefficient},
        {"exponent", s.layers.exponent},
        {"reference", s.layers.reference}}},
      {"sparsity",
       {{"coefficient", s.sparsity.coefficient},
        {"reference_width_product", s.sparsity.reference_width_product},
        {"exponent", s.sparsity.exponent},
        {"fixed", s.sparsity.fixed}}},
      {"ff_ratio", s.ff_ratio},
      {"tokens_per_param", s.tokens_per_param},
  };
}

inline nlohmann::json to_json(const ModelShape& s) {
  return {{"d_model", s.d_model}, {"d_ff", s.d_ff}, {"L", s.L},        {"E", s.E},
          {"N_p", s.N_p},         {"D", s.D},       {"b", s.b},        {"T_flop", s.T.in_flop()}};
}

}  // namespace scalelimits
