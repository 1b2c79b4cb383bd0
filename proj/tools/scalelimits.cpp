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

// scalelimits command-line front end. Every subcommand builds the same
// request document the HTTP service accepts and prints the shared result.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scalelimits/api.hpp"
#include "scalelimits/report.hpp"
#include "scalelimits/requests.hpp"

namespace sl = scalelimits;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kInternal = 4 };

struct Common {
  std::string format = "table";
  std::string preset = "dgx-h100";
  std::string cluster_file;
  std::string scaling = "default";
  std::string scaling_file;
  std::string mode = "dense";
  double t_train_days = sl::kThreeMonths / sl::kSecondsPerDay;
  std::string request_file;
};

struct ShapeFlags {
  std::optional<double> T;
  std::optional<std::int64_t> d_model, d_ff, layers, experts, batch;
};

struct SearchFlags {
  std::int64_t max_gpus = std::int64_t{1} << 30;
  unsigned threads = 1;
  bool no_interleaved = false;
  bool no_zero_bubble = false;
  double overlap_efficiency = 1.0;
  bool overlap_dp = false;
};

json cluster_json(const Common& c) {
  if (!c.cluster_file.empty()) return sl::read_json_file(c.cluster_file);
  return c.preset;
}

json context_json(const Common& c) {
  json j = {{"cluster", cluster_json(c)}, {"mode", c.mode}, {"t_train_s", c.t_train_days * sl::kSecondsPerDay}};
  j["scaling"] = c.scaling_file.empty() ? json(c.scaling) : sl::read_json_file(c.scaling_file);
  return j;
}

void add_shape(json& j, const ShapeFlags& s) {
  if (s.d_model || s.d_ff || s.layers || s.batch) {
    if (!(s.d_model && s.d_ff && s.layers && s.batch))
      throw sl::ParseError("shape", "--d-model, --d-ff, --layers and --batch go together");
    j["shape"] = {{"d_model", *s.d_model}, {"d_ff", *s.d_ff}, {"L", *s.layers}, {"E", s.experts.value_or(1)},
                  {"b", *s.batch}};
  } else if (s.T) {
    j["T_flop"] = *s.T;
  } else {
    throw sl::ParseError("T_flop", "give --T or an explicit shape");
  }
}

void add_options(json& j, const SearchFlags& f) {
  j["options"] = {{"max_gpus", f.max_gpus},
                  {"threads", f.threads},
                  {"interleaved", !f.no_interleaved},
                  {"zero_bubble", !f.no_zero_bubble},
                  {"overlap_efficiency", f.overlap_efficiency},
                  {"overlap_data_parallel", f.overlap_dp}};
}

void shape_options(CLI::App* app, ShapeFlags& s) {
  app->add_option("--T", s.T, "training compute in FLOP (shape from the scaling laws)");
  app->add_option("--d-model", s.d_model, "explicit shape: model width");
  app->add_option("--d-ff", s.d_ff, "explicit shape: feed-forward width");
  app->add_option("--layers", s.layers, "explicit shape: MLP blocks");
  app->add_option("--experts", s.experts, "explicit shape: experts per block");
  app->add_option("--batch", s.batch, "explicit shape: batch in tokens");
}

void search_options(CLI::App* app, SearchFlags& f) {
  app->add_option("--max-gpus", f.max_gpus, "cluster size cap for the minimum-cluster search");
  app->add_option("--threads", f.threads, "worker threads");
  app->add_flag("--no-interleaved", f.no_interleaved, "exclude interleaved schedules");
  app->add_flag("--no-zero-bubble", f.no_zero_bubble, "exclude zero-bubble schedules");
  app->add_option("--overlap-efficiency", f.overlap_efficiency, "share of overlappable communication hidden");
  app->add_flag("--overlap-dp", f.overlap_dp, "let data-parallel all-reduce overlap with compute");
}

std::string fmt(double v, int prec = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string degrees(const json& c) {
  std::ostringstream os;
  os << "dp=" << c["n_dp"] << " tp=" << c["n_tp_ff"] << "x" << c["n_tp_model"] << " pp=" << c["n_pp"]
     << " ep=" << c["n_ep"] << " i=" << c["interleave"] << " m=" << c["microbatches"] << " "
     << c["schedule"].get<std::string>();
  return os.str();
}

json single_record(const json& data) {
  return {{"T_flop", data["shape"]["T_flop"]},
          {"feasible", true},
          {"n_gpu", data["n_gpu"]},
          {"config", data["config"]},
          {"breakdown", data["breakdown"]}};
}

void print_run_table(const json& d) {
  const auto& s = d["shape"];
  const auto& b = d["breakdown"];
  const auto& c = b["comm"];
  std::cout << "shape      d_model=" << s["d_model"] << " d_ff=" << s["d_ff"] << " L=" << s["L"] << " E=" << s["E"]
            << " b=" << s["b"] << " N_p=" << fmt(s["N_p"].get<double>()) << " T=" << fmt(s["T_flop"].get<double>())
            << " FLOP\n";
  std::cout << "cluster    " << d["n_gpu"] << " GPUs, " << degrees(d["config"]) << "\n";
  std::cout << "step       " << fmt(b["t_step_s"].get<double>(), 4) << " s  (matmul "
            << fmt(b["t_matmul_s"].get<double>(), 4) << " s, " << b["matmul_bound"].get<std::string>()
            << " bound, nanobatch " << fmt(b["nanobatch"].get<double>(), 6) << ")\n";
  std::cout << "comm       dp " << fmt(c["t_dp_bandwidth_s"].get<double>()) << " s, tp "
            << fmt(c["t_tp_bandwidth_s"].get<double>()) << " s, p2p " << fmt(c["t_p2p_bandwidth_s"].get<double>())
            << " s, exposed " << fmt(c["t_dp_exposed_s"].get<double>() + c["t_ndp_exposed_s"].get<double>())
            << " s, latency " << fmt(c["t_latency_s"].get<double>()) << " s\n";
  std::cout << "bubble     " << fmt(b["bubble_fraction"].get<double>()) << "\n";
  std::cout << "run        " << fmt(b["t_run_s"].get<double>() / sl::kSecondsPerDay) << " days over "
            << fmt(b["n_steps"].get<double>()) << " steps, MFU " << fmt(b["mfu"].get<double>()) << ", normalized "
            << fmt(b["normalized_utilization"].get<double>()) << (d["meets_t_train"].get<bool>() ? "" : "  (over t_train)")
            << "\n";
}

void print_closed_form_table(const json& d) {
  const auto& r = d["report"];
  const auto& in = d["inputs"];
  std::cout << "cluster            " << d["cluster"].get<std::string>() << " (node of " << in["node_gpus"] << ")\n";
  std::cout << "d'                 " << fmt(r["d_prime"].get<double>(), 5) << "\n";
  std::cout << "b'                 " << fmt(r["b_prime"].get<double>(), 4)
            << (r["sram_regime"].get<bool>() ? "  (weights in SRAM)" : "  (DRAM)") << "\n";
  std::cout << "N_critical         " << fmt(r["N_critical"].get<double>()) << " nodes\n";
  std::cout << "T_critical (bw)    " << fmt(r["T_critical_bandwidth_flop"].get<double>()) << " FLOP\n";
  std::cout << "T_critical (lat)   " << fmt(r["T_critical_latency_flop"].get<double>()) << " FLOP\n";
  std::cout << "T_limit            " << fmt(r["T_limit_flop"].get<double>()) << " FLOP\n";
  std::cout << "N_p limit          " << fmt(r["N_p_limit"].get<double>()) << "\n";
  std::cout << "operative limit    " << fmt(r["operative_limit_flop"].get<double>()) << " FLOP ("
            << r["operative"].get<std::string>() << ")\n";
}

void print_sweep_table(const json& d) {
  std::printf("%-10s %-12s %-7s %-7s %s\n", "T_flop", "n_gpu", "mfu", "norm", "configuration");
  for (const auto& r : d["records"]) {
    if (!r["feasible"].get<bool>()) {
      std::printf("%-10s infeasible (%s)\n", fmt(r["T_flop"].get<double>()).c_str(),
                  r["failure"].get<std::string>().c_str());
      continue;
    }
    const auto& b = r["breakdown"];
    std::printf("%-10s %-12lld %-7s %-7s %s\n", fmt(r["T_flop"].get<double>()).c_str(),
                static_cast<long long>(r["n_gpu"].get<std::int64_t>()), fmt(b["mfu"].get<double>()).c_str(),
                fmt(b["normalized_utilization"].get<double>()).c_str(), degrees(r["config"]).c_str());
  }
  if (d["endpoint_flop"].is_null())
    std::cout << "linear scaling holds over the whole range\n";
  else
    std::cout << "linear scaling ends at " << fmt(d["endpoint_flop"].get<double>()) << " FLOP\n";
}

void print_presets_table(const json& d) {
  for (const auto& p : d["clusters"]) {
    const auto& c = p["cluster"];
    std::cout << p["name"].get<std::string>() << "  (" << c["device"]["name"].get<std::string>() << ", "
              << c["network_levels"].size() << " network levels)\n";
  }
  std::cout << "scaling:";
  for (const auto& s : d["scaling"]) std::cout << " " << s["name"].get<std::string>();
  std::cout << "\n";
}

void emit(const std::string& format, const json& doc) {
  const std::string kind = doc["kind"];
  const json& d = doc["data"];
  if (format == "structured") {
    std::cout << doc.dump() << "\n";
    return;
  }
  if (format == "csv") {
    if (kind == "sweep") {
      std::cout << sl::records_csv(d["records"]);
    } else if (kind == "simulate" || kind == "search") {
      std::cout << sl::records_csv(json::array({single_record(d)}));
    } else if (kind == "closed_form") {
      std::cout << "quantity,value\n";
      for (auto it = d["report"].begin(); it != d["report"].end(); ++it) std::cout << it.key() << "," << it.value() << "\n";
    } else {
      std::cout << "name\n";
      for (const auto& p : d["clusters"]) std::cout << p["name"].get<std::string>() << "\n";
    }
    return;
  }
  if (kind == "sweep")
    print_sweep_table(d);
  else if (kind == "simulate" || kind == "search")
    print_run_table(d);
  else if (kind == "closed_form")
    print_closed_form_table(d);
  else
    print_presets_table(d);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limits of distributed training: closed forms, simulation and configuration search"};
  app.require_subcommand(1);
  app.fallthrough();
  Common com;
  app.add_option("--format", com.format, "table, csv or structured")
      ->check(CLI::IsMember({"table", "csv", "structured"}));

  auto cluster_opts = [&](CLI::App* a) {
    a->add_option("--preset", com.preset, "cluster preset name");
    a->add_option("--cluster-file", com.cluster_file, "cluster description (JSON)");
    a->add_option("--request", com.request_file, "read the whole request from a JSON file");
  };
  auto run_opts = [&](CLI::App* a) {
    cluster_opts(a);
    a->add_option("--scaling", com.scaling, "scaling-law preset");
    a->add_option("--scaling-file", com.scaling_file, "scaling laws (JSON)");
    a->add_option("--mode", com.mode, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
    a->add_option("--t-train-days", com.t_train_days, "training duration in days");
  };

  auto* presets = app.add_subcommand("presets", "list hardware and scaling presets");

  auto* cf = app.add_subcommand("closed-form", "analytic limits for one cluster");
  cluster_opts(cf);
  std::optional<double> cf_tL;
  double cf_b = 4e6, cf_L = 100, cf_E = 1, cf_alpha = 0, cf_b0 = 4e6, cf_L0 = 100, cf_T0 = 3e23;
  cf->add_option("--batch", cf_b, "tokens per batch");
  cf->add_option("--layers", cf_L, "MLP blocks");
  cf->add_option("--sparsity", cf_E, "experts per block");
  cf->add_option("--t-latency", cf_tL, "combined kernel and network latency in seconds (default: from the cluster)");
  cf->add_option("--t-train-days", com.t_train_days, "training duration in days");
  cf->add_option("--alpha", cf_alpha, "batch exponent minus depth exponent");
  cf->add_option("--b0", cf_b0, "reference batch");
  cf->add_option("--L0", cf_L0, "reference depth");
  cf->add_option("--T0", cf_T0, "reference compute in FLOP");

  ShapeFlags sim_shape;
  json sim_cfg = json::object();
  std::int64_t dp = 1, tpf = 1, tpm = 1, pp = 1, ep = 1, il = 1, mb = 1;
  std::string sched = "interleaved";
  auto* sim = app.add_subcommand("simulate", "step time of one pinned configuration");
  run_opts(sim);
  shape_options(sim, sim_shape);
  sim->add_option("--dp", dp);
  sim->add_option("--tp-ff", tpf);
  sim->add_option("--tp-model", tpm);
  sim->add_option("--pp", pp);
  sim->add_option("--ep", ep);
  sim->add_option("--interleave", il);
  sim->add_option("--microbatches", mb);
  sim->add_option("--schedule", sched)->check(CLI::IsMember({"naive", "interleaved", "zero-bubble"}));

  ShapeFlags search_shape;
  SearchFlags search_flags;
  std::optional<std::int64_t> n_gpu;
  auto* search = app.add_subcommand("search", "best configuration, or smallest cluster meeting t_train");
  run_opts(search);
  shape_options(search, search_shape);
  search_options(search, search_flags);
  search->add_option("--n-gpu", n_gpu, "fix the cluster size instead of searching for the minimum");

  SearchFlags sweep_flags;
  double t_min = 1e24, t_max = 1e32;
  int per_decade = sl::kDefaultPointsPerDecade;
  std::vector<double> points;
  auto* sw = app.add_subcommand("sweep", "utilization over a range of training compute");
  run_opts(sw);
  search_options(sw, sweep_flags);
  sw->add_option("--T-min", t_min, "smallest compute in FLOP");
  sw->add_option("--T-max", t_max, "largest compute in FLOP");
  sw->add_option("--per-decade", per_decade, "log-spaced points per decade");
  sw->add_option("--points", points, "explicit compute values in FLOP");

  std::string host = "127.0.0.1", cors = "*";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "JSON-over-HTTP service");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value; empty disables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    json req;
    if (!com.request_file.empty()) req = sl::read_json_file(com.request_file);
    json doc;
    if (*presets) {
      doc = sl::run_presets();
    } else if (*cf) {
      if (com.request_file.empty()) {
        req = {{"cluster", cluster_json(com)}, {"b", cf_b},   {"L", cf_L},   {"E", cf_E},
               {"alpha", cf_alpha},            {"b0", cf_b0}, {"L0", cf_L0}, {"T0_flop", cf_T0},
               {"t_train_s", com.t_train_days * sl::kSecondsPerDay}};
        if (cf_tL) req["t_L_s"] = *cf_tL;
      }
      doc = sl::run_closed_form(req);
    } else if (*sim) {
      if (com.request_file.empty()) {
        req = context_json(com);
        add_shape(req, sim_shape);
        req["config"] = {{"n_dp", dp},          {"n_tp_ff", tpf}, {"n_tp_model", tpm}, {"n_pp", pp},
                         {"n_ep", ep},          {"interleave", il}, {"microbatches", mb}, {"schedule", sched}};
      }
      doc = sl::run_simulate(req);
    } else if (*search) {
      if (com.request_file.empty()) {
        req = context_json(com);
        add_shape(req, search_shape);
        add_options(req, search_flags);
        if (n_gpu) req["n_gpu"] = *n_gpu;
      }
      doc = sl::run_search(req);
    } else if (*sw) {
      if (com.request_file.empty()) {
        req = context_json(com);
        add_options(req, sweep_flags);
        if (!points.empty()) {
          req["T_flop"] = points;
        } else {
          req["T_min_flop"] = t_min;
          req["T_max_flop"] = t_max;
          req["points_per_decade"] = per_decade;
        }
      }
      doc = sl::run_sweep(req, sl::preset_dir_from_env(), 0);
    } else if (*serve) {
      sl::api::ServerOptions o;
      o.cors_origin = cors;
      sl::api::Service service(o);
      httplib::Server srv;
      service.mount(srv);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!srv.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return kInternal;
      }
      return kOk;
    }
    emit(com.format, doc);
    return kOk;
  } catch (const sl::Infeasible& e) {
    std::cerr << "infeasible [" << e.invariant() << "]: " << e.what() << "\n";
    return kInfeasible;
  } catch (const sl::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const sl::InvariantViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
