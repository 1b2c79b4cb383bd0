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
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "scalelimits/error.hpp"
#include "scalelimits/report.hpp"
#include "scalelimits/requests.hpp"

namespace scalelimits::api {

struct ServerOptions {
  std::string cors_origin = "*";  // empty disables CORS headers
  std::string preset_dir = preset_dir_from_env();
  std::size_t max_finished_jobs = 64;
};

struct Status {
  int http = 200;
  nlohmann::json body;
};

// Maps library exceptions onto the error envelope.
inline Status error_status(std::exception_ptr p) {
  try {
    std::rethrow_exception(p);
  } catch (const nlohmann::json::parse_error& e) {
    return {400, error_json("bad_request", e.what(), "body")};
  } catch (const ParseError& e) {
    return {400, error_json("bad_request", e.what(), e.field())};
  } catch (const InvariantViolation& e) {
    return {400, error_json("bad_request", e.what(), e.field())};
  } catch (const Infeasible& e) {
    return {422, error_json("infeasible", e.what(), "", e.invariant())};
  } catch (const nlohmann::json::exception& e) {
    return {400, error_json("bad_request", e.what())};
  } catch (const std::exception& e) {
    return {500, error_json("internal", e.what())};
  } catch (...) {
    return {500, error_json("internal", "unknown error")};
  }
}

template <class F>
Status guarded(F&& f) {
  try {
    return {200, f()};
  } catch (...) {
    return error_status(std::current_exception());
  }
}

// ---------------------------------------------------------------------------
// Job table for sweeps too large for the synchronous endpoint.

enum class JobState { Queued, Running, Done, Failed };

inline std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

struct Job {
  std::string id;
  JobState state = JobState::Queued;
  std::size_t total = 0;
  std::vector<bool> finished;
  std::vector<nlohmann::json> records;
  nlohmann::json result;
  nlohmann::json error;
  std::atomic<bool> cancel{false};
};

class JobTable {
 public:
  JobTable(std::string preset_dir, std::size_t max_finished)
      : preset_dir_(std::move(preset_dir)), max_finished_(max_finished) {}

  ~JobTable() {
    std::vector<std::thread> ws;
    {
      std::lock_guard<std::mutex> g(mu_);
      for (auto& [id, j] : jobs_) j->cancel = true;
      ws.swap(workers_);
    }
    for (auto& w : ws)
      if (w.joinable()) w.join();
  }

  // Validates the request before queueing so bad input fails fast with 400.
  nlohmann::json submit(const nlohmann::json& req) {
    RunContext ctx = parse_context(req, preset_dir_);
    auto pts = parse_sweep_points(req);
    auto job = std::make_shared<Job>();
    job->total = pts.size();
    job->finished.assign(pts.size(), false);
    job->records.assign(pts.size(), nullptr);
    {
      std::lock_guard<std::mutex> g(mu_);
      job->id = "job-" + std::to_string(++counter_);
      jobs_[job->id] = job;
      order_.push_back(job->id);
      workers_.emplace_back([this, job, req, H = ctx.cluster.levels()] { run(job, req, H); });
    }
    return snapshot(job->id);
  }

  nlohmann::json snapshot(const std::string& id) {
    std::lock_guard<std::mutex> g(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFound();
    const Job& j = *it->second;
    std::size_t done = 0;
    nlohmann::json recs = nlohmann::json::array();
    for (std::size_t k = 0; k < j.total; ++k)
      if (j.finished[k]) {
        ++done;
        recs.push_back(j.records[k]);
      }
    nlohmann::json body = {{"job_id", j.id},
                           {"state", std::string(to_string(j.state))},
                           {"completed", done},
                           {"total", j.total},
                           {"records", recs}};
    if (j.state == JobState::Done) body["result"] = j.result;
    if (j.state == JobState::Failed) body["error"] = j.error;
    return envelope("job", body);
  }

  nlohmann::json cancel(const std::string& id) {
    {
      std::lock_guard<std::mutex> g(mu_);
      auto it = jobs_.find(id);
      if (it == jobs_.end()) throw NotFound();
      Job& j = *it->second;
      j.cancel = true;
      if (j.state == JobState::Queued || j.state == JobState::Running) {
        j.state = JobState::Failed;
        j.error = error_json("cancelled", "job cancelled")["error"];
      }
    }
    return snapshot(id);
  }

  struct NotFound : Error {
    NotFound() : Error("unknown job id") {}
  };

 private:
  void run(const std::shared_ptr<Job>& job, const nlohmann::json& req, std::size_t H) {
    {
      std::lock_guard<std::mutex> g(mu_);
      if (job->state != JobState::Queued) return;
      job->state = JobState::Running;
    }
    try {
      SweepRun r = execute_sweep(
          req, preset_dir_, 0,
          [&](std::size_t k, const SweepRecord& rec) {
            std::lock_guard<std::mutex> g(mu_);
            job->records[k] = to_json(rec, H);
            job->finished[k] = true;
          },
          &job->cancel);
      nlohmann::json doc = sweep_document(r);
      std::lock_guard<std::mutex> g(mu_);
      if (job->state == JobState::Running) {
        job->state = JobState::Done;
        job->result = doc;
      }
    } catch (...) {
      Status s = error_status(std::current_exception());
      std::lock_guard<std::mutex> g(mu_);
      if (job->state == JobState::Running) {
        job->state = JobState::Failed;
        job->error = s.body["error"];
      }
    }
    std::lock_guard<std::mutex> g(mu_);
    evict();
  }

  // Drops the oldest finished jobs beyond the cap. Caller holds mu_.
  void evict() {
    std::size_t finished = 0;
    for (const auto& id : order_) {
      auto s = jobs_.at(id)->state;
      if (s == JobState::Done || s == JobState::Failed) ++finished;
    }
    for (auto it = order_.begin(); it != order_.end() && finished > max_finished_;) {
      auto s = jobs_.at(*it)->state;
      if (s == JobState::Done || s == JobState::Failed) {
        jobs_.erase(*it);
        it = order_.erase(it);
        --finished;
      } else {
        ++it;
      }
    }
  }

  std::string preset_dir_;
  std::size_t max_finished_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::string> order_;
  std::vector<std::thread> workers_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Routes.

class Service {
 public:
  explicit Service(ServerOptions o = {}) : opt_(std::move(o)), jobs_(opt_.preset_dir, opt_.max_finished_jobs) {}

  void mount(httplib::Server& s) {
    if (!opt_.cors_origin.empty()) {
      s.set_default_headers({{"Access-Control-Allow-Origin", opt_.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
      s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
    s.Get("/api/presets", [this](const httplib::Request&, httplib::Response& res) {
      send(res, guarded([&] { return run_presets(opt_.preset_dir); }));
    });
    post(s, "/api/closed-form", [this](const nlohmann::json& j) { return run_closed_form(j, opt_.preset_dir); });
    post(s, "/api/simulate", [this](const nlohmann::json& j) { return run_simulate(j, opt_.preset_dir); });
    post(s, "/api/search", [this](const nlohmann::json& j) { return run_search(j, opt_.preset_dir); });
    post(s, "/api/sweep", [this](const nlohmann::json& j) { return run_sweep(j, opt_.preset_dir); });
    post(s, "/api/jobs", [this](const nlohmann::json& j) { return jobs_.submit(j); });
    s.Get(R"(/api/jobs/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, job_call([&] { return jobs_.snapshot(req.matches[1]); }));
    });
    s.Delete(R"(/api/jobs/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, job_call([&] { return jobs_.cancel(req.matches[1]); }));
    });
    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty())
        res.set_content(error_json("not_found", "no such endpoint").dump(), "application/json");
    });
  }

  JobTable& jobs() { return jobs_; }

 private:
  template <class F>
  static Status job_call(F&& f) {
    try {
      return {200, f()};
    } catch (const JobTable::NotFound& e) {
      return {404, error_json("not_found", e.what())};
    } catch (...) {
      return error_status(std::current_exception());
    }
  }

  template <class F>
  static void post(httplib::Server& s, const std::string& path, F handler) {
    s.Post(path, [handler](const httplib::Request& req, httplib::Response& res) {
      send(res, guarded([&] { return handler(nlohmann::json::parse(req.body)); }));
    });
  }

  static void send(httplib::Response& res, const Status& st) {
    res.status = st.http;
    res.set_content(st.body.dump(), "application/json");
  }

  ServerOptions opt_;
  JobTable jobs_;
};

}  // namespace scalelimits::api
