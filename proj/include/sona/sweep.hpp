// Copyright 2026 The sonalab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "sona/run.hpp"

namespace sona {

struct SweepCell {
  std::string method;
  int class_count = 0;
  uint64_t seed = 0;

  bool ok = false;
  bool resumed = false;
  std::string error;
  double w2 = 0.0;
  double cw2_mean = 0.0;
  bool is_failure = false;
};

struct SweepAggregate {
  std::string method;
  int class_count = 0;
  int seeds = 0;
  double w2_mean = 0.0, w2_std = 0.0;
  double cw2_mean = 0.0, cw2_std = 0.0;
  int nf = 0;  // count of failing seeds
};

struct SweepSummary {
  std::vector<SweepCell> cells;
  std::vector<SweepAggregate> aggregates;
};

struct SweepOptions {
  std::vector<std::string> methods;
  std::vector<int> class_counts;
  std::vector<uint64_t> seeds;
  int jobs = 0;  // 0: hardware concurrency
};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double* mean, double* sd) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= xs.size();
  double s2 = 0.0;
  for (double x : xs) s2 += (x - m) * (x - m);
  *mean = m;
  *sd = xs.size() > 1 ? std::sqrt(s2 / (xs.size() - 1)) : 0.0;
}

}  // namespace detail

/// Runs the grid methods x class counts x seeds with a bounded worker pool.
/// Cells whose final_report.json already exists are loaded, not retrained,
/// so an interrupted sweep resumes where it stopped. Per-cell failures are
/// recorded and the sweep continues.
inline SweepSummary run_sweep(const RunConfig& base, const SweepOptions& opt,
                              const std::filesystem::path& out_root, std::ostream* log) {
  SweepSummary summary;
  for (const auto& method : opt.methods)
    for (int n : opt.class_counts)
      for (uint64_t seed : opt.seeds) {
        SweepCell cell;
        cell.method = method;
        cell.class_count = n;
        cell.seed = seed;
        summary.cells.push_back(cell);
      }

  std::atomic<size_t> next{0};
  std::mutex log_mutex;
  const size_t total = summary.cells.size();
  const int jobs = opt.jobs > 0
                       ? opt.jobs
                       : std::max(1u, std::thread::hardware_concurrency());

  const auto worker = [&]() {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= total) return;
      SweepCell& cell = summary.cells[idx];
      RunConfig rc = base;
      rc.method = cell.method;
      rc.mog.class_count = cell.class_count;
      try {
        rc.validate();
        const auto dir = out_root / run_dir_name(cell.method, cell.class_count, cell.seed);
        const auto report_path = dir / "final_report.json";
        MetricReport report;
        if (std::filesystem::exists(report_path)) {
          report = metric_report_from_json(load_json_file(report_path));
          cell.resumed = true;
        } else {
          report = run_one(rc, cell.seed, out_root).report;
        }
        cell.w2 = report.w2;
        cell.cw2_mean = report.cw2_mean;
        cell.is_failure = report.is_failure;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (log != nullptr) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << "[" << (idx + 1) << "/" << total << "] " << cell.method
             << " N=" << cell.class_count << " seed=" << cell.seed;
        if (cell.ok)
          *log << (cell.resumed ? " (resumed)" : "") << " w2=" << cell.w2
               << " cw2=" << cell.cw2_mean << (cell.is_failure ? " FAIL" : "") << "\n";
        else
          *log << " ERROR: " << cell.error << "\n";
        log->flush();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (const auto& method : opt.methods) {
    for (int n : opt.class_counts) {
      std::vector<double> w2s, cw2s;
      int nf = 0;
      for (const auto& cell : summary.cells) {
        if (!cell.ok || cell.method != method || cell.class_count != n) continue;
        w2s.push_back(cell.w2);
        cw2s.push_back(cell.cw2_mean);
        nf += cell.is_failure ? 1 : 0;
      }
      if (w2s.empty()) continue;
      SweepAggregate agg;
      agg.method = method;
      agg.class_count = n;
      agg.seeds = static_cast<int>(w2s.size());
      agg.nf = nf;
      detail::mean_std(w2s, &agg.w2_mean, &agg.w2_std);
      detail::mean_std(cw2s, &agg.cw2_mean, &agg.cw2_std);
      summary.aggregates.push_back(agg);
    }
  }
  return summary;
}

inline std::string summary_csv(const SweepSummary& s) {
  std::string out = "method,N,seed,w2,cw2_mean,is_failure\n";
  char buf[160];
  for (const auto& c : s.cells) {
    if (!c.ok) continue;
    std::snprintf(buf, sizeof buf, "%s,%d,%llu,%.17g,%.17g,%d\n", c.method.c_str(),
                  c.class_count, static_cast<unsigned long long>(c.seed), c.w2, c.cw2_mean,
                  c.is_failure ? 1 : 0);
    out += buf;
  }
  return out;
}

inline std::string aggregate_csv(const SweepSummary& s) {
  std::string out = "method,N,seeds,w2_mean,w2_std,cw2_mean,cw2_std,nf\n";
  char buf[200];
  for (const auto& a : s.aggregates) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%d\n", a.method.c_str(),
                  a.class_count, a.seeds, a.w2_mean, a.w2_std, a.cw2_mean, a.cw2_std, a.nf);
    out += buf;
  }
  return out;
}

/// Fixed-width aggregate table for terminal output.
inline std::string aggregate_table(const SweepSummary& s) {
  std::string out = "method        N  seeds  mean W2    mean cW2   NF\n";
  char buf[160];
  for (const auto& a : s.aggregates) {
    std::snprintf(buf, sizeof buf, "%-12s %3d  %5d  %9.5f  %9.5f  %2d\n", a.method.c_str(),
                  a.class_count, a.seeds, a.w2_mean, a.cw2_mean, a.nf);
    out += buf;
  }
  return out;
}

}  // namespace sona
