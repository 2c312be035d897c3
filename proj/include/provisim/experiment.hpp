#pragma once

// Experiment commands behind the `provisim` CLI: run, compare, sweep and
// replay. Each returns a process exit code (0 ok, 1 runtime failure,
// 2 usage/parse failure) and reports problems on the supplied stream.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "provisim/scenario.hpp"
#include "provisim/simcluster.hpp"
#include "provisim/svg.hpp"
#include "provisim/trace_csv.hpp"

namespace provisim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct CommonOptions {
  std::vector<std::string> sets;  // key=value overrides, applied in order
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

inline void apply_common(Scenario& sc, const CommonOptions& opts) {
  for (const auto& s : opts.sets) apply_override(sc, s);
  if (opts.seed) sc.workload.seed = *opts.seed;
  if (opts.out) sc.out_dir = *opts.out;
}

inline Scenario prepare_scenario(const std::string& path, const CommonOptions& opts) {
  Scenario sc = load_scenario(path);
  apply_common(sc, opts);
  try {
    validate(sc);
  } catch (const UsageError& e) {
    throw ParseError(path, 0, e.what());
  }
  return sc;
}

// Number of worker threads; PROVISIM_THREADS caps it.
inline std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PROVISIM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs) on a small worker pool; the first exception
// is rethrown after all workers finish.
inline void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = worker_count(jobs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

inline const char* kMetricsHeader = "CR,avg_vm1_cpu,avg_vm2_cpu,AmRT,SLOO";

inline std::string metrics_row(const RunMetrics& m) {
  return std::to_string(m.completed) + "," + fmt_num(m.avg_cpu_vm1) + "," + fmt_num(m.avg_cpu_vm2) + "," +
         fmt_num(m.amrt) + "," + fmt_num(m.sloo);
}

inline std::string trace_csv(const RunResult& r) {
  std::ostringstream os;
  write_trace(os, r.records);
  return os.str();
}

inline std::string timeline_svg(const RunResult& r, const std::string& title) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::vector<svg::Panel> panels;
  const std::size_t n = r.records.empty() ? 0 : r.records.front().usage.size();
  for (std::size_t c = 0; c < n; ++c) {
    svg::Series usage{"usage", {}, {}, kColors[0]};
    svg::Series alloc{"allocation", {}, {}, kColors[1]};
    svg::Series demand{"demand", {}, {}, kColors[2]};
    for (const auto& rec : r.records) {
      const double k = static_cast<double>(rec.k);
      usage.xs.push_back(k), usage.ys.push_back(rec.usage[c]);
      alloc.xs.push_back(k), alloc.ys.push_back(rec.allocation[c]);
      demand.xs.push_back(k), demand.ys.push_back(rec.demand[c]);
    }
    panels.push_back({"component " + std::to_string(c + 1) + (c == 0 ? " (web)" : c == 1 ? " (db)" : ""),
                      "CPU %", {usage, alloc, demand}});
  }
  svg::Series mrt{"mRT", {}, {}, kColors[3]};
  for (const auto& rec : r.records) mrt.xs.push_back(static_cast<double>(rec.k)), mrt.ys.push_back(rec.mrt);
  panels.push_back({"mean response time", "seconds", {mrt}});
  return svg::line_panels(title, "sample", panels);
}

inline std::string controller_label(const ControllerSpec& c) {
  return std::string(to_string(c.filter)) + "-" + to_string(c.topology);
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

inline int cmd_run(const std::string& scenario_path, const CommonOptions& opts, std::ostream& log,
                   std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = prepare_scenario(scenario_path, opts);
    const RunResult r = run_scenario(sc.workload, sc.model, sc.controller, sc.steps);
    const std::filesystem::path dir(sc.out_dir);
    write_file_atomic(dir / "trace.csv", trace_csv(r));
    write_file_atomic(dir / "metrics.csv", std::string(kMetricsHeader) + "\n" + metrics_row(r.metrics) + "\n");
    write_file_atomic(dir / "timeline.svg", timeline_svg(r, controller_label(sc.controller)));
    log << controller_label(sc.controller) << ": " << kMetricsHeader << " = " << metrics_row(r.metrics)
        << "\nwrote " << (dir / "trace.csv").string() << ", metrics.csv, timeline.svg\n";
    return kExitOk;
  });
}

struct ComparisonRow {
  ControllerSpec controller;
  RunMetrics metrics;
  std::uint64_t rejections = 0;
  std::uint64_t underflows = 0;
};

inline std::vector<ComparisonRow> run_comparison(const Scenario& sc, const std::vector<FilterKind>& filters,
                                                 const std::vector<Topology>& topologies) {
  std::vector<ComparisonRow> rows;
  for (auto t : topologies)
    for (auto f : filters) {
      ComparisonRow row;
      row.controller = sc.controller;
      row.controller.filter = f;
      row.controller.topology = t;
      rows.push_back(row);
    }
  parallel_for(rows.size(), [&](std::size_t i) {
    const RunResult r = run_scenario(sc.workload, sc.model, rows[i].controller, sc.steps);
    rows[i].metrics = r.metrics;
    rows[i].rejections = r.feasibility_rejections;
    rows[i].underflows = r.kernel_underflows;
  });
  return rows;
}

inline int cmd_compare(const std::string& scenario_path, const CommonOptions& opts,
                       const std::vector<std::string>& filter_names, const std::vector<std::string>& topology_names,
                       std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = prepare_scenario(scenario_path, opts);
    std::vector<FilterKind> filters;
    std::vector<Topology> topologies;
    for (const auto& f : filter_names) filters.push_back(parse_filter_kind(f));
    for (const auto& t : topology_names) topologies.push_back(parse_topology(t));
    if (filters.empty() || topologies.empty()) throw UsageError("compare: empty filter or topology list");
    const auto rows = run_comparison(sc, filters, topologies);

    std::ostringstream csv;
    csv << "controller,filter,topology,workload_seed," << kMetricsHeader
        << ",feasibility_rejections,kernel_underflows\n";
    svg::BarPanel amrt{"AmRT (s)", {}, {}}, sloo{"SLO obedience", {}, {}};
    for (const auto& row : rows) {
      const std::string label = controller_label(row.controller);
      csv << label << ',' << to_string(row.controller.filter) << ',' << to_string(row.controller.topology) << ','
          << sc.workload.seed << ',' << metrics_row(row.metrics) << ',' << row.rejections << ','
          << row.underflows << '\n';
      amrt.labels.push_back(label), amrt.values.push_back(row.metrics.amrt);
      sloo.labels.push_back(label), sloo.values.push_back(row.metrics.sloo);
      log << label << ": " << metrics_row(row.metrics) << '\n';
    }
    const std::filesystem::path dir(sc.out_dir);
    write_file_atomic(dir / "comparison.csv", csv.str());
    write_file_atomic(dir / "comparison.svg", svg::bar_panels("controller comparison", {amrt, sloo}));
    return kExitOk;
  });
}

inline void set_sweep_param(Scenario& sc, const std::string& param, double value) {
  if (param == "c") {
    set_key(sc, "controller.c", fmt_num(value));
  } else if (param == "theta") {
    sc.controller.theta = value;
  } else if (param == "sigma") {
    sc.controller.sigma = value;
  } else if (param == "T") {
    if (value < 1 || value != std::floor(value)) throw UsageError("sweep: T values must be positive integers");
    sc.controller.window = static_cast<std::size_t>(value);
  } else {
    throw UsageError("sweep: unknown parameter '" + param + "' (c|theta|sigma|T)");
  }
}

struct SweepPoint {
  double value = 0.0;
  RunResult result;
};

inline std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& param, const Vec& values) {
  if (values.empty()) throw UsageError("sweep: empty value list");
  std::vector<Scenario> scenarios;
  for (double v : values) {
    Scenario sc = base;
    set_sweep_param(sc, param, v);
    validate(sc);
    scenarios.push_back(std::move(sc));
  }
  std::vector<SweepPoint> points(values.size());
  parallel_for(values.size(), [&](std::size_t i) {
    const auto& sc = scenarios[i];
    points[i].value = values[i];
    points[i].result = run_scenario(sc.workload, sc.model, sc.controller, sc.steps);
  });
  return points;
}

inline int cmd_sweep(const std::string& scenario_path, const CommonOptions& opts, const std::string& param,
                     const Vec& values, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = prepare_scenario(scenario_path, opts);
    const auto points = run_sweep(sc, param, values);
    std::ostringstream csv;
    csv << "value,AmRT,SLOO,CR\n";
    svg::Series line{"AmRT", {}, {}, "#1f77b4"};
    for (const auto& p : points) {
      const auto& m = p.result.metrics;
      csv << fmt_num(p.value) << ',' << fmt_num(m.amrt) << ',' << fmt_num(m.sloo) << ',' << m.completed << '\n';
      line.xs.push_back(p.value), line.ys.push_back(m.amrt);
      log << param << "=" << fmt_num(p.value) << ": AmRT=" << fmt_num(m.amrt) << " SLOO=" << fmt_num(m.sloo)
          << '\n';
    }
    const std::filesystem::path dir(sc.out_dir);
    write_file_atomic(dir / "sweep.csv", csv.str());
    write_file_atomic(dir / "sweep.svg", svg::line_panels(controller_label(sc.controller) + " sweep of " + param,
                                                          param, {{"AmRT vs " + param, "seconds", {line}}}));
    if (param == "T") {
      // Windowed process-variance estimate of component 1 per window size.
      static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
      svg::Panel var{"process variance estimate, component 1", "pp^2", {}};
      for (std::size_t i = 0; i < points.size(); ++i) {
        svg::Series s{"T=" + fmt_num(points[i].value), {}, {}, kColors[i % 6]};
        for (std::size_t k = 0; k < points[i].result.decisions.size(); ++k) {
          s.xs.push_back(static_cast<double>(k));
          s.ys.push_back(points[i].result.decisions[k].w_used[0]);
        }
        var.series.push_back(std::move(s));
      }
      write_file_atomic(dir / "variance.svg", svg::line_panels("window size study", "sample", {var}));
    }
    return kExitOk;
  });
}

struct ReplayResult {
  std::vector<TraceRow> rows;
  std::vector<Vec> replayed;  // allocation in effect at each sample
  std::size_t components = 0;
};

// Feeds the recorded observations through a fresh control loop. Sample k's
// replayed allocation is the one the loop had granted before observing k.
inline ReplayResult replay_trace(std::vector<TraceRow> rows, const ControllerSpec& spec) {
  ReplayResult out;
  const auto ys = observations_by_sample(rows, out.components);
  if (out.components == 0) throw SchemaError("trace has no data rows");
  ControlLoop loop(spec, out.components);
  for (const auto& y : ys) {
    out.replayed.push_back(loop.current_allocation());
    try {
      loop.control_step(y);
    } catch (const StabilityError&) {
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) {
    return a.k != b.k ? a.k < b.k : a.component < b.component;
  });
  out.rows = std::move(rows);
  return out;
}

inline int cmd_replay(const std::string& trace_path, const std::optional<std::string>& scenario_path,
                      const CommonOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    Scenario sc = scenario_path ? load_scenario(*scenario_path) : Scenario{};
    apply_common(sc, opts);
    try {
      sc.controller.validate();
    } catch (const UsageError& e) {
      throw ParseError("controller", 0, e.what());
    }
    std::ifstream in(trace_path);
    if (!in) throw ParseError(trace_path, 0, "cannot open trace");
    const ReplayResult r = replay_trace(read_trace(in), sc.controller);

    std::ostringstream csv;
    csv << "k,component,observation,allocation,replayed_allocation\n";
    std::size_t sample = 0, mismatches = 0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const auto& row = r.rows[i];
      if (i && row.k != r.rows[i - 1].k) ++sample;
      const double replayed = r.replayed[sample][row.component];
      if (replayed != row.allocation) ++mismatches;
      csv << row.k << ',' << row.component << ',' << fmt_num(row.observation) << ',' << fmt_num(row.allocation)
          << ',' << fmt_num(replayed) << '\n';
    }
    const std::filesystem::path dir(sc.out_dir);
    write_file_atomic(dir / "replay.csv", csv.str());
    log << controller_label(sc.controller) << ": replayed " << r.replayed.size() << " samples, "
        << mismatches << " allocation rows differ from the trace\n";
    return kExitOk;
  });
}

}  // namespace provisim
