#pragma once

#include <string>
#include <vector>

#include "cp/metrics.hpp"
#include "cp/workflow.hpp"

namespace cp::report {

/// One completed (method, seed) run directory as loaded from disk.
struct RunData {
  std::string path;
  std::string method;
  std::uint64_t seed = 0;
  int num_tasks = 0;
  SnapshotStore store;
  std::vector<CloraTrace> clora_trace;  // empty unless method == clora
};

/// Loads resolved_config.json + snapshots.csv (+ clora_trace.csv if
/// present); throws on a missing or malformed run.
RunData load_run_dir(const std::string& dir);

struct CompareSummary {
  std::string table_path;
  std::vector<std::string> plot_paths;
  std::vector<std::string> skipped;  // unloadable run dirs
};

/// Recomputes A/F/BwT-MMD from the raw snapshots of every run, groups by
/// method, and writes table.csv (seed-mean and std per metric) plus SVG
/// line plots: per-boundary A_MMD per method, and the C-LoRA degeneracy
/// traces when present.
CompareSummary compare_runs(const std::vector<std::string>& run_dirs,
                            const std::string& out_dir);

void save_metrics_csv(const MetricsReport& report, const std::string& method,
                      std::uint64_t seed, const std::string& path);
void save_metrics_json(const MetricsReport& report, const std::string& method,
                       std::uint64_t seed, const std::string& path);
MetricsReport load_metrics_csv(const std::string& path);

void save_clora_trace(const std::vector<CloraTrace>& trace,
                      const std::string& path);
std::vector<CloraTrace> load_clora_trace(const std::string& path);

/// Minimal line-plot writer: one polyline per named series.
struct Series {
  std::string label;
  std::vector<double> x, y;
};
void write_svg_lines(const std::vector<Series>& series,
                     const std::string& title, const std::string& path);

}  // namespace cp::report
