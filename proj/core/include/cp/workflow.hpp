#pragma once

#include <string>
#include <vector>

#include "cp/config.hpp"
#include "cp/dsc.hpp"
#include "cp/metrics.hpp"
#include "cp/regularizers.hpp"

namespace cp {

enum class Method {
  TiEmbeddingOnly,
  KvFullSequential,
  LoraSequential,
  LoraMerge,
  Clora,
  Ewc,
  EwcDc,
  Dsc,
  DscEwc,
  DscEwcDc,
};

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);
bool is_ewc_variant(Method m);
bool is_dsc_variant(Method m);
/// δ used in L_ewc during Fisher accumulation: 0.5 for *-dc, else 0.
double method_delta(Method m, const RunConfig& cfg);

struct EventRow {
  int task = 0;
  std::string phase;  // train | dsc | fim-update | snapshot
  int iteration = 0;
  std::vector<std::pair<std::string, double>> scalars;
};

struct EventLog {
  std::vector<EventRow> rows;
  void add(int task, const std::string& phase, int iteration,
           std::vector<std::pair<std::string, double>> scalars = {}) {
    rows.push_back({task, phase, iteration, std::move(scalars)});
  }
};

void save_event_log(const EventLog& log, const std::string& path);
EventLog load_event_log(const std::string& path);

struct RunResult {
  SnapshotStore store;
  EventLog log;
  MetricsReport report;
  DenoiserModel model;                    // final
  std::vector<DenoiserModel> task_models; // frozen snapshot after each task
  FisherState fisher;
  CloraState clora;
  std::map<int, SampleSet> task_datasets; // training data per concept
  NoiseSchedule schedule;
};

/// Full continual-personalization loop: pretrain on the prior concept,
/// then per task train -> (DSC + replace) -> Fisher update -> snapshots.
RunResult run_sequence(const RunConfig& cfg, std::uint64_t seed);

/// Verifies pairwise separability (mmd2 >= 0.05 between 400-point target
/// sets) of the configured concepts; throws if violated.
void check_sequence_separability(const RunConfig& cfg);

/// Model with all per-task adapters fused at equal weights.
DenoiserModel make_baseline_merge(const DenoiserModel& current,
                                  const std::vector<LoraAdapter>& adapters);

}  // namespace cp
