#pragma once

#include <string>

#include "cp/metrics.hpp"
#include "cp/model.hpp"
#include "cp/regularizers.hpp"

namespace cp::io {

/// Checkpoint container: flat {parameter name -> shape + values} JSON with
/// a versioned header. Doubles are emitted with enough digits to
/// round-trip bit-exactly.
void save_checkpoint(DenoiserModel& model, const std::string& path);
void load_checkpoint(DenoiserModel& model, const std::string& path);

void save_fisher(const FisherState& state, const std::string& path);
FisherState load_fisher(const std::string& path);

/// Snapshot CSV: task_id, concept_id, x0..xd-1, snapshot_task
/// (snapshot_task = -1 marks a target set).
void save_snapshots(const SnapshotStore& store, const std::string& path);
SnapshotStore load_snapshots(const std::string& path);

std::string format_double(double v);  // shortest bit-exact decimal

}  // namespace cp::io
