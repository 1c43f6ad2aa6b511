#pragma once

#include "cp/dcscores.hpp"
#include "cp/diffusion.hpp"
#include "cp/model.hpp"

namespace cp {

struct DscConfig {
  double gamma = 0.1;        // DC-distillation weight
  double lambda = 1.5;       // noise-matching weight
  double teacher_tau = 0.05;
  double student_tau = 1.0;
  int iterations = 100;      // default: training_iters / 5
  int batch_size = 8;
  double learning_rate = 1e-2;
  bool include_denoise = true;  // false = DC-only distillation (diagnostic)
};

/// Random draws made by one dsc_iteration (exposed for diagnostics).
struct DscDraws {
  int t = 0;        // noise-matching timestep
  int t_prime = 0;  // DC-branch timestep
  int j = 0;        // second teacher's task id, uniform on [1, n-1]
};

/// One DSC minibatch loss for a single x0. `teachers[i]` is the frozen
/// model after task i+1; the last entry is teacher-1 (task n), the second
/// teacher is drawn uniformly from the earlier entries.
Tensor dsc_iteration(const DenoiserModel& student,
                     const std::vector<DenoiserModel>& teachers,
                     const Tensor& x0, int n, const NoiseSchedule& schedule,
                     const DscConfig& cfg, Rng& rng,
                     DscDraws* draws = nullptr);

/// Runs cfg.iterations of double distillation and returns the consolidated
/// student (initialized from the task-n teacher; only its adapter trains).
DenoiserModel run_dsc(const DenoiserModel& student_source,
                      const std::vector<DenoiserModel>& teachers,
                      const SampleSet& dataset_n, const DscConfig& cfg,
                      const NoiseSchedule& schedule, Rng& rng);

}  // namespace cp
