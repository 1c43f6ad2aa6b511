#pragma once

#include <map>
#include <set>
#include <string>

#include "cp/dcscores.hpp"
#include "cp/diffusion.hpp"
#include "cp/model.hpp"

namespace cp {

/// Task-shared diagonal Fisher plus the anchor θ* (end-of-previous-task
/// parameters) for the EWC quadratic penalty. Covers the adapter and
/// embedding parameters; the frozen trunk is excluded.
struct FisherState {
  std::map<std::string, std::vector<double>> fisher;
  std::map<std::string, std::vector<double>> anchor;
  double decay = 1.0;  // online EWC: F ← decay·F_old + F_new
  double rho = 1e6;
  bool empty() const { return fisher.empty(); }
};

/// One-iteration consolidation loss: per sampled concept, the denoising
/// loss plus δ·(+H for the current concept, −H for the others) against
/// its one-hot target, using DC scores over the subset.
Tensor ewc_loss(const DenoiserModel& model, const Tensor& x0, int n,
                const ConceptSubset& subset, const NoiseSchedule& schedule,
                double delta, double tau, Rng& rng);

/// Names of the parameters the Fisher covers: every adapter tensor plus
/// the concept-embedding table.
std::set<std::string> fisher_covered_names(DenoiserModel& model);

/// F_new = mean over `iterations` minibatches of (∇L_ewc)², then
/// F ← decay·F_old + F_new and anchor ← current parameters.
void accumulate_fisher(FisherState& state, DenoiserModel& model,
                       const SampleSet& dataset, int iterations,
                       int batch_size, int k, double delta, double tau,
                       const NoiseSchedule& schedule, Rng& rng);

/// (ρ/2)·Σ F·(θ − θ*)², differentiable wrt θ.
Tensor fisher_penalty(const FisherState& state, DenoiserModel& model);

struct CloraTrace {
  int task = 0;
  int iteration = 0;
  std::vector<double> adapter_norms;  // ‖A_iB_i‖_F per attached adapter
  double l_forget = 0.0;
};

/// Frozen per-task adapters and the degeneracy trace for the C-LoRA
/// baseline.
struct CloraState {
  std::vector<LoraAdapter> frozen;
  double coefficient = 1e4;
  std::vector<CloraTrace> logs;
};

/// ‖ |Σ_{n'<n} A_{n'}B_{n'}| ⊙ A_nB_n ‖² summed over the K and V targets.
/// Zero by contract when no previous adapter exists.
Tensor clora_forget_loss(const CloraState& state, const LoraAdapter& current);

void log_degeneracy(CloraState& state, int task, int iteration,
                    const std::vector<LoraAdapter>& adapters,
                    double l_forget);

double adapter_product_fro_norm(const LoraAdapter& a);

}  // namespace cp
