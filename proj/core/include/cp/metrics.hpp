#pragma once

#include <map>
#include <string>
#include <utility>

#include "cp/data.hpp"
#include "cp/dcscores.hpp"
#include "cp/model.hpp"

namespace cp {

/// Archive of generated sample sets X_{i,j} (model after task i, concept j)
/// plus the target sets X_{D,j}.
struct SnapshotStore {
  std::map<std::pair<int, int>, SampleSet> cells;
  std::map<int, SampleSet> targets;

  const SampleSet& cell(int i, int j) const;
  const SampleSet& target(int j) const;
};

/// Biased MMD² with the degree-2 polynomial kernel k(x,y) = (⟨x,y⟩ + 1)².
/// Computed through second-moment matrices, not a pairwise double loop.
double mmd2(const SampleSet& X, const SampleSet& Y);

/// Unbiased variant (requires |X|,|Y| >= 2); can be negative.
double mmd2_unbiased(const SampleSet& X, const SampleSet& Y);

/// (1/N)·Σ_j MMD²(X_{D,j}, X_{N,j})
double a_mmd(const SnapshotStore& store, int N);

/// (1/(N−1))·Σ_{j<N} MMD²(X_{j,j}, X_{N,j}); 0 when N < 2.
double f_mmd(const SnapshotStore& store, int N);

/// (1/(N−1))·Σ_{j<N} [MMD²(X_{D,j}, X_{j,j}) − MMD²(X_{D,j}, X_{N,j})];
/// 0 when N < 2. Larger is better.
double bwt_mmd(const SnapshotStore& store, int N);

/// Fraction of points classified to their own concept.
double dc_accuracy(const DenoiserModel& model,
                   const std::map<int, SampleSet>& datasets, int trials,
                   const NoiseSchedule& schedule, Rng& rng);

/// Dense empirical FIM mean_j g_j·g_jᵀ for one layer's flattened L_ewc
/// gradient, with the DC term enabled (δ=0.5) or disabled (δ=0). Layer
/// must have <= 256 params.
std::vector<std::vector<double>> fim_matrix(DenoiserModel& model,
                                            const std::string& layer_name,
                                            const SampleSet& dataset,
                                            bool with_dc, int iterations,
                                            int k, double tau,
                                            const NoiseSchedule& schedule,
                                            Rng& rng);

/// Top-k eigenvalues (descending) of a symmetric matrix.
std::vector<double> topk_eigenvalues(
    const std::vector<std::vector<double>>& sym, int topk);

/// topk_eigenvalues(fim_matrix(...), topk).
std::vector<double> fim_eigen_topk(DenoiserModel& model,
                                   const std::string& layer_name,
                                   const SampleSet& dataset, bool with_dc,
                                   int topk, int iterations, int k,
                                   double tau, const NoiseSchedule& schedule,
                                   Rng& rng);

struct MetricsRecord {
  int boundary_task = 0;
  std::string metric;
  double value = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRecord> records;
  std::map<std::string, double> wallclock_seconds;  // per phase
  void add(int task, const std::string& metric, double value) {
    records.push_back({task, metric, value});
  }
};

}  // namespace cp
