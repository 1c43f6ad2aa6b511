#pragma once

#include <map>

#include "cp/diffusion.hpp"
#include "cp/model.hpp"
#include "cp/rng.hpp"
#include "cp/tensor.hpp"

namespace cp {

/// Dummy score assigned to concepts outside the evaluated subset.
constexpr double kDummyScore = 1e-10;

/// Ordered concept ids evaluated for DC scores; always contains {0, n}.
struct ConceptSubset {
  std::vector<int> ids;
  int k = 0;
};

/// Contains {c_0, c_n} plus min(k-2, n-1) previous concepts drawn without
/// replacement.
ConceptSubset sample_subset(int n, int k, Rng& rng);

struct DcsResult {
  std::map<int, Tensor> preds;          // per sampled concept, differentiable
  std::map<int, Tensor> denoise_losses; // scalar ‖eps − pred‖² per concept
  Tensor subset_scores;                 // softmax over −losses/τ, subset order
  std::map<int, double> all_scores;     // all concepts 0..n, dummy elsewhere
  ConceptSubset subset;
};

/// Denoising and DC scores over a concept subset (single noisy input).
DcsResult get_dcs(int n, const Tensor& eps, const DenoiserModel& model, int t,
                  const Tensor& x_t, const ConceptSubset& subset, double tau);

/// Hook for observing the (t, eps) pair drawn per classify trial.
using TrialObserver = std::function<void(int t, const std::vector<double>& eps)>;

/// Argmin of per-concept denoising losses averaged over `trials` draws;
/// within a trial every concept sees the same (t, eps).
int classify(const DenoiserModel& model, const Tensor& x0, int num_concepts,
             int trials, const NoiseSchedule& schedule, Rng& rng,
             const TrialObserver& observer = {});

}  // namespace cp
