#pragma once

#include "cp/data.hpp"
#include "cp/model.hpp"
#include "cp/rng.hpp"
#include "cp/tensor.hpp"

namespace cp {

/// β/α/ᾱ tables (1-indexed through t-1 offsets) plus the fixed posterior
/// variance β̃_t used for reverse steps.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;           // [T]
  std::vector<double> alpha;          // [T], α_t = 1 − β_t
  std::vector<double> alpha_bar;      // [T], ᾱ_t = Π α_i
  std::vector<double> posterior_var;  // [T], β̃_t = β_t(1−ᾱ_{t−1})/(1−ᾱ_t)

  double abar(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
};

NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

/// √ᾱ_t·x0 + √(1−ᾱ_t)·eps
Tensor forward_noise(const Tensor& x0, int t, const Tensor& eps,
                     const NoiseSchedule& schedule);

/// Samples t ~ U[1,T], ε ~ N(0,I); returns ‖ε − ε_θ(x_t, c, t)‖²,
/// differentiable wrt model parameters.
Tensor denoise_loss(const DenoiserModel& model, const Tensor& x0,
                    int concept_id, const NoiseSchedule& schedule, Rng& rng);

/// Ancestral sampling of n trajectories (x̂_0 prediction form; stride
/// sub-samples the step sequence). Trajectory i uses seed base_seed ^ i.
SampleSet sample(const DenoiserModel& model, int concept_id, int n,
                 const NoiseSchedule& schedule, std::uint64_t base_seed,
                 int stride = 1);

}  // namespace cp
