#include "cp/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace cp {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1 || beta_start <= 0.0 || beta_end < beta_start || beta_end >= 1.0) {
    throw std::domain_error("make_schedule: invalid range");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  s.posterior_var.resize(T);
  double abar = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    s.beta[i] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    const double abar_prev = abar;
    abar *= s.alpha[i];
    s.alpha_bar[i] = abar;
    s.posterior_var[i] = s.beta[i] * (1.0 - abar_prev) / (1.0 - abar);
  }
  return s;
}

Tensor forward_noise(const Tensor& x0, int t, const Tensor& eps,
                     const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T) {
    throw std::domain_error("forward_noise: t out of range");
  }
  if (x0.shape() != eps.shape()) {
    throw std::invalid_argument("forward_noise: eps shape mismatch");
  }
  const double abar = schedule.alpha_bar[t - 1];
  return add(scale(x0, std::sqrt(abar)), scale(eps, std::sqrt(1.0 - abar)));
}

Tensor denoise_loss(const DenoiserModel& model, const Tensor& x0,
                    int concept_id, const NoiseSchedule& schedule, Rng& rng) {
  const int t = rng.uniform_int(1, schedule.T);
  std::vector<double> ev(x0.size());
  for (double& e : ev) e = rng.normal();
  const Tensor eps({x0.size()}, std::move(ev));
  const Tensor x_t = forward_noise(x0, t, eps, schedule);
  return mse(eps, model.forward(x_t, concept_id, t));
}

SampleSet sample(const DenoiserModel& model, int concept_id, int n,
                 const NoiseSchedule& schedule, std::uint64_t base_seed,
                 int stride) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  if (stride < 1) throw std::invalid_argument("sample: stride must be >= 1");
  const std::size_t d = model.dims().data_dim;
  SampleSet out;
  out.reserve(static_cast<std::size_t>(n));
  for (int traj = 0; traj < n; ++traj) {
    Rng rng(base_seed ^ static_cast<std::uint64_t>(traj));
    std::vector<double> x(d);
    for (double& v : x) v = rng.normal();
    int t = schedule.T;
    while (t > 0) {
      const int t_next = t - stride > 0 ? t - stride : 0;
      const Tensor eps_hat =
          model.forward(Tensor({d}, x), concept_id, t);
      const double abar_t = schedule.abar(t);
      const double abar_next = schedule.abar(t_next);
      std::vector<double> x0_hat(d);
      for (std::size_t i = 0; i < d; ++i) {
        x0_hat[i] =
            (x[i] - std::sqrt(1.0 - abar_t) * eps_hat.values()[i]) /
            std::sqrt(abar_t);
      }
      if (t_next == 0) {
        x = x0_hat;
      } else {
        // DDPM-style posterior over the (possibly strided) sub-sequence.
        const double var = (1.0 - abar_next) / (1.0 - abar_t) *
                           (1.0 - abar_t / abar_next);
        const double dir = std::sqrt(std::max(0.0, 1.0 - abar_next - var));
        for (std::size_t i = 0; i < d; ++i) {
          x[i] = std::sqrt(abar_next) * x0_hat[i] +
                 dir * eps_hat.values()[i] + std::sqrt(var) * rng.normal();
        }
      }
      t = t_next;
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace cp
