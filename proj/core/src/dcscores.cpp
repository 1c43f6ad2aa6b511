#include "cp/dcscores.hpp"

#include <algorithm>
#include <stdexcept>

namespace cp {

ConceptSubset sample_subset(int n, int k, Rng& rng) {
  if (k < 2) throw std::domain_error("sample_subset: k must be >= 2");
  ConceptSubset s;
  s.k = k;
  s.ids = {0, n};
  // Previous concepts {1..n-1}, drawn without replacement.
  std::vector<int> pool;
  for (int i = 1; i < n; ++i) pool.push_back(i);
  const int extra = std::min<int>(k - 2, static_cast<int>(pool.size()));
  for (int j = 0; j < extra; ++j) {
    const int idx = rng.uniform_int(0, static_cast<int>(pool.size()) - 1);
    s.ids.push_back(pool[idx]);
    pool.erase(pool.begin() + idx);
  }
  std::sort(s.ids.begin(), s.ids.end());
  s.ids.erase(std::unique(s.ids.begin(), s.ids.end()), s.ids.end());
  return s;
}

DcsResult get_dcs(int n, const Tensor& eps, const DenoiserModel& model, int t,
                  const Tensor& x_t, const ConceptSubset& subset, double tau) {
  if (subset.ids.empty()) throw std::runtime_error("get_dcs: empty subset");
  if (tau <= 0.0) throw std::domain_error("get_dcs: tau must be positive");
  DcsResult res;
  res.subset = subset;
  Tensor neg_losses;
  for (int c : subset.ids) {
    Tensor pred = model.forward(x_t, c, t);
    Tensor loss = mse(eps, pred);
    res.preds.emplace(c, pred);
    res.denoise_losses.emplace(c, loss);
    const Tensor neg = scale(loss, -1.0);
    neg_losses = neg_losses.defined() ? concat(neg_losses, neg) : neg;
  }
  res.subset_scores = softmax(neg_losses, tau);
  for (int c = 0; c <= n; ++c) res.all_scores[c] = kDummyScore;
  for (std::size_t i = 0; i < subset.ids.size(); ++i) {
    res.all_scores[subset.ids[i]] = res.subset_scores.values()[i];
  }
  return res;
}

int classify(const DenoiserModel& model, const Tensor& x0, int num_concepts,
             int trials, const NoiseSchedule& schedule, Rng& rng,
             const TrialObserver& observer) {
  if (trials < 1) throw std::invalid_argument("classify: trials must be >= 1");
  std::vector<double> avg(static_cast<std::size_t>(num_concepts) + 1, 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    const int t = rng.uniform_int(1, schedule.T);
    std::vector<double> ev(x0.size());
    for (double& e : ev) e = rng.normal();
    if (observer) observer(t, ev);
    const Tensor eps({x0.size()}, std::vector<double>(ev));
    const Tensor x_t = forward_noise(x0, t, eps, schedule);
    for (int c = 0; c <= num_concepts; ++c) {
      avg[c] += mse(eps, model.forward(x_t, c, t)).item();
    }
  }
  return static_cast<int>(
      std::min_element(avg.begin(), avg.end()) - avg.begin());
}

}  // namespace cp
