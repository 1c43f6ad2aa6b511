#include "cp/regularizers.hpp"

#include <cmath>
#include <stdexcept>

namespace cp {

Tensor ewc_loss(const DenoiserModel& model, const Tensor& x0, int n,
                const ConceptSubset& subset, const NoiseSchedule& schedule,
                double delta, double tau, Rng& rng) {
  if (delta < 0.0) throw std::domain_error("ewc_loss: delta must be >= 0");
  const int t = rng.uniform_int(1, schedule.T);
  std::vector<double> ev(x0.size());
  for (double& e : ev) e = rng.normal();
  const Tensor eps({x0.size()}, std::move(ev));
  const Tensor x_t = forward_noise(x0, t, eps, schedule);

  DcsResult dcs = get_dcs(n, eps, model, t, x_t, subset, tau);
  Tensor loss = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < subset.ids.size(); ++i) {
    const int c = subset.ids[i];
    loss = add(loss, dcs.denoise_losses.at(c));
    if (delta > 0.0) {
      std::vector<double> onehot(subset.ids.size(), 0.0);
      onehot[i] = 1.0;
      const Tensor target({subset.ids.size()}, std::move(onehot));
      const Tensor h = cross_entropy(target, dcs.subset_scores);
      loss = add(loss, scale(h, c == n ? delta : -delta));
    }
  }
  return loss;
}

std::set<std::string> fisher_covered_names(DenoiserModel& model) {
  std::set<std::string> names;
  for (auto& p : model.parameters()) {
    if (p.name == "embedding.table" || p.name.rfind("adapter.", 0) == 0) {
      names.insert(p.name);
    }
  }
  return names;
}

void accumulate_fisher(FisherState& state, DenoiserModel& model,
                       const SampleSet& dataset, int iterations,
                       int batch_size, int k, double delta, double tau,
                       const NoiseSchedule& schedule, Rng& rng) {
  if (dataset.empty()) {
    throw std::runtime_error("accumulate_fisher: empty dataset");
  }
  const int n = model.num_seen_concepts();
  const auto covered = fisher_covered_names(model);
  std::map<std::string, std::vector<double>> f_new;
  for (auto& p : model.parameters()) {
    if (covered.count(p.name)) f_new[p.name].assign(p.tensor.size(), 0.0);
  }
  for (int it = 0; it < iterations; ++it) {
    const ConceptSubset subset = sample_subset(n, k, rng);
    Tensor loss = Tensor::scalar(0.0);
    for (int b = 0; b < batch_size; ++b) {
      const auto& pt =
          dataset[static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<int>(dataset.size()) - 1))];
      const Tensor x0({pt.size()}, std::vector<double>(pt));
      loss = add(loss, ewc_loss(model, x0, n, subset, schedule, delta, tau,
                                rng));
    }
    loss = scale(loss, 1.0 / batch_size);
    model.zero_grads();
    backward(loss);
    for (auto& p : model.parameters()) {
      auto it_f = f_new.find(p.name);
      if (it_f == f_new.end()) continue;
      const auto& g = p.tensor.grad();
      for (std::size_t i = 0; i < g.size(); ++i) it_f->second[i] += g[i] * g[i];
    }
  }
  model.zero_grads();
  for (auto& [name, acc] : f_new) {
    for (double& v : acc) v /= iterations;
    auto& f = state.fisher[name];
    if (f.size() != acc.size()) f.assign(acc.size(), 0.0);
    for (std::size_t i = 0; i < acc.size(); ++i)
      f[i] = state.decay * f[i] + acc[i];
  }
  state.anchor.clear();
  for (auto& p : model.parameters()) {
    if (covered.count(p.name)) state.anchor[p.name] = p.tensor.values();
  }
}

Tensor fisher_penalty(const FisherState& state, DenoiserModel& model) {
  Tensor total = Tensor::scalar(0.0);
  for (auto& p : model.parameters()) {
    auto it_f = state.fisher.find(p.name);
    if (it_f == state.fisher.end()) continue;
    auto it_a = state.anchor.find(p.name);
    if (it_a == state.anchor.end() ||
        it_a->second.size() != p.tensor.size()) {
      throw std::runtime_error("fisher_penalty: missing anchor for " + p.name);
    }
    const Tensor f(p.tensor.shape(), std::vector<double>(it_f->second));
    const Tensor anchor(p.tensor.shape(), std::vector<double>(it_a->second));
    const Tensor diff = sub(p.tensor, anchor);
    total = add(total, sum(mul(f, mul(diff, diff))));
  }
  return scale(total, 0.5 * state.rho);
}

namespace {

// Plain-value product of one adapter side, used for the frozen past sum.
std::vector<double> product_values(const Tensor& A, const Tensor& B) {
  const std::size_t d1 = A.dim(0), r = A.dim(1), d2 = B.dim(1);
  std::vector<double> out(d1 * d2, 0.0);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t p = 0; p < r; ++p) {
      const double a = A.values()[i * r + p];
      for (std::size_t j = 0; j < d2; ++j)
        out[i * d2 + j] += a * B.values()[p * d2 + j];
    }
  return out;
}

Tensor forget_term(const std::vector<LoraAdapter>& frozen,
                   const Tensor& A_cur, const Tensor& B_cur,
                   bool value_side) {
  const std::size_t d1 = A_cur.dim(0), d2 = B_cur.dim(1);
  std::vector<double> past(d1 * d2, 0.0);
  for (const auto& a : frozen) {
    const auto pv = product_values(value_side ? a.A_v : a.A_k,
                                   value_side ? a.B_v : a.B_k);
    for (std::size_t i = 0; i < pv.size(); ++i) past[i] += pv[i];
  }
  for (double& v : past) v = std::abs(v);
  const Tensor mask({d1, d2}, std::move(past));
  const Tensor prod = matmul(A_cur, B_cur);
  const Tensor masked = mul(mask, prod);
  return sum(mul(masked, masked));
}

}  // namespace

Tensor clora_forget_loss(const CloraState& state, const LoraAdapter& current) {
  if (state.frozen.empty()) return Tensor::scalar(0.0);
  return add(forget_term(state.frozen, current.A_k, current.B_k, false),
             forget_term(state.frozen, current.A_v, current.B_v, true));
}

double adapter_product_fro_norm(const LoraAdapter& a) {
  double s = 0.0;
  for (double v : product_values(a.A_k, a.B_k)) s += v * v;
  for (double v : product_values(a.A_v, a.B_v)) s += v * v;
  return std::sqrt(s);
}

void log_degeneracy(CloraState& state, int task, int iteration,
                    const std::vector<LoraAdapter>& adapters,
                    double l_forget) {
  CloraTrace tr;
  tr.task = task;
  tr.iteration = iteration;
  for (const auto& a : adapters) {
    tr.adapter_norms.push_back(adapter_product_fro_norm(a));
  }
  tr.l_forget = l_forget;
  state.logs.push_back(std::move(tr));
}

}  // namespace cp
