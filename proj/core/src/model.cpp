#include "cp/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cp {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double sigma,
                     Rng& rng, bool requires_grad) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = sigma * rng.normal();
  return Tensor({rows, cols}, std::move(v), requires_grad);
}

}  // namespace

LoraAdapter LoraAdapter::init(int task_id, int rank, std::size_t d1,
                              std::size_t d2, Rng& rng, double sigma) {
  LoraAdapter a;
  a.task_id = task_id;
  a.rank = rank;
  const std::size_t r = static_cast<std::size_t>(rank);
  // Both factors start small-random (not the common B=0 convention): a
  // zero product makes the C-LoRA forget loss start at exactly 0, which
  // hides the early-training suppression dynamics this lab studies.
  a.A_k = random_matrix(d1, r, sigma, rng, true);
  a.B_k = random_matrix(r, d2, sigma, rng, true);
  a.A_v = random_matrix(d1, r, sigma, rng, true);
  a.B_v = random_matrix(r, d2, sigma, rng, true);
  return a;
}

void LoraAdapter::set_trainable(bool trainable) {
  A_k.set_requires_grad(trainable);
  B_k.set_requires_grad(trainable);
  A_v.set_requires_grad(trainable);
  B_v.set_requires_grad(trainable);
}

LoraAdapter LoraAdapter::detached() const {
  LoraAdapter a;
  a.task_id = task_id;
  a.rank = rank;
  a.A_k = A_k.detached();
  a.B_k = B_k.detached();
  a.A_v = A_v.detached();
  a.B_v = B_v.detached();
  return a;
}

LoraAdapter merge_adapters(const std::vector<LoraAdapter>& adapters,
                           const std::vector<double>& weights) {
  if (adapters.empty() || adapters.size() != weights.size()) {
    throw std::invalid_argument("merge_adapters: adapter/weight mismatch");
  }
  const std::size_t d1 = adapters[0].A_k.dim(0);
  const std::size_t d2 = adapters[0].B_k.dim(1);
  std::size_t total_rank = 0;
  for (const auto& a : adapters) {
    if (a.A_k.dim(0) != d1 || a.B_k.dim(1) != d2) {
      throw std::invalid_argument("merge_adapters: mismatched targets");
    }
    total_rank += static_cast<std::size_t>(a.rank);
  }
  auto cat = [&](bool value_side) -> std::pair<Tensor, Tensor> {
    std::vector<double> A(d1 * total_rank, 0.0), B(total_rank * d2, 0.0);
    std::size_t col = 0;
    for (std::size_t ai = 0; ai < adapters.size(); ++ai) {
      const auto& a = adapters[ai];
      const Tensor& Ai = value_side ? a.A_v : a.A_k;
      const Tensor& Bi = value_side ? a.B_v : a.B_k;
      const std::size_t r = static_cast<std::size_t>(a.rank);
      for (std::size_t i = 0; i < d1; ++i)
        for (std::size_t j = 0; j < r; ++j)
          A[i * total_rank + col + j] = weights[ai] * Ai.values()[i * r + j];
      for (std::size_t j = 0; j < r; ++j)
        for (std::size_t p = 0; p < d2; ++p)
          B[(col + j) * d2 + p] = Bi.values()[j * d2 + p];
      col += r;
    }
    return {Tensor({d1, total_rank}, std::move(A)),
            Tensor({total_rank, d2}, std::move(B))};
  };
  LoraAdapter merged;
  merged.task_id = adapters.back().task_id;
  merged.rank = static_cast<int>(total_rank);
  std::tie(merged.A_k, merged.B_k) = cat(false);
  std::tie(merged.A_v, merged.B_v) = cat(true);
  return merged;
}

DenoiserModel::DenoiserModel(Dims dims, int max_concepts, Rng& rng)
    : dims_(dims) {
  const std::size_t rows = static_cast<std::size_t>(max_concepts) + 1;
  embedding_.table =
      random_matrix(rows, dims.embed_dim, 0.1, rng, true);
  embedding_.frozen.assign(rows, false);

  auto dense = [&](std::size_t out, std::size_t in) {
    // Xavier-ish scale keeps tanh activations in range.
    const double sigma = 1.0 / std::sqrt(static_cast<double>(in));
    Dense d;
    d.W = random_matrix(out, in, sigma, rng, true);
    d.b = Tensor::zeros({out}, true);
    return d;
  };
  trunk_.push_back(dense(dims.hidden, dims.data_dim + dims.time_dim));
  trunk_.push_back(dense(dims.hidden, dims.hidden));
  trunk_.push_back(dense(dims.hidden, dims.hidden));
  kv_k_ = dense(dims.hidden, dims.embed_dim);
  kv_v_ = dense(dims.hidden, dims.embed_dim);
  head_ = dense(dims.data_dim, dims.hidden);
}

Tensor DenoiserModel::time_embedding(int t) const {
  const std::size_t half = dims_.time_dim / 2;
  std::vector<double> v(dims_.time_dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(i) /
                 static_cast<double>(half));
    v[2 * i] = std::sin(t * freq);
    v[2 * i + 1] = std::cos(t * freq);
  }
  return Tensor({dims_.time_dim}, std::move(v));
}

Tensor DenoiserModel::effective_kv(const Dense& base, bool value_side) const {
  Tensor acc = base.W;
  for (const auto& a : adapters_) {
    const Tensor& A = value_side ? a.A_v : a.A_k;
    const Tensor& B = value_side ? a.B_v : a.B_k;
    acc = add(acc, matmul(A, B));
  }
  return acc;
}

Tensor DenoiserModel::forward(const Tensor& x_t, int concept_id, int t) const {
  if (concept_id < 0 || concept_id > num_seen_) {
    throw std::out_of_range("forward: unknown concept_id " +
                            std::to_string(concept_id));
  }
  const Tensor emb =
      row(embedding_.table, static_cast<std::size_t>(concept_id));
  const Tensor cond_k = add(matmul(effective_kv(kv_k_, false), emb), kv_k_.b);
  const Tensor cond_v = add(matmul(effective_kv(kv_v_, true), emb), kv_v_.b);

  Tensor h = concat(x_t, time_embedding(t));
  h = tanh(add(add(matmul(trunk_[0].W, h), trunk_[0].b), cond_k));
  h = tanh(add(add(matmul(trunk_[1].W, h), trunk_[1].b), cond_v));
  h = tanh(add(matmul(trunk_[2].W, h), trunk_[2].b));
  return add(matmul(head_.W, h), head_.b);
}

void DenoiserModel::attach_adapter(const LoraAdapter& adapter,
                                   AttachMode mode) {
  if (adapter.A_k.dim(0) != dims_.hidden ||
      adapter.B_k.dim(1) != dims_.embed_dim) {
    throw std::invalid_argument("attach_adapter: dimension mismatch");
  }
  if (mode == AttachMode::ReplaceEffective) adapters_.clear();
  adapters_.push_back(adapter);
}

DenoiserModel DenoiserModel::clone_frozen() const {
  DenoiserModel m;
  m.dims_ = dims_;
  m.num_seen_ = num_seen_;
  m.embedding_.table = embedding_.table.detached();
  m.embedding_.frozen = embedding_.frozen;
  for (const auto& d : trunk_) m.trunk_.push_back({d.W.detached(), d.b.detached()});
  m.kv_k_ = {kv_k_.W.detached(), kv_k_.b.detached()};
  m.kv_v_ = {kv_v_.W.detached(), kv_v_.b.detached()};
  m.head_ = {head_.W.detached(), head_.b.detached()};
  for (const auto& a : adapters_) m.adapters_.push_back(a.detached());
  return m;
}

std::vector<Parameter> DenoiserModel::parameters() {
  std::vector<Parameter> ps;
  ps.push_back({"embedding.table", embedding_.table});
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    ps.push_back({"trunk." + std::to_string(i) + ".weight", trunk_[i].W});
    ps.push_back({"trunk." + std::to_string(i) + ".bias", trunk_[i].b});
  }
  ps.push_back({"kv.k.weight", kv_k_.W});
  ps.push_back({"kv.k.bias", kv_k_.b});
  ps.push_back({"kv.v.weight", kv_v_.W});
  ps.push_back({"kv.v.bias", kv_v_.b});
  ps.push_back({"head.weight", head_.W});
  ps.push_back({"head.bias", head_.b});
  for (std::size_t i = 0; i < adapters_.size(); ++i) {
    const std::string p = "adapter." + std::to_string(i) + ".";
    ps.push_back({p + "k.A", adapters_[i].A_k});
    ps.push_back({p + "k.B", adapters_[i].B_k});
    ps.push_back({p + "v.A", adapters_[i].A_v});
    ps.push_back({p + "v.B", adapters_[i].B_v});
  }
  return ps;
}

std::vector<Parameter> DenoiserModel::trainable_parameters() {
  std::vector<Parameter> ps;
  for (auto& p : parameters()) {
    if (p.tensor.requires_grad()) ps.push_back(p);
  }
  return ps;
}

void DenoiserModel::set_base_trainable(bool trainable) {
  for (auto& d : trunk_) {
    d.W.set_requires_grad(trainable);
    d.b.set_requires_grad(trainable);
  }
  head_.W.set_requires_grad(trainable);
  head_.b.set_requires_grad(trainable);
  set_kv_trainable(trainable);
}

void DenoiserModel::set_kv_trainable(bool trainable) {
  kv_k_.W.set_requires_grad(trainable);
  kv_k_.b.set_requires_grad(trainable);
  kv_v_.W.set_requires_grad(trainable);
  kv_v_.b.set_requires_grad(trainable);
}

void DenoiserModel::set_embedding_trainable(bool trainable) {
  embedding_.table.set_requires_grad(trainable);
}

void DenoiserModel::sgd_step(double lr) {
  for (auto& p : trainable_parameters()) {
    auto& vals = p.tensor.values();
    const auto& g = p.tensor.grad();
    if (p.name == "embedding.table") {
      const std::size_t cols = p.tensor.dim(1);
      for (std::size_t r = 0; r < embedding_.frozen.size(); ++r) {
        if (embedding_.frozen[r]) continue;
        for (std::size_t c = 0; c < cols; ++c)
          vals[r * cols + c] -= lr * g[r * cols + c];
      }
    } else {
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr * g[i];
    }
  }
}

void DenoiserModel::adam_step(double lr, AdamState& state) {
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (auto& p : trainable_parameters()) {
    auto& vals = p.tensor.values();
    const auto& g = p.tensor.grad();
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.size() != vals.size()) m.assign(vals.size(), 0.0);
    if (v.size() != vals.size()) v.assign(vals.size(), 0.0);
    auto update = [&](std::size_t i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      vals[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    };
    if (p.name == "embedding.table") {
      const std::size_t cols = p.tensor.dim(1);
      for (std::size_t r = 0; r < embedding_.frozen.size(); ++r) {
        if (embedding_.frozen[r]) continue;
        for (std::size_t c = 0; c < cols; ++c) update(r * cols + c);
      }
    } else {
      for (std::size_t i = 0; i < vals.size(); ++i) update(i);
    }
  }
}

void DenoiserModel::zero_grads() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

}  // namespace cp
