#include "cp/metrics.hpp"

#include "cp/regularizers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cp {

const SampleSet& SnapshotStore::cell(int i, int j) const {
  auto it = cells.find({i, j});
  if (it == cells.end()) {
    throw std::runtime_error("SnapshotStore: missing cell X_{" +
                             std::to_string(i) + "," + std::to_string(j) + "}");
  }
  return it->second;
}

const SampleSet& SnapshotStore::target(int j) const {
  auto it = targets.find(j);
  if (it == targets.end()) {
    throw std::runtime_error("SnapshotStore: missing target for concept " +
                             std::to_string(j));
  }
  return it->second;
}

namespace {

struct Moments {
  Eigen::MatrixXd second;  // XᵀX, d×d
  Eigen::VectorXd sum;     // Σ x_i
  double m = 0.0;
};

Moments moments(const SampleSet& X, std::size_t d) {
  Moments mo;
  mo.second = Eigen::MatrixXd::Zero(d, d);
  mo.sum = Eigen::VectorXd::Zero(d);
  mo.m = static_cast<double>(X.size());
  for (const auto& x : X) {
    Eigen::Map<const Eigen::VectorXd> v(x.data(), d);
    mo.second.noalias() += v * v.transpose();
    mo.sum += v;
  }
  return mo;
}

// Σ_{x∈X, y∈Y} (⟨x,y⟩ + 1)² = tr(S_X S_Y) + 2⟨s_X, s_Y⟩ + m·n,
// with S the second-moment matrix and s the coordinate sum.
double kernel_block_sum(const Moments& a, const Moments& b) {
  const double quad = (a.second * b.second).trace();
  return quad + 2.0 * a.sum.dot(b.sum) + a.m * b.m;
}

}  // namespace

double mmd2(const SampleSet& X, const SampleSet& Y) {
  if (X.empty() || Y.empty()) throw std::invalid_argument("mmd2: empty set");
  const std::size_t d = X[0].size();
  for (const auto& v : X)
    if (v.size() != d) throw std::invalid_argument("mmd2: dimension mismatch");
  for (const auto& v : Y)
    if (v.size() != d) throw std::invalid_argument("mmd2: dimension mismatch");
  const Moments mx = moments(X, d), my = moments(Y, d);
  const double xx = kernel_block_sum(mx, mx) / (mx.m * mx.m);
  const double yy = kernel_block_sum(my, my) / (my.m * my.m);
  const double xy = kernel_block_sum(mx, my) / (mx.m * my.m);
  return xx + yy - 2.0 * xy;
}

double mmd2_unbiased(const SampleSet& X, const SampleSet& Y) {
  if (X.size() < 2 || Y.size() < 2) {
    throw std::invalid_argument("mmd2_unbiased: needs |X|,|Y| >= 2");
  }
  const std::size_t d = X[0].size();
  auto kern = [](const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return (dot + 1.0) * (dot + 1.0);
  };
  const double m = static_cast<double>(X.size());
  const double n = static_cast<double>(Y.size());
  const Moments mx = moments(X, d), my = moments(Y, d);
  double diag_x = 0.0, diag_y = 0.0;
  for (const auto& x : X) diag_x += kern(x, x);
  for (const auto& y : Y) diag_y += kern(y, y);
  const double xx = (kernel_block_sum(mx, mx) - diag_x) / (m * (m - 1.0));
  const double yy = (kernel_block_sum(my, my) - diag_y) / (n * (n - 1.0));
  const double xy = kernel_block_sum(mx, my) / (m * n);
  return xx + yy - 2.0 * xy;
}

double a_mmd(const SnapshotStore& store, int N) {
  double acc = 0.0;
  for (int j = 1; j <= N; ++j) acc += mmd2(store.target(j), store.cell(N, j));
  return acc / N;
}

double f_mmd(const SnapshotStore& store, int N) {
  if (N < 2) return 0.0;
  double acc = 0.0;
  for (int j = 1; j < N; ++j) acc += mmd2(store.cell(j, j), store.cell(N, j));
  return acc / (N - 1);
}

double bwt_mmd(const SnapshotStore& store, int N) {
  if (N < 2) return 0.0;
  double acc = 0.0;
  for (int j = 1; j < N; ++j) {
    acc += mmd2(store.target(j), store.cell(j, j)) -
           mmd2(store.target(j), store.cell(N, j));
  }
  return acc / (N - 1);
}

double dc_accuracy(const DenoiserModel& model,
                   const std::map<int, SampleSet>& datasets, int trials,
                   const NoiseSchedule& schedule, Rng& rng) {
  const int n = model.num_seen_concepts();
  std::size_t total = 0, correct = 0;
  for (const auto& [concept_id, points] : datasets) {
    for (const auto& pt : points) {
      const Tensor x0({pt.size()}, std::vector<double>(pt));
      if (classify(model, x0, n, trials, schedule, rng) == concept_id) {
        ++correct;
      }
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

std::vector<std::vector<double>> fim_matrix(DenoiserModel& model,
                                            const std::string& layer_name,
                                            const SampleSet& dataset,
                                            bool with_dc, int iterations,
                                            int k, double tau,
                                            const NoiseSchedule& schedule,
                                            Rng& rng) {
  Tensor layer;
  for (auto& p : model.parameters()) {
    if (p.name == layer_name) layer = p.tensor;
  }
  if (!layer.defined()) {
    throw std::runtime_error("fim_eigen_topk: unknown layer " + layer_name);
  }
  const std::size_t dim = layer.size();
  if (dim > 256) {
    throw std::runtime_error("fim_eigen_topk: layer too large for dense FIM");
  }
  const bool was_trainable = layer.requires_grad();
  layer.set_requires_grad(true);
  const int n = model.num_seen_concepts();
  const double delta = with_dc ? 0.5 : 0.0;
  Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(dim, dim);
  for (int it = 0; it < iterations; ++it) {
    const auto& pt = dataset[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(dataset.size()) - 1))];
    const Tensor x0({pt.size()}, std::vector<double>(pt));
    const ConceptSubset subset = sample_subset(n, k, rng);
    model.zero_grads();
    backward(ewc_loss(model, x0, n, subset, schedule, delta, tau, rng));
    Eigen::Map<const Eigen::VectorXd> g(layer.grad().data(), dim);
    fim.noalias() += g * g.transpose();
  }
  fim /= static_cast<double>(iterations);
  model.zero_grads();
  layer.set_requires_grad(was_trainable);
  std::vector<std::vector<double>> out(dim, std::vector<double>(dim));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) out[i][j] = fim(i, j);
  return out;
}

std::vector<double> topk_eigenvalues(
    const std::vector<std::vector<double>>& sym, int topk) {
  const std::size_t dim = sym.size();
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (sym[i].size() != dim) {
      throw std::invalid_argument("topk_eigenvalues: not square");
    }
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = sym[i][j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  std::vector<double> eig(solver.eigenvalues().data(),
                          solver.eigenvalues().data() + dim);
  std::sort(eig.rbegin(), eig.rend());
  if (topk >= 0 && topk < static_cast<int>(eig.size())) eig.resize(topk);
  return eig;
}

std::vector<double> fim_eigen_topk(DenoiserModel& model,
                                   const std::string& layer_name,
                                   const SampleSet& dataset, bool with_dc,
                                   int topk, int iterations, int k,
                                   double tau, const NoiseSchedule& schedule,
                                   Rng& rng) {
  return topk_eigenvalues(fim_matrix(model, layer_name, dataset, with_dc,
                                     iterations, k, tau, schedule, rng),
                          topk);
}

}  // namespace cp
