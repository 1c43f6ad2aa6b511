#include "cp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cp {

namespace {

using detail::Node;

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(op) + ": non-finite value produced");
    }
  }
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::shared_ptr<Node> make_node(std::vector<std::size_t> shape,
                                std::vector<double> values) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  return n;
}

// Wires parents/backprop only when some input carries gradient history,
// so frozen-model inference builds no graph.
bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->requires_grad() || !t->node()->parents.empty()) return true;
  }
  return false;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values,
               bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor: shape does not match value count");
  }
  check_finite(values, "Tensor");
  node_ = make_node(std::move(shape), std::move(values));
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> v(numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor({1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::runtime_error("Tensor::item on non-scalar");
  return node_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->values.size(), 0.0);
}

Tensor Tensor::detached() const {
  auto n = make_node(node_->shape, node_->values);
  return Tensor(n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool vec = b.shape().size() == 1;
  if (a.shape().size() != 2 || (!vec && b.shape().size() != 2)) {
    throw std::invalid_argument("matmul: expects [m×k] and [k×n] or [k]");
  }
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t n = vec ? 1 : b.dim(1);
  if ((vec ? b.dim(0) : b.dim(0)) != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree");
  }
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  check_finite(out, "matmul");
  auto node = make_node(vec ? std::vector<std::size_t>{m}
                            : std::vector<std::size_t>{m, n},
                        std::move(out));
  if (any_grad({&a, &b})) {
    auto an = a.node(), bn = b.node();
    node->parents = {an, bn};
    node->backprop = [an, bn, m, k, n](Node& self) {
      an->ensure_grad();
      bn->ensure_grad();
      const auto& g = self.grad;
      // dL/da = g · bᵀ
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += g[i * n + j] * bn->values[p * n + j];
          an->grad[i * k + p] += acc;
        }
      // dL/db = aᵀ · g
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i)
            acc += an->values[i * k + p] * g[i * n + j];
          bn->grad[p * n + j] += acc;
        }
    };
  }
  return Tensor(node);
}

namespace {

Tensor elementwise(const Tensor& a, const Tensor& b, const char* name,
                   double (*fwd)(double, double),
                   void (*bwd)(double ga, double av, double bv, double& da,
                               double& db)) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(name) + ": shape mismatch");
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = fwd(a.values()[i], b.values()[i]);
  check_finite(out, name);
  auto node = make_node(a.shape(), std::move(out));
  if (any_grad({&a, &b})) {
    auto an = a.node(), bn = b.node();
    node->parents = {an, bn};
    node->backprop = [an, bn, bwd](Node& self) {
      an->ensure_grad();
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i) {
        double da = 0.0, db = 0.0;
        bwd(self.grad[i], an->values[i], bn->values[i], da, db);
        an->grad[i] += da;
        bn->grad[i] += db;
      }
    };
  }
  return Tensor(node);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double av, double bv, double& da, double& db) {
        da = g * bv;
        db = g * av;
      });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * s;
  check_finite(out, "scale");
  auto node = make_node(a.shape(), std::move(out));
  if (any_grad({&a})) {
    auto an = a.node();
    node->parents = {an};
    node->backprop = [an, s](Node& self) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i)
        an->grad[i] += self.grad[i] * s;
    };
  }
  return Tensor(node);
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  auto node = make_node(a.shape(), std::move(out));
  if (any_grad({&a})) {
    auto an = a.node();
    node->parents = {an};
    node->backprop = [an](Node& self) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.values.size(); ++i) {
        const double y = self.values[i];
        an->grad[i] += self.grad[i] * (1.0 - y * y);
      }
    };
  }
  return Tensor(node);
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1) {
    throw std::invalid_argument("concat: expects 1-D tensors");
  }
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  auto node = make_node({a.size() + b.size()}, std::move(out));
  if (any_grad({&a, &b})) {
    auto an = a.node(), bn = b.node();
    const std::size_t na = a.size();
    node->parents = {an, bn};
    node->backprop = [an, bn, na](Node& self) {
      an->ensure_grad();
      bn->ensure_grad();
      for (std::size_t i = 0; i < na; ++i) an->grad[i] += self.grad[i];
      for (std::size_t i = na; i < self.values.size(); ++i)
        bn->grad[i - na] += self.grad[i];
    };
  }
  return Tensor(node);
}

Tensor row(const Tensor& matrix, std::size_t r) {
  if (matrix.shape().size() != 2) {
    throw std::invalid_argument("row: expects a matrix");
  }
  if (r >= matrix.dim(0)) throw std::out_of_range("row: index out of range");
  const std::size_t cols = matrix.dim(1);
  std::vector<double> out(matrix.values().begin() + r * cols,
                          matrix.values().begin() + (r + 1) * cols);
  auto node = make_node({cols}, std::move(out));
  if (any_grad({&matrix})) {
    auto mn = matrix.node();
    node->parents = {mn};
    node->backprop = [mn, r, cols](Node& self) {
      mn->ensure_grad();
      for (std::size_t i = 0; i < cols; ++i)
        mn->grad[r * cols + i] += self.grad[i];
    };
  }
  return Tensor(node);
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto node = make_node({1}, {s});
  if (any_grad({&a})) {
    auto an = a.node();
    node->parents = {an};
    node->backprop = [an](Node& self) {
      an->ensure_grad();
      for (double& g : an->grad) g += self.grad[0];
    };
  }
  return Tensor(node);
}

Tensor softmax(const Tensor& x, double temperature) {
  if (temperature <= 0.0) {
    throw std::domain_error("softmax: temperature must be positive");
  }
  const std::size_t n = x.size();
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  std::vector<double> out(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp((x.values()[i] - mx) / temperature);
    z += out[i];
  }
  for (double& v : out) v /= z;
  auto node = make_node(x.shape(), std::move(out));
  if (any_grad({&x})) {
    auto xn = x.node();
    node->parents = {xn};
    node->backprop = [xn, temperature](Node& self) {
      xn->ensure_grad();
      double dot = 0.0;
      for (std::size_t i = 0; i < self.values.size(); ++i)
        dot += self.grad[i] * self.values[i];
      for (std::size_t i = 0; i < self.values.size(); ++i)
        xn->grad[i] += self.values[i] * (self.grad[i] - dot) / temperature;
    };
  }
  return Tensor(node);
}

Tensor cross_entropy(const Tensor& target, const Tensor& pred) {
  if (target.shape() != pred.shape()) {
    throw std::invalid_argument("cross_entropy: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s -= target.values()[i] * std::log(std::max(pred.values()[i], kLogClamp));
  }
  auto node = make_node({1}, {s});
  if (any_grad({&target, &pred})) {
    auto tn = target.node(), pn = pred.node();
    node->parents = {tn, pn};
    node->backprop = [tn, pn](Node& self) {
      tn->ensure_grad();
      pn->ensure_grad();
      const double g = self.grad[0];
      for (std::size_t i = 0; i < pn->values.size(); ++i) {
        const double p = pn->values[i];
        tn->grad[i] += -g * std::log(std::max(p, kLogClamp));
        if (p > kLogClamp) pn->grad[i] += -g * tn->values[i] / p;
      }
    };
  }
  return Tensor(node);
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("mse: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  auto node = make_node({1}, {s});
  if (any_grad({&a, &b})) {
    auto an = a.node(), bn = b.node();
    node->parents = {an, bn};
    node->backprop = [an, bn](Node& self) {
      an->ensure_grad();
      bn->ensure_grad();
      const double g = self.grad[0];
      for (std::size_t i = 0; i < an->values.size(); ++i) {
        const double d = 2.0 * (an->values[i] - bn->values[i]) * g;
        an->grad[i] += d;
        bn->grad[i] -= d;
      }
    };
  }
  return Tensor(node);
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw std::runtime_error("backward: loss must be a scalar");
  }
  // Iterative post-order topological sort.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Interior grads are scratch space; leaf (parameter) grads accumulate.
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad.assign(n->values.size(), 0.0);
  }
  Node* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

}  // namespace cp
