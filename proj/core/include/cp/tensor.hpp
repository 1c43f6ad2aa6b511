#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cp {

namespace detail {

struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // lazily sized to values.size()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this->grad into the parents' grads.
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Dense real tensor with reverse-mode autodiff. Copies share storage
/// (shallow handle); use detached()/deep copies where isolation matters.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values,
         bool requires_grad = false);

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values() { return node_->values; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  const std::vector<double>& grad() const;
  void zero_grad();

  /// Value-copy with no graph history and requires_grad cleared.
  Tensor detached() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// [m×k]·[k×n] -> [m×n]; also accepts b as a vector [k] -> [m].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor concat(const Tensor& a, const Tensor& b);  // 1-D
Tensor row(const Tensor& matrix, std::size_t r);  // grad flows into that row
Tensor sum(const Tensor& a);                      // scalar

Tensor softmax(const Tensor& x, double temperature);
// -sum(target_i * log(max(pred_i, 1e-12))), scalar.
Tensor cross_entropy(const Tensor& target, const Tensor& pred);
// Sum-of-squares convention: sum((a_i - b_i)^2), scalar.
Tensor mse(const Tensor& a, const Tensor& b);

constexpr double kLogClamp = 1e-12;

/// Reverse pass from a scalar loss. Parameter (leaf) grads accumulate
/// across calls; interior grads are reset per call.
void backward(const Tensor& loss);

/// Trainable tensor with a stable dotted-path name.
struct Parameter {
  std::string name;
  Tensor tensor;
};

}  // namespace cp
