#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "drive/nn/ndarray.hpp"

namespace drive::nn {

// One vertex of the reverse-mode graph. `backward` reads this node's gradient
// and accumulates into each parent that requires a gradient.
template <typename T>
struct Node {
  NdArray<T> value;
  NdArray<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  NdArray<T>& ensure_grad() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = NdArray<T>(value.shape());
    return grad;
  }
};

// Shared handle to a graph node. Copies alias the same node, so a parameter
// held by a layer and captured in a graph is the same object.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(NdArray<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const NdArray<T>& value() const { return node_->value; }
  NdArray<T>& value_mut() { return node_->value; }
  const NdArray<T>& grad() const { return node_->ensure_grad(); }
  NdArray<T>& grad_mut() { return node_->ensure_grad(); }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() {
    if (node_->grad.size()) node_->grad.fill(T{0});
  }
  T item() const {
    DRIVE_REQUIRE(node_->value.size() == 1, "Var::item on non-scalar " + shape_str(shape()));
    return node_->value[0];
  }
  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};
template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
void zero_grad(const ParamList<T>& params) {
  for (auto p : params) p.var.zero_grad();
}
template <typename T>
void set_requires_grad(const ParamList<T>& params, bool on) {
  for (auto p : params) p.var.set_requires_grad(on);
}
template <typename T>
T squared_norm(const ParamList<T>& params) {
  T s{0};
  for (const auto& p : params) s += p.var.value().matrix().squaredNorm();
  return s;
}

// Thread-local switch; while a guard is alive ops record no parents.
bool grad_enabled() noexcept;
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse pass from a scalar root. Gradients accumulate into leaves.
template <typename T>
void backward(const Var<T>& root);

template <typename T>
Var<T> constant(NdArray<T> value) {
  return Var<T>(std::move(value), false);
}
template <typename T>
Var<T> parameter(NdArray<T> value) {
  return Var<T>(std::move(value), true);
}
template <typename T>
Var<T> detach(const Var<T>& x) {
  return Var<T>(x.value(), false);
}

// x·Wᵀ + b. x is [n×in] or [in]; W is [out×in]; b is [out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul_const(const Var<T>& a, const NdArray<T>& c);
template <typename T>
Var<T> scale(const Var<T>& a, T s);
template <typename T>
Var<T> add_scalar(const Var<T>& a, T s);

template <typename T>
Var<T> relu(const Var<T>& a);
template <typename T>
Var<T> tanh(const Var<T>& a);
template <typename T>
Var<T> sigmoid(const Var<T>& a);
template <typename T>
Var<T> exp(const Var<T>& a);
template <typename T>
Var<T> log(const Var<T>& a);
template <typename T>
Var<T> square(const Var<T>& a);
template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi);
template <typename T>
Var<T> minimum(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sum(const Var<T>& a);
template <typename T>
Var<T> mean(const Var<T>& a);
// [n×m] → [n×1]
template <typename T>
Var<T> row_sum(const Var<T>& a);
// Euclidean norm of each row, [n×m] → [n×1]; zero subgradient at the origin.
template <typename T>
Var<T> row_norm(const Var<T>& a);
template <typename T>
Var<T> sum_squares(const Var<T>& a);

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t start, std::size_t count);
template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);

// Cross-correlation. x [Ci×H×W], kernels [Co×Ci×kh×kw], bias [Co].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernels, const Var<T>& bias, std::size_t stride,
              std::size_t padding);
// [C×H×W] → [C]
template <typename T>
Var<T> global_max_pool(const Var<T>& v);
template <typename T>
Var<T> global_avg_pool(const Var<T>& v);
// (a − min a) / (max a − min a) over the whole array; zeros if a is constant.
template <typename T>
Var<T> minmax_normalize(const Var<T>& a);

}  // namespace drive::nn
