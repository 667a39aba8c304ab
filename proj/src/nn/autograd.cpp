#include "drive/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace drive::nn {

namespace {

thread_local bool t_grad_enabled = true;

template <typename T>
using Vec = Eigen::Array<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<Vec<T>> arr(NdArray<T>& a) {
  return Eigen::Map<Vec<T>>(a.data(), static_cast<Eigen::Index>(a.size()));
}
template <typename T>
Eigen::Map<const Vec<T>> arr(const NdArray<T>& a) {
  return Eigen::Map<const Vec<T>>(a.data(), static_cast<Eigen::Index>(a.size()));
}

template <typename T, typename Fn>
Var<T> make_op(NdArray<T> value, std::initializer_list<Var<T>> inputs, const char* name, Fn&& fn) {
  if (finite_checks_enabled()) check_finite(value, name);
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  if (t_grad_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::forward<Fn>(fn);
  }
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> make_op_n(NdArray<T> value, const std::vector<Var<T>>& inputs, const char* name,
                 std::function<void(Node<T>&)> fn) {
  if (finite_checks_enabled()) check_finite(value, name);
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  if (t_grad_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(fn);
  }
  return Var<T>(std::move(node));
}

template <typename T>
bool wants(const std::shared_ptr<Node<T>>& p) {
  return p->requires_grad;
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  DRIVE_REQUIRE(a == b, std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

bool grad_enabled() noexcept { return t_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
void backward(const Var<T>& root) {
  DRIVE_REQUIRE(root.defined() && root.size() == 1, "backward: root must be a scalar");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->grad.size()) n->backward(*n);
  }
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  DRIVE_REQUIRE(wv.rank() == 2, "linear: weight must be rank 2, got " + shape_str(wv.shape()));
  DRIVE_REQUIRE(xv.rank() == 1 || xv.rank() == 2, "linear: input must be rank 1 or 2");
  const std::size_t out = wv.dim(0), in = wv.dim(1);
  DRIVE_REQUIRE(xv.cols() == in, "linear: input width " + std::to_string(xv.cols()) +
                                     " does not match weight " + shape_str(wv.shape()));
  DRIVE_REQUIRE(b.value().size() == out, "linear: bias length mismatch");
  const std::size_t n = xv.rows();
  NdArray<T> y(xv.rank() == 1 ? Shape{out} : Shape{n, out});
  auto ym = y.matrix();
  ym.noalias() = xv.matrix() * wv.matrix().transpose();
  ym.rowwise() += b.value().matrix().row(0);
  return make_op<T>(std::move(y), {x, w, b}, "linear", [](Node<T>& self) {
    const auto g = self.grad.matrix();
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    auto& pb = self.parents[2];
    if (wants(px)) px->ensure_grad().matrix().noalias() += g * pw->value.matrix();
    if (wants(pw)) pw->ensure_grad().matrix().noalias() += g.transpose() * px->value.matrix();
    if (wants(pb)) pb->ensure_grad().matrix().row(0) += g.colwise().sum();
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  DRIVE_REQUIRE(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
                "matmul: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
  NdArray<T> y(Shape{av.dim(0), bv.dim(1)});
  y.matrix().noalias() = av.matrix() * bv.matrix();
  return make_op<T>(std::move(y), {a, b}, "matmul", [](Node<T>& self) {
    const auto g = self.grad.matrix();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants(pa)) pa->ensure_grad().matrix().noalias() += g * pb->value.matrix().transpose();
    if (wants(pb)) pb->ensure_grad().matrix().noalias() += pa->value.matrix().transpose() * g;
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()) + arr(b.value());
  return make_op<T>(std::move(y), {a, b}, "add", [](Node<T>& self) {
    for (auto& p : self.parents)
      if (wants(p)) arr(p->ensure_grad()) += arr(self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()) - arr(b.value());
  return make_op<T>(std::move(y), {a, b}, "sub", [](Node<T>& self) {
    if (wants(self.parents[0])) arr(self.parents[0]->ensure_grad()) += arr(self.grad);
    if (wants(self.parents[1])) arr(self.parents[1]->ensure_grad()) -= arr(self.grad);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()) * arr(b.value());
  return make_op<T>(std::move(y), {a, b}, "mul", [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants(pa)) arr(pa->ensure_grad()) += arr(self.grad) * arr(pb->value);
    if (wants(pb)) arr(pb->ensure_grad()) += arr(self.grad) * arr(pa->value);
  });
}

template <typename T>
Var<T> mul_const(const Var<T>& a, const NdArray<T>& c) {
  require_same_shape(a.shape(), c.shape(), "mul_const");
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()) * arr(c);
  return make_op<T>(std::move(y), {a}, "mul_const", [c](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += arr(self.grad) * arr(c);
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()) * s;
  return make_op<T>(std::move(y), {a}, "scale", [s](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += arr(self.grad) * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()) + s;
  return make_op<T>(std::move(y), {a}, "add_scalar", [](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += arr(self.grad);
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).max(T{0});
  return make_op<T>(std::move(y), {a}, "relu", [](Node<T>& self) {
    auto& p = self.parents[0];
    arr(p->ensure_grad()) += (arr(p->value) > T{0}).select(arr(self.grad), T{0});
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).tanh();
  return make_op<T>(std::move(y), {a}, "tanh", [](Node<T>& self) {
    const auto yv = arr(self.value);
    arr(self.parents[0]->ensure_grad()) += arr(self.grad) * (T{1} - yv * yv);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  NdArray<T> y(a.shape());
  arr(y) = T{1} / (T{1} + (-arr(a.value())).exp());
  return make_op<T>(std::move(y), {a}, "sigmoid", [](Node<T>& self) {
    const auto yv = arr(self.value);
    arr(self.parents[0]->ensure_grad()) += arr(self.grad) * yv * (T{1} - yv);
  });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).exp();
  return make_op<T>(std::move(y), {a}, "exp", [](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += arr(self.grad) * arr(self.value);
  });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).log();
  return make_op<T>(std::move(y), {a}, "log", [](Node<T>& self) {
    auto& p = self.parents[0];
    arr(p->ensure_grad()) += arr(self.grad) / arr(p->value);
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).square();
  return make_op<T>(std::move(y), {a}, "square", [](Node<T>& self) {
    auto& p = self.parents[0];
    arr(p->ensure_grad()) += T{2} * arr(self.grad) * arr(p->value);
  });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  DRIVE_REQUIRE(lo <= hi, "clamp: lo > hi");
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).max(lo).min(hi);
  return make_op<T>(std::move(y), {a}, "clamp", [lo, hi](Node<T>& self) {
    auto& p = self.parents[0];
    const auto x = arr(p->value);
    arr(p->ensure_grad()) += ((x >= lo) && (x <= hi)).select(arr(self.grad), T{0});
  });
}

template <typename T>
Var<T> minimum(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "minimum");
  NdArray<T> y(a.shape());
  arr(y) = arr(a.value()).min(arr(b.value()));
  return make_op<T>(std::move(y), {a, b}, "minimum", [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const auto take_a = arr(pa->value) <= arr(pb->value);
    if (wants(pa)) arr(pa->ensure_grad()) += take_a.select(arr(self.grad), T{0});
    if (wants(pb)) arr(pb->ensure_grad()) += take_a.select(T{0}, arr(self.grad));
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  auto y = NdArray<T>::scalar(arr(a.value()).sum());
  return make_op<T>(std::move(y), {a}, "sum", [](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += self.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  DRIVE_REQUIRE(a.size() > 0, "mean: empty input");
  const T inv = T{1} / static_cast<T>(a.size());
  auto y = NdArray<T>::scalar(arr(a.value()).sum() * inv);
  return make_op<T>(std::move(y), {a}, "mean", [inv](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += self.grad[0] * inv;
  });
}

template <typename T>
Var<T> row_sum(const Var<T>& a) {
  const auto& av = a.value();
  NdArray<T> y(Shape{av.rows(), 1});
  y.matrix() = av.matrix().rowwise().sum();
  return make_op<T>(std::move(y), {a}, "row_sum", [](Node<T>& self) {
    auto& p = self.parents[0];
    p->ensure_grad().matrix().colwise() += self.grad.matrix().col(0);
  });
}

template <typename T>
Var<T> row_norm(const Var<T>& a) {
  const auto& av = a.value();
  NdArray<T> y(Shape{av.rows(), 1});
  y.matrix() = av.matrix().rowwise().norm();
  return make_op<T>(std::move(y), {a}, "row_norm", [](Node<T>& self) {
    auto& p = self.parents[0];
    auto g = p->ensure_grad().matrix();
    const auto x = p->value.matrix();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const T n = self.value[static_cast<std::size_t>(i)];
      if (n > T{0}) g.row(i) += (self.grad[static_cast<std::size_t>(i)] / n) * x.row(i);
    }
  });
}

template <typename T>
Var<T> sum_squares(const Var<T>& a) {
  auto y = NdArray<T>::scalar(arr(a.value()).square().sum());
  return make_op<T>(std::move(y), {a}, "sum_squares", [](Node<T>& self) {
    auto& p = self.parents[0];
    arr(p->ensure_grad()) += (T{2} * self.grad[0]) * arr(p->value);
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  DRIVE_REQUIRE(!parts.empty(), "concat_cols: no inputs");
  const std::size_t n = parts[0].value().rows();
  const bool vector_out = parts[0].value().rank() == 1;
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    DRIVE_REQUIRE(p.value().rows() == n, "concat_cols: row count mismatch");
    offsets.push_back(total);
    total += p.value().cols();
  }
  NdArray<T> y(vector_out ? Shape{total} : Shape{n, total});
  auto ym = y.matrix();
  for (std::size_t k = 0; k < parts.size(); ++k)
    ym.middleCols(static_cast<Eigen::Index>(offsets[k]),
                  static_cast<Eigen::Index>(parts[k].value().cols())) = parts[k].value().matrix();
  return make_op_n<T>(std::move(y), parts, "concat_cols", [offsets](Node<T>& self) {
    const auto g = self.grad.matrix();
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = self.parents[k];
      if (!wants(p)) continue;
      p->ensure_grad().matrix() += g.middleCols(static_cast<Eigen::Index>(offsets[k]),
                                                static_cast<Eigen::Index>(p->value.cols()));
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t start, std::size_t count) {
  const auto& av = a.value();
  DRIVE_REQUIRE(start + count <= av.cols(), "slice_cols: range out of bounds");
  NdArray<T> y(av.rank() == 1 ? Shape{count} : Shape{av.rows(), count});
  y.matrix() = av.matrix().middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  return make_op<T>(std::move(y), {a}, "slice_cols", [start, count](Node<T>& self) {
    self.parents[0]->ensure_grad().matrix().middleCols(static_cast<Eigen::Index>(start),
                                                       static_cast<Eigen::Index>(count)) +=
        self.grad.matrix();
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  NdArray<T> y = a.value();
  y.reshape(std::move(shape));
  return make_op<T>(std::move(y), {a}, "reshape", [](Node<T>& self) {
    arr(self.parents[0]->ensure_grad()) += arr(self.grad);
  });
}

namespace {

struct ConvGeometry {
  std::size_t ci, h, w, co, kh, kw, stride, pad, ho, wo;
};

template <typename T>
void im2col(const NdArray<T>& x, const ConvGeometry& g, RowMatrix<T>& cols) {
  cols.setZero(static_cast<Eigen::Index>(g.ci * g.kh * g.kw), static_cast<Eigen::Index>(g.ho * g.wo));
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const auto row = static_cast<Eigen::Index>((c * g.kh + ky) * g.kw + kx);
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            cols(row, static_cast<Eigen::Index>(oy * g.wo + ox)) =
                x.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          }
        }
      }
}

template <typename T>
void col2im(const RowMatrix<T>& dcols, const ConvGeometry& g, NdArray<T>& dx) {
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const auto row = static_cast<Eigen::Index>((c * g.kh + ky) * g.kw + kx);
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dx.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                dcols(row, static_cast<Eigen::Index>(oy * g.wo + ox));
          }
        }
      }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernels, const Var<T>& bias, std::size_t stride,
              std::size_t padding) {
  const auto& xv = x.value();
  const auto& kv = kernels.value();
  DRIVE_REQUIRE(xv.rank() == 3, "conv2d: input must be [C×H×W], got " + shape_str(xv.shape()));
  DRIVE_REQUIRE(kv.rank() == 4, "conv2d: kernels must be [Co×Ci×kh×kw]");
  DRIVE_REQUIRE(stride >= 1, "conv2d: stride must be ≥ 1");
  ConvGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), kv.dim(0), kv.dim(2), kv.dim(3), stride, padding, 0, 0};
  DRIVE_REQUIRE(kv.dim(1) == g.ci, "conv2d: kernel input channels mismatch");
  DRIVE_REQUIRE(bias.value().size() == g.co, "conv2d: bias length mismatch");
  DRIVE_REQUIRE(g.kh <= g.h + 2 * padding && g.kw <= g.w + 2 * padding,
                "conv2d: kernel larger than padded input");
  DRIVE_REQUIRE(padding < g.kh && padding < g.kw, "conv2d: padding must be smaller than the kernel");
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;

  auto cols = std::make_shared<RowMatrix<T>>();
  im2col(xv, g, *cols);
  const ConstMatrixMap<T> kmat(kv.data(), static_cast<Eigen::Index>(g.co),
                               static_cast<Eigen::Index>(g.ci * g.kh * g.kw));
  NdArray<T> y(Shape{g.co, g.ho, g.wo});
  MatrixMap<T> ym(y.data(), static_cast<Eigen::Index>(g.co), static_cast<Eigen::Index>(g.ho * g.wo));
  ym.noalias() = kmat * (*cols);
  ym.colwise() += bias.value().matrix().row(0).transpose();
  return make_op<T>(std::move(y), {x, kernels, bias}, "conv2d", [g, cols](Node<T>& self) {
    const ConstMatrixMap<T> gm(self.grad.data(), static_cast<Eigen::Index>(g.co),
                               static_cast<Eigen::Index>(g.ho * g.wo));
    auto& px = self.parents[0];
    auto& pk = self.parents[1];
    auto& pb = self.parents[2];
    if (wants(pk)) {
      MatrixMap<T> dk(pk->ensure_grad().data(), static_cast<Eigen::Index>(g.co),
                      static_cast<Eigen::Index>(g.ci * g.kh * g.kw));
      dk.noalias() += gm * cols->transpose();
    }
    if (wants(pb)) pb->ensure_grad().matrix().row(0) += gm.rowwise().sum().transpose();
    if (wants(px)) {
      const ConstMatrixMap<T> kmat(pk->value.data(), static_cast<Eigen::Index>(g.co),
                                   static_cast<Eigen::Index>(g.ci * g.kh * g.kw));
      RowMatrix<T> dcols = kmat.transpose() * gm;
      col2im(dcols, g, px->ensure_grad());
    }
  });
}

template <typename T>
Var<T> global_max_pool(const Var<T>& v) {
  const auto& vv = v.value();
  DRIVE_REQUIRE(vv.rank() == 3, "global_max_pool: expected [C×H×W]");
  const std::size_t c = vv.dim(0), hw = vv.dim(1) * vv.dim(2);
  DRIVE_REQUIRE(hw > 0, "global_max_pool: empty spatial extent");
  NdArray<T> y(Shape{c});
  std::vector<std::size_t> argmax(c);
  for (std::size_t i = 0; i < c; ++i) {
    const T* row = vv.data() + i * hw;
    std::size_t best = 0;
    for (std::size_t j = 1; j < hw; ++j)
      if (row[j] > row[best]) best = j;
    argmax[i] = best;
    y[i] = row[best];
  }
  return make_op<T>(std::move(y), {v}, "global_max_pool", [argmax, hw](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < argmax.size(); ++i) g[i * hw + argmax[i]] += self.grad[i];
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& v) {
  const auto& vv = v.value();
  DRIVE_REQUIRE(vv.rank() == 3, "global_avg_pool: expected [C×H×W]");
  const std::size_t c = vv.dim(0), hw = vv.dim(1) * vv.dim(2);
  DRIVE_REQUIRE(hw > 0, "global_avg_pool: empty spatial extent");
  NdArray<T> y(Shape{c});
  const ConstMatrixMap<T> m(vv.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(hw));
  for (std::size_t i = 0; i < c; ++i) y[i] = m.row(static_cast<Eigen::Index>(i)).sum() / static_cast<T>(hw);
  return make_op<T>(std::move(y), {v}, "global_avg_pool", [c, hw](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    MatrixMap<T> gm(g.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(hw));
    const T inv = T{1} / static_cast<T>(hw);
    for (std::size_t i = 0; i < c; ++i) gm.row(static_cast<Eigen::Index>(i)).array() += self.grad[i] * inv;
  });
}

template <typename T>
Var<T> minmax_normalize(const Var<T>& a) {
  const auto& av = a.value();
  DRIVE_REQUIRE(av.size() > 0, "minmax_normalize: empty input");
  const auto x = arr(av);
  Eigen::Index imin = 0, imax = 0;
  const T lo = x.minCoeff(&imin);
  const T hi = x.maxCoeff(&imax);
  const T range = hi - lo;
  NdArray<T> y(av.shape());
  const bool degenerate = !(range > T{1e-12});
  if (!degenerate) arr(y) = (x - lo) / range;
  return make_op<T>(std::move(y), {a}, "minmax_normalize",
                    [imin, imax, lo, hi, range, degenerate](Node<T>& self) {
                      if (degenerate) return;
                      auto& p = self.parents[0];
                      auto g = arr(p->ensure_grad());
                      const auto gy = arr(self.grad);
                      const auto xv = arr(p->value);
                      g += gy / range;
                      const T r2 = range * range;
                      g[imin] += (gy * (xv - hi)).sum() / r2;
                      g[imax] += -(gy * (xv - lo)).sum() / r2;
                    });
}

#define DRIVE_INSTANTIATE_OPS(T)                                                          \
  template void backward<T>(const Var<T>&);                                               \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                 \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mul_const<T>(const Var<T>&, const NdArray<T>&);                         \
  template Var<T> scale<T>(const Var<T>&, T);                                             \
  template Var<T> add_scalar<T>(const Var<T>&, T);                                        \
  template Var<T> relu<T>(const Var<T>&);                                                 \
  template Var<T> tanh<T>(const Var<T>&);                                                 \
  template Var<T> sigmoid<T>(const Var<T>&);                                              \
  template Var<T> exp<T>(const Var<T>&);                                                  \
  template Var<T> log<T>(const Var<T>&);                                                  \
  template Var<T> square<T>(const Var<T>&);                                               \
  template Var<T> clamp<T>(const Var<T>&, T, T);                                          \
  template Var<T> minimum<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> sum<T>(const Var<T>&);                                                  \
  template Var<T> mean<T>(const Var<T>&);                                                 \
  template Var<T> row_sum<T>(const Var<T>&);                                              \
  template Var<T> row_norm<T>(const Var<T>&);                                             \
  template Var<T> sum_squares<T>(const Var<T>&);                                          \
  template Var<T> concat_cols<T>(const std::vector<Var<T>>&);                             \
  template Var<T> slice_cols<T>(const Var<T>&, std::size_t, std::size_t);                 \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                       \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,     \
                            std::size_t);                                                 \
  template Var<T> global_max_pool<T>(const Var<T>&);                                      \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                      \
  template Var<T> minmax_normalize<T>(const Var<T>&);

DRIVE_INSTANTIATE_OPS(float)
DRIVE_INSTANTIATE_OPS(double)

}  // namespace drive::nn
