#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drive/errors.hpp"

namespace drive::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Dense row-major array. Rank-1 arrays behave as 1×n row vectors when viewed
// as a matrix; rank-0 arrays hold a single scalar.
template <typename T>
class NdArray {
 public:
  using value_type = T;

  NdArray() = default;
  explicit NdArray(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  NdArray(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    DRIVE_REQUIRE(shape_size(shape_) == data_.size(),
                  "NdArray: shape " + shape_str(shape_) + " does not match data length " +
                      std::to_string(data_.size()));
  }

  static NdArray scalar(T v) { return NdArray(Shape{}, std::vector<T>{v}); }
  static NdArray matrix(std::size_t rows, std::size_t cols, T fill = T{0}) {
    return NdArray(Shape{rows, cols}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t dim(std::size_t axis) const {
    DRIVE_REQUIRE(axis < shape_.size(), "NdArray::dim: axis out of range");
    return shape_[axis];
  }

  // Matrix view: rank 2 → (d0, d1); rank 1 → (1, d0); rank 0 → (1, 1).
  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() == 1) return shape_[0];
    return shape_.empty() ? 1 : data_.size();
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t i, std::size_t j) noexcept { return data_[i * cols() + j]; }
  const T& at(std::size_t i, std::size_t j) const noexcept { return data_[i * cols() + j]; }
  T& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  MatrixMap<T> matrix() noexcept {
    return MatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows()),
                        static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap<T> matrix() const noexcept {
    return ConstMatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows()),
                             static_cast<Eigen::Index>(cols()));
  }

  void reshape(Shape shape) {
    DRIVE_REQUIRE(shape_size(shape) == data_.size(),
                  "NdArray::reshape: " + shape_str(shape) + " incompatible with size " +
                      std::to_string(data_.size()));
    shape_ = std::move(shape);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept;

  template <typename U>
  NdArray<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return NdArray<U>(shape_, std::move(out));
  }

  bool operator==(const NdArray& other) const = default;

 private:
  Shape shape_;
  // Fixed alignment keeps Eigen's vectorised reductions independent of where
  // the allocator happens to place a buffer.
  std::vector<T, Eigen::aligned_allocator<T>> data_;
};

// Global debug switch: when enabled, every autograd op checks its output for
// NaN/Inf and throws NumericError.
void set_finite_checks(bool enabled) noexcept;
bool finite_checks_enabled() noexcept;

template <typename T>
void check_finite(const NdArray<T>& a, const char* where);

extern template class NdArray<float>;
extern template class NdArray<double>;

}  // namespace drive::nn
