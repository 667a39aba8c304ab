#include "drive/nn/ndarray.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace drive::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
bool NdArray<T>::all_finite() const noexcept {
  for (const T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {
std::atomic<bool> g_finite_checks{false};
}

void set_finite_checks(bool enabled) noexcept { g_finite_checks.store(enabled); }
bool finite_checks_enabled() noexcept { return g_finite_checks.load(std::memory_order_relaxed); }

template <typename T>
void check_finite(const NdArray<T>& a, const char* where) {
  if (!a.all_finite()) throw NumericError(std::string("non-finite value produced by ") + where);
}

template class NdArray<float>;
template class NdArray<double>;
template void check_finite(const NdArray<float>&, const char*);
template void check_finite(const NdArray<double>&, const char*);

}  // namespace drive::nn
