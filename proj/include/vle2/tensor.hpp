#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vle2 {

/// Dense row-major tensor. Values are stored in S (float in production,
/// double in the gradient-check instantiation); reductions accumulate in
/// 64-bit regardless of S.
template <class S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> shp) : shape(std::move(shp)), data(numel_of(shape), S(0)) {}

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const {
    if (shape.size() == 1) return shape[0];
    return shape.empty() ? 0 : shape[1];
  }

  S* row_ptr(int r) { return data.data() + static_cast<std::size_t>(r) * cols(); }
  const S* row_ptr(int r) const { return data.data() + static_cast<std::size_t>(r) * cols(); }

  S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  S at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(S(0)); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;

template <class S>
inline bool all_finite(const TensorT<S>& t) {
  for (S v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template <class S>
inline void require_finite(const TensorT<S>& t, const char* what) {
  if (!all_finite(t)) throw std::runtime_error(std::string("non-finite values in ") + what);
}

}  // namespace vle2
