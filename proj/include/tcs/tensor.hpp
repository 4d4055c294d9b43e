#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "tcs/common.hpp"

namespace tcs {

// Dense row-major n-d array of doubles with an optional gradient buffer.
// Kept as a plain value type; all model math goes through these.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty means "no gradient buffer"

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    values.assign(numel(shape), 0.0);
  }

  Tensor(std::vector<int> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    check(values.size() == numel(shape), "tensor: values do not match shape");
  }

  static std::size_t numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      check(d >= 0, "tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.values.begin(), t.values.end(), v);
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor vector(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  }

  static Tensor matrix(int r, int c, std::vector<double> v) {
    return Tensor({r, c}, std::move(v));
  }

  std::size_t size() const { return values.size(); }

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols() + c]; }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void check_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

}  // namespace tcs
