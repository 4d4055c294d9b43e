#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tcs/rng.hpp"
#include "tcs/tensor.hpp"

namespace tcs {

// Numerically stable softmax (max subtraction). Output entries are positive
// and sum to 1 within 1e-12.
inline Tensor softmax(const Tensor& logits) {
  check(!logits.values.empty(), "softmax: empty input");
  for (double v : logits.values)
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
  Tensor out(logits.shape);
  const double mx = *std::max_element(logits.values.begin(), logits.values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.values[i] = std::exp(logits.values[i] - mx);
    sum += out.values[i];
  }
  for (double& v : out.values) v /= sum;
  return out;
}

// gain * (v - mean) / sqrt(var + eps) + bias, population variance.
inline Tensor layer_norm(const Tensor& v, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
  const std::size_t n = v.size();
  check(n >= 1 && gain.size() == n && bias.size() == n, "layer_norm: length mismatch");
  check(eps > 0.0, "layer_norm: eps must be positive");
  double mean = 0.0;
  for (double x : v.values) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : v.values) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  Tensor out(v.shape);
  for (std::size_t i = 0; i < n; ++i)
    out.values[i] = gain.values[i] * (v.values[i] - mean) * inv + bias.values[i];
  return out;
}

namespace detail {

// Reduced Householder QR of a (n x m), n >= m. Overwrites q with the explicit
// n x m orthonormal factor; the sign of each column is fixed so that the
// corresponding diagonal entry of R is nonnegative.
inline void householder_q(std::vector<double>& a, int n, int m, std::vector<double>& q) {
  std::vector<std::vector<double>> vs;
  std::vector<double> r_diag(m, 0.0);
  auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * m + j]; };
  for (int k = 0; k < m; ++k) {
    double norm = 0.0;
    for (int i = k; i < n; ++i) norm += A(i, k) * A(i, k);
    norm = std::sqrt(norm);
    double alpha = A(k, k) >= 0.0 ? -norm : norm;
    std::vector<double> v(n, 0.0);
    double vnorm2 = 0.0;
    if (norm > 0.0) {
      v[k] = A(k, k) - alpha;
      for (int i = k + 1; i < n; ++i) v[i] = A(i, k);
      for (int i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    }
    if (vnorm2 > 0.0) {
      for (int j = k; j < m; ++j) {
        double dot = 0.0;
        for (int i = k; i < n; ++i) dot += v[i] * A(i, j);
        const double f = 2.0 * dot / vnorm2;
        for (int i = k; i < n; ++i) A(i, j) -= f * v[i];
      }
    }
    r_diag[k] = A(k, k);
    vs.push_back(std::move(v));
  }
  // Accumulate Q = H_0 ... H_{m-1} applied to the first m columns of I.
  q.assign(static_cast<std::size_t>(n) * m, 0.0);
  auto Q = [&](int i, int j) -> double& { return q[static_cast<std::size_t>(i) * m + j]; };
  for (int j = 0; j < m; ++j) Q(j, j) = 1.0;
  for (int k = m - 1; k >= 0; --k) {
    const auto& v = vs[k];
    double vnorm2 = 0.0;
    for (int i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    for (int j = 0; j < m; ++j) {
      double dot = 0.0;
      for (int i = k; i < n; ++i) dot += v[i] * Q(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (int i = k; i < n; ++i) Q(i, j) -= f * v[i];
    }
  }
  // Sign fix: nonnegative R diagonal.
  for (int j = 0; j < m; ++j) {
    if (r_diag[j] < 0.0)
      for (int i = 0; i < n; ++i) Q(i, j) = -Q(i, j);
  }
}

}  // namespace detail

// rows x cols matrix with orthonormal rows (rows <= cols) or columns
// (rows > cols), obtained by QR of a standard-normal sample. The sign
// convention (nonnegative R diagonal) makes the factorization unique, so a
// seed always yields the same matrix.
inline Tensor orthogonal_init(int rows, int cols, Rng& rng) {
  check(rows >= 1 && cols >= 1, "orthogonal_init: dimensions must be positive");
  const int n = std::max(rows, cols);
  const int m = std::min(rows, cols);
  std::vector<double> a(static_cast<std::size_t>(n) * m);
  for (double& v : a) v = rng.normal();
  std::vector<double> q;
  detail::householder_q(a, n, m, q);
  Tensor out({rows, cols});
  if (rows >= cols) {
    out.values = std::move(q);  // n x m == rows x cols
  } else {
    for (int i = 0; i < rows; ++i)  // transpose: orthonormal rows
      for (int j = 0; j < cols; ++j)
        out.values[static_cast<std::size_t>(i) * cols + j] = q[static_cast<std::size_t>(j) * m + i];
  }
  return out;
}

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Tensor uniform_fan_in_init(int rows, int cols, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor out(cols == 0 ? std::vector<int>{rows} : std::vector<int>{rows, cols});
  for (double& v : out.values) v = rng.uniform(-bound, bound);
  return out;
}

}  // namespace tcs
