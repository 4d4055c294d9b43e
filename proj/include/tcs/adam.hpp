#pragma once

#include <cmath>
#include <vector>

#include "tcs/tensor.hpp"

namespace tcs {

// Adam with bias correction. Moment buffers are allocated lazily on the first
// step and mirror the parameter shapes.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t_adam = 0;
  std::vector<std::vector<double>> m, v;

  // Updates each parameter from its own grad buffer.
  void step(const std::vector<Tensor*>& params) {
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
      for (std::size_t p = 0; p < params.size(); ++p) {
        m[p].assign(params[p]->size(), 0.0);
        v[p].assign(params[p]->size(), 0.0);
      }
    }
    check(m.size() == params.size(), "adam_step: state size mismatch");
    ++t_adam;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_adam));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_adam));
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor& theta = *params[p];
      check(theta.grad.size() == theta.size() && theta.size() == m[p].size(),
            "adam_step: shape mismatch");
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = theta.grad[i];
        if (!std::isfinite(gi)) throw NumericError("adam_step: non-finite gradient");
        m[p][i] = beta1 * m[p][i] + (1.0 - beta1) * gi;
        v[p][i] = beta2 * v[p][i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[p][i] / bc1;
        const double vhat = v[p][i] / bc2;
        theta.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

}  // namespace tcs
