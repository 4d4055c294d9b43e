#pragma once

#include "tcs/data.hpp"
#include "tcs/grad_check.hpp"
#include "tcs/losses.hpp"
#include "tcs/models.hpp"
#include "tcs/rng.hpp"

namespace tcs::testutil {

// Dense random dataset for gradient probes: sparse synthetic inputs leave
// some weight columns with gradients below the central-difference noise
// floor, which says nothing about the backward pass.
inline Dataset dense_dataset(int n, int T, int d, int l, Task task, std::uint64_t seed) {
  Dataset ds;
  ds.header.T = T;
  ds.header.d = d;
  ds.header.task = task;
  ds.header.metadata["l"] = l;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Example ex;
    ex.id = "p" + std::to_string(i);
    ex.x = Tensor({T, d});
    for (double& v : ex.x.values) v = rng.uniform(0.0, 1.0);
    if (task == Task::regression) {
      ex.y.resize(T - l);
      for (double& v : ex.y) v = rng.uniform(-1.0, 1.0);
    } else {
      ex.label = rng.bernoulli(0.5) ? 1 : 0;
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// Full-objective gradient check for one model configuration; returns the
// report from probing every coordinate (or a sample when coords > 0).
inline GradCheckReport model_grad_check(ModelState& m, const Dataset& ds, double alpha,
                                        int coords_per_tensor = 0) {
  std::vector<std::size_t> batch(ds.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  const int l = m.spec.task == Task::regression ? ds.lag() : 0;
  auto eval = [&](bool with_grad) {
    ForwardGraph g;
    build_forward(g, m, ds, batch);
    ad::Var loss = build_objective(g, ds, batch, l, alpha);
    const double v = loss.value().values[0];
    if (with_grad) {
      for (auto& [name, t] : m.named_params()) {
        t->ensure_grad();
        t->zero_grad();
      }
      g.tape.backward(loss);
      collect_param_grads(g, m);
    }
    return v;
  };
  std::vector<Tensor*> params;
  for (auto& [name, t] : m.named_params()) params.push_back(t);
  GradCheckOptions opt;
  opt.h = 1e-5;
  opt.coords_per_tensor = coords_per_tensor;
  return grad_check(eval, params, opt);
}

}  // namespace tcs::testutil
