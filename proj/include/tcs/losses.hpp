#pragma once

#include <cmath>
#include <vector>

#include "tcs/autodiff.hpp"
#include "tcs/models.hpp"
#include "tcs/tensor.hpp"

namespace tcs {

// Mean squared error over the masked steps (mask[t] true = step contributes).
inline double mse_loss(const std::vector<double>& pred, const std::vector<double>& target,
                       const std::vector<bool>& mask) {
  check(pred.size() == target.size() && pred.size() == mask.size(),
        "mse_loss: length mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double d = pred[i] - target[i];
    acc += d * d;
    ++n;
  }
  check(n > 0, "mse_loss: empty mask");
  return acc / static_cast<double>(n);
}

// Cross entropy with target replication: mean over steps of -log p_t(label),
// with a 1e-12 floor inside the log.
inline double xent_target_replication(const Tensor& probs, int label) {
  check(probs.cols() == 2, "xent_target_replication: expected T x 2 probabilities");
  check(label == 0 || label == 1, "xent_target_replication: label must be 0 or 1");
  const int T = probs.rows();
  check(T >= 1, "xent_target_replication: empty sequence");
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    const double p = probs.at(t, label);
    acc -= std::log(std::max(p, 1e-12));
  }
  return acc / T;
}

// Sum over t of cos(lambda_t, lambda_{t+1}); subtracted from the loss with
// strength alpha to encourage temporally smooth mixtures.
inline double smoothness_penalty(const Tensor& lambda) {
  const int T = lambda.rows(), K = lambda.cols();
  check(T >= 2, "smoothness_penalty: need at least two rows");
  double total = 0.0;
  for (int t = 0; t + 1 < T; ++t) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < K; ++k) {
      const double a = lambda.at(t, k), b = lambda.at(t + 1, k);
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    check(na > 0.0 && nb > 0.0, "smoothness_penalty: zero-norm row");
    total += dot / std::sqrt(na * nb);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Tape-side loss builders
// ---------------------------------------------------------------------------

// Regression: mean over batch and steps t = l+1..T of squared error.
inline ad::Var build_mse_loss(ForwardGraph& g, const Dataset& ds,
                              const std::vector<std::size_t>& indices, int l) {
  const int T = static_cast<int>(g.outputs.size());
  const int B = g.batch;
  check(l >= 0 && l < T, "build_mse_loss: invalid lag");
  ad::Tape& tp = g.tape;
  ad::Var acc;
  for (int t = l; t < T; ++t) {
    Tensor target({B, 1});
    for (int b = 0; b < B; ++b) target.at(b, 0) = ds.examples[indices[b]].y[t - l];
    ad::Var diff = tp.sub(g.outputs[t], tp.constant(std::move(target)));
    ad::Var sq = tp.sum_all(tp.mul(diff, diff));
    acc = acc.valid() ? tp.add(acc, sq) : sq;
  }
  return tp.scale(acc, 1.0 / (static_cast<double>(B) * (T - l)));
}

// Classification with target replication: mean over batch and all T steps of
// -log p_t(label).
inline ad::Var build_xent_loss(ForwardGraph& g, const Dataset& ds,
                               const std::vector<std::size_t>& indices) {
  const int T = static_cast<int>(g.outputs.size());
  const int B = g.batch;
  std::vector<int> labels(B);
  for (int b = 0; b < B; ++b) {
    labels[b] = ds.examples[indices[b]].label;
    check(labels[b] == 0 || labels[b] == 1, "build_xent_loss: missing label");
  }
  ad::Tape& tp = g.tape;
  ad::Var acc;
  for (int t = 0; t < T; ++t) {
    ad::Var lp = tp.log_softmax_rows(g.outputs[t]);
    ad::Var picked = tp.sum_all(tp.gather_labels(lp, labels));
    acc = acc.valid() ? tp.add(acc, picked) : picked;
  }
  return tp.scale(acc, -1.0 / (static_cast<double>(B) * T));
}

// Task loss plus the smoothness regularizer: L_R = L - alpha * sum_t s_t.
inline ad::Var build_objective(ForwardGraph& g, const Dataset& ds,
                               const std::vector<std::size_t>& indices, int l,
                               double smoothness_alpha) {
  ad::Var loss = ds.header.task == Task::regression ? build_mse_loss(g, ds, indices, l)
                                                    : build_xent_loss(g, ds, indices);
  if (smoothness_alpha != 0.0 && g.lambda.valid()) {
    ad::Var penalty = g.tape.cosine_adjacent_sum(g.lambda);
    loss = g.tape.sub(loss, g.tape.scale(penalty, smoothness_alpha));
  }
  return loss;
}

}  // namespace tcs
