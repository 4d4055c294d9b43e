#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "tcs/numerics.hpp"
#include "tcs/tensor.hpp"

namespace tcs {

// Per-gate layer norm parameters (gain, bias), order i, c, f, o.
struct GateNormParams {
  Tensor gain_i, bias_i;
  Tensor gain_c, bias_c;
  Tensor gain_f, bias_f;
  Tensor gain_o, bias_o;
};

// One LSTM cell: four gate weight matrices of shape hidden x (hidden+input),
// gate biases, and an output head. The head may be absent (empty W_y) for
// cells that feed a stacked layer instead of producing predictions.
struct CellParams {
  Tensor W_i, W_c, W_f, W_o;  // hidden x (hidden + input)
  Tensor b_i, b_c, b_f, b_o;  // hidden
  Tensor W_y, b_y;            // out x hidden, out
  std::optional<GateNormParams> ln;

  int hidden() const { return W_i.rows(); }
  int input() const { return W_i.cols() - W_i.rows(); }
  int out() const { return W_y.rows(); }
  bool has_head() const { return !W_y.values.empty(); }
};

constexpr double kLayerNormEps = 1e-5;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace detail {

inline Tensor gate_preactivation(const Tensor& W, const Tensor& b, const Tensor& h_prev,
                                 const Tensor& x) {
  const int H = W.rows();
  const int n = W.cols();
  check(static_cast<int>(h_prev.size()) + static_cast<int>(x.size()) == n,
        "lstm_step: input/state dimensions do not match cell");
  Tensor pre({H});
  for (int j = 0; j < H; ++j) {
    const double* wj = &W.values[static_cast<std::size_t>(j) * n];
    double acc = b.values[j];
    std::size_t c = 0;
    for (double hv : h_prev.values) acc += wj[c++] * hv;
    for (double xv : x.values) acc += wj[c++] * xv;
    pre.values[j] = acc;
  }
  return pre;
}

}  // namespace detail

// One step of the LSTM recurrence. With layer norm enabled, each gate
// pre-activation is normalized before its nonlinearity.
inline std::pair<Tensor, Tensor> lstm_step(const CellParams& p, const Tensor& h_prev,
                                           const Tensor& c_prev, const Tensor& x,
                                           bool use_layer_norm = false) {
  const int H = p.hidden();
  check(static_cast<int>(h_prev.size()) == H && static_cast<int>(c_prev.size()) == H,
        "lstm_step: state size mismatch");
  Tensor pre_i = detail::gate_preactivation(p.W_i, p.b_i, h_prev, x);
  Tensor pre_c = detail::gate_preactivation(p.W_c, p.b_c, h_prev, x);
  Tensor pre_f = detail::gate_preactivation(p.W_f, p.b_f, h_prev, x);
  Tensor pre_o = detail::gate_preactivation(p.W_o, p.b_o, h_prev, x);
  if (use_layer_norm) {
    check(p.ln.has_value(), "lstm_step: layer norm requested without parameters");
    pre_i = layer_norm(pre_i, p.ln->gain_i, p.ln->bias_i, kLayerNormEps);
    pre_c = layer_norm(pre_c, p.ln->gain_c, p.ln->bias_c, kLayerNormEps);
    pre_f = layer_norm(pre_f, p.ln->gain_f, p.ln->bias_f, kLayerNormEps);
    pre_o = layer_norm(pre_o, p.ln->gain_o, p.ln->bias_o, kLayerNormEps);
  }
  Tensor h({H}), c({H});
  for (int j = 0; j < H; ++j) {
    const double i_g = sigmoid(pre_i.values[j]);
    const double c_t = std::tanh(pre_c.values[j]);
    const double f_g = sigmoid(pre_f.values[j]);
    const double o_g = sigmoid(pre_o.values[j]);
    c.values[j] = i_g * c_t + f_g * c_prev.values[j];
    h.values[j] = o_g * std::tanh(c.values[j]);
  }
  check_finite(h, "lstm_step hidden state");
  return {std::move(h), std::move(c)};
}

enum class Task { regression, classification };

// Eq.-(7)-style head: affine scalar for regression, two-way probabilities for
// classification.
inline Tensor output_head(const CellParams& p, const Tensor& h, Task task) {
  check(p.has_head(), "output_head: cell has no head");
  const int out = p.out();
  const int H = p.hidden();
  check(static_cast<int>(h.size()) == H, "output_head: hidden size mismatch");
  Tensor y({out});
  for (int j = 0; j < out; ++j) {
    double acc = p.b_y.values[j];
    const double* wj = &p.W_y.values[static_cast<std::size_t>(j) * H];
    for (int i = 0; i < H; ++i) acc += wj[i] * h.values[i];
    y.values[j] = acc;
  }
  if (task == Task::classification) {
    check(out == 2, "output_head: classification head must have two logits");
    return softmax(y);
  }
  return y;
}

// Time-block assignment for a sequential composition of K cells: cell index
// floor((t-1)/ceil(T/K)) clamped to K-1, for 1-indexed t.
struct ShiftSchedule {
  int T = 0;
  int K = 0;
  int block = 0;
  std::vector<int> assignment;  // length T, values in [0, K)
};

inline ShiftSchedule shift_schedule(int T, int K) {
  check(T >= 1, "shift_schedule: T must be positive");
  check(K >= 1 && K <= T, "shift_schedule: K must be in [1, T]");
  ShiftSchedule s;
  s.T = T;
  s.K = K;
  s.block = (T + K - 1) / K;
  s.assignment.resize(T);
  for (int t = 1; t <= T; ++t)
    s.assignment[t - 1] = std::min((t - 1) / s.block, K - 1);
  return s;
}

// K cells plus a T x K logit table; row-softmax of the logits gives the
// per-step mixing coefficients.
struct MixBank {
  std::vector<CellParams> cells;
  Tensor logits;  // T x K

  int K() const { return static_cast<int>(cells.size()); }
  int T() const { return logits.rows(); }
};

inline Tensor mixing_coefficients(const MixBank& bank) {
  const int T = bank.T(), K = bank.K();
  check(bank.logits.cols() == K, "mixing_coefficients: logit table width mismatch");
  Tensor lambda({T, K});
  for (int t = 0; t < T; ++t) {
    Tensor row({K});
    for (int k = 0; k < K; ++k) row.values[k] = bank.logits.at(t, k);
    Tensor sm = softmax(row);
    for (int k = 0; k < K; ++k) lambda.at(t, k) = sm.values[k];
  }
  return lambda;
}

namespace detail {

inline Tensor weighted_sum(const std::vector<const Tensor*>& parts,
                           const std::vector<double>& coeffs) {
  Tensor out(parts[0]->shape);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double c = coeffs[k];
    const Tensor& p = *parts[k];
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += c * p.values[i];
  }
  return out;
}

}  // namespace detail

// Convex combination of the bank's cells at 1-indexed time step t, covering
// every parameter including the output head.
inline CellParams mix_params(const MixBank& bank, int t) {
  check(t >= 1 && t <= bank.T(), "mix_params: time step out of range");
  const int K = bank.K();
  Tensor lambda = mixing_coefficients(bank);
  std::vector<double> coeffs(K);
  for (int k = 0; k < K; ++k) coeffs[k] = lambda.at(t - 1, k);

  auto combine = [&](auto member) {
    std::vector<const Tensor*> parts;
    parts.reserve(K);
    for (const CellParams& c : bank.cells) parts.push_back(&(c.*member));
    return detail::weighted_sum(parts, coeffs);
  };
  CellParams mixed;
  mixed.W_i = combine(&CellParams::W_i);
  mixed.W_c = combine(&CellParams::W_c);
  mixed.W_f = combine(&CellParams::W_f);
  mixed.W_o = combine(&CellParams::W_o);
  mixed.b_i = combine(&CellParams::b_i);
  mixed.b_c = combine(&CellParams::b_c);
  mixed.b_f = combine(&CellParams::b_f);
  mixed.b_o = combine(&CellParams::b_o);
  if (bank.cells[0].has_head()) {
    mixed.W_y = combine(&CellParams::W_y);
    mixed.b_y = combine(&CellParams::b_y);
  }
  return mixed;
}

// Fixed sinusoidal encoding of a 1-indexed time step:
// TE[i] = sin(t / 10000^(i/dim)) for even i, cos(t / 10000^((i-1)/dim)) for odd i.
inline Tensor temporal_encoding(int t, int dim = 24) {
  check(dim >= 2 && dim % 2 == 0, "temporal_encoding: dim must be even and >= 2");
  Tensor te({dim});
  for (int i = 0; i < dim; ++i) {
    const int base = i - (i % 2);
    const double denom = std::pow(10000.0, static_cast<double>(base) / dim);
    const double arg = static_cast<double>(t) / denom;
    te.values[i] = (i % 2 == 0) ? std::sin(arg) : std::cos(arg);
  }
  return te;
}

}  // namespace tcs
