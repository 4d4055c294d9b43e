#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tcs/autodiff.hpp"
#include "tcs/cells.hpp"
#include "tcs/data.hpp"
#include "tcs/numerics.hpp"
#include "tcs/rng.hpp"

namespace tcs {

enum class ModelKind { nn, nn_t, lstm, lstm_t, lstm_te, shift_lstm, mix_lstm };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::nn: return "nn";
    case ModelKind::nn_t: return "nn_t";
    case ModelKind::lstm: return "lstm";
    case ModelKind::lstm_t: return "lstm_t";
    case ModelKind::lstm_te: return "lstm_te";
    case ModelKind::shift_lstm: return "shift_lstm";
    case ModelKind::mix_lstm: return "mix_lstm";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "nn") return ModelKind::nn;
  if (s == "nn_t") return ModelKind::nn_t;
  if (s == "lstm") return ModelKind::lstm;
  if (s == "lstm_t") return ModelKind::lstm_t;
  if (s == "lstm_te") return ModelKind::lstm_te;
  if (s == "shift_lstm" || s == "shift") return ModelKind::shift_lstm;
  if (s == "mix_lstm" || s == "mix") return ModelKind::mix_lstm;
  throw ValidationError("unknown model kind: " + s);
}

inline bool is_recurrent(ModelKind k) { return k != ModelKind::nn && k != ModelKind::nn_t; }
inline bool has_K(ModelKind k) {
  return k == ModelKind::shift_lstm || k == ModelKind::mix_lstm;
}

struct ModelSpec {
  ModelKind kind = ModelKind::lstm;
  int input_dim = 0;
  int hidden = 0;
  int K = 0;  // shift/mix only
  int T = 0;
  int num_layers = 1;  // kind == lstm only
  int te_dim = 24;
  bool use_layer_norm = false;
  Task task = Task::regression;
  std::uint64_t seed = 0;

  int out_dim() const { return task == Task::classification ? 2 : 1; }

  // Columns appended to each input step: t/T for the +t variants, a sinusoidal
  // encoding for +TE.
  int aug_dim() const {
    if (kind == ModelKind::nn_t || kind == ModelKind::lstm_t) return 1;
    if (kind == ModelKind::lstm_te) return te_dim;
    return 0;
  }

  int cell_input_dim() const { return input_dim + aug_dim(); }
};

inline void validate_spec(const ModelSpec& s) {
  check(s.input_dim >= 1, "spec: input_dim must be positive");
  check(s.hidden >= 1, "spec: hidden must be positive");
  check(s.T >= 1, "spec: T must be positive");
  if (has_K(s.kind)) {
    check(s.K >= 1, "spec: K must be positive");
    if (s.kind == ModelKind::shift_lstm)
      check(s.K <= s.T, "spec: shift_lstm requires K <= T");
  } else {
    check(s.K == 0, "spec: K is only valid for shift_lstm/mix_lstm");
  }
  check(s.num_layers == 1 || (s.num_layers == 2 && s.kind == ModelKind::lstm),
        "spec: num_layers=2 is supported for kind=lstm only");
  check(s.te_dim >= 2 && s.te_dim % 2 == 0, "spec: te_dim must be even");
}

struct MlpParams {
  Tensor W1, b1;  // hidden x in, hidden
  Tensor W2, b2;  // out x hidden, out
};

struct TrainMeta {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val = 0.0;
  std::string selection;
};

struct ModelState {
  ModelSpec spec;
  std::vector<CellParams> cells;  // lstm: num_layers; shift/mix: K
  Tensor mix_logits;              // T x K (mix only)
  MlpParams mlp;                  // nn kinds
  // Optional per-feature standardization baked in at training time (train
  // split statistics); empty tensors mean identity. Applied on the tape so
  // input gradients stay gradients with respect to the raw features.
  Tensor feat_mean, feat_scale;
  TrainMeta meta;

  bool standardizes() const { return !feat_mean.values.empty(); }

  // Canonical parameter ordering shared by the optimizer, serialization, and
  // gradient checks.
  std::vector<std::pair<std::string, Tensor*>> named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add = [&out](const std::string& name, Tensor& t) {
      if (!t.values.empty()) out.emplace_back(name, &t);
    };
    if (!is_recurrent(spec.kind)) {
      add("mlp.W1", mlp.W1);
      add("mlp.b1", mlp.b1);
      add("mlp.W2", mlp.W2);
      add("mlp.b2", mlp.b2);
      return out;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string p = "cell" + std::to_string(c) + ".";
      add(p + "W_i", cells[c].W_i);
      add(p + "W_c", cells[c].W_c);
      add(p + "W_f", cells[c].W_f);
      add(p + "W_o", cells[c].W_o);
      add(p + "b_i", cells[c].b_i);
      add(p + "b_c", cells[c].b_c);
      add(p + "b_f", cells[c].b_f);
      add(p + "b_o", cells[c].b_o);
      add(p + "W_y", cells[c].W_y);
      add(p + "b_y", cells[c].b_y);
      if (cells[c].ln) {
        add(p + "ln.gain_i", cells[c].ln->gain_i);
        add(p + "ln.bias_i", cells[c].ln->bias_i);
        add(p + "ln.gain_c", cells[c].ln->gain_c);
        add(p + "ln.bias_c", cells[c].ln->bias_c);
        add(p + "ln.gain_f", cells[c].ln->gain_f);
        add(p + "ln.bias_f", cells[c].ln->bias_f);
        add(p + "ln.gain_o", cells[c].ln->gain_o);
        add(p + "ln.bias_o", cells[c].ln->bias_o);
      }
    }
    if (spec.kind == ModelKind::mix_lstm) add("mix.logits", mix_logits);
    return out;
  }
};

// Exact trainable-parameter count from the spec alone.
inline long parameter_count(const ModelSpec& s) {
  validate_spec(s);
  const long H = s.hidden, out = s.out_dim();
  if (!is_recurrent(s.kind)) {
    const long in = s.cell_input_dim();
    return H * in + H + out * H + out;
  }
  auto cell_count = [&](long in, bool head) {
    long n = 4 * (H * (H + in) + H);
    if (head) n += out * H + out;
    if (s.use_layer_norm) n += 8 * H;
    return n;
  };
  const long in = s.cell_input_dim();
  if (s.kind == ModelKind::lstm || s.kind == ModelKind::lstm_t || s.kind == ModelKind::lstm_te) {
    if (s.num_layers == 1) return cell_count(in, true);
    return cell_count(in, false) + cell_count(H, true);
  }
  if (s.kind == ModelKind::shift_lstm) return s.K * cell_count(in, true);
  return s.K * cell_count(in, true) + static_cast<long>(s.T) * s.K;  // mix_lstm
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor uniform_tensor(std::vector<int> shape, double bound, Rng rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

// Gate matrix hidden x (hidden+input): orthogonal profile initializes the
// recurrent and input blocks as separate orthogonal matrices.
inline Tensor init_gate_matrix(int H, int in, bool orthogonal, Rng rng) {
  if (!orthogonal) return uniform_tensor({H, H + in}, 1.0 / std::sqrt(double(H + in)), rng);
  Rng r1 = rng.child("rec");
  Rng r2 = rng.child("inp");
  Tensor rec = orthogonal_init(H, H, r1);
  Tensor inp = orthogonal_init(H, in, r2);
  Tensor W({H, H + in});
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < H; ++c) W.at(r, c) = rec.at(r, c);
    for (int c = 0; c < in; ++c) W.at(r, H + c) = inp.at(r, c);
  }
  return W;
}

inline CellParams init_cell(int H, int in, int out, bool head, bool layer_norm,
                            const Rng& rng) {
  CellParams c;
  const bool ortho = layer_norm;  // orthogonal + layer-norm profile travel together
  c.W_i = init_gate_matrix(H, in, ortho, rng.child("W_i"));
  c.W_c = init_gate_matrix(H, in, ortho, rng.child("W_c"));
  c.W_f = init_gate_matrix(H, in, ortho, rng.child("W_f"));
  c.W_o = init_gate_matrix(H, in, ortho, rng.child("W_o"));
  const double bb = ortho ? 0.0 : 1.0 / std::sqrt(double(H + in));
  c.b_i = bb == 0.0 ? Tensor({H}) : uniform_tensor({H}, bb, rng.child("b_i"));
  c.b_c = bb == 0.0 ? Tensor({H}) : uniform_tensor({H}, bb, rng.child("b_c"));
  c.b_f = bb == 0.0 ? Tensor({H}) : uniform_tensor({H}, bb, rng.child("b_f"));
  c.b_o = bb == 0.0 ? Tensor({H}) : uniform_tensor({H}, bb, rng.child("b_o"));
  if (head) {
    c.W_y = uniform_tensor({out, H}, 1.0 / std::sqrt(double(H)), rng.child("W_y"));
    c.b_y = uniform_tensor({out}, 1.0 / std::sqrt(double(H)), rng.child("b_y"));
  }
  if (layer_norm) {
    GateNormParams ln;
    ln.gain_i = Tensor::full({H}, 1.0);
    ln.bias_i = Tensor({H});
    ln.gain_c = Tensor::full({H}, 1.0);
    ln.bias_c = Tensor({H});
    ln.gain_f = Tensor::full({H}, 1.0);
    ln.bias_f = Tensor({H});
    ln.gain_o = Tensor::full({H}, 1.0);
    ln.bias_o = Tensor({H});
    c.ln = std::move(ln);
  }
  return c;
}

}  // namespace detail

inline ModelState init_model(const ModelSpec& spec) {
  validate_spec(spec);
  ModelState m;
  m.spec = spec;
  Rng rng(spec.seed);
  const int H = spec.hidden, in = spec.cell_input_dim(), out = spec.out_dim();
  if (!is_recurrent(spec.kind)) {
    m.mlp.W1 = detail::uniform_tensor({H, in}, 1.0 / std::sqrt(double(in)), rng.child("mlp.W1"));
    m.mlp.b1 = detail::uniform_tensor({H}, 1.0 / std::sqrt(double(in)), rng.child("mlp.b1"));
    m.mlp.W2 = detail::uniform_tensor({out, H}, 1.0 / std::sqrt(double(H)), rng.child("mlp.W2"));
    m.mlp.b2 = detail::uniform_tensor({out}, 1.0 / std::sqrt(double(H)), rng.child("mlp.b2"));
    return m;
  }
  if (spec.kind == ModelKind::shift_lstm || spec.kind == ModelKind::mix_lstm) {
    for (int k = 0; k < spec.K; ++k)
      m.cells.push_back(detail::init_cell(H, in, out, true, spec.use_layer_norm,
                                          rng.child("cell" + std::to_string(k))));
    if (spec.kind == ModelKind::mix_lstm) {
      // Logits drawn i.i.d. Uniform(-0.1, 0.1).
      Rng lr = rng.child("mix.logits");
      m.mix_logits = Tensor({spec.T, spec.K});
      for (double& v : m.mix_logits.values) v = lr.uniform(-0.1, 0.1);
    }
    return m;
  }
  // lstm family
  if (spec.num_layers == 1) {
    m.cells.push_back(detail::init_cell(H, in, out, true, spec.use_layer_norm, rng.child("cell0")));
  } else {
    m.cells.push_back(detail::init_cell(H, in, out, false, spec.use_layer_norm, rng.child("cell0")));
    m.cells.push_back(detail::init_cell(H, H, out, true, spec.use_layer_norm, rng.child("cell1")));
  }
  return m;
}

// Logit table whose row-softmax is exactly one-hot on the given schedule
// (used to realize a shiftLSTM inside a mixLSTM).
inline Tensor one_hot_logits(const ShiftSchedule& sched, int K) {
  Tensor logits = Tensor::full({sched.T, K}, -1e30);
  for (int t = 0; t < sched.T; ++t) logits.at(t, sched.assignment[t]) = 0.0;
  return logits;
}

// ---------------------------------------------------------------------------
// Tape-based forward pass
// ---------------------------------------------------------------------------

struct BuildOptions {
  bool params_require_grad = true;
  bool inputs_require_grad = false;
};

// One forward pass over a batch. Owns the tape plus the input tensors the
// leaves are bound to; the ModelState must outlive it.
struct ForwardGraph {
  ad::Tape tape;
  std::vector<Tensor> input_store;                        // per t: B x d
  std::vector<ad::Var> inputs;                            // leaves over input_store
  std::vector<ad::Var> outputs;                           // per t: B x out (logits if classification)
  ad::Var lambda;                                         // mix only: T x K coefficients
  std::vector<std::pair<std::string, ad::Var>> param_leaves;
  int batch = 0;

  ForwardGraph() = default;
  ForwardGraph(const ForwardGraph&) = delete;
  ForwardGraph& operator=(const ForwardGraph&) = delete;
};

namespace detail {

struct CellVars {
  ad::Var W_i, W_c, W_f, W_o, b_i, b_c, b_f, b_o, W_y, b_y;
  ad::Var ln_gain[4], ln_bias[4];
  bool has_ln = false;
};

inline CellVars leaf_cell(ForwardGraph& g, CellParams& c, const std::string& prefix,
                          bool requires_grad) {
  CellVars v;
  auto leaf = [&](const std::string& name, Tensor& t) {
    ad::Var var = g.tape.leaf(&t, requires_grad);
    g.param_leaves.emplace_back(prefix + name, var);
    return var;
  };
  v.W_i = leaf("W_i", c.W_i);
  v.W_c = leaf("W_c", c.W_c);
  v.W_f = leaf("W_f", c.W_f);
  v.W_o = leaf("W_o", c.W_o);
  v.b_i = leaf("b_i", c.b_i);
  v.b_c = leaf("b_c", c.b_c);
  v.b_f = leaf("b_f", c.b_f);
  v.b_o = leaf("b_o", c.b_o);
  if (c.has_head()) {
    v.W_y = leaf("W_y", c.W_y);
    v.b_y = leaf("b_y", c.b_y);
  }
  if (c.ln) {
    v.has_ln = true;
    v.ln_gain[0] = leaf("ln.gain_i", c.ln->gain_i);
    v.ln_bias[0] = leaf("ln.bias_i", c.ln->bias_i);
    v.ln_gain[1] = leaf("ln.gain_c", c.ln->gain_c);
    v.ln_bias[1] = leaf("ln.bias_c", c.ln->bias_c);
    v.ln_gain[2] = leaf("ln.gain_f", c.ln->gain_f);
    v.ln_bias[2] = leaf("ln.bias_f", c.ln->bias_f);
    v.ln_gain[3] = leaf("ln.gain_o", c.ln->gain_o);
    v.ln_bias[3] = leaf("ln.bias_o", c.ln->bias_o);
  }
  return v;
}

// Mixes the per-cell leaves at one time step into a virtual cell.
inline CellVars mix_cells(ForwardGraph& g, const std::vector<CellVars>& cells,
                          ad::Var lambda_row) {
  auto mixed = [&](ad::Var CellVars::* member) {
    std::vector<ad::Var> parts;
    parts.reserve(cells.size());
    for (const CellVars& c : cells) parts.push_back(c.*member);
    return g.tape.mix(parts, lambda_row);
  };
  CellVars v;
  v.W_i = mixed(&CellVars::W_i);
  v.W_c = mixed(&CellVars::W_c);
  v.W_f = mixed(&CellVars::W_f);
  v.W_o = mixed(&CellVars::W_o);
  v.b_i = mixed(&CellVars::b_i);
  v.b_c = mixed(&CellVars::b_c);
  v.b_f = mixed(&CellVars::b_f);
  v.b_o = mixed(&CellVars::b_o);
  v.W_y = mixed(&CellVars::W_y);
  v.b_y = mixed(&CellVars::b_y);
  v.has_ln = false;
  return v;
}

struct StepState {
  ad::Var h, c;
};

inline StepState lstm_step_tape(ForwardGraph& g, const CellVars& cv, StepState prev,
                                ad::Var x_t, bool use_ln) {
  ad::Tape& tp = g.tape;
  ad::Var hx = tp.concat_cols(prev.h, x_t);
  ad::Var pre_i = tp.affine(hx, cv.W_i, cv.b_i);
  ad::Var pre_c = tp.affine(hx, cv.W_c, cv.b_c);
  ad::Var pre_f = tp.affine(hx, cv.W_f, cv.b_f);
  ad::Var pre_o = tp.affine(hx, cv.W_o, cv.b_o);
  if (use_ln) {
    check(cv.has_ln, "forward: layer norm enabled but cell has no norm parameters");
    pre_i = tp.layer_norm_rows(pre_i, cv.ln_gain[0], cv.ln_bias[0], kLayerNormEps);
    pre_c = tp.layer_norm_rows(pre_c, cv.ln_gain[1], cv.ln_bias[1], kLayerNormEps);
    pre_f = tp.layer_norm_rows(pre_f, cv.ln_gain[2], cv.ln_bias[2], kLayerNormEps);
    pre_o = tp.layer_norm_rows(pre_o, cv.ln_gain[3], cv.ln_bias[3], kLayerNormEps);
  }
  ad::Var i_g = tp.sigmoid(pre_i);
  ad::Var c_t = tp.tanh_(pre_c);
  ad::Var f_g = tp.sigmoid(pre_f);
  ad::Var o_g = tp.sigmoid(pre_o);
  StepState next;
  next.c = tp.add(tp.mul(i_g, c_t), tp.mul(f_g, prev.c));
  next.h = tp.mul(o_g, tp.tanh_(next.c));
  return next;
}

}  // namespace detail

// Builds the forward graph for a batch of examples (indices into the dataset).
inline void build_forward(ForwardGraph& g, ModelState& model, const Dataset& ds,
                          const std::vector<std::size_t>& indices,
                          const BuildOptions& opt = {}) {
  const ModelSpec& spec = model.spec;
  validate_spec(spec);
  check(ds.header.d == spec.input_dim, "forward: dataset width does not match spec input_dim");
  check(ds.header.T == spec.T, "forward: dataset T does not match spec");
  const int B = static_cast<int>(indices.size());
  check(B >= 1, "forward: empty batch");
  const int T = spec.T, d = spec.input_dim;
  g.batch = B;

  // Input leaves, one per step.
  g.input_store.resize(T);
  g.inputs.reserve(T);
  for (int t = 0; t < T; ++t) {
    Tensor xt({B, d});
    for (int b = 0; b < B; ++b) {
      const Tensor& x = ds.examples[indices[b]].x;
      for (int j = 0; j < d; ++j) xt.at(b, j) = x.at(t, j);
    }
    g.input_store[t] = std::move(xt);
  }
  for (int t = 0; t < T; ++t)
    g.inputs.push_back(g.tape.leaf(&g.input_store[t], opt.inputs_require_grad));

  // Standardization (when trained with it) runs through tape ops so saliency
  // gradients still refer to raw features.
  std::vector<ad::Var> norm_inputs(T);
  if (model.standardizes()) {
    check(static_cast<int>(model.feat_mean.size()) == d &&
              static_cast<int>(model.feat_scale.size()) == d,
          "forward: feature stats width mismatch");
    Tensor mean_rows({B, d}), inv_rows({B, d});
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < d; ++j) {
        mean_rows.at(b, j) = model.feat_mean.values[j];
        inv_rows.at(b, j) = 1.0 / model.feat_scale.values[j];
      }
    ad::Var mean_c = g.tape.constant(std::move(mean_rows));
    ad::Var inv_c = g.tape.constant(std::move(inv_rows));
    for (int t = 0; t < T; ++t)
      norm_inputs[t] = g.tape.mul(g.tape.sub(g.inputs[t], mean_c), inv_c);
  } else {
    for (int t = 0; t < T; ++t) norm_inputs[t] = g.inputs[t];
  }

  // Augmented inputs (+t scalar or temporal encoding), constant per step.
  std::vector<ad::Var> step_inputs(T);
  for (int t = 0; t < T; ++t) {
    if (spec.aug_dim() == 0) {
      step_inputs[t] = norm_inputs[t];
      continue;
    }
    Tensor aug({B, spec.aug_dim()});
    if (spec.aug_dim() == 1) {
      const double v = static_cast<double>(t + 1) / static_cast<double>(T);
      for (int b = 0; b < B; ++b) aug.at(b, 0) = v;
    } else {
      Tensor te = temporal_encoding(t + 1, spec.te_dim);
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < spec.te_dim; ++j) aug.at(b, j) = te.values[j];
    }
    step_inputs[t] = g.tape.concat_cols(norm_inputs[t], g.tape.constant(std::move(aug)));
  }

  g.outputs.resize(T);
  ad::Tape& tp = g.tape;

  if (!is_recurrent(spec.kind)) {
    ad::Var W1 = tp.leaf(&model.mlp.W1, opt.params_require_grad);
    ad::Var b1 = tp.leaf(&model.mlp.b1, opt.params_require_grad);
    ad::Var W2 = tp.leaf(&model.mlp.W2, opt.params_require_grad);
    ad::Var b2 = tp.leaf(&model.mlp.b2, opt.params_require_grad);
    g.param_leaves = {{"mlp.W1", W1}, {"mlp.b1", b1}, {"mlp.W2", W2}, {"mlp.b2", b2}};
    for (int t = 0; t < T; ++t) {
      ad::Var hidden = tp.relu(tp.affine(step_inputs[t], W1, b1));
      g.outputs[t] = tp.affine(hidden, W2, b2);
    }
    return;
  }

  std::vector<detail::CellVars> cell_vars;
  for (std::size_t c = 0; c < model.cells.size(); ++c)
    cell_vars.push_back(detail::leaf_cell(g, model.cells[c], "cell" + std::to_string(c) + ".",
                                          opt.params_require_grad));

  if (spec.kind == ModelKind::mix_lstm) {
    ad::Var logits = tp.leaf(&model.mix_logits, opt.params_require_grad);
    g.param_leaves.emplace_back("mix.logits", logits);
    g.lambda = tp.softmax_rows(logits);
  }

  ShiftSchedule sched;
  if (spec.kind == ModelKind::shift_lstm) sched = shift_schedule(T, spec.K);

  Tensor zeros({B, spec.hidden});
  detail::StepState state{tp.constant(zeros), tp.constant(zeros)};
  detail::StepState state2 = state;  // second layer, when stacked
  const bool stacked = spec.num_layers == 2;

  for (int t = 0; t < T; ++t) {
    detail::CellVars step_cell;
    switch (spec.kind) {
      case ModelKind::mix_lstm:
        step_cell = detail::mix_cells(g, cell_vars, tp.row(g.lambda, t));
        break;
      case ModelKind::shift_lstm:
        step_cell = cell_vars[static_cast<std::size_t>(sched.assignment[t])];
        break;
      default:
        step_cell = cell_vars[0];
    }
    state = detail::lstm_step_tape(g, step_cell, state, step_inputs[t], spec.use_layer_norm);
    detail::CellVars head_cell = step_cell;
    ad::Var top_h = state.h;
    if (stacked) {
      state2 = detail::lstm_step_tape(g, cell_vars[1], state2, state.h, spec.use_layer_norm);
      head_cell = cell_vars[1];
      top_h = state2.h;
    }
    g.outputs[t] = tp.affine(top_h, head_cell.W_y, head_cell.b_y);
  }
}

// Copies gradients accumulated on parameter leaves back into the parameter
// tensors' grad buffers (aligned with named_params()).
inline void collect_param_grads(ForwardGraph& g, ModelState& model) {
  auto named = model.named_params();
  check(named.size() == g.param_leaves.size(), "collect_param_grads: leaf/param mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    check(named[i].first == g.param_leaves[i].first, "collect_param_grads: order mismatch");
    Tensor& t = *named[i].second;
    t.ensure_grad();
    const auto& leaf_grad = g.param_leaves[i].second.node()->grad;
    if (leaf_grad.empty()) continue;  // parameter not on the loss path
    for (std::size_t j = 0; j < t.grad.size(); ++j) t.grad[j] += leaf_grad[j];
  }
}

// Single-example forward. Regression: vector of T predictions. Classification:
// T x 2 matrix of per-step class probabilities.
inline Tensor forward(ModelState& model, const Tensor& x) {
  check(x.rows() == model.spec.T && x.cols() == model.spec.input_dim,
        "forward: input must be T x input_dim");
  Dataset tmp;
  tmp.header.T = model.spec.T;
  tmp.header.d = model.spec.input_dim;
  tmp.header.task = model.spec.task;
  Example ex;
  ex.id = "_";
  ex.x = x;
  tmp.examples.push_back(std::move(ex));
  ForwardGraph g;
  BuildOptions opt;
  opt.params_require_grad = false;
  build_forward(g, model, tmp, {0}, opt);
  const int T = model.spec.T;
  if (model.spec.task == Task::regression) {
    Tensor out({T});
    for (int t = 0; t < T; ++t) out.values[t] = g.outputs[t].value().values[0];
    check_finite(out, "forward output");
    return out;
  }
  Tensor out({T, 2});
  for (int t = 0; t < T; ++t) {
    Tensor row({2}, {g.outputs[t].value().values[0], g.outputs[t].value().values[1]});
    Tensor p = softmax(row);
    out.at(t, 0) = p.values[0];
    out.at(t, 1) = p.values[1];
  }
  check_finite(out, "forward output");
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (versioned model files)
// ---------------------------------------------------------------------------

inline json spec_to_json(const ModelSpec& s) {
  return json{{"kind", to_string(s.kind)},
              {"input_dim", s.input_dim},
              {"hidden", s.hidden},
              {"K", s.K},
              {"T", s.T},
              {"num_layers", s.num_layers},
              {"te_dim", s.te_dim},
              {"use_layer_norm", s.use_layer_norm},
              {"task", to_string(s.task)},
              {"seed", s.seed}};
}

inline ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.kind = model_kind_from_string(j.at("kind").get<std::string>());
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.K = j.at("K").get<int>();
  s.T = j.at("T").get<int>();
  s.num_layers = j.at("num_layers").get<int>();
  s.te_dim = j.at("te_dim").get<int>();
  s.use_layer_norm = j.at("use_layer_norm").get<bool>();
  s.task = task_from_string(j.at("task").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline json model_to_json(ModelState& m) {
  json params = json::array();
  for (auto& [name, tensor] : m.named_params()) {
    params.push_back(json{{"name", name}, {"shape", tensor->shape}, {"values", tensor->values}});
  }
  json j{{"format_version", 1},
         {"spec", spec_to_json(m.spec)},
         {"params", params},
         {"meta", json{{"epochs_run", m.meta.epochs_run},
                       {"best_epoch", m.meta.best_epoch},
                       {"best_val", m.meta.best_val},
                       {"selection", m.meta.selection}}}};
  if (m.standardizes())
    j["feature_stats"] = json{{"mean", m.feat_mean.values}, {"scale", m.feat_scale.values}};
  return j;
}

inline ModelState model_from_json(const json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw DataFormatError("model file: unsupported format_version");
  ModelState m = init_model(spec_from_json(j.at("spec")));
  auto named = m.named_params();
  const json& params = j.at("params");
  if (params.size() != named.size())
    throw DataFormatError("model file: parameter count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const json& p = params[i];
    if (p.at("name").get<std::string>() != named[i].first)
      throw DataFormatError("model file: unexpected parameter " +
                            p.at("name").get<std::string>());
    auto shape = p.at("shape").get<std::vector<int>>();
    auto values = p.at("values").get<std::vector<double>>();
    if (shape != named[i].second->shape || values.size() != named[i].second->size())
      throw DataFormatError("model file: shape mismatch for " + named[i].first);
    named[i].second->values = std::move(values);
  }
  const json& meta = j.at("meta");
  m.meta.epochs_run = meta.value("epochs_run", 0);
  m.meta.best_epoch = meta.value("best_epoch", 0);
  m.meta.best_val = meta.value("best_val", 0.0);
  m.meta.selection = meta.value("selection", std::string());
  if (j.contains("feature_stats")) {
    m.feat_mean = Tensor::vector(j.at("feature_stats").at("mean").get<std::vector<double>>());
    m.feat_scale = Tensor::vector(j.at("feature_stats").at("scale").get<std::vector<double>>());
    if (m.feat_mean.size() != static_cast<std::size_t>(m.spec.input_dim) ||
        m.feat_scale.size() != m.feat_mean.size())
      throw DataFormatError("model file: feature stats width mismatch");
  }
  return m;
}

inline void save_model(ModelState& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "save_model: cannot open " + path.string());
  out << model_to_json(m).dump(2) << "\n";
  check(out.good(), "save_model: write failed");
}

inline ModelState load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataFormatError("load_model: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataFormatError("load_model: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace tcs
