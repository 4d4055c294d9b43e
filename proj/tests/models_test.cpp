#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tcs/grad_check.hpp"
#include "tcs/losses.hpp"
#include "tcs/models.hpp"
#include "tcs/synthgen.hpp"

#include "test_util.hpp"

using namespace tcs;

namespace {

Tensor random_input(int T, int d, Rng& rng, double lo = 0.0, double hi = 10.0) {
  Tensor x({T, d});
  for (double& v : x.values) v = rng.uniform(lo, hi);
  return x;
}

ModelSpec base_spec(ModelKind kind, int T, int d, int hidden, Task task, int K = 0,
                    std::uint64_t seed = 1) {
  ModelSpec s;
  s.kind = kind;
  s.T = T;
  s.input_dim = d;
  s.hidden = hidden;
  s.K = K;
  s.task = task;
  s.seed = seed;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST(ParameterCount, ShapeArithmeticExamples) {
  EXPECT_EQ(parameter_count(base_spec(ModelKind::lstm, 30, 3, 2, Task::regression)), 51);
  EXPECT_EQ(parameter_count(base_spec(ModelKind::shift_lstm, 30, 3, 2, Task::regression, 30)),
            1530);
  EXPECT_EQ(parameter_count(base_spec(ModelKind::mix_lstm, 30, 3, 2, Task::regression, 2)), 162);
}

TEST(ParameterCount, AgreesWithInstantiatedTensors) {
  for (ModelKind kind : {ModelKind::nn, ModelKind::nn_t, ModelKind::lstm, ModelKind::lstm_t,
                         ModelKind::lstm_te, ModelKind::shift_lstm, ModelKind::mix_lstm}) {
    ModelSpec spec = base_spec(kind, 6, 3, 4, Task::classification, has_K(kind) ? 3 : 0);
    ModelState m = init_model(spec);
    long total = 0;
    for (auto& [name, t] : m.named_params()) total += static_cast<long>(t->size());
    EXPECT_EQ(total, parameter_count(spec)) << to_string(kind);
  }
  // layer-norm profile and the stacked variant
  ModelSpec ln = base_spec(ModelKind::lstm, 6, 3, 4, Task::classification);
  ln.use_layer_norm = true;
  ModelState mln = init_model(ln);
  long total = 0;
  for (auto& [name, t] : mln.named_params()) total += static_cast<long>(t->size());
  EXPECT_EQ(total, parameter_count(ln));

  ModelSpec stacked = base_spec(ModelKind::lstm, 6, 3, 4, Task::regression);
  stacked.num_layers = 2;
  ModelState ms = init_model(stacked);
  total = 0;
  for (auto& [name, t] : ms.named_params()) total += static_cast<long>(t->size());
  EXPECT_EQ(total, parameter_count(stacked));
}

TEST(InitModel, DeterministicPerSeed) {
  ModelSpec spec = base_spec(ModelKind::mix_lstm, 5, 3, 4, Task::regression, 2, 9);
  ModelState a = init_model(spec);
  ModelState b = init_model(spec);
  auto pa = a.named_params(), pb = b.named_params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second->values, pb[i].second->values);
  spec.seed = 10;
  ModelState c = init_model(spec);
  EXPECT_NE(c.named_params()[0].second->values, pa[0].second->values);
}

TEST(InitModel, MixLogitsWithinInitRange) {
  ModelSpec spec = base_spec(ModelKind::mix_lstm, 12, 3, 4, Task::regression, 3, 4);
  ModelState m = init_model(spec);
  for (double v : m.mix_logits.values) {
    EXPECT_GE(v, -0.1);
    EXPECT_LE(v, 0.1);
  }
}

// The tape forward of a plain LSTM must match threading the non-tape
// lstm_step + output_head over time.
TEST(Forward, TapeMatchesPlainStepLoop) {
  const int T = 7, d = 3, H = 5;
  ModelSpec spec = base_spec(ModelKind::lstm, T, d, H, Task::regression, 0, 21);
  ModelState m = init_model(spec);
  Rng rng(2);
  Tensor x = random_input(T, d, rng);
  Tensor pred = forward(m, x);

  Tensor h({H}), c({H});
  for (int t = 0; t < T; ++t) {
    Tensor xt({d});
    for (int j = 0; j < d; ++j) xt.values[j] = x.at(t, j);
    auto [h2, c2] = lstm_step(m.cells[0], h, c, xt);
    h = h2;
    c = c2;
    Tensor y = output_head(m.cells[0], h, Task::regression);
    EXPECT_NEAR(pred.values[t], y.values[0], 1e-13);
  }
}

TEST(Forward, MixWithOneCellEqualsPlainLstm) {
  const int T = 9, d = 3, H = 4;
  ModelSpec lspec = base_spec(ModelKind::lstm, T, d, H, Task::regression, 0, 5);
  ModelState lstm = init_model(lspec);
  ModelSpec mspec = base_spec(ModelKind::mix_lstm, T, d, H, Task::regression, 1, 5);
  ModelState mix = init_model(mspec);
  mix.cells[0] = lstm.cells[0];
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_input(T, d, rng);
    Tensor a = forward(lstm, x);
    Tensor b = forward(mix, x);
    ASSERT_LE(max_abs_diff(a, b), 1e-12);
  }
}

TEST(Forward, MixWithOneHotLambdaEqualsShift) {
  const int T = 8, d = 3, H = 4, K = 3;
  ModelSpec sspec = base_spec(ModelKind::shift_lstm, T, d, H, Task::regression, K, 13);
  ModelState shift = init_model(sspec);
  ModelSpec mspec = base_spec(ModelKind::mix_lstm, T, d, H, Task::regression, K, 13);
  ModelState mix = init_model(mspec);
  for (int k = 0; k < K; ++k) mix.cells[k] = shift.cells[k];
  mix.mix_logits = one_hot_logits(shift_schedule(T, K), K);
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_input(T, d, rng);
    Tensor a = forward(shift, x);
    Tensor b = forward(mix, x);
    ASSERT_LE(max_abs_diff(a, b), 1e-12);
  }
}

// The per-step network has no temporal coupling: permuting input steps
// permutes predictions identically.
TEST(Forward, NnIsPerStepIndependent) {
  const int T = 6, d = 3;
  ModelSpec spec = base_spec(ModelKind::nn, T, d, 8, Task::regression, 0, 3);
  ModelState m = init_model(spec);
  Rng rng(4);
  Tensor x = random_input(T, d, rng);
  Tensor perm_x({T, d});
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < d; ++j) perm_x.at(t, j) = x.at(perm[t], j);
  Tensor a = forward(m, x);
  Tensor b = forward(m, perm_x);
  for (int t = 0; t < T; ++t) EXPECT_NEAR(b.values[t], a.values[perm[t]], 1e-14);
}

// nn_t with weights that read only the appended feature recovers t/T exactly.
TEST(Forward, AppendedTimeFeatureIsExactlyTOverT) {
  const int T = 5, d = 2;
  ModelSpec spec = base_spec(ModelKind::nn_t, T, d, 1, Task::regression, 0, 8);
  ModelState m = init_model(spec);
  m.mlp.W1 = Tensor({1, 3}, {0.0, 0.0, 1.0});  // picks the appended column
  m.mlp.b1 = Tensor({1});
  m.mlp.W2 = Tensor({1, 1}, {1.0});
  m.mlp.b2 = Tensor({1});
  Rng rng(5);
  Tensor x = random_input(T, d, rng);
  Tensor pred = forward(m, x);
  for (int t = 0; t < T; ++t)
    EXPECT_EQ(pred.values[t], static_cast<double>(t + 1) / T);  // relu(t/T) = t/T
}

// lstm_t / lstm_te forward equals a plain LSTM fed the explicitly augmented
// input with the same cell parameters.
TEST(Forward, AugmentedVariantsMatchExplicitConcatenation) {
  const int T = 6, d = 3, H = 4;
  Rng rng(6);
  for (ModelKind kind : {ModelKind::lstm_t, ModelKind::lstm_te}) {
    ModelSpec spec = base_spec(kind, T, d, H, Task::regression, 0, 17);
    spec.te_dim = 4;
    ModelState aug_model = init_model(spec);
    const int extra = spec.aug_dim();

    ModelSpec plain_spec = base_spec(ModelKind::lstm, T, d + extra, H, Task::regression, 0, 17);
    ModelState plain = init_model(plain_spec);
    plain.cells[0] = aug_model.cells[0];

    Tensor x = random_input(T, d, rng);
    Tensor xa({T, d + extra});
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < d; ++j) xa.at(t, j) = x.at(t, j);
      if (kind == ModelKind::lstm_t) {
        xa.at(t, d) = static_cast<double>(t + 1) / T;
      } else {
        Tensor te = temporal_encoding(t + 1, spec.te_dim);
        for (int j = 0; j < extra; ++j) xa.at(t, d + j) = te.values[j];
      }
    }
    Tensor a = forward(aug_model, x);
    Tensor b = forward(plain, xa);
    EXPECT_LE(max_abs_diff(a, b), 1e-13) << to_string(kind);
  }
}

TEST(Forward, ClassificationEmitsProbabilityPairs) {
  ModelSpec spec = base_spec(ModelKind::lstm, 4, 2, 3, Task::classification, 0, 2);
  ModelState m = init_model(spec);
  Rng rng(7);
  Tensor x = random_input(4, 2, rng);
  Tensor probs = forward(m, x);
  ASSERT_EQ(probs.shape, (std::vector<int>{4, 2}));
  for (int t = 0; t < 4; ++t) {
    EXPECT_GT(probs.at(t, 0), 0.0);
    EXPECT_GT(probs.at(t, 1), 0.0);
    EXPECT_NEAR(probs.at(t, 0) + probs.at(t, 1), 1.0, 1e-12);
  }
}

TEST(Forward, DeterministicGivenStateAndInput) {
  ModelSpec spec = base_spec(ModelKind::mix_lstm, 5, 2, 3, Task::regression, 2, 11);
  ModelState m = init_model(spec);
  Rng rng(8);
  Tensor x = random_input(5, 2, rng);
  Tensor a = forward(m, x);
  Tensor b = forward(m, x);
  EXPECT_EQ(a.values, b.values);
}

TEST(Forward, StackedLstmRuns) {
  ModelSpec spec = base_spec(ModelKind::lstm, 5, 2, 3, Task::regression, 0, 12);
  spec.num_layers = 2;
  ModelState m = init_model(spec);
  Rng rng(9);
  Tensor x = random_input(5, 2, rng);
  Tensor pred = forward(m, x);
  EXPECT_EQ(pred.size(), 5u);
}

TEST(Forward, LayerNormProfileRuns) {
  ModelSpec spec = base_spec(ModelKind::lstm, 5, 2, 3, Task::classification, 0, 13);
  spec.use_layer_norm = true;
  ModelState m = init_model(spec);
  Rng rng(10);
  Tensor x = random_input(5, 2, rng);
  Tensor probs = forward(m, x);
  EXPECT_EQ(probs.rows(), 5);
}

TEST(Serialization, RoundTripForwardIsBitIdentical) {
  const auto path = std::filesystem::temp_directory_path() / "tcs_model.json";
  for (ModelKind kind : {ModelKind::nn_t, ModelKind::lstm_te, ModelKind::shift_lstm,
                         ModelKind::mix_lstm}) {
    ModelSpec spec = base_spec(kind, 6, 3, 4, Task::classification, has_K(kind) ? 2 : 0, 19);
    ModelState m = init_model(spec);
    save_model(m, path);
    ModelState back = load_model(path);
    Rng rng(20);
    Tensor x = random_input(6, 3, rng);
    Tensor a = forward(m, x);
    Tensor b = forward(back, x);
    EXPECT_EQ(a.values, b.values) << to_string(kind);
  }
}

TEST(Serialization, CorruptedParameterNameRejected) {
  const auto path = std::filesystem::temp_directory_path() / "tcs_model_bad.json";
  ModelSpec spec = base_spec(ModelKind::lstm, 4, 2, 3, Task::regression, 0, 1);
  ModelState m = init_model(spec);
  json j = model_to_json(m);
  j["params"][0]["name"] = "cell0.W_bogus";
  std::ofstream(path) << j.dump();
  EXPECT_THROW(load_model(path), DataFormatError);
}

TEST(ValidateSpec, RejectsContractViolations) {
  EXPECT_THROW(validate_spec(base_spec(ModelKind::shift_lstm, 4, 2, 3, Task::regression, 5)),
               ValidationError);  // K > T
  ModelSpec two_layer_mix = base_spec(ModelKind::mix_lstm, 4, 2, 3, Task::regression, 2);
  two_layer_mix.num_layers = 2;
  EXPECT_THROW(validate_spec(two_layer_mix), ValidationError);
  ModelSpec odd_te = base_spec(ModelKind::lstm_te, 4, 2, 3, Task::regression);
  odd_te.te_dim = 7;
  EXPECT_THROW(validate_spec(odd_te), ValidationError);
  ModelSpec k_on_lstm = base_spec(ModelKind::lstm, 4, 2, 3, Task::regression);
  k_on_lstm.K = 2;
  EXPECT_THROW(validate_spec(k_on_lstm), ValidationError);
}

// Fast regression guard; the acceptance suite runs the full seven-kind check.
TEST(GradCheckModels, MixLstmFullObjective) {
  const int T = 5, d = 3, H = 4;
  Dataset ds = testutil::dense_dataset(6, T, d, 2, Task::regression, 33);
  ModelSpec spec = base_spec(ModelKind::mix_lstm, T, d, H, Task::regression, 2, 7);
  ModelState m = init_model(spec);
  GradCheckReport rep = testutil::model_grad_check(m, ds, 0.1);
  EXPECT_LE(rep.max_rel_error, 1e-4);
}

TEST(GradCheckModels, LayerNormProfile) {
  const int T = 5, d = 3, H = 4;
  Dataset ds = testutil::dense_dataset(6, T, d, 0, Task::classification, 44);
  ModelSpec spec = base_spec(ModelKind::lstm, T, d, H, Task::classification, 0, 7);
  spec.use_layer_norm = true;
  ModelState m = init_model(spec);
  GradCheckReport rep = testutil::model_grad_check(m, ds, 0.0);
  EXPECT_LE(rep.max_rel_error, 1e-4);
}

TEST(GradCheckModels, StackedLstm) {
  const int T = 5, d = 3, H = 4;
  Dataset ds = testutil::dense_dataset(6, T, d, 2, Task::regression, 55);
  ModelSpec spec = base_spec(ModelKind::lstm, T, d, H, Task::regression, 0, 7);
  spec.num_layers = 2;
  ModelState m = init_model(spec);
  GradCheckReport rep = testutil::model_grad_check(m, ds, 0.0);
  // second-layer gradients include coordinates near the finite-difference
  // noise floor at this scale
  EXPECT_LE(rep.max_rel_error, 1e-3);
}
