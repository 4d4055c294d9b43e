#include <gtest/gtest.h>

#include <cmath>

#include "tcs/cells.hpp"
#include "tcs/rng.hpp"

using namespace tcs;

namespace {

CellParams scalar_cell(double w, double wy = 0.0, double by = 0.0) {
  CellParams c;
  c.W_i = Tensor({1, 2}, {w, w});
  c.W_c = Tensor({1, 2}, {w, w});
  c.W_f = Tensor({1, 2}, {w, w});
  c.W_o = Tensor({1, 2}, {w, w});
  c.b_i = Tensor({1});
  c.b_c = Tensor({1});
  c.b_f = Tensor({1});
  c.b_o = Tensor({1});
  c.W_y = Tensor({1, 1}, {wy});
  c.b_y = Tensor({1}, {by});
  return c;
}

CellParams random_cell(int hidden, int input, int out, Rng& rng) {
  auto rnd = [&rng](std::vector<int> shape) {
    Tensor t(std::move(shape));
    for (double& v : t.values) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  CellParams c;
  c.W_i = rnd({hidden, hidden + input});
  c.W_c = rnd({hidden, hidden + input});
  c.W_f = rnd({hidden, hidden + input});
  c.W_o = rnd({hidden, hidden + input});
  c.b_i = rnd({hidden});
  c.b_c = rnd({hidden});
  c.b_f = rnd({hidden});
  c.b_o = rnd({hidden});
  c.W_y = rnd({out, hidden});
  c.b_y = rnd({out});
  return c;
}

}  // namespace

TEST(LstmStep, AllZerosGivesZeroState) {
  CellParams c = scalar_cell(0.0);
  auto [h, cc] = lstm_step(c, Tensor({1}), Tensor({1}), Tensor({1}));
  EXPECT_EQ(h.values[0], 0.0);  // o=0.5, tanh(C)=0
  EXPECT_EQ(cc.values[0], 0.0);
}

TEST(LstmStep, SaturatedForgetGatePreservesCell) {
  CellParams c = scalar_cell(0.0);
  c.b_f = Tensor({1}, {20.0});
  c.b_i = Tensor({1}, {-20.0});
  const double prev = 0.7345;
  auto [h, cc] = lstm_step(c, Tensor({1}), Tensor({1}, {prev}), Tensor({1}));
  EXPECT_NEAR(cc.values[0], prev, 1e-8);
}

// Hand-evaluated scalar worked example: i=f=o=sigmoid(1), Ctil=tanh(1),
// C = sigmoid(1)*tanh(1), h = sigmoid(1)*tanh(C). The in-test oracle
// recomputes the composition directly from the gate formulas.
TEST(LstmStep, ScalarWorkedExample) {
  CellParams c = scalar_cell(1.0);
  auto [h, cc] = lstm_step(c, Tensor({1}), Tensor({1}), Tensor({1}, {1.0}));
  const double sig1 = 1.0 / (1.0 + std::exp(-1.0));
  const double expected_c = sig1 * std::tanh(1.0);
  const double expected_h = sig1 * std::tanh(expected_c);
  EXPECT_NEAR(expected_c, 0.556769941, 1e-9);
  EXPECT_NEAR(expected_h, 0.369606353, 1e-9);
  EXPECT_NEAR(cc.values[0], expected_c, 1e-6);
  EXPECT_NEAR(h.values[0], expected_h, 1e-6);
}

TEST(OutputHead, ZeroHeadGivesZero) {
  CellParams c = scalar_cell(0.0);
  Tensor y = output_head(c, Tensor({1}), Task::regression);
  EXPECT_EQ(y.values[0], 0.0);
}

TEST(OutputHead, EqualLogitsGiveUniformProbs) {
  CellParams c;
  c.W_i = Tensor({2, 3});
  c.W_y = Tensor({2, 2});
  c.b_y = Tensor({2}, {3.3, 3.3});
  Tensor p = output_head(c, Tensor({2}), Task::classification);
  EXPECT_NEAR(p.values[0], 0.5, 1e-15);
  EXPECT_NEAR(p.values[1], 0.5, 1e-15);
}

TEST(OutputHead, AffineArithmetic) {
  CellParams c;
  c.W_i = Tensor({1, 2});
  c.W_y = Tensor({1, 1}, {2.0});
  c.b_y = Tensor({1}, {1.0});
  Tensor y = output_head(c, Tensor({1}, {3.0}), Task::regression);
  EXPECT_NEAR(y.values[0], 7.0, 1e-12);
}

TEST(ShiftSchedule, PaperFourStepExample) {
  ShiftSchedule s = shift_schedule(4, 2);
  EXPECT_EQ(s.assignment, (std::vector<int>{0, 0, 1, 1}));
}

TEST(ShiftSchedule, BlockArithmetic) {
  ShiftSchedule s = shift_schedule(48, 8);
  EXPECT_EQ(s.block, 6);
  EXPECT_EQ(s.assignment[6], 1);  // t = 7, 1-indexed
}

TEST(ShiftSchedule, DegenerateK1) {
  ShiftSchedule s = shift_schedule(30, 1);
  for (int a : s.assignment) EXPECT_EQ(a, 0);
}

TEST(ShiftSchedule, IdentityWhenKEqualsT) {
  ShiftSchedule s = shift_schedule(5, 5);
  EXPECT_EQ(s.assignment, (std::vector<int>{0, 1, 2, 3, 4}));
}

// The assignment formula occupies ceil(T/block) blocks; that equals K
// whenever K divides T, and can be smaller otherwise (e.g. T=7, K=5 uses
// only 4 cells).
TEST(ShiftSchedule, NondecreasingWithOccupiedBlockCount) {
  for (int T : {7, 30, 48}) {
    for (int K = 1; K <= T; ++K) {
      ShiftSchedule s = shift_schedule(T, K);
      int distinct = 1;
      for (int t = 1; t < T; ++t) {
        ASSERT_GE(s.assignment[t], s.assignment[t - 1]);
        if (s.assignment[t] != s.assignment[t - 1]) ++distinct;
      }
      const int occupied = std::min(K, (T + s.block - 1) / s.block);
      EXPECT_EQ(distinct, occupied) << "T=" << T << " K=" << K;
      if (T % K == 0) EXPECT_EQ(distinct, K);
    }
  }
}

TEST(ShiftSchedule, RejectsBadK) {
  EXPECT_THROW(shift_schedule(4, 5), ValidationError);
  EXPECT_THROW(shift_schedule(4, 0), ValidationError);
}

TEST(MixingCoefficients, UniformOnZeroLogits) {
  MixBank bank;
  Rng rng(1);
  bank.cells = {random_cell(1, 1, 1, rng), random_cell(1, 1, 1, rng)};
  bank.logits = Tensor({3, 2});
  Tensor lam = mixing_coefficients(bank);
  for (double v : lam.values) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(MixingCoefficients, ClosedFormRow) {
  MixBank bank;
  Rng rng(2);
  bank.cells = {random_cell(1, 1, 1, rng), random_cell(1, 1, 1, rng)};
  bank.logits = Tensor({1, 2}, {10.0, -10.0});
  Tensor lam = mixing_coefficients(bank);
  EXPECT_NEAR(lam.at(0, 0), 0.9999999979388463, 1e-12);
  EXPECT_NEAR(lam.at(0, 1), 2.0611536181902033e-09, 1e-15);
}

TEST(MixingCoefficients, SingleCellIsAlwaysOne) {
  MixBank bank;
  Rng rng(3);
  bank.cells = {random_cell(2, 1, 1, rng)};
  bank.logits = Tensor({4, 1}, {0.3, -2.0, 5.0, 0.0});
  Tensor lam = mixing_coefficients(bank);
  for (double v : lam.values) EXPECT_EQ(v, 1.0);
}

TEST(MixParams, OneHotSelectsCellExactly) {
  Rng rng(4);
  MixBank bank;
  bank.cells = {random_cell(2, 3, 1, rng), random_cell(2, 3, 1, rng),
                random_cell(2, 3, 1, rng)};
  bank.logits = Tensor::full({4, 3}, -1e30);
  bank.logits.at(2, 1) = 0.0;  // t=3 one-hot on cell 1
  for (int t = 0; t < 4; ++t)
    if (t != 2) bank.logits.at(t, 0) = 0.0;
  CellParams mixed = mix_params(bank, 3);
  EXPECT_EQ(mixed.W_i.values, bank.cells[1].W_i.values);
  EXPECT_EQ(mixed.b_y.values, bank.cells[1].b_y.values);
}

TEST(MixParams, MidpointOfConstantCells) {
  Rng rng(5);
  MixBank bank;
  CellParams zero = random_cell(2, 2, 1, rng);
  for (auto* t : {&zero.W_i, &zero.W_c, &zero.W_f, &zero.W_o, &zero.b_i, &zero.b_c, &zero.b_f,
                  &zero.b_o, &zero.W_y, &zero.b_y})
    std::fill(t->values.begin(), t->values.end(), 0.0);
  CellParams two = zero;
  for (auto* t : {&two.W_i, &two.W_c, &two.W_f, &two.W_o, &two.b_i, &two.b_c, &two.b_f,
                  &two.b_o, &two.W_y, &two.b_y})
    std::fill(t->values.begin(), t->values.end(), 2.0);
  bank.cells = {zero, two};
  bank.logits = Tensor({1, 2});  // uniform
  CellParams mixed = mix_params(bank, 1);
  for (double v : mixed.W_i.values) EXPECT_EQ(v, 1.0);
  for (double v : mixed.b_y.values) EXPECT_EQ(v, 1.0);
}

TEST(MixParams, MatchesWeightedSumOracle) {
  Rng rng(6);
  MixBank bank;
  bank.cells = {random_cell(1, 1, 1, rng), random_cell(1, 1, 1, rng),
                random_cell(1, 1, 1, rng)};
  bank.logits = Tensor({2, 3}, {0.5, -0.3, 1.1, 0.0, 0.2, -0.7});
  Tensor lam = mixing_coefficients(bank);
  CellParams mixed = mix_params(bank, 2);
  // independent elementwise oracle
  double expected = 0.0;
  for (int k = 0; k < 3; ++k) expected += lam.at(1, k) * bank.cells[k].W_c.values[1];
  EXPECT_NEAR(mixed.W_c.values[1], expected, 1e-12);
  double expected_b = 0.0;
  for (int k = 0; k < 3; ++k) expected_b += lam.at(1, k) * bank.cells[k].b_o.values[0];
  EXPECT_NEAR(mixed.b_o.values[0], expected_b, 1e-12);
}

// mix is linear in lambda: mixing with a*l1 + (1-a)*l2 equals the blend of the
// two mixes, elementwise.
TEST(MixParams, LinearInLambda) {
  Rng rng(7);
  std::vector<CellParams> cells{random_cell(2, 2, 1, rng), random_cell(2, 2, 1, rng)};
  auto mix_with = [&](const std::vector<double>& lam) {
    Tensor out(cells[0].W_f.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
      out.values[i] = lam[0] * cells[0].W_f.values[i] + lam[1] * cells[1].W_f.values[i];
    return out;
  };
  const std::vector<double> l1{0.9, 0.1}, l2{0.3, 0.7};
  const double a = 0.25;
  const std::vector<double> blend{a * l1[0] + (1 - a) * l2[0], a * l1[1] + (1 - a) * l2[1]};
  Tensor lhs = mix_with(blend);
  Tensor m1 = mix_with(l1), m2 = mix_with(l2);
  for (std::size_t i = 0; i < lhs.size(); ++i)
    EXPECT_NEAR(lhs.values[i], a * m1.values[i] + (1 - a) * m2.values[i], 1e-12);
}

TEST(TemporalEncoding, FormulaAtOrigin) {
  Tensor te = temporal_encoding(0, 24);
  EXPECT_EQ(te.values[0], 0.0);  // sin(0)
  EXPECT_EQ(te.values[1], 1.0);  // cos(0)
}

TEST(TemporalEncoding, DirectEvaluation) {
  Tensor te = temporal_encoding(1, 24);
  EXPECT_NEAR(te.values[0], 0.8414709848078965, 1e-6);
  // t=5, i=2: sin(5 / 10000^(2/24)) = sin(2.3207944...) = 0.7316902 (recomputed)
  Tensor te5 = temporal_encoding(5, 24);
  EXPECT_NEAR(te5.values[2], 0.7316901707946841, 1e-5);
}

TEST(TemporalEncoding, BoundedAndDeterministic) {
  for (int t = 1; t <= 48; ++t) {
    Tensor a = temporal_encoding(t, 24);
    Tensor b = temporal_encoding(t, 24);
    EXPECT_EQ(a.values, b.values);
    for (double v : a.values) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}
