#include <gtest/gtest.h>

#include <cmath>

#include "tcs/adam.hpp"
#include "tcs/grad_check.hpp"
#include "tcs/numerics.hpp"
#include "tcs/rng.hpp"

using namespace tcs;

namespace {

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values) m = std::max(m, std::fabs(v));
  return m;
}

// ||Q^T Q - I||_inf for tall Q (or Q Q^T for wide).
double orthogonality_defect(const Tensor& q) {
  const int r = q.rows(), c = q.cols();
  const int m = std::min(r, c);
  double worst = 0.0;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      double dot = 0.0;
      if (r >= c) {
        for (int i = 0; i < r; ++i) dot += q.at(i, a) * q.at(i, b);
      } else {
        for (int j = 0; j < c; ++j) dot += q.at(a, j) * q.at(b, j);
      }
      worst = std::max(worst, std::fabs(dot - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c(43);
  EXPECT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Rng, ChildStreamsIndependentOfDrawOrder) {
  Rng a(7);
  a.uniform();
  a.uniform();
  Rng b(7);
  EXPECT_EQ(a.child("x").next_u64(), b.child("x").next_u64());
  EXPECT_NE(Rng(7).child("x").next_u64(), Rng(7).child("y").next_u64());
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double v = r.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(OrthogonalInit, OneByOneIsSignUnit) {
  Rng r(7);
  Tensor q = orthogonal_init(1, 1, r);
  EXPECT_NEAR(std::fabs(q.values[0]), 1.0, 1e-12);
}

TEST(OrthogonalInit, SquareIsOrthogonal) {
  Rng r(3);
  Tensor q = orthogonal_init(4, 4, r);
  EXPECT_LE(orthogonality_defect(q), 1e-10);
}

TEST(OrthogonalInit, RectangularBothWays) {
  Rng r1(5);
  Tensor tall = orthogonal_init(5, 3, r1);
  EXPECT_LE(orthogonality_defect(tall), 1e-10);
  Rng r2(5);
  Tensor wide = orthogonal_init(3, 5, r2);
  EXPECT_LE(orthogonality_defect(wide), 1e-10);
}

TEST(OrthogonalInit, Deterministic) {
  Rng r1(1), r2(1);
  Tensor a = orthogonal_init(3, 5, r1);
  Tensor b = orthogonal_init(3, 5, r2);
  EXPECT_EQ(a.values, b.values);
}

TEST(OrthogonalInit, DefectStaysTinyAcrossSizes) {
  Rng root(11);
  for (int n : {2, 8, 17, 33}) {
    Rng r = root.child(n);
    Tensor q = orthogonal_init(n, n, r);
    EXPECT_LE(orthogonality_defect(q), 1e-10) << "n=" << n;
  }
}

TEST(LayerNorm, ConstantVectorMapsToBias) {
  Tensor v({3}, {5.0, 5.0, 5.0});
  Tensor gain = Tensor::full({3}, 1.0);
  Tensor bias = Tensor::zeros({3});
  Tensor out = layer_norm(v, gain, bias);
  EXPECT_LE(max_abs(out), 1e-12);
}

TEST(LayerNorm, TwoPointExample) {
  Tensor v({2}, {1.0, -1.0});
  Tensor gain = Tensor::full({2}, 1.0);
  Tensor bias = Tensor::zeros({2});
  Tensor out = layer_norm(v, gain, bias, 1e-5);
  EXPECT_NEAR(out.values[0], 0.9999950000374997, 1e-12);
  EXPECT_NEAR(out.values[1], -0.9999950000374997, 1e-12);
}

TEST(LayerNorm, BiasShiftWithTinyEps) {
  Tensor v({2}, {2.0, 4.0});
  Tensor gain = Tensor::full({2}, 1.0);
  Tensor bias = Tensor::full({2}, 5.0);
  Tensor out = layer_norm(v, gain, bias, 1e-14);
  EXPECT_NEAR(out.values[0], 4.0, 1e-6);
  EXPECT_NEAR(out.values[1], 6.0, 1e-6);
}

TEST(Softmax, UniformOnEqualLogits) {
  Tensor out = softmax(Tensor({3}, {0.0, 0.0, 0.0}));
  for (double v : out.values) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ClosedFormPair) {
  Tensor out = softmax(Tensor({2}, {1.0, 2.0}));
  EXPECT_NEAR(out.values[0], 0.2689414213699951, 1e-6);
  EXPECT_NEAR(out.values[1], 0.7310585786300049, 1e-6);
}

TEST(Softmax, ShiftInvariance) {
  const double c = 123.456;
  Tensor a = softmax(Tensor({2}, {c, c + 1.0}));
  Tensor b = softmax(Tensor({2}, {0.0, 1.0}));
  EXPECT_EQ(a.values, b.values);
}

TEST(Softmax, AlwaysAProbabilityVector) {
  Rng r(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(r.uniform_int(8));
    Tensor logits({n});
    for (double& v : logits.values) v = r.uniform(-50.0, 50.0);
    Tensor p = softmax(logits);
    double sum = 0.0;
    for (double v : p.values) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Adam, ZeroGradIsIdentity) {
  Tensor p({3}, {1.0, -2.0, 0.5});
  p.ensure_grad();
  AdamState adam;
  const std::vector<double> before = p.values;
  adam.step({&p});
  EXPECT_EQ(p.values, before);
  EXPECT_EQ(adam.t_adam, 1);
}

TEST(Adam, FirstStepBiasCorrected) {
  Tensor p({1}, {1.0});
  p.ensure_grad();
  p.grad[0] = 2.0;
  AdamState adam;
  adam.step({&p});
  EXPECT_NEAR(p.values[0], 0.999, 1e-6);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Tensor p({2}, {0.3, -0.7});
    AdamState adam;
    Rng r(5);
    for (int i = 0; i < 50; ++i) {
      p.ensure_grad();
      p.grad[0] = r.uniform(-1, 1);
      p.grad[1] = r.uniform(-1, 1);
      adam.step({&p});
    }
    return p.values;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeMismatchIsStructuredError) {
  Tensor p({2}, {0.0, 0.0});
  p.ensure_grad();
  AdamState adam;
  adam.step({&p});
  Tensor q({3});
  q.ensure_grad();
  EXPECT_THROW(adam.step({&q}), ValidationError);
}

TEST(GradCheck, QuadraticIsExact) {
  Tensor w({1}, {3.0});
  auto eval = [&](bool with_grad) {
    if (with_grad) {
      w.ensure_grad();
      w.grad[0] = 2.0 * w.values[0];
    }
    return w.values[0] * w.values[0];
  };
  GradCheckReport rep = grad_check(eval, {&w});
  EXPECT_LE(rep.max_rel_error, 1e-9);
  EXPECT_FALSE(rep.kink_suspected);
}

TEST(GradCheck, AbsAtZeroFlagsKink) {
  Tensor w({1}, {0.0});
  auto eval = [&](bool with_grad) {
    if (with_grad) {
      w.ensure_grad();
      w.grad[0] = 0.0;  // subgradient at the kink
    }
    return std::fabs(w.values[0]);
  };
  GradCheckReport rep = grad_check(eval, {&w});
  EXPECT_TRUE(rep.kink_suspected);
}

TEST(GradCheck, NonFiniteProbeIsNumericError) {
  Tensor w({1}, {0.0});
  auto eval = [&](bool with_grad) {
    if (with_grad) {
      w.ensure_grad();
      w.grad[0] = 0.0;
    }
    return std::log(w.values[0]);  // -inf at 0, nan below
  };
  EXPECT_THROW(grad_check(eval, {&w}), NumericError);
}
