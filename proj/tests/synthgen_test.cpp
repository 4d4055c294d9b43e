#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tcs/synthgen.hpp"

using namespace tcs;

namespace {

// Independent triple-loop oracle for the stored targets.
double target_oracle(const Example& ex, const WeightSchedule& ws, int t /*1-indexed*/) {
  double y = 0.0;
  for (int i = 1; i <= ws.l; ++i)
    for (int j = 0; j < ws.d; ++j)
      y += ws.w_l[t - ws.l - 1][i - 1] * ex.x.at(t - ws.l + i - 1 - 1, j) *
           ws.w_d[t - ws.l - 1][j];
  return y;
}

bool is_simplex(const std::vector<double>& w, double tol = 1e-9) {
  double sum = 0.0;
  for (double v : w) {
    if (v <= 0.0) return false;
    sum += v;
  }
  return std::fabs(sum - 1.0) <= tol;
}

}  // namespace

TEST(Renormalize, AlreadyNormalizedIsFixedPoint) {
  auto w = renormalize({0.5, 0.5});
  EXPECT_EQ(w[0], 0.5);
  EXPECT_EQ(w[1], 0.5);
}

TEST(Renormalize, ClampThenDivideOracle) {
  auto w = renormalize({0.3, -0.1, 0.8});
  // clamp -> [0.3, 1e-6, 0.8], sum 1.100001
  EXPECT_NEAR(w[0], 0.3 / 1.100001, 1e-12);
  EXPECT_NEAR(w[1], 1e-6 / 1.100001, 1e-15);
  EXPECT_NEAR(w[2], 0.8 / 1.100001, 1e-12);
  EXPECT_NEAR(w[0], 0.2727270, 1e-6);
  EXPECT_NEAR(w[1], 9.09e-7, 1e-9);
  EXPECT_NEAR(w[2], 0.7272721, 1e-6);
}

TEST(Renormalize, SymmetricNegativesClampToUniform) {
  auto w = renormalize({-1.0, -1.0});
  EXPECT_EQ(w[0], 0.5);
  EXPECT_EQ(w[1], 0.5);
}

TEST(Renormalize, OutputAlwaysStrictSimplex) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_int(10));
    std::vector<double> w(m);
    for (double& v : w) v = rng.uniform(-5.0, 5.0);
    auto out = renormalize(w);
    double sum = 0.0;
    for (double v : out) {
      ASSERT_GT(v, 0.0);
      sum += v;
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SampleWeights, DeltaZeroIsConstantSchedule) {
  Rng rng(5);
  auto ws = sample_weights(30, 10, 10, 0.0, rng);
  ASSERT_EQ(ws.size(), 20u);
  for (const auto& w : ws) EXPECT_EQ(w, ws.front());
}

TEST(SampleWeights, PaperShapeAndSimplex) {
  Rng rng(9);
  auto ws = sample_weights(30, 10, 10, 0.3, rng);
  ASSERT_EQ(ws.size(), 20u);
  for (const auto& w : ws) {
    ASSERT_EQ(w.size(), 10u);
    EXPECT_TRUE(is_simplex(w));
  }
}

// Monte-Carlo oracle over the generator: larger delta means larger mean
// adjacent L1 drift.
TEST(SampleWeights, DriftGrowsWithDelta) {
  auto mean_drift = [](double delta) {
    Rng rng(123);
    double acc = 0.0;
    int count = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      Rng child = rng.child(static_cast<std::uint64_t>(rep));
      auto ws = sample_weights(12, 4, 6, delta, child);
      for (std::size_t t = 0; t + 1 < ws.size(); ++t) {
        double l1 = 0.0;
        for (std::size_t i = 0; i < ws[t].size(); ++i) l1 += std::fabs(ws[t + 1][i] - ws[t][i]);
        acc += l1;
        ++count;
      }
    }
    return acc / count;
  };
  EXPECT_GT(mean_drift(0.4), mean_drift(0.1));
}

TEST(SampleExample, AllGatesClosedGivesZero) {
  // delta=0 schedule; force z=0 by noting x is z*u, so a zero x row implies y=0.
  WeightSchedule ws;
  ws.T = 4;
  ws.l = 2;
  ws.d = 2;
  ws.w_l = {{0.5, 0.5}, {0.5, 0.5}};
  ws.w_d = {{0.5, 0.5}, {0.5, 0.5}};
  Example ex;
  ex.x = Tensor({4, 2});  // all zeros
  ex.y.resize(2);
  for (int t = 3; t <= 4; ++t) EXPECT_EQ(target_oracle(ex, ws, t), 0.0);
}

TEST(SampleExample, TinyWorkedValue) {
  WeightSchedule ws;
  ws.T = 3;
  ws.l = 2;
  ws.d = 2;
  ws.w_l = {{0.5, 0.5}};
  ws.w_d = {{0.25, 0.75}};
  Example ex;
  ex.id = "tiny";
  ex.x = Tensor({3, 2}, {1.0, 0.0, 0.0, 2.0, 0.0, 0.0});
  // y_3 = w_l' [x1; x2] w_d = 0.5*(1*0.25) + 0.5*(2*0.75) = 0.875
  EXPECT_NEAR(target_oracle(ex, ws, 3), 0.875, 1e-15);
}

TEST(SampleExample, StoredTargetsMatchTripleLoopOracle) {
  Rng rng(31);
  Rng wrng = rng.child("w");
  WeightSchedule ws = sample_weight_schedule(12, 4, 3, 0.2, wrng);
  Rng xrng = rng.child("x");
  Example ex = sample_example(12, 3, 4, ws, xrng, "ex0");
  ASSERT_EQ(ex.y.size(), 8u);
  for (int t = 5; t <= 12; ++t)
    EXPECT_NEAR(ex.y[t - 5], target_oracle(ex, ws, t), 1e-12);
  for (double v : ex.x.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
}

TEST(GenerateBenchmark, TwentyFiveTasksAtDefaults) {
  GenConfig cfg;
  cfg.n_train = 3;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.T = 12;
  cfg.l = 4;
  Rng rng(1);
  auto tasks = generate_benchmark(cfg, rng);
  EXPECT_EQ(tasks.size(), 25u);
}

TEST(GenerateBenchmark, DeterministicBytesAcrossReruns) {
  GenConfig cfg;
  cfg.deltas = {0.1};
  cfg.schedules_per_delta = 1;
  cfg.n_train = 4;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.T = 8;
  cfg.l = 3;
  auto run = [&] {
    Rng rng(77);
    auto tasks = generate_benchmark(cfg, rng);
    const auto path = std::filesystem::temp_directory_path() / "tcs_synth_det.jsonl";
    save_dataset(tasks[0].train, path);
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  EXPECT_EQ(run(), run());
}

TEST(GenerateBenchmark, EmptyTrainSplitIsValid) {
  GenConfig cfg;
  cfg.deltas = {0.0};
  cfg.schedules_per_delta = 1;
  cfg.n_train = 0;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.T = 8;
  cfg.l = 3;
  Rng rng(2);
  auto tasks = generate_benchmark(cfg, rng);
  EXPECT_TRUE(tasks[0].train.examples.empty());
  EXPECT_EQ(tasks[0].val.size(), 2u);
  EXPECT_EQ(tasks[0].test.size(), 2u);
}

TEST(GenerateBenchmark, DeltaZeroScheduleConstant) {
  GenConfig cfg;
  cfg.deltas = {0.0};
  cfg.schedules_per_delta = 1;
  cfg.n_train = 1;
  cfg.n_val = 1;
  cfg.n_test = 1;
  cfg.T = 10;
  cfg.l = 3;
  Rng rng(3);
  auto tasks = generate_benchmark(cfg, rng);
  for (const auto& w : tasks[0].schedule.w_l) EXPECT_EQ(w, tasks[0].schedule.w_l.front());
  for (const auto& w : tasks[0].schedule.w_d) EXPECT_EQ(w, tasks[0].schedule.w_d.front());
}

TEST(Labelize, MedianRuleByHand) {
  Dataset train;
  train.header.T = 3;
  train.header.d = 1;
  train.header.task = Task::regression;
  train.header.metadata["l"] = 1;
  for (int i = 0; i < 4; ++i) {
    Example ex;
    ex.id = "e" + std::to_string(i);
    ex.x = Tensor({3, 1});
    ex.y = {0.0, static_cast<double>(i + 1)};  // y_T = 1,2,3,4
    train.examples.push_back(ex);
  }
  LabelizedTask lt = labelize(train, train, train);
  EXPECT_NEAR(lt.threshold, 2.5, 1e-15);
  EXPECT_EQ(lt.train.examples[0].label, 0);
  EXPECT_EQ(lt.train.examples[1].label, 0);
  EXPECT_EQ(lt.train.examples[2].label, 1);
  EXPECT_EQ(lt.train.examples[3].label, 1);
  EXPECT_EQ(lt.train.header.task, Task::classification);
  EXPECT_NEAR(lt.train.header.metadata["label_balance"].get<double>(), 0.5, 1e-15);
}

TEST(Labelize, AllEqualGivesAllZeros) {
  Dataset train;
  train.header.T = 2;
  train.header.d = 1;
  train.header.task = Task::regression;
  train.header.metadata["l"] = 1;
  for (int i = 0; i < 3; ++i) {
    Example ex;
    ex.id = "e" + std::to_string(i);
    ex.x = Tensor({2, 1});
    ex.y = {7.0};
    train.examples.push_back(ex);
  }
  LabelizedTask lt = labelize(train, train, train);
  for (const auto& ex : lt.train.examples) EXPECT_EQ(ex.label, 0);
}

TEST(Labelize, TestLabelUsesTrainThreshold) {
  Dataset train, test;
  for (Dataset* ds : {&train, &test}) {
    ds->header.T = 2;
    ds->header.d = 1;
    ds->header.task = Task::regression;
    ds->header.metadata["l"] = 1;
  }
  for (int i = 0; i < 2; ++i) {
    Example ex;
    ex.id = "tr" + std::to_string(i);
    ex.x = Tensor({2, 1});
    ex.y = {static_cast<double>(i)};  // thresholds at 0.5
    train.examples.push_back(ex);
  }
  Example hi;
  hi.id = "hi";
  hi.x = Tensor({2, 1});
  hi.y = {100.0};
  test.examples.push_back(hi);
  LabelizedTask lt = labelize(train, train, test);
  EXPECT_EQ(lt.test.examples[0].label, 1);
}

TEST(Labelize, EmptyTrainIsError) {
  Dataset train;
  train.header.task = Task::regression;
  EXPECT_THROW(labelize(train, train, train), ValidationError);
}
