#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tcs/data.hpp"
#include "tcs/rng.hpp"

namespace tcs {

// Multitask copy-memory variant with controllable temporal conditional shift.
// Two weight vectors per output step (over the l lookback steps and the d
// feature dimensions) drift by Uniform(-delta, delta) increments, re-projected
// onto the simplex after every step.

constexpr double kRenormFloor = 1e-6;

// Clamp below at 1e-6, then divide by the clamped sum. Output entries are
// strictly positive and sum to 1 within 1e-12.
inline std::vector<double> renormalize(std::vector<double> w) {
  for (double& v : w) {
    if (!std::isfinite(v)) throw NumericError("renormalize: non-finite entry");
    v = std::max(v, kRenormFloor);
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  for (double& v : w) v /= sum;
  return w;
}

// Procedure SampleWeights: w_{l+1} ~ Uniform(0,1)^m renormalized, then
// w_t = renormalize(w_{t-1} + Uniform(-delta, delta)^m). Returns T - l vectors.
inline std::vector<std::vector<double>> sample_weights(int T, int l, int m, double delta,
                                                       Rng& rng) {
  check(T > l && l >= 1 && m >= 1 && delta >= 0.0, "sample_weights: bad arguments");
  std::vector<std::vector<double>> ws;
  ws.reserve(T - l);
  std::vector<double> w(m);
  for (double& v : w) v = rng.uniform();
  w = renormalize(std::move(w));
  ws.push_back(w);
  for (int t = l + 2; t <= T; ++t) {
    if (delta == 0.0) {
      // Delta_t is identically zero and renormalization is the identity on
      // simplex points, so keep the vector bit-exact.
      ws.push_back(ws.back());
      continue;
    }
    std::vector<double> next = ws.back();
    for (double& v : next) v += rng.uniform(-delta, delta);
    ws.push_back(renormalize(std::move(next)));
  }
  return ws;
}

struct WeightSchedule {
  int T = 0, l = 0, d = 0;
  double delta = 0.0;
  std::vector<std::vector<double>> w_l;  // T - l vectors of length l
  std::vector<std::vector<double>> w_d;  // T - l vectors of length d
};

inline WeightSchedule sample_weight_schedule(int T, int l, int d, double delta, Rng& rng) {
  WeightSchedule ws;
  ws.T = T;
  ws.l = l;
  ws.d = d;
  ws.delta = delta;
  Rng rng_d = rng.child("wd");
  Rng rng_l = rng.child("wl");
  ws.w_d = sample_weights(T, l, d, delta, rng_d);
  ws.w_l = sample_weights(T, l, l, delta, rng_l);
  return ws;
}

// Procedure SampleData: sparse inputs (Bernoulli(0.1) gate on Uniform(0,100)
// draws) and targets y_t = w_t^(l)' [x_{t-l}..x_{t-1}] w_t^(d) for t=l+1..T.
inline Example sample_example(int T, int d, int l, const WeightSchedule& ws, Rng& rng,
                              const std::string& id) {
  check(ws.T == T && ws.d == d && ws.l == l, "sample_example: schedule dimensions mismatch");
  Example ex;
  ex.id = id;
  ex.x = Tensor({T, d});
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < d; ++i) {
      const double z = rng.bernoulli(0.1) ? 1.0 : 0.0;
      const double u = rng.uniform(0.0, 100.0);
      ex.x.at(t, i) = z * u;
    }
  ex.y.resize(T - l);
  for (int t = l + 1; t <= T; ++t) {
    const std::vector<double>& wl = ws.w_l[t - l - 1];
    const std::vector<double>& wd = ws.w_d[t - l - 1];
    double y = 0.0;
    for (int i = 0; i < l; ++i) {
      const int row = t - l + i - 1;  // 0-indexed row of x for step t-l+i
      double inner = 0.0;
      for (int j = 0; j < d; ++j) inner += ex.x.at(row, j) * wd[j];
      y += wl[i] * inner;
    }
    ex.y[t - l - 1] = y;
  }
  return ex;
}

inline Schema synthetic_schema(int d) {
  Schema s;
  for (int i = 0; i < d; ++i)
    s.features.push_back({"f" + std::to_string(i), FeatureType::continuous, {}, {}});
  return s;
}

inline Dataset make_synthetic_split(int n, int T, int d, int l, const WeightSchedule& ws,
                                    Rng& rng, const std::string& split_tag) {
  Dataset ds;
  ds.header.schema = synthetic_schema(d);
  ds.header.T = T;
  ds.header.d = d;
  ds.header.task = Task::regression;
  ds.header.metadata["l"] = l;
  ds.header.metadata["delta"] = ws.delta;
  ds.header.metadata["split"] = split_tag;
  ds.header.metadata["n"] = n;
  ds.header.metadata["split_seed"] = rng.seed();
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%06d", split_tag.c_str(), i);
    ds.examples.push_back(sample_example(T, d, l, ws, rng, buf));
  }
  return ds;
}

struct SynthTask {
  double delta = 0.0;
  int schedule_id = 0;
  WeightSchedule schedule;
  Dataset train, val, test;
};

struct GenConfig {
  std::vector<double> deltas{0.0, 0.1, 0.2, 0.3, 0.4};
  int schedules_per_delta = 5;
  int schedule_offset = 0;  // first schedule index (streams are index-keyed)
  int n_train = 1000, n_val = 1000, n_test = 1000;
  int T = 30, d = 3, l = 10;
};

// One task per (delta, schedule); train/val/test share the schedule.
inline std::vector<SynthTask> generate_benchmark(const GenConfig& cfg, Rng& rng) {
  check(cfg.schedules_per_delta >= 1, "generate_benchmark: need at least one schedule");
  check(cfg.n_train >= 0 && cfg.n_val >= 0 && cfg.n_test >= 0,
        "generate_benchmark: negative split size");
  std::vector<SynthTask> tasks;
  for (std::size_t di = 0; di < cfg.deltas.size(); ++di) {
    for (int s = cfg.schedule_offset; s < cfg.schedule_offset + cfg.schedules_per_delta; ++s) {
      const std::string tag =
          "delta" + std::to_string(di) + "-sched" + std::to_string(s);
      Rng task_rng = rng.child(tag);
      SynthTask task;
      task.delta = cfg.deltas[di];
      task.schedule_id = s;
      Rng wrng = task_rng.child("weights");
      task.schedule = sample_weight_schedule(cfg.T, cfg.l, cfg.d, task.delta, wrng);
      Rng tr = task_rng.child("train"), va = task_rng.child("val"), te = task_rng.child("test");
      task.train = make_synthetic_split(cfg.n_train, cfg.T, cfg.d, cfg.l, task.schedule, tr, "train");
      task.val = make_synthetic_split(cfg.n_val, cfg.T, cfg.d, cfg.l, task.schedule, va, "val");
      task.test = make_synthetic_split(cfg.n_test, cfg.T, cfg.d, cfg.l, task.schedule, te, "test");
      for (Dataset* ds : {&task.train, &task.val, &task.test}) {
        ds->header.metadata["seed"] = rng.seed();
        ds->header.metadata["weights_seed"] = wrng.seed();
        ds->header.metadata["schedule"] = s;
        ds->header.metadata["delta_index"] = di;
      }
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

struct LabelizedTask {
  Dataset train, val, test;
  double threshold = 0.0;
};

// Classification variant: label 1 iff y_T exceeds the train-split median of
// y_T. Threshold and label balance are recorded in metadata.
inline LabelizedTask labelize(const Dataset& train, const Dataset& val, const Dataset& test) {
  check(train.header.task == Task::regression, "labelize: expected a regression dataset");
  check(!train.examples.empty(), "labelize: empty train split");
  std::vector<double> finals;
  finals.reserve(train.size());
  for (const auto& ex : train.examples) {
    check(!ex.y.empty(), "labelize: example without targets");
    finals.push_back(ex.y.back());
  }
  std::sort(finals.begin(), finals.end());
  const std::size_t n = finals.size();
  const double threshold =
      n % 2 == 1 ? finals[n / 2] : 0.5 * (finals[n / 2 - 1] + finals[n / 2]);

  LabelizedTask out;
  out.threshold = threshold;
  auto convert = [&](const Dataset& src) {
    Dataset ds;
    ds.header = src.header;
    ds.header.task = Task::classification;
    ds.header.metadata["threshold"] = threshold;
    std::size_t pos = 0;
    for (const auto& ex : src.examples) {
      Example ce;
      ce.id = ex.id;
      ce.x = ex.x;
      ce.label = ex.y.back() > threshold ? 1 : 0;
      pos += ce.label;
      ds.examples.push_back(std::move(ce));
    }
    ds.header.metadata["label_balance"] =
        src.examples.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(src.size());
    return ds;
  };
  out.train = convert(train);
  out.val = convert(val);
  out.test = convert(test);
  return out;
}

}  // namespace tcs
