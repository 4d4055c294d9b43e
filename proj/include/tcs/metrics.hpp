#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "tcs/data.hpp"
#include "tcs/losses.hpp"
#include "tcs/models.hpp"
#include "tcs/rng.hpp"

namespace tcs {

struct ScoredExample {
  std::string id;
  double score = 0.0;
  int label = 0;
};

// Max over per-step scores: thresholding the max equals "at least one
// prediction exceeds the threshold".
inline double aggregate_score(const std::vector<double>& per_step) {
  check(!per_step.empty(), "aggregate_score: empty input");
  return *std::max_element(per_step.begin(), per_step.end());
}

struct RocPoint {
  double threshold, fpr, tpr;
};
struct PrPoint {
  double threshold, recall, precision;
};

// Mann-Whitney AUROC with average ranks (ties count 0.5); optionally emits the
// threshold-sweep ROC curve.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels,
                    std::vector<RocPoint>* curve = nullptr) {
  check(scores.size() == labels.size(), "auroc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += (l == 1);
  const std::size_t n_neg = n - n_pos;
  check(n_pos > 0 && n_neg > 0, "auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  const double value = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));

  if (curve) {
    curve->clear();
    curve->push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    // Descending sweep; score >= threshold counts as a positive call.
    for (std::size_t a = n; a > 0;) {
      const double thr = scores[order[a - 1]];
      while (a > 0 && scores[order[a - 1]] == thr) {
        if (labels[order[a - 1]] == 1)
          ++tp;
        else
          ++fp;
        --a;
      }
      curve->push_back({thr, static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
    }
  }
  return value;
}

// Average precision (step interpolation): sum_i (R_i - R_{i-1}) * P_i over
// descending-score thresholds.
inline double aupr(const std::vector<double>& scores, const std::vector<int>& labels,
                   std::vector<PrPoint>* curve = nullptr) {
  check(scores.size() == labels.size(), "aupr: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += (l == 1);
  check(n_pos > 0, "aupr: at least one positive required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (curve) curve->clear();
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    const double thr = scores[order[i]];
    while (i < n && scores[order[i]] == thr) {
      if (labels[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    if (curve) curve->push_back({thr, recall, precision});
  }
  return ap;
}

enum class MetricKind { auroc, aupr };

// Percentile bootstrap over examples. Single-class resamples are skipped; the
// skip count is reported through `skipped` when provided.
inline std::pair<double, double> bootstrap_ci(const std::vector<ScoredExample>& examples,
                                              MetricKind metric, int B, double level, Rng& rng,
                                              int* skipped = nullptr) {
  check(B >= 1, "bootstrap_ci: B must be >= 1");
  check(level > 0.0 && level < 1.0, "bootstrap_ci: level must be in (0,1)");
  const std::size_t n = examples.size();
  check(n > 0, "bootstrap_ci: empty input");
  std::vector<double> vals;
  vals.reserve(B);
  int skips = 0;
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (int b = 0; b < B; ++b) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const ScoredExample& ex = examples[rng.uniform_int(n)];
      scores[i] = ex.score;
      labels[i] = ex.label;
      pos += (ex.label == 1);
    }
    const bool degenerate =
        metric == MetricKind::auroc ? (pos == 0 || pos == n) : (pos == 0);
    if (degenerate) {
      ++skips;
      continue;
    }
    vals.push_back(metric == MetricKind::auroc ? auroc(scores, labels) : aupr(scores, labels));
  }
  if (skipped) *skipped = skips;
  if (vals.empty()) throw ValidationError("bootstrap_ci: all resamples degenerate");
  std::sort(vals.begin(), vals.end());
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(vals.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    return vals[lo] + (h - static_cast<double>(lo)) * (vals[hi] - vals[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

// Bootstrap CI for a per-example statistic's mean (regression MSE path).
inline std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& per_example,
                                                   int B, double level, Rng& rng) {
  check(B >= 1 && !per_example.empty(), "bootstrap_mean_ci: bad input");
  const std::size_t n = per_example.size();
  std::vector<double> vals;
  vals.reserve(B);
  for (int b = 0; b < B; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += per_example[rng.uniform_int(n)];
    vals.push_back(acc / static_cast<double>(n));
  }
  std::sort(vals.begin(), vals.end());
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(vals.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    return vals[lo] + (h - static_cast<double>(lo)) * (vals[hi] - vals[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

// ---------------------------------------------------------------------------
// Model-level scoring and evaluation reports
// ---------------------------------------------------------------------------

// Per-example max-over-time risk scores for a classification model.
inline std::vector<ScoredExample> score_dataset(ModelState& model, const Dataset& ds,
                                                int batch_size = 256) {
  check(model.spec.task == Task::classification, "score_dataset: classification models only");
  std::vector<ScoredExample> out;
  out.reserve(ds.size());
  const int T = model.spec.T;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    ForwardGraph g;
    BuildOptions opt;
    opt.params_require_grad = false;
    build_forward(g, model, ds, idx, opt);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      double best = -std::numeric_limits<double>::infinity();
      for (int t = 0; t < T; ++t) {
        const Tensor& logits = g.outputs[t].value();
        const double z0 = logits.at(static_cast<int>(b), 0);
        const double z1 = logits.at(static_cast<int>(b), 1);
        // p(class 1) via the stable two-way softmax
        const double p1 = 1.0 / (1.0 + std::exp(z0 - z1));
        if (!std::isfinite(p1)) throw NumericError("score_dataset: non-finite score");
        best = std::max(best, p1);
      }
      out.push_back({ds.examples[idx[b]].id, best, ds.examples[idx[b]].label});
    }
  }
  return out;
}

// Masked test MSE per example (regression).
inline std::vector<double> per_example_mse(ModelState& model, const Dataset& ds,
                                           int batch_size = 256) {
  check(model.spec.task == Task::regression, "per_example_mse: regression models only");
  const int T = model.spec.T;
  const int l = ds.lag();
  std::vector<double> out;
  out.reserve(ds.size());
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    ForwardGraph g;
    BuildOptions opt;
    opt.params_require_grad = false;
    build_forward(g, model, ds, idx, opt);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      double acc = 0.0;
      for (int t = l; t < T; ++t) {
        const double pred = g.outputs[t].value().at(static_cast<int>(b), 0);
        if (!std::isfinite(pred)) throw NumericError("per_example_mse: non-finite prediction");
        const double d = pred - ds.examples[idx[b]].y[t - l];
        acc += d * d;
      }
      out.push_back(acc / static_cast<double>(T - l));
    }
  }
  return out;
}

inline double dataset_mse(ModelState& model, const Dataset& ds) {
  std::vector<double> per = per_example_mse(model, ds);
  double acc = 0.0;
  for (double v : per) acc += v;
  return acc / static_cast<double>(per.size());
}

struct EvalReport {
  double auroc = 0.0, aupr = 0.0;
  double auroc_lo = 0.0, auroc_hi = 0.0;
  double aupr_lo = 0.0, aupr_hi = 0.0;
  int bootstrap_B = 0;
  int skipped_auroc = 0, skipped_aupr = 0;
  std::vector<RocPoint> roc;
  std::vector<PrPoint> pr;
  int n_test = 0;
  std::uint64_t seed = 0;
};

// Forward + max aggregation + both metrics with percentile CIs and curves.
inline EvalReport evaluate(ModelState& model, const Dataset& test, int B, Rng& rng,
                           double level = 0.95) {
  std::vector<ScoredExample> scored = score_dataset(model, test);
  std::vector<double> scores(scored.size());
  std::vector<int> labels(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    scores[i] = scored[i].score;
    labels[i] = scored[i].label;
  }
  EvalReport rep;
  rep.n_test = static_cast<int>(scored.size());
  rep.seed = rng.seed();
  rep.bootstrap_B = B;
  rep.auroc = auroc(scores, labels, &rep.roc);
  rep.aupr = aupr(scores, labels, &rep.pr);
  if (B > 0) {
    Rng r1 = rng.child("auroc");
    Rng r2 = rng.child("aupr");
    auto ci1 = bootstrap_ci(scored, MetricKind::auroc, B, level, r1, &rep.skipped_auroc);
    auto ci2 = bootstrap_ci(scored, MetricKind::aupr, B, level, r2, &rep.skipped_aupr);
    rep.auroc_lo = ci1.first;
    rep.auroc_hi = ci1.second;
    rep.aupr_lo = ci2.first;
    rep.aupr_hi = ci2.second;
  }
  return rep;
}

inline json report_to_json(const EvalReport& r) {
  json roc = json::array(), pr = json::array();
  for (const auto& p : r.roc)
    roc.push_back(json::array({std::isinf(p.threshold) ? json() : json(p.threshold), p.fpr, p.tpr}));
  for (const auto& p : r.pr) pr.push_back(json::array({p.threshold, p.recall, p.precision}));
  return json{{"auroc", r.auroc},
              {"aupr", r.aupr},
              {"auroc_ci", json::array({r.auroc_lo, r.auroc_hi})},
              {"aupr_ci", json::array({r.aupr_lo, r.aupr_hi})},
              {"bootstrap_B", r.bootstrap_B},
              {"skipped_resamples", json{{"auroc", r.skipped_auroc}, {"aupr", r.skipped_aupr}}},
              {"n_test", r.n_test},
              {"seed", r.seed},
              {"roc", roc},
              {"pr", pr}};
}

inline EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.auroc = j.at("auroc").get<double>();
  r.aupr = j.at("aupr").get<double>();
  r.auroc_lo = j.at("auroc_ci")[0].get<double>();
  r.auroc_hi = j.at("auroc_ci")[1].get<double>();
  r.aupr_lo = j.at("aupr_ci")[0].get<double>();
  r.aupr_hi = j.at("aupr_ci")[1].get<double>();
  r.bootstrap_B = j.at("bootstrap_B").get<int>();
  r.skipped_auroc = j.at("skipped_resamples").at("auroc").get<int>();
  r.skipped_aupr = j.at("skipped_resamples").at("aupr").get<int>();
  r.n_test = j.at("n_test").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("roc"))
    r.roc.push_back({p[0].is_null() ? std::numeric_limits<double>::infinity() : p[0].get<double>(),
                     p[1].get<double>(), p[2].get<double>()});
  for (const auto& p : j.at("pr"))
    r.pr.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  return r;
}

}  // namespace tcs
