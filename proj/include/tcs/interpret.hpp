#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "tcs/metrics.hpp"
#include "tcs/models.hpp"

namespace tcs {

struct SaliencyMap {
  Tensor values;  // T x d, signed accumulated input gradients
  int n_examples = 0;
  int target_class = 1;
};

// Accumulated gradient of the max-over-time target-class probability with
// respect to each input cell. Ties at the max route the gradient to the
// earliest step.
inline SaliencyMap gradient_saliency(ModelState& model, const Dataset& ds, int target_class,
                                     int batch_size = 128) {
  check(model.spec.task == Task::classification,
        "gradient_saliency: classification models only");
  check(target_class == 0 || target_class == 1, "gradient_saliency: target class must be 0 or 1");
  check(!ds.examples.empty(), "gradient_saliency: empty dataset");
  const int T = model.spec.T, d = model.spec.input_dim;
  SaliencyMap map;
  map.values = Tensor({T, d});
  map.n_examples = static_cast<int>(ds.size());
  map.target_class = target_class;

  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    ForwardGraph g;
    BuildOptions opt;
    opt.params_require_grad = false;
    opt.inputs_require_grad = true;
    build_forward(g, model, ds, idx, opt);
    ad::Tape& tp = g.tape;
    // Per-step target-class probability, folded with elementwise max (ties to
    // the earlier step), then summed over the batch: the per-example gradients
    // are independent, so one backward pass accumulates all of them.
    ad::Var agg;
    for (int t = 0; t < T; ++t) {
      ad::Var probs = tp.softmax_rows(g.outputs[t]);
      ad::Var pt = tp.col(probs, target_class);
      agg = t == 0 ? pt : tp.ewmax(agg, pt);
    }
    tp.backward(tp.sum_all(agg));
    for (int t = 0; t < T; ++t) {
      const auto& grad = g.inputs[t].node()->grad;
      if (grad.empty()) continue;
      for (std::size_t b = 0; b < idx.size(); ++b)
        for (int j = 0; j < d; ++j)
          map.values.at(t, j) += grad[b * static_cast<std::size_t>(d) + j];
    }
  }
  check_finite(map.values, "saliency map");
  return map;
}

enum class Direction { risk, protective };
enum class Trend { amplifying, diminishing, flat };

struct RankedFeature {
  int feature = 0;
  double importance = 0.0;  // |sum_t map[t][i]|
  Direction direction = Direction::risk;
  Trend trend = Trend::flat;
};

// Features ordered by |column sum|; direction is the sign of the sum, trend
// compares the late-half mean against the early-half mean (amplifying when
// the late mean moves further in the feature's own direction).
inline std::vector<RankedFeature> rank_features(const SaliencyMap& map) {
  const int T = map.values.rows(), d = map.values.cols();
  std::vector<RankedFeature> out;
  for (int j = 0; j < d; ++j) {
    RankedFeature rf;
    rf.feature = j;
    double total = 0.0;
    for (int t = 0; t < T; ++t) total += map.values.at(t, j);
    rf.importance = std::fabs(total);
    rf.direction = total >= 0.0 ? Direction::risk : Direction::protective;
    const int half = T / 2;
    double early = 0.0, late = 0.0;
    for (int t = 0; t < half; ++t) early += map.values.at(t, j);
    for (int t = T - half; t < T; ++t) late += map.values.at(t, j);
    early /= half;
    late /= half;
    if (late == early) {
      rf.trend = Trend::flat;
    } else {
      const bool further = total >= 0.0 ? late > early : late < early;
      rf.trend = further ? Trend::amplifying : Trend::diminishing;
    }
    out.push_back(rf);
  }
  std::sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.feature < b.feature;  // ties broken by feature index
  });
  return out;
}

// Union-find partition of features by |Pearson r| >= threshold over all
// (example, step) observations. Zero-variance features correlate with nothing.
inline std::vector<std::vector<int>> correlation_groups(const Dataset& ds, double threshold) {
  check(threshold > 0.0 && threshold <= 1.0, "correlation_groups: threshold in (0,1] required");
  check(!ds.examples.empty(), "correlation_groups: empty dataset");
  const int d = ds.header.d;
  const int T = ds.header.T;
  const std::size_t n_obs = ds.size() * static_cast<std::size_t>(T);

  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& ex : ds.examples)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < d; ++j) mean[j] += ex.x.at(t, j);
  for (double& m : mean) m /= static_cast<double>(n_obs);
  for (const auto& ex : ds.examples)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < d; ++j) {
        const double c = ex.x.at(t, j) - mean[j];
        var[j] += c * c;
      }

  std::vector<int> parent(d);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };

  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      if (var[a] <= 0.0 || var[b] <= 0.0) continue;  // treated as r = 0
      double cov = 0.0;
      for (const auto& ex : ds.examples)
        for (int t = 0; t < T; ++t)
          cov += (ex.x.at(t, a) - mean[a]) * (ex.x.at(t, b) - mean[b]);
      const double r = cov / std::sqrt(var[a] * var[b]);
      if (std::fabs(r) >= threshold) parent[find(a)] = find(b);
    }
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> group_of(d, -1);
  for (int j = 0; j < d; ++j) {
    const int root = find(j);
    if (group_of[root] < 0) {
      group_of[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[group_of[root]].push_back(j);
  }
  return groups;
}

struct ImportanceTable {
  std::vector<std::vector<int>> groups;
  std::vector<std::pair<int, int>> windows;  // [start, stop) 0-indexed steps
  Tensor delta_auroc;                        // groups x windows
  double baseline_auroc = 0.0;
  int window_len = 0;
};

struct PermImportanceOptions {
  int repeats = 1;           // permutation draws averaged per cell
  bool force_identity = false;  // test hook: use the identity permutation
};

// Permutation importance over (feature group, time window) cells. All features
// in a group and all steps in a window are swapped across examples with one
// permutation, preserving each example's within-window block structure.
inline ImportanceTable permutation_importance(ModelState& model, const Dataset& ds, int window,
                                              const std::vector<std::vector<int>>& groups,
                                              Rng& rng, const PermImportanceOptions& opt = {}) {
  check(model.spec.task == Task::classification,
        "permutation_importance: classification models only");
  check(window >= 1 && window <= ds.header.T, "permutation_importance: bad window");
  check(opt.repeats >= 1, "permutation_importance: repeats must be >= 1");
  const int T = ds.header.T;
  const std::size_t n = ds.size();

  ImportanceTable table;
  table.groups = groups;
  table.window_len = window;
  for (int start = 0; start < T; start += window)
    table.windows.emplace_back(start, std::min(T, start + window));
  table.delta_auroc = Tensor({static_cast<int>(groups.size()),
                              static_cast<int>(table.windows.size())});

  auto dataset_auroc = [&](const Dataset& data) {
    std::vector<ScoredExample> scored = score_dataset(model, data);
    std::vector<double> scores(scored.size());
    std::vector<int> labels(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
      scores[i] = scored[i].score;
      labels[i] = scored[i].label;
    }
    return auroc(scores, labels);
  };
  table.baseline_auroc = dataset_auroc(ds);

  Dataset permuted = ds;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (std::size_t wi = 0; wi < table.windows.size(); ++wi) {
      const auto [w_start, w_stop] = table.windows[wi];
      double acc = 0.0;
      for (int rep = 0; rep < opt.repeats; ++rep) {
        Rng cell_rng = rng.child("g" + std::to_string(gi) + ".w" + std::to_string(wi) +
                                 ".r" + std::to_string(rep));
        std::vector<std::size_t> perm;
        if (opt.force_identity) {
          perm.resize(n);
          std::iota(perm.begin(), perm.end(), 0);
        } else {
          perm = cell_rng.permutation(n);
        }
        for (std::size_t e = 0; e < n; ++e)
          for (int t = w_start; t < w_stop; ++t)
            for (int f : groups[gi]) permuted.examples[e].x.at(t, f) = ds.examples[perm[e]].x.at(t, f);
        acc += table.baseline_auroc - dataset_auroc(permuted);
        // restore
        for (std::size_t e = 0; e < n; ++e)
          for (int t = w_start; t < w_stop; ++t)
            for (int f : groups[gi]) permuted.examples[e].x.at(t, f) = ds.examples[e].x.at(t, f);
      }
      table.delta_auroc.at(static_cast<int>(gi), static_cast<int>(wi)) = acc / opt.repeats;
    }
  }
  return table;
}

}  // namespace tcs
