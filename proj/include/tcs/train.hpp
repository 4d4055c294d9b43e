#pragma once

#include <chrono>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "tcs/adam.hpp"
#include "tcs/losses.hpp"
#include "tcs/metrics.hpp"
#include "tcs/models.hpp"

namespace tcs {

enum class SelectionMetric { val_mse, val_auroc };

inline std::string to_string(SelectionMetric m) {
  return m == SelectionMetric::val_mse ? "val_mse" : "val_auroc";
}

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 100;
  int max_epochs = 30;
  int patience = 5;
  double smoothness_alpha = 0.0;
  std::uint64_t seed = 0;
  bool clip_gradients = false;  // optional guard, off by default
  double clip_norm = 5.0;
  // Standardize input features with train-split statistics (stored in the
  // model so evaluation applies the same transform). Off by default.
  bool standardize_features = false;
  // Selection metric defaults to the task's natural choice.
  std::optional<SelectionMetric> selection;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val = 0.0;
  std::string selection;
  std::string stop_reason;
};

// Early-stopping bookkeeping: strict improvement resets the counter, ties
// lose (the earlier epoch keeps the crown), and the run stops after
// `patience` consecutive non-improvements.
struct EarlyStopper {
  bool minimize = true;
  int patience = 5;
  double best = 0.0;
  int best_epoch = 0;
  int streak = 0;
  bool seen_any = false;

  // Returns true when this epoch strictly improved the metric.
  bool update(int epoch, double metric) {
    const bool improved =
        !seen_any || (minimize ? metric < best : metric > best);
    seen_any = true;
    if (improved) {
      best = metric;
      best_epoch = epoch;
      streak = 0;
    } else {
      ++streak;
    }
    return improved;
  }

  bool should_stop() const { return streak >= patience; }
};

namespace detail {

inline void assert_lambda_simplex(const ModelState& m) {
  if (m.spec.kind != ModelKind::mix_lstm) return;
  const int T = m.mix_logits.rows(), K = m.mix_logits.cols();
  for (int t = 0; t < T; ++t) {
    Tensor row({K});
    for (int k = 0; k < K; ++k) row.values[k] = m.mix_logits.at(t, k);
    Tensor lam = softmax(row);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      check(lam.values[k] > 0.0, "mixing coefficients must stay strictly positive");
      sum += lam.values[k];
    }
    check(std::fabs(sum - 1.0) <= 1e-12, "mixing coefficients must sum to 1");
  }
}

inline std::vector<Tensor> snapshot_params(ModelState& m) {
  std::vector<Tensor> snap;
  for (auto& [name, t] : m.named_params()) snap.push_back(*t);
  return snap;
}

inline void restore_params(ModelState& m, const std::vector<Tensor>& snap) {
  auto named = m.named_params();
  check(named.size() == snap.size(), "restore_params: size mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) named[i].second->values = snap[i].values;
}

}  // namespace detail

inline double validation_metric(ModelState& model, const Dataset& val, SelectionMetric sel) {
  if (sel == SelectionMetric::val_mse) return dataset_mse(model, val);
  std::vector<ScoredExample> scored = score_dataset(model, val);
  std::vector<double> scores(scored.size());
  std::vector<int> labels(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    scores[i] = scored[i].score;
    labels[i] = scored[i].label;
  }
  return auroc(scores, labels);
}

// Mini-batch Adam with early stopping on the validation metric; returns the
// model restored to its best epoch plus the epoch-by-epoch history.
inline std::pair<ModelState, TrainHistory> train(const ModelSpec& spec, const Dataset& train_ds,
                                                 const Dataset& val_ds, const TrainConfig& cfg) {
  check(!train_ds.examples.empty(), "train: empty training set");
  check(!val_ds.examples.empty(), "train: empty validation set");
  check(train_ds.header.task == spec.task && val_ds.header.task == spec.task,
        "train: dataset task does not match model spec");
  check(cfg.batch_size >= 1 && cfg.max_epochs >= 1 && cfg.patience >= 1,
        "train: batch_size, max_epochs, patience must be positive");
  check(std::isfinite(cfg.smoothness_alpha) && cfg.smoothness_alpha >= 0.0,
        "train: smoothness_alpha must be finite and nonnegative");

  ModelSpec init_spec = spec;
  init_spec.seed = cfg.seed;
  ModelState model = init_model(init_spec);
  if (cfg.standardize_features) {
    const int d = spec.input_dim;
    const std::size_t cells = train_ds.size() * static_cast<std::size_t>(spec.T);
    Tensor mean({d}), scale({d});
    for (const auto& ex : train_ds.examples)
      for (int t = 0; t < spec.T; ++t)
        for (int j = 0; j < d; ++j) mean.values[j] += ex.x.at(t, j);
    for (double& v : mean.values) v /= static_cast<double>(cells);
    for (const auto& ex : train_ds.examples)
      for (int t = 0; t < spec.T; ++t)
        for (int j = 0; j < d; ++j) {
          const double c = ex.x.at(t, j) - mean.values[j];
          scale.values[j] += c * c;
        }
    for (double& v : scale.values)
      v = std::max(1e-8, std::sqrt(v / static_cast<double>(cells)));
    model.feat_mean = std::move(mean);
    model.feat_scale = std::move(scale);
  }
  const SelectionMetric sel = cfg.selection.value_or(
      spec.task == Task::regression ? SelectionMetric::val_mse : SelectionMetric::val_auroc);
  const bool minimize = sel == SelectionMetric::val_mse;
  const int l = train_ds.header.task == Task::regression ? train_ds.lag() : 0;

  AdamState adam;
  adam.lr = cfg.lr;
  Rng rng(cfg.seed);
  Rng shuffle_rng = rng.child("shuffle");

  TrainHistory history;
  history.selection = to_string(sel);
  EarlyStopper stopper;
  stopper.minimize = minimize;
  stopper.patience = cfg.patience;
  std::vector<Tensor> best_params = detail::snapshot_params(model);

  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng erng = shuffle_rng.child(static_cast<std::uint64_t>(epoch));
    erng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + begin, order.begin() + end);

      ForwardGraph g;
      build_forward(g, model, train_ds, batch);
      ad::Var loss = build_objective(g, train_ds, batch, l, cfg.smoothness_alpha);
      const double loss_val = loss.value().values[0];
      if (!std::isfinite(loss_val))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_count));
      loss_sum += loss_val;
      ++batch_count;

      for (auto& [name, t] : model.named_params()) {
        t->ensure_grad();
        t->zero_grad();
      }
      g.tape.backward(loss);
      collect_param_grads(g, model);

      auto named = model.named_params();
      std::vector<Tensor*> params;
      params.reserve(named.size());
      for (auto& [name, t] : named) params.push_back(t);
      if (cfg.clip_gradients) {
        double norm2 = 0.0;
        for (Tensor* t : params)
          for (double gv : t->grad) norm2 += gv * gv;
        const double norm = std::sqrt(norm2);
        if (norm > cfg.clip_norm) {
          const double factor = cfg.clip_norm / norm;
          for (Tensor* t : params)
            for (double& gv : t->grad) gv *= factor;
        }
      }
      adam.step(params);
      detail::assert_lambda_simplex(model);
    }

    const double val = validation_metric(model, val_ds, sel);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(batch_count), val, wall});

    if (stopper.update(epoch, val)) best_params = detail::snapshot_params(model);
    if (stopper.should_stop()) {
      history.stop_reason = "early_stop(patience=" + std::to_string(cfg.patience) + ")";
      break;
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";

  detail::restore_params(model, best_params);
  history.best_epoch = stopper.best_epoch;
  history.best_val = stopper.best;
  model.meta.epochs_run = static_cast<int>(history.epochs.size());
  model.meta.best_epoch = stopper.best_epoch;
  model.meta.best_val = stopper.best;
  model.meta.selection = history.selection;
  return {std::move(model), std::move(history)};
}

inline json history_to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs)
    epochs.push_back(json{{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_metric", e.val_metric},
                          {"wall_time_s", e.wall_time_s}});
  return json{{"epochs", epochs},
              {"best_epoch", h.best_epoch},
              {"best_val", h.best_val},
              {"selection", h.selection},
              {"stop_reason", h.stop_reason}};
}

// ---------------------------------------------------------------------------
// Random hyperparameter search
// ---------------------------------------------------------------------------

// Candidate values per knob; empty lists fall back to the base setting.
struct SearchSpace {
  std::vector<int> hidden;
  std::vector<double> lr;
  std::vector<int> K;
  std::vector<double> smoothness_alpha;

  bool empty() const {
    return hidden.empty() && lr.empty() && K.empty() && smoothness_alpha.empty();
  }
};

struct TrialResult {
  int trial = 0;
  ModelSpec spec;
  TrainConfig cfg;
  bool ok = false;
  std::string error;
  double val_metric = 0.0;
  int best_epoch = 0;
};

struct SearchResult {
  std::vector<TrialResult> leaderboard;  // sorted best-first, failures last
  int champion_trial = -1;
  ModelState champion;
  TrainHistory champion_history;
};

// Uniformly samples `trials` configurations from the space, trains each with a
// derived child seed, and ranks by validation metric. Per-trial failures are
// recorded on the leaderboard, not fatal to the sweep.
inline SearchResult random_search(const ModelSpec& base_spec, const SearchSpace& space,
                                  int trials, const Dataset& train_ds, const Dataset& val_ds,
                                  const TrainConfig& base_cfg) {
  check(trials >= 1, "random_search: trials must be >= 1");
  check(!space.empty(), "random_search: empty search space");
  Rng rng(base_cfg.seed);
  const bool minimize = base_cfg.selection.value_or(base_spec.task == Task::regression
                                                        ? SelectionMetric::val_mse
                                                        : SelectionMetric::val_auroc) ==
                        SelectionMetric::val_mse;

  SearchResult result;
  double best = minimize ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    Rng trng = rng.child("trial" + std::to_string(trial));
    TrialResult tr;
    tr.trial = trial;
    tr.spec = base_spec;
    tr.cfg = base_cfg;
    if (!space.hidden.empty())
      tr.spec.hidden = space.hidden[trng.uniform_int(space.hidden.size())];
    if (!space.K.empty()) tr.spec.K = space.K[trng.uniform_int(space.K.size())];
    if (!space.lr.empty()) tr.cfg.lr = space.lr[trng.uniform_int(space.lr.size())];
    if (!space.smoothness_alpha.empty())
      tr.cfg.smoothness_alpha =
          space.smoothness_alpha[trng.uniform_int(space.smoothness_alpha.size())];
    tr.cfg.seed = trng.child("train").seed();
    tr.spec.seed = tr.cfg.seed;
    try {
      auto [model, history] = train(tr.spec, train_ds, val_ds, tr.cfg);
      tr.ok = true;
      tr.val_metric = history.best_val;
      tr.best_epoch = history.best_epoch;
      const bool improved = minimize ? tr.val_metric < best : tr.val_metric > best;
      if (improved) {
        best = tr.val_metric;
        result.champion_trial = trial;
        result.champion = std::move(model);
        result.champion_history = std::move(history);
      }
    } catch (const NumericError& e) {
      tr.ok = false;
      tr.error = e.what();
    }
    result.leaderboard.push_back(std::move(tr));
  }
  check(result.champion_trial >= 0, "random_search: every trial failed");
  std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                   [minimize](const TrialResult& a, const TrialResult& b) {
                     if (a.ok != b.ok) return a.ok;
                     if (!a.ok) return false;
                     return minimize ? a.val_metric < b.val_metric : a.val_metric > b.val_metric;
                   });
  return result;
}

inline json leaderboard_to_json(const SearchResult& r) {
  json rows = json::array();
  for (const auto& t : r.leaderboard) {
    json row{{"trial", t.trial},
             {"hidden", t.spec.hidden},
             {"K", t.spec.K},
             {"lr", t.cfg.lr},
             {"alpha", t.cfg.smoothness_alpha},
             {"seed", t.cfg.seed},
             {"status", t.ok ? "ok" : "failed"}};
    if (t.ok) {
      row["val_metric"] = t.val_metric;
      row["best_epoch"] = t.best_epoch;
    } else {
      row["error"] = t.error;
    }
    rows.push_back(std::move(row));
  }
  return json{{"champion_trial", r.champion_trial}, {"trials", rows}};
}

}  // namespace tcs
