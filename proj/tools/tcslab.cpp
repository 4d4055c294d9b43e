// tcslab: synthetic temporal-conditional-shift benchmark, relaxed
// parameter-sharing sequence models, and the experiment suites around them.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcs/interpret.hpp"
#include "tcs/metrics.hpp"
#include "tcs/suites.hpp"
#include "tcs/synthgen.hpp"
#include "tcs/train.hpp"

namespace fs = std::filesystem;
using tcs::json;

namespace {

std::vector<fs::path> g_written;

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  tcs::check(out.good(), "cannot open " + path.string());
  out << text;
  tcs::check(out.good(), "write failed for " + path.string());
  g_written.push_back(path);
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path default_out_root() {
  if (const char* env = std::getenv("TCSLAB_OUT")) return fs::path(env);
  return fs::path(".");
}

// --config FILE provides defaults; command-line flags override them. The file
// is a flat JSON object keyed by long option names (without dashes).
json prescan_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in.good()) throw tcs::DataFormatError("cannot open config file " + std::string(argv[i + 1]));
      try {
        json j;
        in >> j;
        return j;
      } catch (const json::exception& e) {
        throw tcs::DataFormatError("bad config file: " + std::string(e.what()));
      }
    }
  }
  return json::object();
}

template <typename T>
void apply_config(const json& cfg, const std::string& key, T& value) {
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::vector<double> parse_deltas(const std::string& s) {
  if (s == "all") return {0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw tcs::ValidationError("bad --delta value: " + item);
    }
  }
  if (out.empty()) throw tcs::ValidationError("--delta list is empty");
  return out;
}

tcs::SearchSpace parse_sweep(const std::vector<std::string>& entries) {
  tcs::SearchSpace space;
  for (const std::string& e : entries) {
    const auto eq = e.find('=');
    if (eq == std::string::npos)
      throw tcs::ValidationError("bad --sweep entry (want name=v1,v2,...): " + e);
    const std::string name = e.substr(0, eq);
    std::stringstream ss(e.substr(eq + 1));
    std::string item;
    std::vector<double> vals;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (vals.empty()) throw tcs::ValidationError("empty --sweep list for " + name);
    if (name == "hidden")
      for (double v : vals) space.hidden.push_back(static_cast<int>(v));
    else if (name == "lr")
      space.lr = vals;
    else if (name == "K")
      for (double v : vals) space.K.push_back(static_cast<int>(v));
    else if (name == "alpha")
      space.smoothness_alpha = vals;
    else
      throw tcs::ValidationError("unknown sweep dimension: " + name +
                                 " (supported: hidden, lr, K, alpha)");
  }
  return space;
}

std::string csv_num(double v) { return json(v).dump(); }

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string delta = "all";
  int schedules = 5;
  int T = 30, d = 3, l = 10;
  int n_train = 1000, n_val = 1000, n_test = 1000;
  std::uint64_t seed = 1;
  bool classify = false;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  tcs::GenConfig gen;
  gen.deltas = parse_deltas(a.delta);
  gen.schedules_per_delta = a.schedules;
  gen.T = a.T;
  gen.d = a.d;
  gen.l = a.l;
  gen.n_train = a.n_train;
  gen.n_val = a.n_val;
  gen.n_test = a.n_test;
  tcs::check(a.T > a.l && a.l >= 1, "require T > l >= 1");
  const fs::path out = a.out.empty() ? default_out_root() / "synth" : fs::path(a.out);

  tcs::Rng rng(a.seed);
  std::vector<tcs::SynthTask> tasks = tcs::generate_benchmark(gen, rng);
  for (auto& task : tasks) {
    std::ostringstream tag;
    tag << "delta" << task.delta << "-s" << task.schedule_id;
    const fs::path dir = out / tag.str();
    fs::create_directories(dir);
    json meta{{"delta", task.delta},
              {"schedule", task.schedule_id},
              {"seed", a.seed},
              {"sizes", json::array({a.n_train, a.n_val, a.n_test})},
              {"task", a.classify ? "classification" : "regression"}};
    if (a.classify) {
      tcs::LabelizedTask lt = tcs::labelize(task.train, task.val, task.test);
      tcs::save_dataset(lt.train, dir / "train.jsonl");
      tcs::save_dataset(lt.val, dir / "val.jsonl");
      tcs::save_dataset(lt.test, dir / "test.jsonl");
      meta["threshold"] = lt.threshold;
    } else {
      tcs::save_dataset(task.train, dir / "train.jsonl");
      tcs::save_dataset(task.val, dir / "val.jsonl");
      tcs::save_dataset(task.test, dir / "test.jsonl");
    }
    g_written.push_back(dir / "train.jsonl");
    g_written.push_back(dir / "val.jsonl");
    g_written.push_back(dir / "test.jsonl");
    write_json(dir / "meta.json", meta);
  }
  write_json(out / "config.json", json{{"command", "synth"},
                                       {"delta", a.delta},
                                       {"schedules", a.schedules},
                                       {"T", a.T},
                                       {"d", a.d},
                                       {"l", a.l},
                                       {"n_train", a.n_train},
                                       {"n_val", a.n_val},
                                       {"n_test", a.n_test},
                                       {"seed", a.seed},
                                       {"classify", a.classify}});
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model = "lstm";
  int K = 0;
  int hidden = 32;
  int layers = 1;
  int te_dim = 24;
  bool layer_norm = false;
  bool standardize = false;
  std::vector<std::string> sweep;
  int trials = 40;
  double alpha = 0.0;
  double lr = 0.001;
  int batch = 100;
  int epochs = 30;
  int patience = 5;
  std::uint64_t seed = 1;
  std::string data;
  std::string out;
};

int run_train(const TrainArgs& a) {
  tcs::check(!a.data.empty(), "--data DIR is required");
  const fs::path data_dir(a.data);
  tcs::Dataset train_ds = tcs::load_dataset(data_dir / "train.jsonl");
  tcs::Dataset val_ds = tcs::load_dataset(data_dir / "val.jsonl");

  tcs::ModelSpec spec;
  spec.kind = tcs::model_kind_from_string(a.model);
  spec.input_dim = train_ds.header.d;
  spec.T = train_ds.header.T;
  spec.hidden = a.hidden;
  spec.K = tcs::has_K(spec.kind) ? a.K : 0;
  spec.num_layers = a.layers;
  spec.te_dim = a.te_dim;
  spec.use_layer_norm = a.layer_norm;
  spec.task = train_ds.header.task;
  spec.seed = a.seed;
  if (tcs::has_K(spec.kind)) tcs::check(a.K >= 1, "--K is required for shift/mix models");
  tcs::validate_spec(spec);

  tcs::TrainConfig cfg;
  cfg.lr = a.lr;
  cfg.batch_size = a.batch;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.smoothness_alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.standardize_features = a.standardize;

  const fs::path out = a.out.empty() ? default_out_root() / "train" : fs::path(a.out);
  fs::create_directories(out);

  json resolved{{"command", "train"}, {"model", a.model},     {"K", a.K},
                {"hidden", a.hidden}, {"layers", a.layers},   {"te_dim", a.te_dim},
                {"layer_norm", a.layer_norm},                 {"alpha", a.alpha},
                {"standardize", a.standardize},
                {"lr", a.lr},         {"batch", a.batch},     {"epochs", a.epochs},
                {"patience", a.patience},                     {"seed", a.seed},
                {"data", a.data},     {"trials", a.trials},   {"sweep", a.sweep}};

  if (!a.sweep.empty()) {
    tcs::SearchSpace space = parse_sweep(a.sweep);
    tcs::SearchResult res = tcs::random_search(spec, space, a.trials, train_ds, val_ds, cfg);
    tcs::save_model(res.champion, out / "model.json");
    g_written.push_back(out / "model.json");
    write_json(out / "history.json", tcs::history_to_json(res.champion_history));
    write_json(out / "leaderboard.json", tcs::leaderboard_to_json(res));
  } else {
    auto [model, history] = tcs::train(spec, train_ds, val_ds, cfg);
    tcs::save_model(model, out / "model.json");
    g_written.push_back(out / "model.json");
    write_json(out / "history.json", tcs::history_to_json(history));
  }
  write_json(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
  int bootstrap = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  tcs::check(!a.model.empty() && !a.data.empty(), "--model FILE and --data FILE are required");
  tcs::ModelState model = tcs::load_model(a.model);
  tcs::Dataset test = tcs::load_dataset(a.data);
  const fs::path out = a.out.empty() ? default_out_root() / "eval" : fs::path(a.out);
  fs::create_directories(out);

  json resolved{{"command", "eval"},
                {"model", a.model},
                {"data", a.data},
                {"bootstrap", a.bootstrap},
                {"seed", a.seed}};

  if (model.spec.task == tcs::Task::classification) {
    tcs::Rng rng(a.seed);
    tcs::EvalReport rep = tcs::evaluate(model, test, a.bootstrap, rng);
    write_json(out / "report.json", tcs::report_to_json(rep));
    std::string roc = "threshold,fpr,tpr\n";
    for (const auto& p : rep.roc)
      roc += (std::isinf(p.threshold) ? "inf" : csv_num(p.threshold)) + "," + csv_num(p.fpr) +
             "," + csv_num(p.tpr) + "\n";
    write_file(out / "roc.csv", roc);
    std::string pr = "threshold,recall,precision\n";
    for (const auto& p : rep.pr)
      pr += csv_num(p.threshold) + "," + csv_num(p.recall) + "," + csv_num(p.precision) + "\n";
    write_file(out / "pr.csv", pr);
    std::cout << "auroc " << rep.auroc << " [" << rep.auroc_lo << ", " << rep.auroc_hi << "]\n"
              << "aupr  " << rep.aupr << " [" << rep.aupr_lo << ", " << rep.aupr_hi << "]\n";
  } else {
    std::vector<double> per = tcs::per_example_mse(model, test);
    double mse = 0.0;
    for (double v : per) mse += v;
    mse /= static_cast<double>(per.size());
    json rep{{"mse", mse}, {"n_test", per.size()}, {"bootstrap_B", a.bootstrap}, {"seed", a.seed}};
    if (a.bootstrap > 0) {
      tcs::Rng rng(a.seed);
      auto [lo, hi] = tcs::bootstrap_mean_ci(per, a.bootstrap, 0.95, rng);
      rep["mse_ci"] = json::array({lo, hi});
    }
    write_json(out / "report.json", rep);
    std::cout << "mse " << mse << "\n";
  }
  write_json(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
  std::string model;
  std::string data;
  std::string mode = "gradient";
  int window = 12;
  double corr = 0.95;
  int target_class = 1;
  int repeats = 1;
  std::uint64_t seed = 1;
  std::string out;
};

int run_explain(const ExplainArgs& a) {
  tcs::check(!a.model.empty() && !a.data.empty(), "--model FILE and --data FILE are required");
  tcs::check(a.mode == "gradient" || a.mode == "permutation",
             "--mode must be gradient or permutation");
  tcs::ModelState model = tcs::load_model(a.model);
  tcs::Dataset ds = tcs::load_dataset(a.data);
  const fs::path out = a.out.empty() ? default_out_root() / "explain" : fs::path(a.out);
  fs::create_directories(out);

  json resolved{{"command", "explain"}, {"model", a.model},   {"data", a.data},
                {"mode", a.mode},       {"window", a.window}, {"corr", a.corr},
                {"target_class", a.target_class},             {"repeats", a.repeats},
                {"seed", a.seed}};

  if (a.mode == "gradient") {
    tcs::SaliencyMap map = tcs::gradient_saliency(model, ds, a.target_class);
    std::string grid = "t";
    for (int j = 0; j < map.values.cols(); ++j) grid += ",f" + std::to_string(j);
    grid += "\n";
    for (int t = 0; t < map.values.rows(); ++t) {
      grid += std::to_string(t + 1);
      for (int j = 0; j < map.values.cols(); ++j) grid += "," + csv_num(map.values.at(t, j));
      grid += "\n";
    }
    write_file(out / "saliency.csv", grid);
    json ranking = json::array();
    for (const auto& rf : tcs::rank_features(map)) {
      ranking.push_back(
          json{{"feature", rf.feature},
               {"importance", rf.importance},
               {"direction", rf.direction == tcs::Direction::risk ? "risk" : "protective"},
               {"trend", rf.trend == tcs::Trend::amplifying
                             ? "amplifying"
                             : rf.trend == tcs::Trend::diminishing ? "diminishing" : "flat"}});
    }
    write_json(out / "ranking.json", json{{"n_examples", map.n_examples},
                                          {"target_class", map.target_class},
                                          {"features", ranking}});
  } else {
    auto groups = tcs::correlation_groups(ds, a.corr);
    tcs::Rng rng(a.seed);
    tcs::PermImportanceOptions opt;
    opt.repeats = a.repeats;
    tcs::ImportanceTable table = tcs::permutation_importance(model, ds, a.window, groups, rng, opt);
    std::string grid = "group";
    for (std::size_t w = 0; w < table.windows.size(); ++w)
      grid += ",steps" + std::to_string(table.windows[w].first + 1) + "-" +
              std::to_string(table.windows[w].second);
    grid += "\n";
    for (std::size_t g = 0; g < table.groups.size(); ++g) {
      grid += "g" + std::to_string(g);
      for (std::size_t w = 0; w < table.windows.size(); ++w)
        grid += "," + csv_num(table.delta_auroc.at(static_cast<int>(g), static_cast<int>(w)));
      grid += "\n";
    }
    write_file(out / "importance.csv", grid);
    json jgroups = json::array();
    for (const auto& g : groups) jgroups.push_back(g);
    write_json(out / "groups.json", json{{"groups", jgroups},
                                         {"window", a.window},
                                         {"baseline_auroc", table.baseline_auroc},
                                         {"correlation_threshold", a.corr}});
  }
  write_json(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

struct ReproduceArgs {
  std::string suite;
  std::uint64_t seed = 1;
  int replicates = 3;
  int hidden = 32;
  int epochs = 30;
  int patience = 5;
  int batch = 100;
  int n_train = 1000, n_val = 1000, n_test = 1000;
  int jobs = 1;
  double task_delta = 0.3;
  bool no_standardize = false;
  std::string out;
};

int run_reproduce(const ReproduceArgs& a) {
  tcs::SuiteConfig cfg;
  cfg.seed = a.seed;
  cfg.replicates = a.replicates;
  cfg.hidden = a.hidden;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.batch_size = a.batch;
  cfg.n_train = a.n_train;
  cfg.n_val = a.n_val;
  cfg.n_test = a.n_test;
  cfg.jobs = a.jobs;
  cfg.task_delta = a.task_delta;
  cfg.standardize = !a.no_standardize;
  cfg.out = a.out.empty() ? default_out_root() / ("reproduce-" + a.suite) : fs::path(a.out);

  if (a.suite == "fig1a") {
    tcs::run_fig1a(cfg);
  } else if (a.suite == "fig1b") {
    tcs::run_fig1b(cfg);
  } else if (a.suite == "fig2") {
    tcs::run_fig2(cfg);
  } else if (a.suite == "fig3") {
    tcs::run_fig3(cfg);
  } else if (a.suite == "fig4") {
    tcs::run_fig4(cfg);
  } else {
    throw tcs::ValidationError("unknown suite '" + a.suite +
                               "' (available: fig1a, fig1b, fig2, fig3, fig4)");
  }
  for (const auto& entry : fs::recursive_directory_iterator(cfg.out))
    if (entry.is_regular_file()) g_written.push_back(entry.path());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal conditional shift laboratory"};
  app.require_subcommand(1);

  json file_cfg;
  try {
    file_cfg = prescan_config(argc, argv);
  } catch (const tcs::DataFormatError& e) {
    std::cerr << "error[E3_DATA]: " << e.what() << "\n";
    return 3;
  }
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  SynthArgs synth;
  apply_config(file_cfg, "delta", synth.delta);
  apply_config(file_cfg, "schedules", synth.schedules);
  apply_config(file_cfg, "T", synth.T);
  apply_config(file_cfg, "d", synth.d);
  apply_config(file_cfg, "l", synth.l);
  apply_config(file_cfg, "n_train", synth.n_train);
  apply_config(file_cfg, "n_val", synth.n_val);
  apply_config(file_cfg, "n_test", synth.n_test);
  apply_config(file_cfg, "seed", synth.seed);
  apply_config(file_cfg, "classify", synth.classify);
  apply_config(file_cfg, "out", synth.out);
  CLI::App* cmd_synth = app.add_subcommand("synth", "generate synthetic benchmark datasets");
  cmd_synth->add_option("--delta", synth.delta, "comma-separated deltas or 'all'");
  cmd_synth->add_option("--schedules", synth.schedules, "weight schedules per delta");
  cmd_synth->add_option("--T", synth.T, "sequence length");
  cmd_synth->add_option("--d", synth.d, "input features");
  cmd_synth->add_option("--l", synth.l, "lookback window");
  cmd_synth->add_option("--n-train", synth.n_train);
  cmd_synth->add_option("--n-val", synth.n_val);
  cmd_synth->add_option("--n-test", synth.n_test);
  cmd_synth->add_option("--seed", synth.seed);
  cmd_synth->add_flag("--classify", synth.classify, "emit the median-split classification variant");
  cmd_synth->add_option("--out", synth.out, "output directory");

  TrainArgs train;
  apply_config(file_cfg, "model", train.model);
  apply_config(file_cfg, "K", train.K);
  apply_config(file_cfg, "hidden", train.hidden);
  apply_config(file_cfg, "layers", train.layers);
  apply_config(file_cfg, "te_dim", train.te_dim);
  apply_config(file_cfg, "layer_norm", train.layer_norm);
  apply_config(file_cfg, "standardize", train.standardize);
  apply_config(file_cfg, "trials", train.trials);
  apply_config(file_cfg, "alpha", train.alpha);
  apply_config(file_cfg, "lr", train.lr);
  apply_config(file_cfg, "batch", train.batch);
  apply_config(file_cfg, "epochs", train.epochs);
  apply_config(file_cfg, "patience", train.patience);
  apply_config(file_cfg, "seed", train.seed);
  apply_config(file_cfg, "data", train.data);
  apply_config(file_cfg, "out", train.out);
  CLI::App* cmd_train = app.add_subcommand("train", "train a model on a dataset directory");
  cmd_train->add_option("--model", train.model, "nn|nn_t|lstm|lstm_t|lstm_te|shift|mix");
  cmd_train->add_option("--K", train.K, "cell count for shift/mix");
  cmd_train->add_option("--hidden", train.hidden);
  cmd_train->add_option("--layers", train.layers, "stacked layers (lstm only)");
  cmd_train->add_option("--te-dim", train.te_dim);
  cmd_train->add_flag("--layer-norm", train.layer_norm);
  cmd_train->add_flag("--standardize", train.standardize,
                      "standardize features with train-split statistics");
  cmd_train->add_option("--sweep", train.sweep,
                        "random-search dimension, e.g. hidden=100,150,300 (repeatable)");
  cmd_train->add_option("--trials", train.trials, "random-search trials");
  cmd_train->add_option("--alpha", train.alpha, "smoothness regularization strength");
  cmd_train->add_option("--lr", train.lr);
  cmd_train->add_option("--batch", train.batch);
  cmd_train->add_option("--epochs", train.epochs);
  cmd_train->add_option("--patience", train.patience);
  cmd_train->add_option("--seed", train.seed);
  cmd_train->add_option("--data", train.data, "directory with train.jsonl/val.jsonl");
  cmd_train->add_option("--out", train.out);

  EvalArgs eval;
  apply_config(file_cfg, "model", eval.model);
  apply_config(file_cfg, "data", eval.data);
  apply_config(file_cfg, "bootstrap", eval.bootstrap);
  apply_config(file_cfg, "seed", eval.seed);
  apply_config(file_cfg, "out", eval.out);
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a model on a test file");
  cmd_eval->add_option("--model", eval.model, "model.json path");
  cmd_eval->add_option("--data", eval.data, "test .jsonl path");
  cmd_eval->add_option("--bootstrap", eval.bootstrap, "bootstrap resamples (0 = point only)");
  cmd_eval->add_option("--seed", eval.seed);
  cmd_eval->add_option("--out", eval.out);

  ExplainArgs explain;
  apply_config(file_cfg, "model", explain.model);
  apply_config(file_cfg, "data", explain.data);
  apply_config(file_cfg, "mode", explain.mode);
  apply_config(file_cfg, "window", explain.window);
  apply_config(file_cfg, "corr", explain.corr);
  apply_config(file_cfg, "target_class", explain.target_class);
  apply_config(file_cfg, "repeats", explain.repeats);
  apply_config(file_cfg, "seed", explain.seed);
  apply_config(file_cfg, "out", explain.out);
  CLI::App* cmd_explain = app.add_subcommand("explain", "saliency and permutation importance");
  cmd_explain->add_option("--model", explain.model);
  cmd_explain->add_option("--data", explain.data);
  cmd_explain->add_option("--mode", explain.mode, "gradient|permutation");
  cmd_explain->add_option("--window", explain.window, "permutation window (steps)");
  cmd_explain->add_option("--corr", explain.corr, "correlation grouping threshold");
  cmd_explain->add_option("--target-class", explain.target_class);
  cmd_explain->add_option("--repeats", explain.repeats, "permutation draws per cell");
  cmd_explain->add_option("--seed", explain.seed);
  cmd_explain->add_option("--out", explain.out);

  ReproduceArgs repro;
  apply_config(file_cfg, "suite", repro.suite);
  apply_config(file_cfg, "seed", repro.seed);
  apply_config(file_cfg, "replicates", repro.replicates);
  apply_config(file_cfg, "hidden", repro.hidden);
  apply_config(file_cfg, "epochs", repro.epochs);
  apply_config(file_cfg, "patience", repro.patience);
  apply_config(file_cfg, "batch", repro.batch);
  apply_config(file_cfg, "n_train", repro.n_train);
  apply_config(file_cfg, "n_val", repro.n_val);
  apply_config(file_cfg, "n_test", repro.n_test);
  apply_config(file_cfg, "jobs", repro.jobs);
  apply_config(file_cfg, "task_delta", repro.task_delta);
  apply_config(file_cfg, "out", repro.out);
  CLI::App* cmd_repro = app.add_subcommand("reproduce", "run a named experiment suite");
  cmd_repro->add_option("--suite", repro.suite, "fig1a|fig1b|fig2|fig3|fig4");
  cmd_repro->add_option("--seeds", repro.replicates, "training seeds per cell");
  cmd_repro->add_option("--hidden", repro.hidden);
  cmd_repro->add_option("--epochs", repro.epochs);
  cmd_repro->add_option("--patience", repro.patience);
  cmd_repro->add_option("--batch", repro.batch);
  cmd_repro->add_option("--n-train", repro.n_train);
  cmd_repro->add_option("--n-val", repro.n_val);
  cmd_repro->add_option("--n-test", repro.n_test);
  cmd_repro->add_option("--jobs", repro.jobs, "worker threads for independent runs");
  cmd_repro->add_option("--task-delta", repro.task_delta, "delta for single-task suites");
  cmd_repro->add_flag("--no-standardize", repro.no_standardize,
                      "disable train-split feature standardization");
  cmd_repro->add_option("--seed", repro.seed);
  cmd_repro->add_option("--out", repro.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error[E2_ARGS]: " << e.what() << "\n";
    return 2;
  }

  try {
    int rc = 0;
    if (cmd_synth->parsed())
      rc = run_synth(synth);
    else if (cmd_train->parsed())
      rc = run_train(train);
    else if (cmd_eval->parsed())
      rc = run_eval(eval);
    else if (cmd_explain->parsed())
      rc = run_explain(explain);
    else if (cmd_repro->parsed())
      rc = run_reproduce(repro);
    for (const auto& p : g_written) std::cout << p.string() << "\n";
    return rc;
  } catch (const tcs::ValidationError& e) {
    std::cerr << "error[E2_VALIDATION]: " << e.what() << "\n";
    return 2;
  } catch (const tcs::DataFormatError& e) {
    std::cerr << "error[E3_DATA]: " << e.what() << "\n";
    return 3;
  } catch (const tcs::NumericError& e) {
    std::cerr << "error[E4_NUMERIC]: " << e.what() << "\n";
    return 4;
  }
}
