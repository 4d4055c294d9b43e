#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tcs/cells.hpp"  // Task
#include "tcs/rng.hpp"
#include "tcs/tensor.hpp"

namespace tcs {

using json = nlohmann::json;

enum class FeatureType { continuous, categorical };

struct FeatureSpec {
  std::string name;
  FeatureType type = FeatureType::continuous;
  std::vector<std::string> vocab;         // categorical only
  std::optional<double> normal_default;   // value used before the first observation
};

struct Schema {
  std::vector<FeatureSpec> features;

  int feature_index(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::string to_string(Task t) {
  return t == Task::regression ? "regression" : "classification";
}

inline Task task_from_string(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw DataFormatError("unknown task: " + s);
}

struct DatasetHeader {
  int format_version = 1;
  Schema schema;
  int T = 0;
  int d = 0;
  Task task = Task::regression;
  json metadata = json::object();
};

struct Example {
  std::string id;
  Tensor x;               // T x d
  std::vector<double> y;  // regression targets (t = l+1..T)
  int label = -1;         // classification label
  Tensor mask;            // optional T x d imputation mask (empty if absent)
};

struct Dataset {
  DatasetHeader header;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  // Steps before l+1 are excluded from regression losses and metrics.
  int lag() const { return header.metadata.value("l", 0); }
};

// ---------------------------------------------------------------------------
// JSON Lines serialization
// ---------------------------------------------------------------------------

inline json schema_to_json(const Schema& s) {
  json features = json::array();
  for (const auto& f : s.features) {
    json jf{{"name", f.name},
            {"type", f.type == FeatureType::continuous ? "continuous" : "categorical"}};
    if (!f.vocab.empty()) jf["vocab"] = f.vocab;
    if (f.normal_default) jf["default"] = *f.normal_default;
    features.push_back(jf);
  }
  return json{{"features", features}};
}

inline Schema schema_from_json(const json& j) {
  Schema s;
  for (const auto& jf : j.at("features")) {
    FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    const std::string t = jf.at("type").get<std::string>();
    if (t == "continuous")
      f.type = FeatureType::continuous;
    else if (t == "categorical")
      f.type = FeatureType::categorical;
    else
      throw DataFormatError("unknown feature type: " + t);
    if (jf.contains("vocab")) f.vocab = jf.at("vocab").get<std::vector<std::string>>();
    if (jf.contains("default")) f.normal_default = jf.at("default").get<double>();
    s.features.push_back(std::move(f));
  }
  return s;
}

inline json matrix_to_json(const Tensor& t) {
  json rows = json::array();
  for (int r = 0; r < t.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Tensor matrix_from_json(const json& j, int T, int d, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != T)
    throw DataFormatError(what + ": expected " + std::to_string(T) + " rows");
  Tensor t({T, d});
  for (int r = 0; r < T; ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != d)
      throw DataFormatError(what + ": row " + std::to_string(r) + " expected " +
                            std::to_string(d) + " columns");
    for (int c = 0; c < d; ++c) {
      const double v = row[c].get<double>();
      if (!std::isfinite(v)) throw NumericError(what + ": non-finite value");
      t.at(r, c) = v;
    }
  }
  return t;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "save_dataset: cannot open " + path.string());
  json header{{"format_version", ds.header.format_version},
              {"schema", schema_to_json(ds.header.schema)},
              {"T", ds.header.T},
              {"d", ds.header.d},
              {"task", to_string(ds.header.task)},
              {"metadata", ds.header.metadata}};
  out << header.dump() << "\n";
  for (const Example& ex : ds.examples) {
    json line{{"id", ex.id}, {"x", matrix_to_json(ex.x)}};
    if (ds.header.task == Task::regression)
      line["y"] = ex.y;
    else
      line["y"] = ex.label;
    if (!ex.mask.values.empty()) {
      json mrows = json::array();
      for (int r = 0; r < ex.mask.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < ex.mask.cols(); ++c)
          row.push_back(static_cast<int>(ex.mask.at(r, c)));
        mrows.push_back(std::move(row));
      }
      line["mask"] = std::move(mrows);
    }
    out << line.dump() << "\n";
  }
  check(out.good(), "save_dataset: write failed for " + path.string());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataFormatError("load_dataset: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw DataFormatError("load_dataset: missing header line in " + path.string());
  Dataset ds;
  try {
    json h = json::parse(line);
    ds.header.format_version = h.at("format_version").get<int>();
    if (ds.header.format_version != 1)
      throw DataFormatError("load_dataset: unsupported format_version " +
                            std::to_string(ds.header.format_version));
    ds.header.schema = schema_from_json(h.at("schema"));
    ds.header.T = h.at("T").get<int>();
    ds.header.d = h.at("d").get<int>();
    ds.header.task = task_from_string(h.at("task").get<std::string>());
    ds.header.metadata = h.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw DataFormatError("load_dataset: bad header (line 1): " + std::string(e.what()));
  }
  const int T = ds.header.T, d = ds.header.d;
  const int l = ds.header.metadata.value("l", 0);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Example ex;
    try {
      json j = json::parse(line);
      ex.id = j.at("id").get<std::string>();
      ex.x = matrix_from_json(j.at("x"), T, d, "example " + ex.id);
      if (ds.header.task == Task::regression) {
        ex.y = j.at("y").get<std::vector<double>>();
        if (static_cast<int>(ex.y.size()) != T - l)
          throw DataFormatError("example " + ex.id + ": expected " + std::to_string(T - l) +
                                " targets");
      } else {
        ex.label = j.at("y").get<int>();
        if (ex.label != 0 && ex.label != 1)
          throw DataFormatError("example " + ex.id + ": label must be 0 or 1");
      }
      if (j.contains("mask")) ex.mask = matrix_from_json(j.at("mask"), T, d, "mask " + ex.id);
    } catch (const json::exception& e) {
      throw DataFormatError("load_dataset: line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataFormatError& e) {
      throw DataFormatError("load_dataset: line " + std::to_string(line_no) + ": " + e.what());
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Raw (sparse observation) records and preprocessing
// ---------------------------------------------------------------------------

struct RawObservation {
  int step = 0;  // 1-indexed
  std::string feature;
  json value;  // number for continuous, string for categorical
};

struct RawSequenceRecord {
  std::string id;
  std::vector<RawObservation> observations;
  int label = -1;
  std::vector<double> y;
};

struct RawFile {
  Schema schema;
  int T = 0;
  Task task = Task::classification;
  json metadata = json::object();
  std::vector<RawSequenceRecord> records;
};

inline RawFile load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataFormatError("load_raw: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw DataFormatError("load_raw: missing header line");
  RawFile rf;
  try {
    json h = json::parse(line);
    if (h.at("format_version").get<int>() != 1)
      throw DataFormatError("load_raw: unsupported format_version");
    rf.schema = schema_from_json(h.at("schema"));
    rf.T = h.at("T").get<int>();
    rf.task = task_from_string(h.at("task").get<std::string>());
    rf.metadata = h.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw DataFormatError("load_raw: bad header: " + std::string(e.what()));
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      RawSequenceRecord rec;
      rec.id = j.at("id").get<std::string>();
      for (const auto& o : j.at("observations")) {
        RawObservation obs;
        obs.step = o.at(0).get<int>();
        obs.feature = o.at(1).get<std::string>();
        obs.value = o.at(2);
        if (obs.step < 1 || obs.step > rf.T)
          throw DataFormatError("record " + rec.id + ": step out of range");
        if (rf.schema.feature_index(obs.feature) < 0)
          throw DataFormatError("record " + rec.id + ": unknown feature " + obs.feature);
        rec.observations.push_back(std::move(obs));
      }
      if (rf.task == Task::classification)
        rec.label = j.at("y").get<int>();
      else
        rec.y = j.at("y").get<std::vector<double>>();
      rf.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataFormatError("load_raw: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rf;
}

// Imputed value grid: one cell per (step, raw feature). Continuous cells hold
// doubles, categorical cells hold the category ("" before any observation and
// without a schema default).
struct ImputedGrid {
  using Cell = std::variant<double, std::string>;
  std::vector<std::vector<Cell>> cells;  // T rows x F features
  Tensor mask;                           // T x F, 1 where no observation at that step
};

// Carry-forward imputation on the hourly grid: each cell holds the most
// recent observation at or before t; cells before any observation hold the
// schema default. Mask is 1 exactly where no observation exists at that step.
inline ImputedGrid impute_carry_forward(const RawSequenceRecord& rec, const Schema& schema,
                                        int T) {
  const int F = static_cast<int>(schema.features.size());
  ImputedGrid grid;
  grid.cells.assign(T, std::vector<ImputedGrid::Cell>(F));
  grid.mask = Tensor::full({T, F}, 1.0);

  // observed[t][f] true when a real observation lands at step t.
  std::vector<std::vector<std::optional<json>>> obs_at(
      T, std::vector<std::optional<json>>(F));
  for (const auto& obs : rec.observations) {
    const int f = schema.feature_index(obs.feature);
    if (f < 0) throw DataFormatError("impute: unknown feature " + obs.feature);
    if (obs.step < 1 || obs.step > T) throw DataFormatError("impute: step out of range");
    obs_at[obs.step - 1][f] = obs.value;  // later duplicates win within a step
  }
  for (int f = 0; f < F; ++f) {
    const FeatureSpec& spec = schema.features[f];
    ImputedGrid::Cell carried;
    if (spec.type == FeatureType::continuous)
      carried = spec.normal_default.value_or(0.0);
    else
      carried = std::string("");
    bool seen = false;
    for (int t = 0; t < T; ++t) {
      if (obs_at[t][f]) {
        const json& v = *obs_at[t][f];
        if (spec.type == FeatureType::continuous) {
          if (!v.is_number()) throw DataFormatError("impute: expected number for " + spec.name);
          carried = v.get<double>();
        } else {
          if (!v.is_string()) throw DataFormatError("impute: expected string for " + spec.name);
          carried = v.get<std::string>();
        }
        seen = true;
        grid.mask.at(t, f) = 0.0;
      }
      (void)seen;
      grid.cells[t][f] = carried;
    }
  }
  return grid;
}

// Standardization statistics, computed from the training split only.
struct TrainStats {
  std::map<std::string, double> mean;
  std::map<std::string, double> scale;  // std with a 1e-8 floor
};

inline TrainStats compute_train_stats(const std::vector<ImputedGrid>& grids,
                                      const Schema& schema) {
  TrainStats stats;
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    if (schema.features[f].type != FeatureType::continuous) continue;
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& g : grids)
      for (const auto& row : g.cells) {
        const double v = std::get<double>(row[f]);
        sum += v;
        sq += v * v;
        ++n;
      }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    const double var = n ? std::max(0.0, sq / static_cast<double>(n) - mean * mean) : 0.0;
    stats.mean[schema.features[f].name] = mean;
    stats.scale[schema.features[f].name] = std::max(1e-8, std::sqrt(var));
  }
  return stats;
}

// Encoded column names for a schema: continuous features keep their name,
// categorical features expand to one column per vocabulary entry, then one
// mask column per raw feature.
inline std::vector<std::string> encoded_columns(const Schema& schema) {
  std::vector<std::string> cols;
  for (const auto& f : schema.features) {
    if (f.type == FeatureType::continuous) {
      cols.push_back(f.name);
    } else {
      for (const auto& v : f.vocab) cols.push_back(f.name + "->" + v);
    }
  }
  for (const auto& f : schema.features) cols.push_back("mask->" + f.name);
  return cols;
}

struct EncodeResult {
  Tensor x;     // T x d' encoded feature rows with mask channels appended
  Tensor mask;  // T x F raw-feature imputation mask (copy of the grid's)
  std::vector<std::string> warnings;
};

// Standardizes continuous features with train-split statistics, one-hot
// encodes categorical features over the declared vocabulary (unknown
// category -> all zeros, with a warning), and appends the mask channels.
inline EncodeResult encode(const ImputedGrid& grid, const Schema& schema,
                           const TrainStats& stats) {
  const int T = static_cast<int>(grid.cells.size());
  const int F = static_cast<int>(schema.features.size());
  int width = 0;
  for (const auto& f : schema.features)
    width += f.type == FeatureType::continuous ? 1 : static_cast<int>(f.vocab.size());
  EncodeResult res;
  res.x = Tensor({T, width + F});
  res.mask = grid.mask;
  for (int t = 0; t < T; ++t) {
    int c = 0;
    for (int f = 0; f < F; ++f) {
      const FeatureSpec& spec = schema.features[f];
      if (spec.type == FeatureType::continuous) {
        auto mit = stats.mean.find(spec.name);
        auto sit = stats.scale.find(spec.name);
        if (mit == stats.mean.end() || sit == stats.scale.end())
          throw ValidationError("encode: missing train stats for " + spec.name);
        res.x.at(t, c++) = (std::get<double>(grid.cells[t][f]) - mit->second) / sit->second;
      } else {
        const std::string& v = std::get<std::string>(grid.cells[t][f]);
        bool found = false;
        for (std::size_t k = 0; k < spec.vocab.size(); ++k) {
          const bool hit = spec.vocab[k] == v;
          res.x.at(t, c + static_cast<int>(k)) = hit ? 1.0 : 0.0;
          found = found || hit;
        }
        if (!found && !v.empty())
          res.warnings.push_back("unknown category '" + v + "' for " + spec.name +
                                 " at step " + std::to_string(t + 1));
        c += static_cast<int>(spec.vocab.size());
      }
    }
    for (int f = 0; f < F; ++f) res.x.at(t, width + f) = grid.mask.at(t, f);
  }
  return res;
}

// Full raw -> processed pipeline. Stats, when not supplied, are computed from
// these records (callers pass the train split's stats for val/test).
inline Dataset build_processed(const RawFile& rf, const TrainStats* stats_in = nullptr) {
  std::vector<ImputedGrid> grids;
  grids.reserve(rf.records.size());
  for (const auto& rec : rf.records) grids.push_back(impute_carry_forward(rec, rf.schema, rf.T));
  TrainStats stats = stats_in ? *stats_in : compute_train_stats(grids, rf.schema);
  Dataset ds;
  ds.header.schema = rf.schema;
  ds.header.T = rf.T;
  ds.header.task = rf.task;
  ds.header.metadata = rf.metadata;
  ds.header.metadata["encoded_columns"] = encoded_columns(rf.schema);
  json jm = json::object(), js = json::object();
  for (const auto& [k, v] : stats.mean) jm[k] = v;
  for (const auto& [k, v] : stats.scale) js[k] = v;
  ds.header.metadata["train_stats"] = json{{"mean", jm}, {"scale", js}};
  for (std::size_t i = 0; i < rf.records.size(); ++i) {
    EncodeResult enc = encode(grids[i], rf.schema, stats);
    Example ex;
    ex.id = rf.records[i].id;
    ex.x = std::move(enc.x);
    ex.mask = std::move(enc.mask);
    ex.label = rf.records[i].label;
    ex.y = rf.records[i].y;
    ds.examples.push_back(std::move(ex));
  }
  ds.header.d = ds.examples.empty() ? static_cast<int>(encoded_columns(rf.schema).size())
                                    : ds.examples[0].x.cols();
  return ds;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitResult {
  Dataset train, val, test;
};

inline Dataset take_subset(const Dataset& ds, const std::vector<std::size_t>& idx,
                           const std::string& tag) {
  Dataset out;
  out.header = ds.header;
  out.header.metadata["split"] = tag;
  json ids = json::array();
  for (std::size_t i : idx) {
    out.examples.push_back(ds.examples[i]);
    ids.push_back(ds.examples[i].id);
  }
  out.header.metadata["split_ids"] = std::move(ids);
  return out;
}

// Deterministic split by fractions (must sum to 1).
inline SplitResult split(const Dataset& ds, double f_train, double f_val, double f_test,
                         Rng& rng) {
  check(std::fabs(f_train + f_val + f_test - 1.0) < 1e-9, "split: fractions must sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> perm = rng.permutation(n);
  const auto b1 = static_cast<std::size_t>(std::floor(f_train * static_cast<double>(n)));
  const auto b2 = static_cast<std::size_t>(std::floor((f_train + f_val) * static_cast<double>(n)));
  SplitResult r;
  r.train = take_subset(ds, {perm.begin(), perm.begin() + b1}, "train");
  r.val = take_subset(ds, {perm.begin() + b1, perm.begin() + b2}, "val");
  r.test = take_subset(ds, {perm.begin() + b2, perm.end()}, "test");
  return r;
}

// Split by explicit id lists; lists must be disjoint.
inline SplitResult split_by_ids(const Dataset& ds, const std::vector<std::string>& train_ids,
                                const std::vector<std::string>& val_ids,
                                const std::vector<std::string>& test_ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[ds.examples[i].id] = i;
  std::map<std::string, int> seen;
  auto gather = [&](const std::vector<std::string>& ids, const std::string& tag) {
    std::vector<std::size_t> idx;
    for (const auto& id : ids) {
      auto it = index.find(id);
      check(it != index.end(), "split_by_ids: unknown id " + id);
      check(++seen[id] == 1, "split_by_ids: id " + id + " appears in more than one list");
      idx.push_back(it->second);
    }
    return take_subset(ds, idx, tag);
  };
  SplitResult r;
  r.train = gather(train_ids, "train");
  r.val = gather(val_ids, "val");
  r.test = gather(test_ids, "test");
  return r;
}

// Training-set subsampling with val/test untouched (learning-curve protocol).
inline Dataset subsample(const Dataset& ds, std::size_t n, Rng& rng) {
  check(n <= ds.size(), "subsample: n exceeds dataset size");
  std::vector<std::size_t> perm = rng.permutation(ds.size());
  perm.resize(n);
  Dataset out = take_subset(ds, perm, ds.header.metadata.value("split", std::string("train")));
  out.header.metadata["subsampled_n"] = n;
  return out;
}

}  // namespace tcs
