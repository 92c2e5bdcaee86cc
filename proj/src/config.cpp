#include "polylut/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "polylut/error.hpp"

namespace polylut {

using nlohmann::json;

ExperimentConfig profile_config(const std::string& name) {
  ExperimentConfig c;
  c.profile = name;
  c.network = profile_spec(name);
  TrainConfig& t = c.training;
  if (name == "spiral") {
    t.epochs = 400;
    t.batch_size = 64;
    t.base_lr = 1e-2;
    t.min_lr = 1e-4;
    t.weight_decay = 0.0;
    t.restart_period = 400.0;
    t.restart_mult = 1.0;
    t.seed = 3;
    c.dataset.kind = "spirals";
  } else if (name == "hdr") {
    t.epochs = 500;
    t.batch_size = 256;
  } else {
    t.epochs = 1000;
    t.batch_size = 1024;
  }
  if (name == "nid-lite") t.loss = LossKind::kBinaryCrossEntropy;
  return c;
}

namespace {

// Typed field access with dotted paths in error messages.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return false;
    try {
      out = read<T>(*it);
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type (" + it->type_name() + ")");
    }
    return true;
  }

  void mark(const char* key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError(path_ + "." + k + ": unknown field");
    }
  }

 private:
  template <typename T>
  static T read(const json& j) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw json::type_error::create(302, "bool", &j);
      return j.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw json::type_error::create(302, "integer", &j);
      if constexpr (std::is_unsigned_v<T>) {
        if (j.is_number_integer() && !j.is_number_unsigned()) {
          throw json::type_error::create(302, "unsigned", &j);
        }
      }
      return j.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw json::type_error::create(302, "number", &j);
      return j.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw json::type_error::create(302, "string", &j);
      return j.get<std::string>();
    } else {
      return j.get<T>();
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_network(const json& j, NetworkSpec& s) {
  Fields f(j, "network");
  f.get("input_features", s.input_features);
  if (j.contains("layer_widths")) {
    const auto& w = j.at("layer_widths");
    if (!w.is_array()) throw ConfigError("network.layer_widths: expected an array");
    s.layer_widths.clear();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w[i].is_number_unsigned()) {
        throw ConfigError("network.layer_widths[" + std::to_string(i) + "]: expected a positive integer");
      }
      s.layer_widths.push_back(w[i].get<std::size_t>());
    }
  }
  f.mark("layer_widths");
  f.get("beta", s.beta);
  f.get("fan_in", s.fan_in);
  f.get("degree", s.degree);
  int v = 0;
  if (f.get("input_beta", v)) s.input_beta = v;
  if (f.get("input_fan_in", v)) s.input_fan_in = v;
  f.get("seed", s.seed);
  f.get("clock_period_ns", s.clock_period_ns);
  f.get("max_table_bits", s.max_table_bits);
  f.finish();
}

void read_training(const json& j, TrainConfig& t) {
  Fields f(j, "training");
  f.get("epochs", t.epochs);
  f.get("batch_size", t.batch_size);
  f.get("base_lr", t.base_lr);
  f.get("min_lr", t.min_lr);
  f.get("weight_decay", t.weight_decay);
  f.get("restart_period", t.restart_period);
  f.get("restart_mult", t.restart_mult);
  f.get("seed", t.seed);
  f.get("bn_momentum", t.bn_momentum);
  f.get("scale_lr_mult", t.scale_lr_mult);
  std::string loss;
  if (f.get("loss", loss)) {
    try {
      t.loss = loss_kind_from_string(loss);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("training.loss: ") + e.what());
    }
  }
  f.finish();
}

void read_dataset(const json& j, DatasetConfig& d) {
  Fields f(j, "dataset");
  f.get("kind", d.kind);
  f.get("n_per_class", d.n_per_class);
  f.get("noise_sd", d.noise_sd);
  f.get("turns", d.turns);
  f.get("seed", d.seed);
  f.get("path", d.path);
  f.get("label_column", d.label_column);
  f.get("train_images", d.train_images);
  f.get("train_labels", d.train_labels);
  f.get("test_images", d.test_images);
  f.get("test_labels", d.test_labels);
  f.get("train_fraction", d.train_fraction);
  f.get("split_seed", d.split_seed);
  if (j.contains("feature_columns")) {
    const auto& c = j.at("feature_columns");
    if (!c.is_array()) throw ConfigError("dataset.feature_columns: expected an array of strings");
    d.feature_columns.clear();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_string()) {
        throw ConfigError("dataset.feature_columns[" + std::to_string(i) + "]: expected a string");
      }
      d.feature_columns.push_back(c[i].get<std::string>());
    }
  }
  f.mark("feature_columns");
  f.finish();
  if (!d.kind.empty() && d.kind != "spirals" && d.kind != "csv" && d.kind != "idx") {
    throw ConfigError("dataset.kind: expected spirals, csv or idx, got '" + d.kind + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c;
  {
    Fields top(root, "config");
    std::string profile;
    if (top.get("profile", profile)) c = profile_config(profile);
    top.mark("network");
    top.mark("training");
    top.mark("dataset");
    top.finish();
  }
  if (root.contains("network")) read_network(root.at("network"), c.network);
  if (root.contains("training")) read_training(root.at("training"), c.training);
  if (root.contains("dataset")) read_dataset(root.at("dataset"), c.dataset);
  c.base_dir = base_dir;

  if (const auto v = validate_spec(c.network); !v.empty()) {
    std::string msg = "network:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
  }
  if (const auto v = validate_train_config(c.training); !v.empty()) {
    throw ConfigError("training: " + v.front());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(text, dir.empty() ? "." : dir.string());
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  if (!c.profile.empty()) j["profile"] = c.profile;
  const auto& s = c.network;
  auto& n = j["network"];
  n["input_features"] = s.input_features;
  n["layer_widths"] = s.layer_widths;
  n["beta"] = s.beta;
  n["fan_in"] = s.fan_in;
  n["degree"] = s.degree;
  if (s.input_beta) n["input_beta"] = *s.input_beta;
  if (s.input_fan_in) n["input_fan_in"] = *s.input_fan_in;
  n["seed"] = s.seed;
  n["clock_period_ns"] = s.clock_period_ns;
  n["max_table_bits"] = s.max_table_bits;
  const auto& t = c.training;
  auto& tr = j["training"];
  tr["epochs"] = t.epochs;
  tr["batch_size"] = t.batch_size;
  tr["base_lr"] = t.base_lr;
  tr["min_lr"] = t.min_lr;
  tr["weight_decay"] = t.weight_decay;
  tr["restart_period"] = t.restart_period;
  tr["restart_mult"] = t.restart_mult;
  tr["seed"] = t.seed;
  tr["loss"] = to_string(t.loss);
  tr["bn_momentum"] = t.bn_momentum;
  tr["scale_lr_mult"] = t.scale_lr_mult;
  const auto& d = c.dataset;
  if (!d.kind.empty()) {
    auto& ds = j["dataset"];
    ds["kind"] = d.kind;
    if (d.kind == "spirals") {
      ds["n_per_class"] = d.n_per_class;
      ds["noise_sd"] = d.noise_sd;
      ds["turns"] = d.turns;
      ds["seed"] = d.seed;
    } else if (d.kind == "csv") {
      ds["path"] = d.path;
      ds["label_column"] = d.label_column;
      ds["feature_columns"] = d.feature_columns;
    } else if (d.kind == "idx") {
      ds["train_images"] = d.train_images;
      ds["train_labels"] = d.train_labels;
      ds["test_images"] = d.test_images;
      ds["test_labels"] = d.test_labels;
    }
    if (d.kind != "idx") {
      ds["train_fraction"] = d.train_fraction;
      ds["split_seed"] = d.split_seed;
    }
  }
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : config_to_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

NetworkSpec with_depth(const NetworkSpec& spec, std::size_t layers) {
  if (layers < 1 || layers > spec.layer_count()) {
    throw ConfigError("depth " + std::to_string(layers) + " outside [1, " +
                      std::to_string(spec.layer_count()) + "]");
  }
  NetworkSpec out = spec;
  out.layer_widths.assign(spec.layer_widths.begin(),
                          spec.layer_widths.begin() + static_cast<std::ptrdiff_t>(layers - 1));
  out.layer_widths.push_back(spec.layer_widths.back());
  return out;
}

std::pair<Dataset, Dataset> load_dataset(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const auto& d = c.dataset;
  auto resolve = [&](const std::string& p, const char* field) {
    if (p.empty()) throw ConfigError(std::string("dataset.") + field + ": missing path");
    const fs::path path = fs::path(p).is_absolute() ? fs::path(p) : fs::path(c.base_dir) / p;
    if (!fs::exists(path)) {
      throw ConfigError(std::string("dataset.") + field + ": no such file '" + path.string() + "'");
    }
    return path.string();
  };
  if (d.kind.empty()) {
    throw ConfigError("dataset: none configured (profile '" + c.profile +
                      "' data is not bundled; set dataset.kind and its paths)");
  }
  if (d.kind == "spirals") {
    return split_normalize(gen_spirals(d.n_per_class, d.noise_sd, d.turns, d.seed), d.train_fraction,
                           d.split_seed);
  }
  if (d.kind == "csv") {
    return split_normalize(load_csv(resolve(d.path, "path"), d.label_column, d.feature_columns),
                           d.train_fraction, d.split_seed);
  }
  Dataset train = load_idx(resolve(d.train_images, "train_images"), resolve(d.train_labels, "train_labels"));
  Dataset test = load_idx(resolve(d.test_images, "test_images"), resolve(d.test_labels, "test_labels"));
  // Pixels share one range; use the training split's per-feature extremes.
  Normalization norm;
  norm.min.assign(train.cols, 0.0);
  norm.max.assign(train.cols, 0.0);
  for (std::size_t j = 0; j < train.cols && train.rows > 0; ++j) {
    double lo = train.features[j], hi = lo;
    for (std::size_t i = 1; i < train.rows; ++i) {
      lo = std::min(lo, train.features[i * train.cols + j]);
      hi = std::max(hi, train.features[i * train.cols + j]);
    }
    norm.min[j] = lo;
    norm.max[j] = hi;
  }
  return {apply_normalization(train, norm), apply_normalization(test, norm)};
}

}  // namespace polylut
