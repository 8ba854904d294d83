#pragma once

// Pipeline configuration, read from a versioned JSON document.
//
// Every section except the top-level `config_version` and `seed` is optional.
// Sub-seeds (synthesis, split, per-model) default to the top-level seed.
// Relative paths resolve against the directory holding the config file.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratesynth/audit.hpp"
#include "ratesynth/dataset.hpp"
#include "ratesynth/error.hpp"
#include "ratesynth/evaluate.hpp"
#include "ratesynth/synthesis.hpp"

namespace ratesynth {

inline constexpr int kConfigVersion = 1;

struct MetadataSource {
  std::string path;
  Role role = Role::director;
  char delimiter = '|';
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "out";

  std::string ratings_path;
  RatingSchema schema;
  RatingScale scale;

  std::vector<MetadataSource> metadata;

  SynthesisConfig synthesis;

  std::string synthetic_path;  // empty: <output_dir>/synthetic.csv
  std::string mask_path;       // empty: <output_dir>/mask.txt
  BenchmarkProtocol protocol;
  std::vector<TaskSpec> models;

  AuditOptions audit;

  std::string synthetic_file() const {
    return synthetic_path.empty() ? (std::filesystem::path(output_dir) / "synthetic.csv").string() : synthetic_path;
  }
  std::string mask_file() const {
    return mask_path.empty() ? (std::filesystem::path(output_dir) / "mask.txt").string() : mask_path;
  }

  /// Layout used for every ratings file the pipeline writes: three columns,
  /// the input's delimiter, and a header iff the input had one.
  RatingSchema output_schema() const {
    RatingSchema s;
    s.delimiter = schema.delimiter;
    s.has_header = schema.has_header;
    if (s.has_header) {
      s.user_name = schema.user_name.empty() ? "user" : schema.user_name;
      s.item_name = schema.item_name.empty() ? "item" : schema.item_name;
      s.rating_name = schema.rating_name.empty() ? "rating" : schema.rating_name;
    }
    return s;
  }

  /// Replaces the master seed and every derived seed.
  void override_seed(std::uint64_t s) {
    seed = s;
    synthesis.seed = s;
    protocol.split_seed = s;
    for (auto& m : models) m.model.seed = s;
  }
};

namespace detail {

using json = nlohmann::json;

class ConfigReader {
 public:
  ConfigReader(const json& node, std::string prefix, std::filesystem::path base)
      : node_(node), prefix_(std::move(prefix)), base_(std::move(base)) {
    if (!node_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "must be an object");
  }

  std::string key(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

  bool has(const std::string& name) {
    seen_.insert(name);
    return node_.contains(name);
  }

  const json& raw(const std::string& name) {
    if (!has(name)) throw ConfigError(key(name), "is required");
    return node_.at(name);
  }

  template <class T>
  T get(const std::string& name) {
    const json& v = raw(name);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(key(name), "must be true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(key(name), "must be an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(key(name), "must be non-negative");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(key(name), "must be a number");
      } else {
        if (!v.is_string()) throw ConfigError(key(name), "must be a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(key(name), e.what());
    }
  }

  template <class T>
  void opt(const std::string& name, T& out) {
    if (has(name)) out = get<T>(name);
  }

  std::string path(const std::string& name) {
    std::filesystem::path p(get<std::string>(name));
    if (p.empty()) throw ConfigError(key(name), "must not be empty");
    return (p.is_absolute() ? p : base_ / p).lexically_normal().string();
  }

  char delimiter(const std::string& name, char fallback) {
    if (!has(name)) return fallback;
    auto s = get<std::string>(name);
    if (s == "\\t" || s == "tab") return '\t';
    if (s.size() != 1) throw ConfigError(key(name), "must be a single character");
    return s[0];
  }

  ConfigReader child(const std::string& name) { return ConfigReader(raw(name), key(name), base_); }

  void reject_unknown() const {
    for (const auto& [k, v] : node_.items())
      if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
  }

  const std::filesystem::path& base() const { return base_; }

 private:
  const json& node_;
  std::string prefix_;
  std::filesystem::path base_;
  std::set<std::string> seen_;
};

inline TaskSpec read_model(const json& node, const std::string& where, Task task, std::uint64_t seed,
                           const std::filesystem::path& base) {
  ConfigReader r(node, where, base);
  TaskSpec t{task, {}};
  ModelSpec& m = t.model;
  auto name = r.get<std::string>("family");
  auto family = parse_family(name);
  if (!family) throw ConfigError(r.key("family"), "unknown model family '" + name + "'");
  const bool ok = task == Task::rating ? is_rating_family(*family) : is_ranking_family(*family);
  if (!ok)
    throw ConfigError(r.key("family"), name + " does not belong to the " + std::string(to_string(task)) + " task");
  m.family = *family;
  m.seed = seed;
  r.opt("label", m.label);
  r.opt("k_neighbors", m.k_neighbors);
  if (r.has("similarity")) {
    auto s = r.get<std::string>("similarity");
    auto sim = parse_similarity(s);
    if (!sim) throw ConfigError(r.key("similarity"), "unknown similarity '" + s + "'");
    m.similarity = *sim;
  }
  r.opt("baseline_damping", m.baseline_damping);
  r.opt("baseline_sweeps", m.baseline_sweeps);
  r.opt("n_user_clusters", m.n_user_clusters);
  r.opt("n_item_clusters", m.n_item_clusters);
  r.opt("n_factors", m.n_factors);
  r.opt("n_iterations", m.n_iterations);
  r.opt("learning_rate", m.learning_rate);
  r.opt("regularization", m.regularization);
  r.opt("init_range", m.init_range);
  r.opt("seed", m.seed);
  r.reject_unknown();
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(r.key(e.key()), e.what());
  }
  return t;
}

}  // namespace detail

/// Parses a configuration document. `base` anchors relative paths.
inline PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base) {
  using detail::ConfigReader;
  ConfigReader root(doc, "", base);
  const auto version = root.get<int>("config_version");
  if (version != kConfigVersion)
    throw ConfigError("config_version", "unsupported version " + std::to_string(version) + " (expected " +
                                            std::to_string(kConfigVersion) + ")");

  PipelineConfig cfg;
  cfg.seed = root.get<std::uint64_t>("seed");
  cfg.synthesis.seed = cfg.seed;
  cfg.protocol.split_seed = cfg.seed;
  root.opt("threads", cfg.threads);
  if (cfg.threads < 1) throw ConfigError("threads", "must be at least 1");
  if (root.has("output_dir")) cfg.output_dir = root.path("output_dir");

  {
    auto d = root.child("dataset");
    cfg.ratings_path = d.path("ratings");
    cfg.schema.delimiter = d.delimiter("delimiter", ',');
    d.opt("header", cfg.schema.has_header);
    if (d.has("columns")) {
      auto c = d.child("columns");
      auto column = [&](const std::string& name, std::size_t& index, std::string& label) {
        if (!c.has(name)) return;
        const auto& v = c.raw(name);
        if (v.is_string()) {
          if (!cfg.schema.has_header) throw ConfigError(c.key(name), "column names need header = true");
          label = v.get<std::string>();
        } else {
          index = c.get<std::size_t>(name);
        }
      };
      column("user", cfg.schema.user_column, cfg.schema.user_name);
      column("item", cfg.schema.item_column, cfg.schema.item_name);
      column("rating", cfg.schema.rating_column, cfg.schema.rating_name);
      c.reject_unknown();
    }
    if (d.has("scale")) {
      const auto& v = d.raw("scale");
      std::vector<double> values;
      if (!v.is_array()) throw ConfigError(d.key("scale"), "must be an array of rating values");
      for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(d.key("scale"), "must contain only numbers");
        values.push_back(x.get<double>());
      }
      try {
        cfg.scale = RatingScale(std::move(values));
      } catch (const Error& e) {
        throw ConfigError(d.key("scale"), e.what());
      }
    }
    d.reject_unknown();
  }

  if (root.has("metadata")) {
    const auto& list = root.raw("metadata");
    if (!list.is_array()) throw ConfigError("metadata", "must be an array");
    for (std::size_t n = 0; n < list.size(); ++n) {
      ConfigReader m(list[n], "metadata[" + std::to_string(n) + "]", base);
      MetadataSource src;
      src.path = m.path("path");
      auto role = m.get<std::string>("role");
      auto parsed = parse_role(role);
      if (!parsed) throw ConfigError(m.key("role"), "unknown role '" + role + "'");
      src.role = *parsed;
      src.delimiter = m.delimiter("delimiter", '|');
      m.reject_unknown();
      cfg.metadata.push_back(std::move(src));
    }
  }

  if (root.has("synthesis")) {
    auto s = root.child("synthesis");
    s.opt("retain_fraction", cfg.synthesis.retain_fraction);
    s.opt("min_node_size", cfg.synthesis.stopping.min_node_size);
    s.opt("max_depth", cfg.synthesis.stopping.max_depth);
    s.opt("predictors_per_item", cfg.synthesis.predictors_per_item);
    s.opt("seed", cfg.synthesis.seed);
    s.reject_unknown();
    try {
      cfg.synthesis.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(s.key(e.key()), e.what());
    }
  }

  if (root.has("benchmark")) {
    auto b = root.child("benchmark");
    if (b.has("synthetic")) cfg.synthetic_path = b.path("synthetic");
    b.opt("test_fraction", cfg.protocol.test_fraction);
    if (!(cfg.protocol.test_fraction > 0 && cfg.protocol.test_fraction < 1))
      throw ConfigError(b.key("test_fraction"), "must lie in (0, 1)");
    b.opt("split_seed", cfg.protocol.split_seed);
    if (b.has("iterations")) {
      const auto& v = b.raw("iterations");
      if (!v.is_array()) throw ConfigError(b.key("iterations"), "must be an array of iteration counts");
      cfg.protocol.iterations.clear();
      for (const auto& x : v) {
        if (!x.is_number_unsigned() || x.get<std::size_t>() < 1)
          throw ConfigError(b.key("iterations"), "entries must be positive integers");
        cfg.protocol.iterations.push_back(x.get<std::size_t>());
      }
    }
    b.opt("top_k", cfg.protocol.top_k);
    if (cfg.protocol.top_k < 1) throw ConfigError(b.key("top_k"), "must be at least 1");
    b.opt("relevance_threshold", cfg.protocol.relevance_threshold);
    for (auto [name, task] : {std::pair{"rating_models", Task::rating}, std::pair{"ranking_models", Task::ranking}}) {
      if (!b.has(name)) continue;
      const auto& list = b.raw(name);
      if (!list.is_array()) throw ConfigError(b.key(name), "must be an array of model specs");
      for (std::size_t n = 0; n < list.size(); ++n)
        cfg.models.push_back(
            detail::read_model(list[n], b.key(name) + "[" + std::to_string(n) + "]", task, cfg.seed, base));
    }
    b.reject_unknown();
    std::set<std::string> labels;
    for (const auto& t : cfg.models)
      if (!labels.insert(t.model.name()).second)
        throw ConfigError(b.key("models"), "duplicate model label '" + t.model.name() + "'");
  }

  if (root.has("audit")) {
    auto a = root.child("audit");
    a.opt("top_k", cfg.audit.top_k);
    if (cfg.audit.top_k < 1) throw ConfigError(a.key("top_k"), "must be at least 1");
    a.opt("threshold", cfg.audit.threshold);
    if (a.has("synthetic")) {
      auto p = a.path("synthetic");
      if (!cfg.synthetic_path.empty() && p != cfg.synthetic_path)
        throw ConfigError(a.key("synthetic"), "disagrees with benchmark.synthetic");
      cfg.synthetic_path = p;
    }
    if (a.has("mask")) cfg.mask_path = a.path("mask");
    a.reject_unknown();
  }

  root.reject_unknown();
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", path + ": " + e.what());
  }
  return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

}  // namespace ratesynth
