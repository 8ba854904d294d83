#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ratesynth/dataset.hpp"
#include "ratesynth/error.hpp"

namespace ratesynth {

enum class Family { knn_basic, knn_centered, knn_baseline, slope_one, coclustering, mf, bmf, bprfm };
enum class Similarity { cosine, pearson };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::knn_basic: return "knn_basic";
    case Family::knn_centered: return "knn_centered";
    case Family::knn_baseline: return "knn_baseline";
    case Family::slope_one: return "slope_one";
    case Family::coclustering: return "coclustering";
    case Family::mf: return "mf";
    case Family::bmf: return "bmf";
    case Family::bprfm: return "bprfm";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view name) {
  for (Family f : {Family::knn_basic, Family::knn_centered, Family::knn_baseline, Family::slope_one,
                   Family::coclustering, Family::mf, Family::bmf, Family::bprfm})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

inline std::string_view to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "pearson"; }

inline std::optional<Similarity> parse_similarity(std::string_view name) {
  if (name == "cosine") return Similarity::cosine;
  if (name == "pearson") return Similarity::pearson;
  return std::nullopt;
}

inline bool is_rating_family(Family f) {
  return f == Family::knn_basic || f == Family::knn_centered || f == Family::knn_baseline ||
         f == Family::slope_one || f == Family::coclustering;
}
inline bool is_ranking_family(Family f) { return f == Family::mf || f == Family::bmf || f == Family::bprfm; }

/// One recommender algorithm plus its hyperparameters.
struct ModelSpec {
  Family family = Family::knn_basic;
  std::string label;  // defaults to the family name

  std::size_t k_neighbors = 40;
  Similarity similarity = Similarity::cosine;
  double baseline_damping = 10.0;
  std::size_t baseline_sweeps = 10;

  std::size_t n_user_clusters = 3;
  std::size_t n_item_clusters = 3;

  std::size_t n_factors = 20;
  std::size_t n_iterations = 20;
  double learning_rate = 0.005;
  double regularization = 0.02;
  double init_range = 0.05;

  std::uint64_t seed = 0;

  std::string name() const { return label.empty() ? std::string(to_string(family)) : label; }

  void validate() const {
    if (k_neighbors < 1) throw ConfigError("k_neighbors", "must be at least 1");
    if (n_user_clusters < 1) throw ConfigError("n_user_clusters", "must be at least 1");
    if (n_item_clusters < 1) throw ConfigError("n_item_clusters", "must be at least 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate", "must be positive");
    if (!(regularization >= 0)) throw ConfigError("regularization", "must be non-negative");
    if (!(baseline_damping >= 0)) throw ConfigError("baseline_damping", "must be non-negative");
    if (!(init_range >= 0)) throw ConfigError("init_range", "must be non-negative");
  }
};

/// A fitted recommender. Subclasses provide the estimate for a (user, item)
/// pair that both appear in training; this class supplies id lookup, the
/// fallback chain for unseen entities, clipping, and top-n ranking.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  TrainedModel(const TrainedModel&) = delete;
  TrainedModel& operator=(const TrainedModel&) = delete;

  const ModelSpec& spec() const noexcept { return spec_; }
  const RatingDataset& train() const noexcept { return train_; }
  double global_mean() const noexcept { return mu_; }
  double user_mean(UserIndex u) const { return user_mean_[u]; }
  double item_mean(ItemIndex i) const { return item_mean_[i]; }

  /// Rating prediction clipped to the scale. Unseen entities fall back to the
  /// item mean, then the user mean, then the global mean.
  double predict(std::string_view user, std::string_view item) const {
    auto u = train_.find_user(user);
    auto i = train_.find_item(item);
    double est;
    if (u && i)
      est = estimate(*u, *i);
    else if (i)
      est = item_mean_[*i];
    else if (u)
      est = user_mean_[*u];
    else
      est = mu_;
    if (!std::isfinite(est)) est = mu_;
    return train_.scale().clip(est);
  }

  /// Ranking score for a known (user, item) pair; higher is better.
  virtual double score(UserIndex u, ItemIndex i) const { return estimate(u, i); }

  /// The n highest-scoring training items outside `exclude`, best first, ties
  /// by item id. An unseen user is ranked by item mean.
  std::vector<std::string> top_n(std::string_view user, std::size_t n, const std::set<std::string>& exclude) const {
    std::vector<bool> skip(train_.num_items(), false);
    for (const auto& id : exclude)
      if (auto i = train_.find_item(id)) skip[*i] = true;
    std::vector<std::string> out;
    for (ItemIndex i : top_n(train_.find_user(user), n, skip)) out.push_back(train_.item_id(i));
    return out;
  }

  std::vector<ItemIndex> top_n(std::optional<UserIndex> user, std::size_t n, const std::vector<bool>& skip) const {
    std::vector<std::pair<double, ItemIndex>> scored;
    scored.reserve(train_.num_items());
    for (ItemIndex i = 0; i < train_.num_items(); ++i) {
      if (skip[i]) continue;
      double s = user ? score(*user, i) : item_mean_[i];
      if (std::isnan(s)) s = -std::numeric_limits<double>::infinity();
      scored.emplace_back(s, i);
    }
    // Item indices follow id order, so the index breaks ties lexicographically.
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    const std::size_t keep = std::min(n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    std::vector<ItemIndex> out;
    out.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) out.push_back(scored[k].second);
    return out;
  }

  /// Text dump: one parameter block per line, "<block> <key> <values...>".
  void write_text(std::ostream& out) const {
    out << "family " << to_string(spec_.family) << '\n';
    out << "label " << spec_.name() << '\n';
    out << "global_mean " << format_number(mu_) << '\n';
    write_parameters(out);
  }

 protected:
  TrainedModel(ModelSpec spec, const RatingDataset& train) : spec_(std::move(spec)), train_(train) {
    if (train_.empty()) throw Error("cannot train " + spec_.name() + " on an empty dataset");
    double total = 0;
    for (const auto& c : train_.cells()) total += c.rating;
    mu_ = total / static_cast<double>(train_.num_ratings());
    user_mean_.assign(train_.num_users(), 0.0);
    item_mean_.assign(train_.num_items(), 0.0);
    std::vector<std::size_t> item_n(train_.num_items(), 0);
    for (UserIndex u = 0; u < train_.num_users(); ++u) {
      auto row = train_.user_cells(u);
      double s = 0;
      for (const auto& c : row) {
        s += c.rating;
        item_mean_[c.item] += c.rating;
        ++item_n[c.item];
      }
      user_mean_[u] = s / static_cast<double>(row.size());
    }
    for (ItemIndex i = 0; i < train_.num_items(); ++i) item_mean_[i] /= static_cast<double>(item_n[i]);
  }

  /// Unclipped rating estimate for a user and item both seen in training.
  virtual double estimate(UserIndex u, ItemIndex i) const = 0;
  virtual void write_parameters(std::ostream& out) const = 0;

  void write_vector(std::ostream& out, std::string_view block, const std::string& key, std::span<const double> v) const {
    out << block << ' ' << key;
    for (double x : v) out << ' ' << format_number(x);
    out << '\n';
  }

  ModelSpec spec_;
  RatingDataset train_;
  double mu_ = 0;
  std::vector<double> user_mean_;
  std::vector<double> item_mean_;
};

}  // namespace ratesynth
