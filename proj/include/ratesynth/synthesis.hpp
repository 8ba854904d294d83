#pragma once

// Partially synthetic rating data. Three steps:
//   1. designate the retained cells (per-user stratified sample),
//   2. fit one CART tree per item on the retained ratings, splitting on the
//      retained ratings of that item's most co-rated items,
//   3. replace every other cell with a Bayesian-bootstrap draw from the leaf
//      its user's retained ratings fall into.
// Trees read retained values only, so items are independent of each other and
// the result does not depend on processing order or thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratesynth/bootstrap.hpp"
#include "ratesynth/cart.hpp"
#include "ratesynth/dataset.hpp"
#include "ratesynth/error.hpp"
#include "ratesynth/parallel.hpp"
#include "ratesynth/random.hpp"

namespace ratesynth {

/// Which cells of a parent dataset keep their original rating. Flags are
/// aligned with the parent's cells() order.
class RetentionMask {
 public:
  RetentionMask() = default;
  explicit RetentionMask(std::vector<bool> retained) : retained_(std::move(retained)) {
    count_ = static_cast<std::size_t>(std::count(retained_.begin(), retained_.end(), true));
  }

  bool retained(std::size_t cell) const { return retained_[cell]; }
  std::size_t parent_cell_count() const noexcept { return retained_.size(); }
  std::size_t retained_count() const noexcept { return count_; }
  const std::vector<bool>& flags() const noexcept { return retained_; }

  bool contains(const RatingDataset& parent, std::string_view user, std::string_view item) const {
    auto u = parent.find_user(user);
    auto i = parent.find_item(item);
    if (!u || !i) return false;
    auto cells = parent.cells();
    const std::size_t begin = static_cast<std::size_t>(parent.user_cells(*u).data() - cells.data());
    auto row = parent.user_cells(*u);
    auto it = std::lower_bound(row.begin(), row.end(), *i, [](const Cell& c, ItemIndex x) { return c.item < x; });
    if (it == row.end() || it->item != *i) return false;
    return retained_[begin + static_cast<std::size_t>(it - row.begin())];
  }

  friend bool operator==(const RetentionMask&, const RetentionMask&) = default;

 private:
  std::vector<bool> retained_;
  std::size_t count_ = 0;
};

/// Keeps round(retain_fraction x n_u) cells of every user (at least one),
/// chosen uniformly from a stream seeded by (seed, user id).
inline RetentionMask designate_retained(const RatingDataset& ds, double retain_fraction, std::uint64_t seed) {
  if (!(retain_fraction > 0.0 && retain_fraction <= 1.0)) throw Error("retain_fraction must lie in (0, 1]");
  if (ds.empty()) throw Error("cannot designate retained cells of an empty dataset");
  std::vector<bool> flags(ds.num_ratings(), false);
  const Cell* base = ds.cells().data();
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    auto row = ds.user_cells(u);
    const std::size_t offset = static_cast<std::size_t>(row.data() - base);
    const std::size_t n = row.size();
    auto keep = static_cast<std::size_t>(std::llround(retain_fraction * static_cast<double>(n)));
    keep = std::clamp<std::size_t>(keep, 1, n);
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    Rng rng(derive_seed(seed, {"retain", ds.user_id(u)}));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k = 0; k < keep; ++k) flags[offset + order[k]] = true;
  }
  return RetentionMask(std::move(flags));
}

/// Mask file: one "user<delim>item" line per retained cell, canonical order.
inline void write_mask(const RatingDataset& parent, const RetentionMask& mask, std::ostream& out, char delimiter = ',') {
  auto cells = parent.cells();
  for (std::size_t k = 0; k < cells.size(); ++k)
    if (mask.retained(k)) out << parent.user_id(cells[k].user) << delimiter << parent.item_id(cells[k].item) << '\n';
}

inline RetentionMask read_mask(std::istream& in, const RatingDataset& parent, char delimiter = ',',
                               const std::string& source = "<stream>") {
  std::vector<bool> flags(parent.num_ratings(), false);
  const Cell* base = parent.cells().data();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::chomp(line);
    if (detail::blank(view)) continue;
    auto fields = detail::split(view, delimiter);
    if (fields.size() != 2) throw ParseError(source, line_no, "expected user" + std::string(1, delimiter) + "item");
    auto u = parent.find_user(fields[0]);
    auto i = parent.find_item(fields[1]);
    std::optional<std::size_t> pos;
    if (u && i) {
      auto row = parent.user_cells(*u);
      auto it = std::lower_bound(row.begin(), row.end(), *i, [](const Cell& c, ItemIndex x) { return c.item < x; });
      if (it != row.end() && it->item == *i) pos = static_cast<std::size_t>(&*it - base);
    }
    if (!pos) throw ParseError(source, line_no, "cell (" + std::string(fields[0]) + ", " + std::string(fields[1]) +
                                                    ") is not in the dataset");
    flags[*pos] = true;
  }
  return RetentionMask(std::move(flags));
}

inline RetentionMask load_mask(const std::string& path, const RatingDataset& parent, char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open mask file");
  return read_mask(in, parent, delimiter, path);
}

struct SynthesisConfig {
  double retain_fraction = 0.42;
  StoppingRule stopping;
  std::size_t predictors_per_item = 30;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(retain_fraction > 0.0 && retain_fraction <= 1.0))
      throw ConfigError("retain_fraction", "must lie in (0, 1], got " + format_number(retain_fraction));
    if (stopping.min_node_size < 1) throw ConfigError("min_node_size", "must be at least 1");
    if (predictors_per_item < 1) throw ConfigError("predictors_per_item", "must be at least 1");
  }
};

/// Retained ratings of a dataset, indexed both ways, as category codes.
class RetainedView {
 public:
  struct Entry {
    std::uint32_t index;  // item index in by_user, user index in by_item
    Category category;
  };

  RetainedView(const RatingDataset& ds, const RetentionMask& mask) : ds_(&ds) {
    if (mask.parent_cell_count() != ds.num_ratings()) throw Error("mask does not belong to this dataset");
    by_user_.resize(ds.num_users());
    by_item_.resize(ds.num_items());
    global_ = ClassCounts(ds.scale().size());
    auto cells = ds.cells();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (!mask.retained(k)) continue;
      const std::size_t pos = *ds.scale().index_of(cells[k].rating);
      const Category c = category_of(pos);
      by_user_[cells[k].user].push_back({cells[k].item, c});
      by_item_[cells[k].item].push_back({cells[k].user, c});
      global_.add(pos);
    }
  }

  const RatingDataset& dataset() const noexcept { return *ds_; }
  std::span<const Entry> user(UserIndex u) const { return by_user_[u]; }
  std::span<const Entry> item(ItemIndex i) const { return by_item_[i]; }
  /// Multiset of all retained ratings.
  const ClassCounts& global_counts() const noexcept { return global_; }

  Category category(UserIndex u, ItemIndex i) const {
    const auto& row = by_user_[u];
    auto it = std::lower_bound(row.begin(), row.end(), i, [](const Entry& e, ItemIndex x) { return e.index < x; });
    return (it != row.end() && it->index == i) ? it->category : kUnrated;
  }

 private:
  const RatingDataset* ds_;
  std::vector<std::vector<Entry>> by_user_;
  std::vector<std::vector<Entry>> by_item_;
  ClassCounts global_;
};

/// The P items most co-rated with the target among retained cells, by
/// descending co-rating count, ties by item id. Never co-rated items rank
/// last (count zero) and only fill the list when fewer than P items co-occur.
inline std::vector<ItemIndex> select_predictors(const RetainedView& view, ItemIndex target, std::size_t p) {
  std::vector<std::uint32_t> counts(view.dataset().num_items(), 0);
  std::vector<ItemIndex> touched;
  for (const auto& rater : view.item(target)) {
    for (const auto& other : view.user(rater.index)) {
      if (other.index == target) continue;
      if (counts[other.index]++ == 0) touched.push_back(other.index);
    }
  }
  std::sort(touched.begin(), touched.end(), [&](ItemIndex a, ItemIndex b) {
    return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
  });
  if (touched.size() > p) touched.resize(p);
  for (ItemIndex i = 0; touched.size() < p && i < counts.size(); ++i)
    if (i != target && counts[i] == 0) touched.push_back(i);
  return touched;
}

inline std::vector<std::string> select_predictors(const RatingDataset& ds, const RetentionMask& mask,
                                                  const std::string& target_item, std::size_t p) {
  auto target = ds.find_item(target_item);
  if (!target) throw Error("unknown item " + target_item);
  RetainedView view(ds, mask);
  std::vector<std::string> out;
  for (ItemIndex i : select_predictors(view, *target, p)) out.push_back(ds.item_id(i));
  return out;
}

/// Features of one user for a tree: the user's retained category on each
/// predictor, UNRATED where the user has no retained rating.
inline std::vector<Category> user_features(const RetainedView& view, UserIndex u, std::span<const ItemIndex> predictors) {
  std::vector<Category> f(predictors.size());
  for (std::size_t p = 0; p < predictors.size(); ++p) f[p] = view.category(u, predictors[p]);
  return f;
}

/// Fits the tree for one target item. Training rows are the users with a
/// retained rating on the target.
inline CartTree fit_item_tree(const RetainedView& view, ItemIndex target, std::span<const ItemIndex> predictors,
                              const StoppingRule& stopping) {
  const auto& ds = view.dataset();
  auto raters = view.item(target);
  if (raters.empty()) throw Error("item " + ds.item_id(target) + " has no retained ratings");
  TrainingTable table;
  table.num_predictors = predictors.size();
  table.num_classes = ds.scale().size();
  table.features.reserve(raters.size() * predictors.size());
  table.targets.reserve(raters.size());
  for (const auto& rater : raters) {
    auto f = user_features(view, rater.index, predictors);
    table.features.insert(table.features.end(), f.begin(), f.end());
    table.targets.push_back(static_cast<std::uint8_t>(rater.category - 1));
  }
  std::vector<std::string> ids;
  for (ItemIndex p : predictors) ids.push_back(ds.item_id(p));
  return fit_tree(table, std::move(ids), stopping);
}

inline CartTree fit_item_tree(const RatingDataset& ds, const RetentionMask& mask, const std::string& target_item,
                              std::span<const std::string> predictors, const StoppingRule& stopping) {
  auto target = ds.find_item(target_item);
  if (!target) throw Error("unknown item " + target_item);
  std::vector<ItemIndex> idx;
  for (const auto& p : predictors) {
    auto i = ds.find_item(p);
    if (!i) throw Error("unknown predictor item " + p);
    idx.push_back(*i);
  }
  return fit_item_tree(RetainedView(ds, mask), *target, idx, stopping);
}

struct SynthesisStats {
  std::size_t trees = 0;
  std::size_t cold_items = 0;  // items synthesized from the global fallback leaf
  std::size_t synthesized_cells = 0;
  double mean_depth = 0;
  double mean_leaf_size = 0;
};

struct SynthesisResult {
  RatingDataset synthetic;
  RetentionMask mask;
  SynthesisStats stats;
};

inline SynthesisResult synthesize(const RatingDataset& ds, const SynthesisConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  if (ds.empty()) throw Error("cannot synthesize an empty dataset");
  RetentionMask mask = designate_retained(ds, cfg.retain_fraction, cfg.seed);
  RetainedView view(ds, mask);
  const auto& scale = ds.scale();
  auto cells = ds.cells();

  std::vector<double> values(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) values[k] = cells[k].rating;

  struct ItemStats {
    bool tree = false;
    bool cold = false;
    std::size_t depth = 0;
    std::size_t leaves = 0;
    std::size_t leaf_rows = 0;
    std::size_t synthesized = 0;
  };
  std::vector<ItemStats> item_stats(ds.num_items());

  parallel_for(ds.num_items(), threads, [&](std::size_t item) {
    const auto i = static_cast<ItemIndex>(item);
    std::vector<std::size_t> todo;
    for (std::size_t pos : ds.item_cells(i))
      if (!mask.retained(pos)) todo.push_back(pos);
    if (todo.empty()) return;
    ItemStats& st = item_stats[item];
    st.synthesized = todo.size();

    std::vector<ItemIndex> predictors;
    CartTree tree;
    if (view.item(i).empty()) {
      st.cold = true;
    } else {
      predictors = select_predictors(view, i, cfg.predictors_per_item);
      tree = fit_item_tree(view, i, predictors, cfg.stopping);
      st.tree = true;
      st.depth = tree.depth();
      for (const ClassCounts* leaf : tree.leaves()) {
        ++st.leaves;
        st.leaf_rows += leaf->total();
      }
    }
    for (std::size_t pos : todo) {
      const UserIndex u = cells[pos].user;
      const ClassCounts& leaf =
          st.cold ? view.global_counts() : tree.classify(user_features(view, u, predictors));
      Rng rng(derive_seed(cfg.seed, {"draw", ds.user_id(u), ds.item_id(i)}));
      values[pos] = bayesian_bootstrap_draw(leaf, scale, rng);
    }
  });

  SynthesisStats stats;
  std::size_t depth_sum = 0, leaves = 0, leaf_rows = 0;
  for (const auto& st : item_stats) {
    stats.synthesized_cells += st.synthesized;
    stats.cold_items += st.cold;
    if (!st.tree) continue;
    ++stats.trees;
    depth_sum += st.depth;
    leaves += st.leaves;
    leaf_rows += st.leaf_rows;
  }
  if (stats.trees) stats.mean_depth = static_cast<double>(depth_sum) / static_cast<double>(stats.trees);
  if (leaves) stats.mean_leaf_size = static_cast<double>(leaf_rows) / static_cast<double>(leaves);
  return {ds.with_ratings(values), std::move(mask), stats};
}

}  // namespace ratesynth
