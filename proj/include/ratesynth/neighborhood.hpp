#pragma once

// Item-based neighborhood predictors (KNN variants) and Slope One.

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ratesynth/model.hpp"

namespace ratesynth {

/// Sparse symmetric item-item table: row i holds (j, value) for every item j
/// sharing at least one user with i, sorted by j.
class ItemPairTable {
 public:
  using Row = std::vector<std::pair<ItemIndex, double>>;

  ItemPairTable() = default;
  explicit ItemPairTable(std::vector<Row> rows) : rows_(std::move(rows)) {}

  const Row& row(ItemIndex i) const { return rows_[i]; }
  std::size_t size() const noexcept { return rows_.size(); }

  std::optional<double> get(ItemIndex i, ItemIndex j) const {
    const auto& r = rows_[i];
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const auto& e, ItemIndex x) { return e.first < x; });
    if (it == r.end() || it->first != j) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<Row> rows_;
};

/// Pairwise sums over users who rated both items, gathered one row at a time.
/// `fn(i, j, stats)` maps the sums to the stored value.
struct CoRatingSums {
  double xy = 0, xx = 0, yy = 0, x = 0, y = 0;
  std::size_t n = 0;
};

template <class Fn>
ItemPairTable build_item_pairs(const RatingDataset& ds, Fn&& fn) {
  std::vector<ItemPairTable::Row> rows(ds.num_items());
  std::vector<CoRatingSums> acc(ds.num_items());
  std::vector<ItemIndex> touched;
  auto cells = ds.cells();
  for (ItemIndex i = 0; i < ds.num_items(); ++i) {
    touched.clear();
    for (std::size_t pos : ds.item_cells(i)) {
      const Cell& ci = cells[pos];
      for (const Cell& cj : ds.user_cells(ci.user)) {
        if (cj.item == i) continue;
        auto& a = acc[cj.item];
        if (a.n == 0) touched.push_back(cj.item);
        a.xy += ci.rating * cj.rating;
        a.xx += ci.rating * ci.rating;
        a.yy += cj.rating * cj.rating;
        a.x += ci.rating;
        a.y += cj.rating;
        ++a.n;
      }
    }
    std::sort(touched.begin(), touched.end());
    auto& row = rows[i];
    row.reserve(touched.size());
    for (ItemIndex j : touched) {
      row.emplace_back(j, fn(acc[j]));
      acc[j] = {};
    }
  }
  return ItemPairTable(std::move(rows));
}

/// Cosine or Pearson similarity over co-rating users.
inline ItemPairTable item_similarities(const RatingDataset& ds, Similarity kind) {
  if (kind == Similarity::cosine) {
    return build_item_pairs(ds, [](const CoRatingSums& s) {
      const double den = std::sqrt(s.xx * s.yy);
      return den > 0 ? s.xy / den : 0.0;
    });
  }
  return build_item_pairs(ds, [](const CoRatingSums& s) {
    const double n = static_cast<double>(s.n);
    const double cov = s.xy - s.x * s.y / n;
    const double vx = s.xx - s.x * s.x / n;
    const double vy = s.yy - s.y * s.y / n;
    const double den = std::sqrt(vx * vy);
    return den > 1e-12 ? cov / den : 0.0;
  });
}

/// Item-based k-nearest-neighbor predictor in three flavors:
///   knn_basic:    sum(sim * r_uj) / sum(sim)
///   knn_centered: mu_i + sum(sim * (r_uj - mu_j)) / sum(sim)
///   knn_baseline: b_ui + sum(sim * (r_uj - b_uj)) / sum(sim)
/// over the k most similar items the user rated, positive similarities only.
class KnnModel final : public TrainedModel {
 public:
  KnnModel(ModelSpec spec, const RatingDataset& train) : TrainedModel(std::move(spec), train) {
    sims_ = item_similarities(train_, spec_.similarity);
    if (spec_.family == Family::knn_baseline) fit_baselines();
  }

  /// b_ui = mu + b_u + b_i; zero biases unless the family is knn_baseline.
  double baseline(UserIndex u, ItemIndex i) const {
    return mu_ + (user_bias_.empty() ? 0.0 : user_bias_[u]) + (item_bias_.empty() ? 0.0 : item_bias_[i]);
  }
  std::span<const double> user_biases() const noexcept { return user_bias_; }
  std::span<const double> item_biases() const noexcept { return item_bias_; }
  const ItemPairTable& similarities() const noexcept { return sims_; }

 protected:
  double estimate(UserIndex u, ItemIndex i) const override {
    std::vector<std::pair<double, const Cell*>> neighbors;
    for (const Cell& c : train_.user_cells(u)) {
      if (c.item == i) continue;
      auto s = sims_.get(i, c.item);
      if (s && *s > 0) neighbors.emplace_back(*s, &c);
    }
    const std::size_t k = std::min(spec_.k_neighbors, neighbors.size());
    std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(k), neighbors.end(),
                      [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second->item < b.second->item;
                      });
    double num = 0, den = 0;
    for (std::size_t n = 0; n < k; ++n) {
      const auto [sim, cell] = neighbors[n];
      num += sim * (cell->rating - offset(u, cell->item));
      den += sim;
    }
    if (den <= 0) {
      // No usable neighbor: the item's own reference level.
      return spec_.family == Family::knn_baseline ? baseline(u, i) : item_mean_[i];
    }
    return offset(u, i) + num / den;
  }

  void write_parameters(std::ostream& out) const override {
    for (ItemIndex i = 0; i < train_.num_items(); ++i) {
      out << "item_mean " << train_.item_id(i) << ' ' << format_number(item_mean_[i]) << '\n';
      if (!item_bias_.empty()) out << "item_bias " << train_.item_id(i) << ' ' << format_number(item_bias_[i]) << '\n';
    }
    for (UserIndex u = 0; u < user_bias_.size(); ++u)
      out << "user_bias " << train_.user_id(u) << ' ' << format_number(user_bias_[u]) << '\n';
    for (ItemIndex i = 0; i < sims_.size(); ++i) {
      out << "similarity " << train_.item_id(i);
      for (const auto& [j, s] : sims_.row(i)) out << ' ' << train_.item_id(j) << ':' << format_number(s);
      out << '\n';
    }
  }

 private:
  double offset(UserIndex u, ItemIndex i) const {
    switch (spec_.family) {
      case Family::knn_centered: return item_mean_[i];
      case Family::knn_baseline: return baseline(u, i);
      default: return 0.0;
    }
  }

  // Alternating least squares on the biases, users then items each sweep,
  // with the same damping on both.
  void fit_baselines() {
    user_bias_.assign(train_.num_users(), 0.0);
    item_bias_.assign(train_.num_items(), 0.0);
    const double lambda = spec_.baseline_damping;
    auto cells = train_.cells();
    for (std::size_t sweep = 0; sweep < spec_.baseline_sweeps; ++sweep) {
      for (UserIndex u = 0; u < train_.num_users(); ++u) {
        double s = 0;
        auto row = train_.user_cells(u);
        for (const Cell& c : row) s += c.rating - mu_ - item_bias_[c.item];
        user_bias_[u] = s / (lambda + static_cast<double>(row.size()));
      }
      for (ItemIndex i = 0; i < train_.num_items(); ++i) {
        double s = 0;
        auto col = train_.item_cells(i);
        for (std::size_t pos : col) s += cells[pos].rating - mu_ - user_bias_[cells[pos].user];
        item_bias_[i] = s / (lambda + static_cast<double>(col.size()));
      }
    }
  }

  ItemPairTable sims_;
  std::vector<double> user_bias_;
  std::vector<double> item_bias_;
};

/// Slope One: pred(u, i) = mu_u + mean over j in R_i(u) of dev(i, j), where
/// dev(i, j) is the mean of r_ui - r_uj over users who rated both and R_i(u)
/// are the user's items sharing at least one rater with i.
class SlopeOneModel final : public TrainedModel {
 public:
  SlopeOneModel(ModelSpec spec, const RatingDataset& train) : TrainedModel(std::move(spec), train) {
    devs_ = build_item_pairs(train_, [](const CoRatingSums& s) { return (s.x - s.y) / static_cast<double>(s.n); });
  }

  std::optional<double> deviation(ItemIndex i, ItemIndex j) const { return devs_.get(i, j); }

 protected:
  double estimate(UserIndex u, ItemIndex i) const override {
    double sum = 0;
    std::size_t n = 0;
    for (const Cell& c : train_.user_cells(u)) {
      if (c.item == i) continue;
      if (auto d = devs_.get(i, c.item)) {
        sum += *d;
        ++n;
      }
    }
    return n ? user_mean_[u] + sum / static_cast<double>(n) : user_mean_[u];
  }

  void write_parameters(std::ostream& out) const override {
    for (UserIndex u = 0; u < train_.num_users(); ++u)
      out << "user_mean " << train_.user_id(u) << ' ' << format_number(user_mean_[u]) << '\n';
    for (ItemIndex i = 0; i < devs_.size(); ++i) {
      out << "deviation " << train_.item_id(i);
      for (const auto& [j, d] : devs_.row(i)) out << ' ' << train_.item_id(j) << ':' << format_number(d);
      out << '\n';
    }
  }

 private:
  ItemPairTable devs_;
};

}  // namespace ratesynth
