#pragma once

// Analytical-validity and disclosure measurements on an (original,
// synthetic) pair: rating distributions, popularity rankings, favorite-person
// hiding, and per-cell perturbation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "ratesynth/dataset.hpp"
#include "ratesynth/error.hpp"
#include "ratesynth/synthesis.hpp"

namespace ratesynth {

struct Histogram {
  RatingScale scale;
  std::map<double, double> bins;  // rating value -> fraction; observed values only

  double operator[](double value) const {
    auto it = bins.find(value);
    return it == bins.end() ? 0.0 : it->second;
  }
};

inline Histogram rating_histogram(const RatingDataset& ds) {
  if (ds.empty()) throw Error("histogram of an empty dataset");
  std::vector<std::size_t> counts(ds.scale().size(), 0);
  for (const auto& c : ds.cells()) ++counts[*ds.scale().index_of(c.rating)];
  Histogram h{ds.scale(), {}};
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k]) h.bins[ds.scale()[k]] = static_cast<double>(counts[k]) / static_cast<double>(ds.num_ratings());
  return h;
}

/// Total-variation distance, half the L1 distance between the histograms.
inline double tv_distance(const Histogram& a, const Histogram& b) {
  if (!(a.scale == b.scale)) throw Error("tv_distance between histograms on different scales");
  double l1 = 0;
  for (double v : a.scale.values()) l1 += std::abs(a[v] - b[v]);
  return 0.5 * l1;
}

namespace detail {

template <class Key>
std::vector<Key> top_by_count(const std::map<Key, std::size_t>& counts, std::size_t k) {
  std::vector<std::pair<Key, std::size_t>> v(counts.begin(), counts.end());
  // std::map iterates keys in order, so a stable sort on count keeps ties lexicographic.
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Key> out;
  for (std::size_t n = 0; n < std::min(k, v.size()); ++n) out.push_back(v[n].first);
  return out;
}

inline std::vector<std::size_t> liked_counts(const RatingDataset& ds, double threshold) {
  std::vector<std::size_t> liked(ds.num_items(), 0);
  for (const auto& c : ds.cells())
    if (c.rating >= threshold) ++liked[c.item];
  return liked;
}

inline void require_role(const ItemMetadata& meta, Role role) {
  if (!meta.has_role(role)) throw Error("metadata has no " + std::string(to_string(role)) + " entries");
}

}  // namespace detail

/// Items by number of ratings >= threshold, descending, ties by item id.
inline std::vector<std::string> top_k_popular_items(const RatingDataset& ds, std::size_t k, double threshold) {
  if (k < 1) throw Error("top_k_popular_items needs k >= 1");
  auto liked = detail::liked_counts(ds, threshold);
  std::map<std::string, std::size_t> counts;
  for (ItemIndex i = 0; i < ds.num_items(); ++i) counts[ds.item_id(i)] = liked[i];
  return detail::top_by_count(counts, k);
}

/// Persons by total ratings >= threshold over the items crediting them.
inline std::vector<std::string> top_k_popular_persons(const RatingDataset& ds, const ItemMetadata& meta, Role role,
                                                      std::size_t k, double threshold) {
  detail::require_role(meta, role);
  auto liked = detail::liked_counts(ds, threshold);
  std::map<std::string, std::size_t> counts;
  for (const auto& [item, roles] : meta.entries()) {
    auto it = roles.find(role);
    if (it == roles.end()) continue;
    auto i = ds.find_item(item);
    const std::size_t n = i ? liked[*i] : 0;
    for (const auto& person : it->second) counts[person] += n;
  }
  return detail::top_by_count(counts, k);
}

/// Most frequent person of `role` over the user's items rated >= threshold,
/// each credited person counted once per item; ties by name.
inline std::optional<std::string> favorite_person(const RatingDataset& ds, const ItemMetadata& meta,
                                                  std::string_view user, Role role, double threshold = 4.0) {
  detail::require_role(meta, role);
  auto u = ds.find_user(user);
  if (!u) return std::nullopt;
  std::map<std::string, std::size_t> counts;
  for (const auto& c : ds.user_cells(*u)) {
    if (c.rating < threshold) continue;
    for (const auto& person : meta.persons(ds.item_id(c.item), role)) ++counts[person];
  }
  auto top = detail::top_by_count(counts, 1);
  if (top.empty()) return std::nullopt;
  return top.front();
}

struct HidingResult {
  double percentage = 0;     // changed / compared x 100
  std::size_t compared = 0;  // users with a favorite on both sides
  std::size_t changed = 0;
  std::size_t gained = 0;    // favorite only in the synthetic data
  std::size_t lost = 0;      // favorite only in the original data
};

/// Share of users whose favorite person differs between the datasets, over
/// users with a defined favorite in both.
inline HidingResult hiding_rate(const RatingDataset& original, const RatingDataset& synthetic, const ItemMetadata& meta,
                                Role role, double threshold = 4.0) {
  detail::require_role(meta, role);
  if (original.users() != synthetic.users()) throw Error("hiding_rate needs datasets with the same users");
  HidingResult r;
  for (const auto& user : original.users()) {
    auto a = favorite_person(original, meta, user, role, threshold);
    auto b = favorite_person(synthetic, meta, user, role, threshold);
    if (a && b) {
      ++r.compared;
      r.changed += *a != *b;
    } else if (a) {
      ++r.lost;
    } else if (b) {
      ++r.gained;
    }
  }
  if (r.compared) r.percentage = 100.0 * static_cast<double>(r.changed) / static_cast<double>(r.compared);
  return r;
}

struct PerturbationStats {
  double mean_abs_change = 0;  // over synthesized (non-retained) cells
  double variance = 0;         // population variance of |orig - syn| over the same cells
  std::size_t cells = 0;
  double all_cells_mean_abs_change = 0;
  double all_cells_variance = 0;
};

inline PerturbationStats perturbation_stats(const RatingDataset& original, const RatingDataset& synthetic,
                                            const RetentionMask& mask) {
  if (!original.same_cells(synthetic)) throw Error("perturbation_stats needs datasets with the same cell set");
  if (mask.parent_cell_count() != original.num_ratings()) throw Error("mask does not belong to the dataset");
  auto a = original.cells();
  auto b = synthetic.cells();
  auto moments = [&](bool synthesized_only, std::size_t& n) {
    double s = 0, ss = 0;
    n = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (synthesized_only && mask.retained(k)) continue;
      const double d = std::abs(a[k].rating - b[k].rating);
      s += d;
      ss += d * d;
      ++n;
    }
    if (n == 0) return std::pair{0.0, 0.0};
    const double mean = s / static_cast<double>(n);
    return std::pair{mean, std::max(0.0, ss / static_cast<double>(n) - mean * mean)};
  };
  PerturbationStats st;
  std::size_t all = 0;
  std::tie(st.mean_abs_change, st.variance) = moments(true, st.cells);
  std::tie(st.all_cells_mean_abs_change, st.all_cells_variance) = moments(false, all);
  return st;
}

struct RoleAudit {
  Role role;
  double top_person_overlap = 0;
  std::vector<std::string> top_original;
  std::vector<std::string> top_synthetic;
  HidingResult hiding;
};

struct AuditReport {
  Histogram original_histogram;
  Histogram synthetic_histogram;
  double tv_distance = 0;
  double top_items_overlap = 0;
  std::vector<std::string> top_items_original;
  std::vector<std::string> top_items_synthetic;
  std::vector<RoleAudit> roles;
  PerturbationStats perturbation;
};

struct AuditOptions {
  std::size_t top_k = 10;
  double threshold = 4.0;
};

inline double overlap_fraction(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 1.0;
  std::set<std::string> sa(a.begin(), a.end());
  std::size_t common = 0;
  for (const auto& x : b) common += sa.count(x);
  return static_cast<double>(common) / static_cast<double>(denom);
}

inline AuditReport audit(const RatingDataset& original, const RatingDataset& synthetic, const RetentionMask& mask,
                         const ItemMetadata& meta, const AuditOptions& opt = {}) {
  if (!original.same_cells(synthetic)) throw Error("original and synthetic datasets have different cell sets");
  AuditReport r;
  r.original_histogram = rating_histogram(original);
  r.synthetic_histogram = rating_histogram(synthetic);
  r.tv_distance = tv_distance(r.original_histogram, r.synthetic_histogram);
  r.top_items_original = top_k_popular_items(original, opt.top_k, opt.threshold);
  r.top_items_synthetic = top_k_popular_items(synthetic, opt.top_k, opt.threshold);
  r.top_items_overlap = overlap_fraction(r.top_items_original, r.top_items_synthetic);
  for (Role role : meta.roles()) {
    RoleAudit ra;
    ra.role = role;
    ra.top_original = top_k_popular_persons(original, meta, role, opt.top_k, opt.threshold);
    ra.top_synthetic = top_k_popular_persons(synthetic, meta, role, opt.top_k, opt.threshold);
    ra.top_person_overlap = overlap_fraction(ra.top_original, ra.top_synthetic);
    ra.hiding = hiding_rate(original, synthetic, meta, role, opt.threshold);
    r.roles.push_back(std::move(ra));
  }
  r.perturbation = perturbation_stats(original, synthetic, mask);
  return r;
}

}  // namespace ratesynth
