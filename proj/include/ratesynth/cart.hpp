#pragma once

// Categorical CART classification trees with Gini-index splits.
//
// Features are small category codes: 0 is the distinguished UNRATED category,
// 1..S map to the rating-scale positions 0..S-1. Targets are scale positions.
// An internal node routes a row left when its category is in the node's split
// set, which is stored as a bitmask over category codes.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ratesynth/dataset.hpp"
#include "ratesynth/error.hpp"

namespace ratesynth {

using Category = std::uint8_t;
inline constexpr Category kUnrated = 0;
/// Split sets are 32-bit masks, so at most 31 rating values plus UNRATED.
inline constexpr std::size_t kMaxCategories = 32;

inline Category category_of(std::size_t scale_position) { return static_cast<Category>(scale_position + 1); }

/// Counts of each class (rating-scale position) among a node's members.
class ClassCounts {
 public:
  ClassCounts() = default;
  explicit ClassCounts(std::size_t num_classes) : counts_(num_classes, 0) {}

  /// Counts keyed by rating value, e.g. {{3, 3}, {4, 1}}.
  static ClassCounts from_values(const RatingScale& scale, const std::map<double, std::uint32_t>& by_value) {
    ClassCounts c(scale.size());
    for (auto [value, n] : by_value) {
      auto pos = scale.index_of(value);
      if (!pos) throw Error("value " + format_number(value) + " is not on the rating scale");
      c.add(*pos, n);
    }
    return c;
  }

  void add(std::size_t cls, std::uint32_t n = 1) {
    counts_[cls] += n;
    total_ += n;
  }
  void remove(std::size_t cls, std::uint32_t n = 1) {
    counts_[cls] -= n;
    total_ -= n;
  }
  void merge(const ClassCounts& other) {
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    total_ += other.total_;
  }

  std::size_t num_classes() const noexcept { return counts_.size(); }
  std::uint32_t operator[](std::size_t cls) const { return counts_[cls]; }
  std::uint64_t total() const noexcept { return total_; }
  bool empty() const noexcept { return total_ == 0; }
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }

  std::size_t distinct() const {
    return static_cast<std::size_t>(std::count_if(counts_.begin(), counts_.end(), [](auto n) { return n > 0; }));
  }
  bool pure() const { return distinct() <= 1; }

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;

 private:
  std::vector<std::uint32_t> counts_;
  std::uint64_t total_ = 0;
};

/// Gini(A) = sum_i p_i (1 - p_i) over the classes present in the node.
inline double gini_index(const ClassCounts& counts) {
  if (counts.empty()) throw Error("gini_index of an empty node");
  const double total = static_cast<double>(counts.total());
  double g = 0.0;
  for (auto n : counts.counts()) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / total;
    g += p * (1.0 - p);
  }
  return g;
}

struct StoppingRule {
  /// Nodes with at most this many rows are not split, and a split may not
  /// create a child with fewer rows than this.
  std::size_t min_node_size = 5;
  std::size_t max_depth = 30;
};

struct CartNode {
  ClassCounts counts;
  std::int32_t predictor = -1;  // position into the tree's predictor list; -1 marks a leaf
  std::uint32_t left_set = 0;   // category codes routed left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t depth = 0;

  bool is_leaf() const noexcept { return predictor < 0; }
};

/// Row-major categorical training table: `features[row * num_predictors + p]`.
struct TrainingTable {
  std::size_t num_predictors = 0;
  std::size_t num_classes = 0;
  std::vector<Category> features;
  std::vector<std::uint8_t> targets;

  std::size_t num_rows() const noexcept { return targets.size(); }
  Category at(std::size_t row, std::size_t p) const { return features[row * num_predictors + p]; }
};

class CartTree {
 public:
  CartTree() = default;
  CartTree(std::vector<std::string> predictors, std::vector<CartNode> nodes)
      : predictors_(std::move(predictors)), nodes_(std::move(nodes)) {}

  /// Predictor item ids, in the order feature vectors are laid out.
  const std::vector<std::string>& predictors() const noexcept { return predictors_; }
  const std::vector<CartNode>& nodes() const noexcept { return nodes_; }
  const CartNode& root() const { return nodes_.front(); }
  bool empty() const noexcept { return nodes_.empty(); }

  std::size_t depth() const {
    std::uint32_t d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  std::vector<const ClassCounts*> leaves() const {
    std::vector<const ClassCounts*> out;
    for (const auto& n : nodes_)
      if (n.is_leaf()) out.push_back(&n.counts);
    return out;
  }

  /// Leaf reached by a feature vector aligned with predictors().
  const ClassCounts& classify(std::span<const Category> features) const {
    const CartNode* node = &nodes_.front();
    while (!node->is_leaf()) {
      const Category c = features[static_cast<std::size_t>(node->predictor)];
      node = &nodes_[static_cast<std::size_t>((node->left_set >> c) & 1u ? node->left : node->right)];
    }
    return node->counts;
  }

  /// Same, with observations keyed by predictor item id; a missing predictor
  /// is UNRATED.
  const ClassCounts& classify(const std::map<std::string, double>& observed, const RatingScale& scale) const {
    std::vector<Category> features(predictors_.size(), kUnrated);
    for (std::size_t p = 0; p < predictors_.size(); ++p) {
      auto it = observed.find(predictors_[p]);
      if (it == observed.end()) continue;
      auto pos = scale.index_of(it->second);
      if (!pos) throw Error("value " + format_number(it->second) + " is not on the rating scale");
      features[p] = category_of(*pos);
    }
    return classify(features);
  }

 private:
  std::vector<std::string> predictors_;
  std::vector<CartNode> nodes_;
};

struct SplitChoice {
  std::int32_t predictor = -1;
  std::uint32_t left_set = 0;
  double weighted_gini = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Up to this many observed categories the split set is searched
/// exhaustively; beyond it only one-vs-rest sets are tried.
inline constexpr std::size_t kExhaustiveCategories = 12;

inline double gini_of(std::span<const std::uint32_t> counts, std::uint64_t total) {
  if (total == 0) return 0.0;
  const double t = static_cast<double>(total);
  double g = 0.0;
  for (auto n : counts) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / t;
    g += p * (1.0 - p);
  }
  return g;
}

}  // namespace detail

/// Best (predictor, split set) for the given rows: the one minimizing the
/// size-weighted sum of child Gini indices. Ties keep the earliest candidate
/// in (predictor, enumeration) order.
inline SplitChoice best_split(const TrainingTable& table, std::span<const std::uint32_t> rows,
                              std::size_t min_child = 1) {
  SplitChoice best;
  const std::size_t classes = table.num_classes;
  const double n = static_cast<double>(rows.size());
  std::vector<std::uint32_t> cells(kMaxCategories * classes);
  std::vector<std::uint32_t> left(classes), right(classes);
  std::vector<std::uint32_t> node_counts(classes, 0);
  for (auto r : rows) ++node_counts[table.targets[r]];

  for (std::size_t p = 0; p < table.num_predictors; ++p) {
    std::fill(cells.begin(), cells.end(), 0);
    std::uint32_t present_mask = 0;
    for (auto r : rows) {
      const Category c = table.at(r, p);
      ++cells[c * classes + table.targets[r]];
      present_mask |= 1u << c;
    }
    std::vector<Category> present;
    for (std::size_t c = 0; c < kMaxCategories; ++c)
      if ((present_mask >> c) & 1u) present.push_back(static_cast<Category>(c));
    const std::size_t k = present.size();
    if (k < 2) continue;

    auto evaluate = [&](std::uint32_t set) {
      std::fill(left.begin(), left.end(), 0);
      std::uint64_t n_left = 0;
      for (Category c : present) {
        if (!((set >> c) & 1u)) continue;
        for (std::size_t y = 0; y < classes; ++y) {
          left[y] += cells[c * classes + y];
          n_left += cells[c * classes + y];
        }
      }
      const std::uint64_t n_right = rows.size() - n_left;
      if (n_left < min_child || n_right < min_child) return;
      for (std::size_t y = 0; y < classes; ++y) right[y] = node_counts[y] - left[y];
      const double w = (static_cast<double>(n_left) * detail::gini_of(left, n_left) +
                        static_cast<double>(n_right) * detail::gini_of(right, n_right)) /
                       n;
      if (w < best.weighted_gini) best = {static_cast<std::int32_t>(p), set, w};
    };

    if (k <= detail::kExhaustiveCategories) {
      // Subsets of all but the last present category enumerate every
      // bipartition exactly once.
      for (std::uint32_t m = 1; m < (1u << (k - 1)); ++m) {
        std::uint32_t set = 0;
        for (std::size_t j = 0; j + 1 < k; ++j)
          if ((m >> j) & 1u) set |= 1u << present[j];
        evaluate(set);
      }
    } else {
      for (Category c : present) evaluate(1u << c);
    }
  }
  return best;
}

/// Greedy top-down CART. A node becomes a leaf when it has at most
/// min_node_size rows, sits at max_depth, is pure, or no split lowers its Gini.
inline CartTree fit_tree(const TrainingTable& table, std::vector<std::string> predictor_ids,
                         const StoppingRule& stopping) {
  if (table.num_rows() == 0) throw Error("cannot fit a tree on zero rows");
  if (table.num_classes == 0 || table.num_classes + 1 > kMaxCategories)
    throw Error("rating scale too large for categorical splits");
  if (stopping.min_node_size < 1) throw Error("min_node_size must be at least 1");

  std::vector<std::uint32_t> rows(table.num_rows());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = static_cast<std::uint32_t>(r);

  std::vector<CartNode> nodes;
  struct Pending {
    std::size_t node;
    std::size_t begin, end;
  };
  auto make_node = [&](std::size_t begin, std::size_t end, std::uint32_t depth) {
    CartNode node;
    node.counts = ClassCounts(table.num_classes);
    for (std::size_t k = begin; k < end; ++k) node.counts.add(table.targets[rows[k]]);
    node.depth = depth;
    nodes.push_back(std::move(node));
    return nodes.size() - 1;
  };

  std::vector<Pending> stack{{make_node(0, rows.size(), 0), 0, rows.size()}};
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const std::size_t size = cur.end - cur.begin;
    const std::uint32_t depth = nodes[cur.node].depth;
    if (size <= stopping.min_node_size || depth >= stopping.max_depth || nodes[cur.node].counts.pure()) continue;

    std::span<const std::uint32_t> node_rows(rows.data() + cur.begin, size);
    const SplitChoice split = best_split(table, node_rows, stopping.min_node_size);
    const double parent = gini_index(nodes[cur.node].counts);
    if (split.predictor < 0 || !(split.weighted_gini < parent - 1e-12)) continue;

    auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                                     rows.begin() + static_cast<std::ptrdiff_t>(cur.end), [&](std::uint32_t r) {
                                       return (split.left_set >> table.at(r, static_cast<std::size_t>(split.predictor))) & 1u;
                                     });
    const std::size_t split_at = static_cast<std::size_t>(mid - rows.begin());
    const std::size_t left = make_node(cur.begin, split_at, depth + 1);
    const std::size_t right = make_node(split_at, cur.end, depth + 1);
    CartNode& parent_node = nodes[cur.node];
    parent_node.predictor = split.predictor;
    parent_node.left_set = split.left_set;
    parent_node.left = static_cast<std::int32_t>(left);
    parent_node.right = static_cast<std::int32_t>(right);
    stack.push_back({right, split_at, cur.end});
    stack.push_back({left, cur.begin, split_at});
  }
  return CartTree(std::move(predictor_ids), std::move(nodes));
}

}  // namespace ratesynth
