#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ratesynth/error.hpp"
#include "ratesynth/random.hpp"

namespace ratesynth {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

/// Ordered set of allowed rating values. Defaults to the integers 1..5.
class RatingScale {
 public:
  RatingScale() : values_{1, 2, 3, 4, 5} {}
  explicit RatingScale(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error("rating scale must not be empty");
    if (!std::is_sorted(values_.begin(), values_.end()) ||
        std::adjacent_find(values_.begin(), values_.end()) != values_.end())
      throw Error("rating scale must be strictly increasing");
  }

  static RatingScale integers(int lo, int hi) {
    std::vector<double> v;
    for (int r = lo; r <= hi; ++r) v.push_back(r);
    return RatingScale(std::move(v));
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double min() const noexcept { return values_.front(); }
  double max() const noexcept { return values_.back(); }
  const std::vector<double>& values() const noexcept { return values_; }

  std::optional<std::size_t> index_of(double value) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), value);
    if (it == values_.end() || *it != value) return std::nullopt;
    return static_cast<std::size_t>(it - values_.begin());
  }
  bool contains(double value) const { return index_of(value).has_value(); }
  double clip(double value) const { return std::clamp(value, min(), max()); }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;

 private:
  std::vector<double> values_;
};

/// Shortest round-trip text form of a rating ("4", "3.5").
inline std::string format_number(double value) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

inline std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

struct RatingTriple {
  std::string user;
  std::string item;
  double rating;
};

struct Cell {
  UserIndex user;
  ItemIndex item;
  double rating;
};

/// Sparse user-item rating matrix. Immutable once built.
///
/// Users and items are indexed in lexicographic id order and cells are stored
/// sorted by (user, item), so index order is also the canonical file order.
class RatingDataset {
 public:
  RatingDataset() = default;

  /// Validates and indexes the triples. Throws on out-of-scale values and
  /// duplicate (user, item) cells.
  static RatingDataset from_triples(std::vector<RatingTriple> triples, RatingScale scale = {}) {
    RatingDataset ds;
    ds.scale_ = std::move(scale);
    std::vector<std::string> users, items;
    users.reserve(triples.size());
    items.reserve(triples.size());
    for (const auto& t : triples) {
      if (!ds.scale_.contains(t.rating))
        throw Error("rating " + format_number(t.rating) + " for (" + t.user + ", " + t.item +
                    ") is outside the rating scale");
      users.push_back(t.user);
      items.push_back(t.item);
    }
    auto sort_unique = [](std::vector<std::string>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    sort_unique(users);
    sort_unique(items);
    ds.users_ = std::move(users);
    ds.items_ = std::move(items);
    ds.build_lookup();

    ds.cells_.reserve(triples.size());
    for (const auto& t : triples)
      ds.cells_.push_back({ds.user_lookup_.at(t.user), ds.item_lookup_.at(t.item), t.rating});
    std::sort(ds.cells_.begin(), ds.cells_.end(), [](const Cell& a, const Cell& b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    for (std::size_t k = 1; k < ds.cells_.size(); ++k) {
      if (ds.cells_[k].user == ds.cells_[k - 1].user && ds.cells_[k].item == ds.cells_[k - 1].item)
        throw Error("duplicate rating for (" + ds.users_[ds.cells_[k].user] + ", " +
                    ds.items_[ds.cells_[k].item] + ")");
    }
    ds.build_adjacency();
    return ds;
  }

  const RatingScale& scale() const noexcept { return scale_; }
  std::size_t num_users() const noexcept { return users_.size(); }
  std::size_t num_items() const noexcept { return items_.size(); }
  std::size_t num_ratings() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }

  const std::vector<std::string>& users() const noexcept { return users_; }
  const std::vector<std::string>& items() const noexcept { return items_; }
  const std::string& user_id(UserIndex u) const { return users_[u]; }
  const std::string& item_id(ItemIndex i) const { return items_[i]; }

  std::optional<UserIndex> find_user(std::string_view id) const {
    auto it = user_lookup_.find(std::string(id));
    if (it == user_lookup_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<ItemIndex> find_item(std::string_view id) const {
    auto it = item_lookup_.find(std::string(id));
    if (it == item_lookup_.end()) return std::nullopt;
    return it->second;
  }

  /// All cells in canonical (user, item) order.
  std::span<const Cell> cells() const noexcept { return cells_; }

  /// The cells of one user, sorted by item.
  std::span<const Cell> user_cells(UserIndex u) const {
    return std::span<const Cell>(cells_).subspan(user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]);
  }
  /// Positions (into cells()) of one item's cells, sorted by user.
  std::span<const std::size_t> item_cells(ItemIndex i) const {
    return std::span<const std::size_t>(item_cells_).subspan(item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]);
  }

  std::optional<double> rating(std::string_view user, std::string_view item) const {
    auto u = find_user(user);
    auto i = find_item(item);
    if (!u || !i) return std::nullopt;
    auto row = user_cells(*u);
    auto it = std::lower_bound(row.begin(), row.end(), *i,
                               [](const Cell& c, ItemIndex item) { return c.item < item; });
    if (it == row.end() || it->item != *i) return std::nullopt;
    return it->rating;
  }

  std::vector<RatingTriple> triples() const {
    std::vector<RatingTriple> out;
    out.reserve(cells_.size());
    for (const auto& c : cells_) out.push_back({users_[c.user], items_[c.item], c.rating});
    return out;
  }

  /// Same cells, new values (given in cells() order). Values must lie on the scale.
  RatingDataset with_ratings(std::span<const double> values) const {
    if (values.size() != cells_.size()) throw Error("with_ratings: value count does not match cell count");
    RatingDataset ds = *this;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!scale_.contains(values[k]))
        throw Error("rating " + format_number(values[k]) + " is outside the rating scale");
      ds.cells_[k].rating = values[k];
    }
    return ds;
  }

  /// Dataset restricted to the given cell positions, re-indexed.
  RatingDataset subset(std::span<const std::size_t> positions) const {
    std::vector<RatingTriple> t;
    t.reserve(positions.size());
    for (std::size_t p : positions) t.push_back({users_[cells_[p].user], items_[cells_[p].item], cells_[p].rating});
    return from_triples(std::move(t), scale_);
  }

  /// True when both datasets hold exactly the same (user, item) cells.
  bool same_cells(const RatingDataset& other) const {
    if (users_ != other.users_ || items_ != other.items_ || cells_.size() != other.cells_.size()) return false;
    for (std::size_t k = 0; k < cells_.size(); ++k)
      if (cells_[k].user != other.cells_[k].user || cells_[k].item != other.cells_[k].item) return false;
    return true;
  }

 private:
  void build_lookup() {
    user_lookup_.clear();
    item_lookup_.clear();
    for (std::size_t k = 0; k < users_.size(); ++k) user_lookup_.emplace(users_[k], static_cast<UserIndex>(k));
    for (std::size_t k = 0; k < items_.size(); ++k) item_lookup_.emplace(items_[k], static_cast<ItemIndex>(k));
  }

  void build_adjacency() {
    user_offsets_.assign(users_.size() + 1, 0);
    item_offsets_.assign(items_.size() + 1, 0);
    for (const auto& c : cells_) {
      ++user_offsets_[c.user + 1];
      ++item_offsets_[c.item + 1];
    }
    for (std::size_t k = 0; k < users_.size(); ++k) user_offsets_[k + 1] += user_offsets_[k];
    for (std::size_t k = 0; k < items_.size(); ++k) item_offsets_[k + 1] += item_offsets_[k];
    item_cells_.assign(cells_.size(), 0);
    std::vector<std::size_t> fill(item_offsets_.begin(), item_offsets_.end() - 1);
    for (std::size_t k = 0; k < cells_.size(); ++k) item_cells_[fill[cells_[k].item]++] = k;
  }

  RatingScale scale_;
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, UserIndex> user_lookup_;
  std::unordered_map<std::string, ItemIndex> item_lookup_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::size_t> item_offsets_{0};
  std::vector<std::size_t> item_cells_;
};

/// Column layout of a delimited ratings file. Columns are addressed by
/// 0-based index, or by header name when the file has a header and the name
/// is set.
struct RatingSchema {
  char delimiter = ',';
  bool has_header = false;
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::size_t rating_column = 2;
  std::string user_name;
  std::string item_name;
  std::string rating_name;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

}  // namespace detail

inline RatingDataset read_ratings(std::istream& in, const RatingSchema& schema, const RatingScale& scale,
                                  const std::string& source = "<stream>") {
  std::size_t user_col = schema.user_column, item_col = schema.item_column, rating_col = schema.rating_column;
  std::vector<RatingTriple> triples;
  std::map<std::pair<std::string, std::string>, std::size_t> first_seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = schema.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::chomp(line);
    if (detail::blank(view)) continue;
    auto fields = detail::split(view, schema.delimiter);
    if (header_pending) {
      header_pending = false;
      auto resolve = [&](const std::string& name, std::size_t& col) {
        if (name.empty()) return;
        auto it = std::find(fields.begin(), fields.end(), name);
        if (it == fields.end()) throw ParseError(source, line_no, "header has no column '" + name + "'");
        col = static_cast<std::size_t>(it - fields.begin());
      };
      resolve(schema.user_name, user_col);
      resolve(schema.item_name, item_col);
      resolve(schema.rating_name, rating_col);
      continue;
    }
    const std::size_t needed = std::max({user_col, item_col, rating_col}) + 1;
    if (fields.size() < needed)
      throw ParseError(source, line_no, "expected at least " + std::to_string(needed) + " fields, found " +
                                            std::to_string(fields.size()));
    std::string user(fields[user_col]), item(fields[item_col]);
    if (user.empty() || item.empty()) throw ParseError(source, line_no, "empty user or item id");
    auto value = parse_number(fields[rating_col]);
    if (!value) throw ParseError(source, line_no, "unparsable rating '" + std::string(fields[rating_col]) + "'");
    if (!scale.contains(*value))
      throw ParseError(source, line_no, "rating " + std::string(fields[rating_col]) + " is outside the rating scale");
    auto [it, fresh] = first_seen.emplace(std::make_pair(user, item), line_no);
    if (!fresh)
      throw ParseError(source, line_no, "duplicate rating for (" + user + ", " + item + "), first seen on line " +
                                            std::to_string(it->second));
    triples.push_back({std::move(user), std::move(item), *value});
  }
  return RatingDataset::from_triples(std::move(triples), scale);
}

inline RatingDataset load_ratings(const std::string& path, const RatingSchema& schema = {},
                                  const RatingScale& scale = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open ratings file");
  return read_ratings(in, schema, scale, path);
}

/// Canonical output: rows sorted by (user, item), three columns.
inline void write_ratings(const RatingDataset& ds, std::ostream& out, const RatingSchema& schema = {}) {
  const char d = schema.delimiter;
  if (schema.has_header) {
    out << (schema.user_name.empty() ? "user" : schema.user_name) << d
        << (schema.item_name.empty() ? "item" : schema.item_name) << d
        << (schema.rating_name.empty() ? "rating" : schema.rating_name) << '\n';
  }
  for (const auto& c : ds.cells())
    out << ds.user_id(c.user) << d << ds.item_id(c.item) << d << format_number(c.rating) << '\n';
}

inline void write_ratings(const RatingDataset& ds, const std::string& path, const RatingSchema& schema = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_ratings(ds, out, schema);
  if (!out) throw Error("write failed for " + path);
}

/// |ratings| / (|users| x |items|).
inline double density(const RatingDataset& ds) {
  if (ds.num_users() == 0 || ds.num_items() == 0) throw Error("density of an empty dataset");
  return static_cast<double>(ds.num_ratings()) /
         (static_cast<double>(ds.num_users()) * static_cast<double>(ds.num_items()));
}

struct HoldoutSplit {
  RatingDataset train;
  RatingDataset test;
  std::uint64_t seed = 0;
  double test_fraction = 0;
};

/// Uniform cell-level split. Datasets with the same cell set get the same
/// partition for the same seed, whatever their rating values.
inline HoldoutSplit split_holdout(const RatingDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw Error("test_fraction must lie in [0, 1)");
  const std::size_t n = ds.num_ratings();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  Rng rng(derive_seed(seed, {"holdout"}));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {ds.subset(train), ds.subset(test), seed, test_fraction};
}

// ---------------------------------------------------------------------------
// Item metadata

enum class Role { director, actor, author };

inline std::string_view to_string(Role role) {
  switch (role) {
    case Role::director: return "director";
    case Role::actor: return "actor";
    case Role::author: return "author";
  }
  return "?";
}

inline std::optional<Role> parse_role(std::string_view name) {
  if (name == "director") return Role::director;
  if (name == "actor") return Role::actor;
  if (name == "author") return Role::author;
  return std::nullopt;
}

/// Persons credited on items, per role. A role counts as present once it has
/// been loaded, even from an empty file.
class ItemMetadata {
 public:
  void add(const std::string& item, Role role, std::vector<std::string> persons) {
    for (const auto& p : persons)
      if (p.empty()) throw Error("empty person name for item " + item);
    roles_.insert(role);
    auto& list = persons_[item][role];
    for (auto& p : persons)
      if (std::find(list.begin(), list.end(), p) == list.end()) list.push_back(std::move(p));
  }
  void declare_role(Role role) { roles_.insert(role); }

  bool has_role(Role role) const { return roles_.count(role) > 0; }
  const std::set<Role>& roles() const noexcept { return roles_; }
  bool empty() const noexcept { return persons_.empty(); }
  std::size_t num_items() const noexcept { return persons_.size(); }

  /// Persons for (item, role); empty when the item or role is absent.
  std::span<const std::string> persons(std::string_view item, Role role) const {
    auto it = persons_.find(std::string(item));
    if (it == persons_.end()) return {};
    auto jt = it->second.find(role);
    if (jt == it->second.end()) return {};
    return jt->second;
  }

  const std::map<std::string, std::map<Role, std::vector<std::string>>>& entries() const noexcept {
    return persons_;
  }

 private:
  std::map<std::string, std::map<Role, std::vector<std::string>>> persons_;
  std::set<Role> roles_;
};

/// Reads "item<delim>role<delim>p1;p2;..." lines. Lines for other roles are
/// skipped; the requested role is registered even when no line matches.
inline void read_metadata(std::istream& in, Role role, ItemMetadata& meta, char delimiter = '|',
                          const std::string& source = "<stream>") {
  meta.declare_role(role);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::chomp(line);
    if (detail::blank(view)) continue;
    auto fields = detail::split(view, delimiter);
    if (fields.size() != 3) throw ParseError(source, line_no, "expected item" + std::string(1, delimiter) + "role" +
                                                                  std::string(1, delimiter) + "persons");
    if (fields[0].empty()) throw ParseError(source, line_no, "empty item id");
    auto line_role = parse_role(fields[1]);
    if (!line_role) throw ParseError(source, line_no, "unknown role '" + std::string(fields[1]) + "'");
    if (*line_role != role) continue;
    std::vector<std::string> persons;
    if (!fields[2].empty()) {
      for (auto name : detail::split(fields[2], ';')) {
        if (name.empty()) throw ParseError(source, line_no, "empty person name");
        persons.emplace_back(name);
      }
    }
    meta.add(std::string(fields[0]), role, std::move(persons));
  }
}

inline ItemMetadata load_metadata(const std::string& path, Role role, char delimiter = '|') {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open metadata file");
  ItemMetadata meta;
  read_metadata(in, role, meta, delimiter, path);
  return meta;
}

}  // namespace ratesynth
