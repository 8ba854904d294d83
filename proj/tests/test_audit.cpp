#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"
#include "ratesynth/audit.hpp"

using namespace ratesynth;
using testing_support::parse;

namespace {

ItemMetadata meta_from(const std::string& text, std::initializer_list<Role> roles) {
  ItemMetadata meta;
  for (Role r : roles) {
    std::istringstream in(text);
    read_metadata(in, r, meta);
  }
  return meta;
}

Histogram hist(std::map<double, double> bins) { return Histogram{RatingScale{}, std::move(bins)}; }

RetentionMask none_retained(const RatingDataset& ds) { return RetentionMask(std::vector<bool>(ds.num_ratings(), false)); }

}  // namespace

TEST(Histogram, Examples) {
  auto h = rating_histogram(parse("a,x,5\na,y,5\nb,x,3\nb,y,3\n"));
  EXPECT_EQ(h.bins, (std::map<double, double>{{3, 0.5}, {5, 0.5}}));
  EXPECT_EQ(rating_histogram(parse("a,x,4\n")).bins, (std::map<double, double>{{4, 1.0}}));
  EXPECT_EQ(rating_histogram(parse("b,y,3\na,x,5\nb,x,3\na,y,5\n")).bins, h.bins);
  EXPECT_THROW(rating_histogram(RatingDataset{}), Error);
}

TEST(TvDistance, Examples) {
  auto h = hist({{1, 0.6}, {5, 0.4}});
  EXPECT_EQ(tv_distance(h, h), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(hist({{1, 1}}), hist({{5, 1}})), 1.0);
  EXPECT_NEAR(tv_distance(h, hist({{1, 0.4}, {5, 0.6}})), 0.2, 1e-12);
  EXPECT_THROW(tv_distance(h, Histogram{RatingScale::integers(1, 10), {}}), Error);
}

TEST(TvDistance, IsAMetric) {
  Rng rng(31);
  auto random_hist = [&] {
    std::map<double, double> b;
    double total = 0;
    for (int v = 1; v <= 5; ++v) total += b[v] = rng.uniform();
    for (auto& [v, p] : b) p /= total;
    return hist(b);
  };
  for (int trial = 0; trial < 500; ++trial) {
    auto a = random_hist(), b = random_hist(), c = random_hist();
    EXPECT_EQ(tv_distance(a, a), 0.0);
    EXPECT_EQ(tv_distance(a, b), tv_distance(b, a));
    EXPECT_GE(tv_distance(a, b), 0.0);
    EXPECT_LE(tv_distance(a, b), 1.0 + 1e-12);
    EXPECT_LE(tv_distance(a, c), tv_distance(a, b) + tv_distance(b, c) + 1e-12);
  }
}

TEST(TopItems, CountsAndTies) {
  auto ds = parse(
      "a,i1,5\nb,i1,4\nc,i1,4\nd,i1,5\ne,i1,4\n"
      "a,i2,4\nb,i2,5\nc,i2,4\nd,i2,1\n");
  EXPECT_EQ(top_k_popular_items(ds, 1, 4), (std::vector<std::string>{"i1"}));
  auto flat = parse("a,z,5\na,m,5\na,b,5\n");
  EXPECT_EQ(top_k_popular_items(flat, 2, 4), (std::vector<std::string>{"b", "m"}));
  EXPECT_EQ(top_k_popular_items(flat, 5, 9), (std::vector<std::string>{"b", "m", "z"}));
  EXPECT_THROW(top_k_popular_items(flat, 0, 4), Error);
}

TEST(TopPersons, AggregatesOverItems) {
  auto ds = parse(
      "a,i1,5\nb,i1,4\nc,i1,4\n"
      "a,i2,4\nb,i2,5\n"
      "a,i3,5\nb,i3,5\nc,i3,5\nd,i3,4\n");
  auto meta = meta_from("i1|director|Dee\ni2|director|Dee\ni3|director|Zed\n", {Role::director});
  // Dee: 3 + 2 = 5, Zed: 4
  EXPECT_EQ(top_k_popular_persons(ds, meta, Role::director, 2, 4), (std::vector<std::string>{"Dee", "Zed"}));

  auto single = parse("a,i1,5\na,i2,2\n");
  auto m2 = meta_from("i1|director|Solo\ni2|director|Other\n", {Role::director});
  EXPECT_EQ(top_k_popular_persons(single, m2, Role::director, 1, 4).front(), "Solo");

  auto empty = meta_from("", {Role::actor});
  EXPECT_TRUE(top_k_popular_persons(ds, empty, Role::actor, 3, 4).empty());
  EXPECT_THROW(top_k_popular_persons(ds, empty, Role::director, 3, 4), Error);
}

TEST(Favorite, Examples) {
  auto meta = meta_from(
      "f1|director|D\nf2|director|D\nf3|director|E\n"
      "g1|actor|Ben;Anna\ng2|actor|Anna;Ben\n",
      {Role::director, Role::actor});
  auto ds = parse("u,f1,5\nu,f2,4\nu,f3,2\nlow,f1,3\nlow,f3,1\nt,g1,5\nt,g2,4\n");
  EXPECT_EQ(favorite_person(ds, meta, "u", Role::director), "D");
  EXPECT_EQ(favorite_person(ds, meta, "low", Role::director), std::nullopt);
  EXPECT_EQ(favorite_person(ds, meta, "t", Role::actor), "Anna");
  EXPECT_EQ(favorite_person(ds, meta, "nobody", Role::actor), std::nullopt);
  // preferred items without metadata
  EXPECT_EQ(favorite_person(parse("v,zz,5\n"), meta, "v", Role::director), std::nullopt);
}

TEST(Favorite, IgnoresLowRatedItems) {
  auto ds = testing_support::random_dataset(40, 30, 0.4, 41);
  std::string text;
  for (int i = 0; i < 30; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "i%03d", i);
    text += std::string(id) + "|director|d" + std::to_string(i % 4) + "\n";
  }
  auto meta = meta_from(text, {Role::director});
  Rng rng(2);
  std::vector<double> changed;
  for (const auto& c : ds.cells()) changed.push_back(c.rating < 4 ? double(1 + rng.below(3)) : c.rating);
  auto other = ds.with_ratings(changed);
  for (const auto& u : ds.users())
    EXPECT_EQ(favorite_person(ds, meta, u, Role::director), favorite_person(other, meta, u, Role::director));
}

TEST(Hiding, SelfIsZeroAndCountsSides) {
  auto ds = testing_support::random_dataset(40, 30, 0.4, 42);
  std::string text;
  for (int i = 0; i < 30; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "i%03d", i);
    text += std::string(id) + "|actor|a" + std::to_string(i % 5) + ";b" + std::to_string(i % 7) + "\n";
  }
  auto meta = meta_from(text, {Role::actor});
  auto self = hiding_rate(ds, ds, meta, Role::actor);
  EXPECT_EQ(self.percentage, 0.0);
  EXPECT_EQ(self.changed, 0u);
  EXPECT_GT(self.compared, 0u);
  EXPECT_EQ(self.gained + self.lost, 0u);

  std::vector<double> low(ds.num_ratings(), 1.0);
  auto flat = ds.with_ratings(low);
  auto gone = hiding_rate(ds, flat, meta, Role::actor);
  EXPECT_EQ(gone.compared, 0u);
  EXPECT_EQ(gone.lost, self.compared);
  EXPECT_THROW(hiding_rate(ds, ds, meta, Role::director), Error);
}

TEST(Perturbation, Examples) {
  auto ds = parse("a,x,5\na,y,2\nb,x,4\n");
  auto same = perturbation_stats(ds, ds, none_retained(ds));
  EXPECT_EQ(same.mean_abs_change, 0.0);
  EXPECT_EQ(same.variance, 0.0);

  // only (a,x) synthesized, 5 -> 3
  std::vector<bool> keep{false, true, true};
  std::vector<double> v{3, 2, 4};
  auto st = perturbation_stats(ds, ds.with_ratings(v), RetentionMask(keep));
  EXPECT_EQ(st.cells, 1u);
  EXPECT_DOUBLE_EQ(st.mean_abs_change, 2.0);
  EXPECT_DOUBLE_EQ(st.variance, 0.0);
  EXPECT_DOUBLE_EQ(st.all_cells_mean_abs_change, 2.0 / 3.0);

  auto other = parse("a,x,5\na,z,2\nb,x,4\n");
  EXPECT_THROW(perturbation_stats(ds, other, none_retained(ds)), Error);
}

TEST(Perturbation, PopulationVariance) {
  auto ds = parse("a,x,5\na,y,5\nb,x,5\nb,y,5\n");
  std::vector<double> v{1, 5, 3, 4};  // changes 4, 0, 2, 1
  auto st = perturbation_stats(ds, ds.with_ratings(v), none_retained(ds));
  EXPECT_DOUBLE_EQ(st.mean_abs_change, 7.0 / 4.0);
  const double m = 7.0 / 4.0;
  EXPECT_NEAR(st.variance, ((4 - m) * (4 - m) + m * m + (2 - m) * (2 - m) + (1 - m) * (1 - m)) / 4.0, 1e-12);
}

TEST(Audit, IdenticalDataIsClean) {
  auto ds = testing_support::random_dataset(40, 30, 0.4, 43);
  std::string text;
  for (int i = 0; i < 30; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "i%03d", i);
    text += std::string(id) + "|director|d" + std::to_string(i % 6) + "\n";
  }
  auto meta = meta_from(text, {Role::director});
  auto r = audit(ds, ds, none_retained(ds), meta);
  EXPECT_EQ(r.tv_distance, 0.0);
  EXPECT_EQ(r.top_items_overlap, 1.0);
  ASSERT_EQ(r.roles.size(), 1u);
  EXPECT_EQ(r.roles[0].hiding.percentage, 0.0);
  EXPECT_EQ(r.roles[0].top_person_overlap, 1.0);
  EXPECT_EQ(r.perturbation.mean_abs_change, 0.0);
}
