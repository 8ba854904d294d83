#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "ratesynth/dataset.hpp"

using namespace ratesynth;
using testing_support::parse;

TEST(LoadRatings, ThreeRows) {
  auto ds = parse("u1,i1,5\nu1,i2,3\nu2,i1,4\n");
  EXPECT_EQ(ds.num_users(), 2u);
  EXPECT_EQ(ds.num_items(), 2u);
  EXPECT_EQ(ds.num_ratings(), 3u);
  EXPECT_EQ(*ds.rating("u1", "i2"), 3.0);
  EXPECT_FALSE(ds.rating("u2", "i2"));
}

TEST(LoadRatings, OutOfScaleNamesLineAndValue) {
  try {
    parse("u1,i2,3\nu1,i1,9\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("9"), std::string::npos);
  }
}

TEST(LoadRatings, DuplicateCellIsAnError) {
  try {
    parse("u1,i1,3\nu2,i1,4\nu1,i1,5\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadRatings, UnparsableRow) {
  EXPECT_THROW(parse("u1,i1,abc\n"), ParseError);
  EXPECT_THROW(parse("u1,i1\n"), ParseError);
  EXPECT_THROW(parse("u1,,3\n"), ParseError);
}

TEST(LoadRatings, MissingFile) { EXPECT_THROW(load_ratings("/nonexistent/ratings.csv"), ParseError); }

TEST(LoadRatings, HeaderAndNamedColumns) {
  RatingSchema s;
  s.has_header = true;
  s.user_name = "userId";
  s.item_name = "movieId";
  s.rating_name = "rating";
  std::istringstream in("movieId,rating,userId,timestamp\ni1,4,u1,0\ni2,2,u1,0\n");
  auto ds = read_ratings(in, s, {});
  EXPECT_EQ(*ds.rating("u1", "i1"), 4.0);
  EXPECT_EQ(*ds.rating("u1", "i2"), 2.0);

  std::istringstream bad("a,b,c\nu,i,3\n");
  EXPECT_THROW(read_ratings(bad, s, {}), ParseError);
}

TEST(LoadRatings, TabsAndTimestampsAndCustomScale) {
  RatingSchema s;
  s.delimiter = '\t';
  std::istringstream in("1\t10\t0.5\t881250949\n2\t10\t4.5\t881250950\n");
  auto ds = read_ratings(in, s, RatingScale({0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5}));
  EXPECT_EQ(*ds.rating("1", "10"), 0.5);
  EXPECT_EQ(*ds.rating("2", "10"), 4.5);
}

TEST(RatingScale, RejectsUnsortedOrEmpty) {
  EXPECT_THROW(RatingScale(std::vector<double>{}), Error);
  EXPECT_THROW(RatingScale({2, 1}), Error);
  EXPECT_THROW(RatingScale({1, 1}), Error);
  EXPECT_EQ(RatingScale::integers(1, 5), RatingScale());
}

TEST(Dataset, RoundTripCanonicalizes) {
  auto ds = parse("u2,i1,4\nu1,i2,3\nu1,i1,5\n");
  std::ostringstream out;
  write_ratings(ds, out);
  EXPECT_EQ(out.str(), "u1,i1,5\nu1,i2,3\nu2,i1,4\n");
  auto again = parse(out.str());
  EXPECT_TRUE(again.same_cells(ds));
  for (std::size_t k = 0; k < ds.num_ratings(); ++k) EXPECT_EQ(again.cells()[k].rating, ds.cells()[k].rating);
}

TEST(Dataset, RoundTripRandom) {
  auto ds = testing_support::random_dataset(40, 30, 0.2, 3);
  std::ostringstream out;
  write_ratings(ds, out);
  auto again = parse(out.str());
  ASSERT_TRUE(again.same_cells(ds));
  for (std::size_t k = 0; k < ds.num_ratings(); ++k) EXPECT_EQ(again.cells()[k].rating, ds.cells()[k].rating);
}

TEST(Density, SmallCases) {
  EXPECT_DOUBLE_EQ(density(parse("a,x,1\na,y,2\nb,x,3\nb,y,4\n")), 1.0);
  // two users and two items with a single rating cannot be expressed by cells
  // alone, so check the formula on 1 x 1 and 2 x 2 with 2 ratings.
  EXPECT_DOUBLE_EQ(density(parse("a,x,1\nb,y,2\n")), 0.5);
  EXPECT_THROW(density(RatingDataset{}), Error);
}

TEST(Density, InUnitInterval) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ds = testing_support::random_dataset(10 + seed, 8 + seed, 0.3, seed);
    const double d = density(ds);
    EXPECT_GT(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(SplitHoldout, ZeroFraction) {
  auto ds = testing_support::random_dataset(20, 20, 0.3, 1);
  auto sp = split_holdout(ds, 0.0, 5);
  EXPECT_TRUE(sp.test.empty());
  EXPECT_TRUE(sp.train.same_cells(ds));
}

TEST(SplitHoldout, ExactCountAndPartition) {
  std::vector<RatingTriple> t;
  for (int u = 0; u < 10; ++u)
    for (int i = 0; i < 10; ++i) t.push_back({"u" + std::to_string(u), "i" + std::to_string(i), double(1 + (u + i) % 5)});
  auto ds = RatingDataset::from_triples(t);
  auto sp = split_holdout(ds, 0.2, 7);
  EXPECT_EQ(sp.test.num_ratings(), 20u);
  EXPECT_EQ(sp.train.num_ratings(), 80u);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto* part : {&sp.train, &sp.test})
    for (const auto& tr : part->triples()) {
      EXPECT_TRUE(seen.insert({tr.user, tr.item}).second);
      EXPECT_EQ(*ds.rating(tr.user, tr.item), tr.rating);
    }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(SplitHoldout, Deterministic) {
  auto ds = testing_support::random_dataset(30, 30, 0.2, 2);
  auto a = split_holdout(ds, 0.2, 7), b = split_holdout(ds, 0.2, 7), c = split_holdout(ds, 0.2, 8);
  EXPECT_TRUE(a.test.same_cells(b.test));
  EXPECT_FALSE(a.test.same_cells(c.test));
}

TEST(SplitHoldout, DependsOnlyOnCells) {
  auto ds = testing_support::random_dataset(30, 30, 0.2, 2);
  std::vector<double> flipped;
  for (const auto& c : ds.cells()) flipped.push_back(6 - c.rating);
  auto a = split_holdout(ds, 0.25, 3), b = split_holdout(ds.with_ratings(flipped), 0.25, 3);
  EXPECT_TRUE(a.test.same_cells(b.test));
}

TEST(SplitHoldout, RejectsBadFraction) {
  auto ds = parse("a,x,1\n");
  EXPECT_THROW(split_holdout(ds, 1.0, 1), Error);
  EXPECT_THROW(split_holdout(ds, -0.1, 1), Error);
}

TEST(Metadata, DirectorsList) {
  ItemMetadata meta;
  std::istringstream in("i1|director|DirA;DirB\ni2|actor|X\n");
  read_metadata(in, Role::director, meta);
  auto p = meta.persons("i1", Role::director);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0], "DirA");
  EXPECT_EQ(p[1], "DirB");
  EXPECT_TRUE(meta.persons("i2", Role::director).empty());
  EXPECT_TRUE(meta.persons("i9", Role::director).empty());
}

TEST(Metadata, EmptyFile) {
  ItemMetadata meta;
  std::istringstream in("");
  read_metadata(in, Role::author, meta);
  EXPECT_TRUE(meta.empty());
  EXPECT_TRUE(meta.has_role(Role::author));
}

TEST(Metadata, Malformed) {
  for (const char* body : {"i1|actor|;X\n", "i1|actor\n", "i1|producer|X\n", "|actor|X\n"}) {
    ItemMetadata meta;
    std::istringstream in(body);
    EXPECT_THROW(read_metadata(in, Role::actor, meta), ParseError) << body;
  }
  EXPECT_THROW(load_metadata("/nonexistent/meta.txt", Role::actor), ParseError);
}
