#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <functional>
#include <filesystem>

#include <json.hpp>

#include "helpers.hpp"
#include "ratesynth/config.hpp"
#include "ratesynth/dataset.hpp"

using namespace ratesynth;
using nlohmann::json;
using testing_support::read_text;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

const std::string kToy = std::string(RATESYNTH_SOURCE_DIR) + "/configs/toy";

json toy_config(const TempDir& dir) {
  return json{
      {"config_version", 1},
      {"seed", 11},
      {"output_dir", (dir.path() / "out").string()},
      {"dataset",
       {{"ratings", kToy + "/ratings.csv"},
        {"delimiter", ","},
        {"header", true},
        {"columns", {{"user", "userId"}, {"item", "movieId"}, {"rating", "rating"}}}}},
      {"metadata",
       json::array({{{"path", kToy + "/directors.txt"}, {"role", "director"}},
                    {{"path", kToy + "/actors.txt"}, {"role", "actor"}}})},
      {"synthesis", {{"retain_fraction", 0.5}, {"min_node_size", 2}}},
      {"benchmark",
       {{"iterations", {2, 4}},
        {"rating_models", json::array({{{"family", "knn_basic"}}, {{"family", "slope_one"}}})},
        {"ranking_models", json::array({{{"family", "mf"}, {"n_factors", 3}}})}}}};
}

struct Run {
  int status;
  std::string err;
};

Run cli(const TempDir& dir, const json& cfg, const std::string& args) {
  const std::string cfg_path = dir.file("config.json");
  write_text(cfg_path, cfg.dump(2));
  const std::string err_path = dir.file("stderr.txt");
  const std::string cmd = std::string(RATESYNTH_CLI) + " " + args + " --config " + cfg_path + " 2> " + err_path;
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_text(err_path)};
}

std::size_t data_rows(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++n;
  return n;
}

RatingDataset load_toy() {
  RatingSchema s;
  s.has_header = true;
  s.user_name = "userId";
  s.item_name = "movieId";
  s.rating_name = "rating";
  return load_ratings(kToy + "/ratings.csv", s);
}

}  // namespace

TEST(Cli, SynthesizeWritesValidatedOutputs) {
  TempDir dir("cli_syn");
  auto r = cli(dir, toy_config(dir), "synthesize");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto out = dir.path() / "out";
  for (const char* f : {"synthetic.csv", "mask.txt", "synthesis_log.json"}) EXPECT_TRUE(std::filesystem::exists(out / f));

  RatingSchema s;
  s.has_header = true;
  auto syn = load_ratings((out / "synthetic.csv").string(), s);
  EXPECT_TRUE(syn.same_cells(load_toy()));
  EXPECT_EQ(read_text((out / "synthetic.csv").string()).substr(0, 18), "userId,movieId,rat");

  auto log = json::parse(read_text((out / "synthesis_log.json").string()));
  for (const char* key : {"trees", "mean_depth", "mean_leaf_size", "retained_cells", "synthesized_cells"})
    EXPECT_TRUE(log.contains(key)) << key;
}

TEST(Cli, SynthesizeIsRepeatable) {
  TempDir a("cli_rep_a"), b("cli_rep_b");
  ASSERT_EQ(cli(a, toy_config(a), "synthesize").status, 0);
  ASSERT_EQ(cli(b, toy_config(b), "synthesize --threads 3").status, 0);
  for (const char* f : {"synthetic.csv", "mask.txt", "synthesis_log.json"})
    EXPECT_EQ(read_text((a.path() / "out" / f).string()), read_text((b.path() / "out" / f).string())) << f;

  TempDir c("cli_rep_c");
  ASSERT_EQ(cli(c, toy_config(c), "synthesize --seed 12").status, 0);
  EXPECT_NE(read_text((a.path() / "out/synthetic.csv").string()), read_text((c.path() / "out/synthetic.csv").string()));
}

TEST(Cli, RetainFractionOutOfRange) {
  TempDir dir("cli_bad");
  auto cfg = toy_config(dir);
  cfg["synthesis"]["retain_fraction"] = 1.3;
  auto r = cli(dir, cfg, "synthesize");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("retain_fraction"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out/synthetic.csv"));
}

TEST(Cli, ConfigErrorsNameTheKey) {
  TempDir dir("cli_keys");
  auto cases = std::vector<std::pair<std::function<void(json&)>, std::string>>{
      {[](json& c) { c.erase("config_version"); }, "config_version"},
      {[](json& c) { c["config_version"] = 2; }, "config_version"},
      {[](json& c) { c.erase("seed"); }, "seed"},
      {[](json& c) { c["synthesis"]["min_node_size"] = 0; }, "min_node_size"},
      {[](json& c) { c["synthesis"]["retain_fractoin"] = 0.4; }, "retain_fractoin"},
      {[](json& c) { c["dataset"]["ratings"] = "/nonexistent.csv"; }, "dataset.ratings"},
      {[](json& c) { c["benchmark"]["rating_models"][0]["family"] = "mf"; }, "family"},
      {[](json& c) { c["benchmark"]["rating_models"][0]["k_neighbors"] = 0; }, "k_neighbors"},
      {[](json& c) { c["benchmark"]["test_fraction"] = 1.0; }, "test_fraction"},
      {[](json& c) { c["metadata"][0]["role"] = "producer"; }, "role"},
  };
  for (auto& [edit, key] : cases) {
    auto cfg = toy_config(dir);
    edit(cfg);
    auto r = cli(dir, cfg, "synthesize");
    EXPECT_NE(r.status, 0) << key;
    EXPECT_NE(r.err.find(key), std::string::npos) << key << ": " << r.err;
  }
  EXPECT_NE(cli(dir, toy_config(dir), "synthesize --threads 0").status, 0);
  EXPECT_NE(cli(dir, toy_config(dir), "").status, 0);
}

TEST(Cli, BenchmarkCardinality) {
  TempDir dir("cli_bench");
  auto cfg = toy_config(dir);
  cfg["benchmark"]["iterations"] = {50, 100, 200, 300};
  cfg["benchmark"]["rating_models"] = json::array(
      {{{"family", "knn_basic"}}, {{"family", "knn_centered"}}, {{"family", "slope_one"}}, {{"family", "coclustering"}}});
  cfg["benchmark"]["ranking_models"] = json::array(
      {{{"family", "mf"}, {"n_factors", 2}}, {{"family", "bmf"}, {"n_factors", 2}}, {{"family", "bprfm"}, {"n_factors", 2}}});
  ASSERT_EQ(cli(dir, cfg, "synthesize").status, 0);
  auto r = cli(dir, cfg, "benchmark");
  ASSERT_EQ(r.status, 0) << r.err;
  const std::string lb = (dir.path() / "out/leaderboard.csv").string();
  EXPECT_EQ(data_rows(lb), 8u + 24u);
  std::size_t rating = 0, ranking = 0;
  std::istringstream in(read_text(lb));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "task,dataset_tag,model,metric,value");
  while (std::getline(in, line)) (line.rfind("rating,", 0) == 0 ? rating : ranking)++;
  EXPECT_EQ(rating, 8u);
  EXPECT_EQ(ranking, 24u);

  auto ag = json::parse(read_text((dir.path() / "out/agreement.json").string()));
  EXPECT_TRUE(ag["rating"].contains("kendall_tau"));
  EXPECT_EQ(ag["ranking"]["by_iterations"].size(), 4u);
}

TEST(Cli, SelfComparisonHasPerfectAgreement) {
  TempDir dir("cli_self");
  auto cfg = toy_config(dir);
  cfg["benchmark"]["synthetic"] = kToy + "/ratings.csv";
  auto r = cli(dir, cfg, "benchmark");
  ASSERT_EQ(r.status, 0) << r.err;
  auto ag = json::parse(read_text((dir.path() / "out/agreement.json").string()));
  EXPECT_EQ(ag["rating"]["kendall_tau"].get<double>(), 1.0);
  EXPECT_EQ(ag["ranking"]["overall"]["kendall_tau"].get<double>(), 1.0);
  EXPECT_TRUE(ag["rating"]["best_preserved"].get<bool>());
}

TEST(Cli, BenchmarkNeedsSyntheticFile) {
  TempDir dir("cli_nosyn");
  auto r = cli(dir, toy_config(dir), "benchmark");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("benchmark.synthetic"), std::string::npos) << r.err;
}

TEST(Cli, AuditOfIdenticalData) {
  TempDir dir("cli_audit_id");
  auto cfg = toy_config(dir);
  ASSERT_EQ(cli(dir, cfg, "synthesize").status, 0);
  cfg["audit"] = {{"synthetic", kToy + "/ratings.csv"}};
  auto r = cli(dir, cfg, "audit");
  ASSERT_EQ(r.status, 0) << r.err;
  auto a = json::parse(read_text((dir.path() / "out/audit.json").string()));
  EXPECT_EQ(a["tv_distance"].get<double>(), 0.0);
  EXPECT_EQ(a["perturbation"]["mean_abs_change"].get<double>(), 0.0);
  for (const char* role : {"director", "actor"}) EXPECT_EQ(a["roles"][role]["hiding"]["percentage"].get<double>(), 0.0);
}

TEST(Cli, AuditReportSchema) {
  TempDir dir("cli_audit");
  ASSERT_EQ(cli(dir, toy_config(dir), "synthesize").status, 0);
  auto r = cli(dir, toy_config(dir), "audit");
  ASSERT_EQ(r.status, 0) << r.err;
  auto a = json::parse(read_text((dir.path() / "out/audit.json").string()));
  for (const char* key : {"tv_distance", "histogram", "top_items", "roles", "perturbation"}) ASSERT_TRUE(a.contains(key));
  EXPECT_EQ(a["histogram"].size(), 5u);
  for (const char* role : {"director", "actor"}) {
    ASSERT_TRUE(a["roles"].contains(role));
    for (const char* key : {"percentage", "compared", "changed", "gained", "lost"})
      EXPECT_TRUE(a["roles"][role]["hiding"].contains(key));
  }
  for (const char* key : {"cells", "mean_abs_change", "variance", "all_cells_mean_abs_change", "all_cells_variance"})
    EXPECT_TRUE(a["perturbation"].contains(key));
  const std::string hist = read_text((dir.path() / "out/histogram.csv").string());
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "value,original_fraction,synthetic_fraction");
  EXPECT_EQ(data_rows((dir.path() / "out/histogram.csv").string()), 5u);
}

TEST(Cli, AuditErrors) {
  TempDir dir("cli_audit_err");
  auto cfg = toy_config(dir);
  ASSERT_EQ(cli(dir, cfg, "synthesize").status, 0);
  cfg["metadata"][0]["path"] = "/nonexistent/directors.txt";
  auto r = cli(dir, cfg, "audit");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("metadata[0].path"), std::string::npos) << r.err;

  // a synthetic file with a different cell set
  auto other = toy_config(dir);
  write_text(dir.file("other.csv"), "userId,movieId,rating\nu00,m00,3\n");
  other["audit"] = {{"synthetic", dir.file("other.csv")}};
  EXPECT_NE(cli(dir, other, "audit").status, 0);
}

TEST(Cli, RunAllIsByteIdenticalAcrossThreads) {
  TempDir dir("cli_all");
  auto cfg = toy_config(dir);
  ASSERT_EQ(cli(dir, cfg, "run-all --threads 1 --out " + dir.file("one")).status, 0);
  ASSERT_EQ(cli(dir, cfg, "run-all --threads 4 --out " + dir.file("four")).status, 0);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.file("one"))) {
    const auto name = entry.path().filename();
    EXPECT_EQ(read_text(entry.path().string()), read_text((dir.path() / "four" / name).string())) << name;
    ++files;
  }
  EXPECT_EQ(files, 7u);
}

TEST(Config, RelativePathsAndDefaults) {
  auto cfg = load_config(std::string(RATESYNTH_SOURCE_DIR) + "/configs/toy.json");
  EXPECT_EQ(cfg.ratings_path, std::filesystem::path(kToy + "/ratings.csv").lexically_normal().string());
  EXPECT_EQ(cfg.synthesis.seed, 7u);
  EXPECT_EQ(cfg.protocol.split_seed, 7u);
  EXPECT_EQ(cfg.models.size(), 4u);
  cfg.override_seed(99);
  for (const auto& m : cfg.models) EXPECT_EQ(m.model.seed, 99u);
  EXPECT_EQ(cfg.synthesis.seed, 99u);
}
