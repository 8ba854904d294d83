#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ratesynth/dataset.hpp"
#include "ratesynth/random.hpp"

namespace testing_support {

inline ratesynth::RatingDataset parse(const std::string& csv, const ratesynth::RatingScale& scale = {}) {
  std::istringstream in(csv);
  return ratesynth::read_ratings(in, {}, scale);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ratesynth_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Random dataset with a bit of structure: users prefer one of three item
// groups. Every user rates at least `min_per_user` items.
inline ratesynth::RatingDataset random_dataset(std::size_t users, std::size_t items, double density,
                                               std::uint64_t seed, std::size_t min_per_user = 3) {
  ratesynth::Rng rng(seed);
  std::vector<ratesynth::RatingTriple> t;
  for (std::size_t u = 0; u < users; ++u) {
    const auto taste = rng.below(3);
    std::size_t placed = 0;
    for (std::size_t i = 0; i < items; ++i) {
      if (rng.uniform() >= density && !(i + min_per_user >= items && placed < min_per_user)) continue;
      const double base = (i % 3 == taste) ? 4.2 : 2.7;
      const double v = std::clamp(std::round(base + rng.uniform(-1.5, 1.5)), 1.0, 5.0);
      char uid[32], iid[32];
      std::snprintf(uid, sizeof uid, "u%03zu", u);
      std::snprintf(iid, sizeof iid, "i%03zu", i);
      t.push_back({uid, iid, v});
      ++placed;
    }
  }
  return ratesynth::RatingDataset::from_triples(std::move(t));
}

}  // namespace testing_support
