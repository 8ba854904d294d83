#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ratesynth/dataset.hpp"
#include "ratesynth/error.hpp"
#include "ratesynth/parallel.hpp"
#include "ratesynth/recommend.hpp"

namespace ratesynth {

/// sqrt(mean((predicted - actual)^2)) over (predicted, actual) pairs.
inline double rmse(std::span<const std::pair<double, double>> predictions) {
  if (predictions.empty()) throw Error("rmse of an empty prediction list");
  double sum = 0;
  for (const auto& [predicted, actual] : predictions) sum += (predicted - actual) * (predicted - actual);
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

/// |top-k of recommended ∩ relevant| / |relevant|.
template <class T>
double recall_at_k(std::span<const T> recommended, const std::set<T>& relevant, std::size_t k) {
  if (relevant.empty()) throw Error("recall_at_k with an empty relevant set");
  if (k < 1) throw Error("recall_at_k needs k >= 1");
  std::size_t hits = 0;
  for (std::size_t n = 0; n < std::min(k, recommended.size()); ++n) hits += relevant.count(recommended[n]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

inline double recall_at_k(const std::vector<std::string>& recommended, const std::set<std::string>& relevant,
                          std::size_t k) {
  return recall_at_k(std::span<const std::string>(recommended), relevant, k);
}

enum class Task { rating, ranking };

inline std::string_view to_string(Task t) { return t == Task::rating ? "rating" : "ranking"; }

struct LeaderboardEntry {
  std::string label;
  std::string metric;
  double value;
};

struct Leaderboard {
  Task task = Task::rating;
  std::string dataset_tag;
  std::vector<LeaderboardEntry> entries;

  const LeaderboardEntry* find(const std::string& label) const {
    for (const auto& e : entries)
      if (e.label == label) return &e;
    return nullptr;
  }

  /// Entries whose label ends with the given suffix (e.g. "@200").
  Leaderboard filtered(const std::string& suffix) const {
    Leaderboard out{task, dataset_tag, {}};
    for (const auto& e : entries)
      if (e.label.size() >= suffix.size() && e.label.compare(e.label.size() - suffix.size(), suffix.size(), suffix) == 0)
        out.entries.push_back(e);
    return out;
  }
};

/// Lower is better for RMSE, higher for everything else.
inline bool lower_is_better(const std::string& metric) { return metric == "rmse"; }

/// Labels from best to worst, ties by label.
inline std::vector<std::string> ordering(const Leaderboard& lb) {
  std::vector<const LeaderboardEntry*> e;
  for (const auto& x : lb.entries) e.push_back(&x);
  std::sort(e.begin(), e.end(), [](const LeaderboardEntry* a, const LeaderboardEntry* b) {
    if (a->value != b->value) return lower_is_better(a->metric) ? a->value < b->value : a->value > b->value;
    return a->label < b->label;
  });
  std::vector<std::string> out;
  for (const auto* x : e) out.push_back(x->label);
  return out;
}

struct AgreementReport {
  double kendall_tau = 1.0;
  bool best_preserved = true;
  bool worst_preserved = true;
  std::vector<std::pair<std::string, std::string>> flips;  // (a, b): a above b on original, below on synthetic
  std::vector<std::string> original_order;
  std::vector<std::string> synthetic_order;
};

/// Kendall tau between the orderings the two leaderboards induce on the
/// same set of labels.
inline AgreementReport rank_agreement(const Leaderboard& original, const Leaderboard& synthetic) {
  std::set<std::string> a, b;
  std::map<std::string, std::string> metrics;
  for (const auto& e : original.entries) {
    if (!a.insert(e.label).second) throw Error("duplicate leaderboard label " + e.label);
    metrics[e.label] = e.metric;
  }
  for (const auto& e : synthetic.entries) {
    if (!b.insert(e.label).second) throw Error("duplicate leaderboard label " + e.label);
    if (metrics.count(e.label) && metrics[e.label] != e.metric)
      throw Error("metric mismatch for " + e.label + ": " + metrics[e.label] + " vs " + e.metric);
  }
  if (a != b) throw Error("leaderboards rank different model labels");

  AgreementReport r;
  r.original_order = ordering(original);
  r.synthetic_order = ordering(synthetic);
  const std::size_t n = r.original_order.size();
  if (n == 0) return r;
  std::map<std::string, std::size_t> pos;
  for (std::size_t k = 0; k < n; ++k) pos[r.synthetic_order[k]] = k;
  long concordant = 0, discordant = 0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      if (pos[r.original_order[x]] < pos[r.original_order[y]]) {
        ++concordant;
      } else {
        ++discordant;
        r.flips.emplace_back(r.original_order[x], r.original_order[y]);
      }
    }
  }
  const long pairs = static_cast<long>(n * (n - 1) / 2);
  r.kendall_tau = pairs ? static_cast<double>(concordant - discordant) / static_cast<double>(pairs) : 1.0;
  r.best_preserved = r.original_order.front() == r.synthetic_order.front();
  r.worst_preserved = r.original_order.back() == r.synthetic_order.back();
  return r;
}

struct BenchmarkProtocol {
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  /// Iteration counts swept for ranking models; empty keeps each spec's own.
  std::vector<std::size_t> iterations{50, 100, 200, 300};
  std::size_t top_k = 5;
  double relevance_threshold = 4.0;
  unsigned threads = 1;
};

struct TaskSpec {
  Task task;
  ModelSpec model;
};

struct BenchmarkResult {
  std::vector<Leaderboard> original;   // one per task present, rating first
  std::vector<Leaderboard> synthetic;
};

inline double evaluate_rmse(const TrainedModel& model, const RatingDataset& test) {
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(test.num_ratings());
  for (const auto& c : test.cells())
    pairs.emplace_back(model.predict(test.user_id(c.user), test.item_id(c.item)), c.rating);
  return rmse(pairs);
}

/// Mean Recall@k over test users with at least one relevant item (test
/// rating >= threshold). Candidates are the training items the user has not
/// rated in training.
inline double evaluate_recall(const TrainedModel& model, const RatingDataset& test, std::size_t k, double threshold) {
  const auto& train = model.train();
  double sum = 0;
  std::size_t users = 0;
  std::vector<bool> skip(train.num_items(), false);
  for (UserIndex tu = 0; tu < test.num_users(); ++tu) {
    std::set<std::string> relevant;
    for (const auto& c : test.user_cells(tu))
      if (c.rating >= threshold) relevant.insert(test.item_id(c.item));
    if (relevant.empty()) continue;
    auto u = train.find_user(test.user_id(tu));
    std::fill(skip.begin(), skip.end(), false);
    if (u)
      for (const auto& c : train.user_cells(*u)) skip[c.item] = true;
    std::vector<std::string> top;
    for (ItemIndex i : model.top_n(u, k, skip)) top.push_back(train.item_id(i));
    sum += recall_at_k(top, relevant, k);
    ++users;
  }
  return users ? sum / static_cast<double>(users) : 0.0;
}

/// Trains and scores every spec on the original and the synthetic data,
/// split identically.
inline BenchmarkResult run_benchmark(const RatingDataset& original, const RatingDataset& synthetic,
                                     std::span<const TaskSpec> specs, const BenchmarkProtocol& protocol) {
  if (!original.same_cells(synthetic)) throw Error("original and synthetic datasets have different cell sets");
  for (const auto& s : specs) {
    const bool ok = s.task == Task::rating ? is_rating_family(s.model.family) : is_ranking_family(s.model.family);
    if (!ok)
      throw Error(std::string(to_string(s.model.family)) + " cannot be benchmarked on the " +
                  std::string(to_string(s.task)) + " task");
    s.model.validate();
  }

  struct Job {
    Task task;
    ModelSpec model;
    bool synthetic;
  };
  std::vector<Job> jobs;
  for (bool syn : {false, true}) {
    for (const auto& s : specs) {
      if (s.task == Task::ranking && !protocol.iterations.empty()) {
        for (std::size_t it : protocol.iterations) {
          ModelSpec m = s.model;
          m.n_iterations = it;
          m.label = s.model.name() + "@" + std::to_string(it);
          jobs.push_back({s.task, std::move(m), syn});
        }
      } else {
        ModelSpec m = s.model;
        m.label = s.model.name();
        jobs.push_back({s.task, std::move(m), syn});
      }
    }
  }

  const HoldoutSplit split_o = split_holdout(original, protocol.test_fraction, protocol.split_seed);
  const HoldoutSplit split_s = split_holdout(synthetic, protocol.test_fraction, protocol.split_seed);
  const std::string recall_name = "recall@" + std::to_string(protocol.top_k);

  std::vector<LeaderboardEntry> results(jobs.size());
  parallel_for(jobs.size(), protocol.threads, [&](std::size_t n) {
    const Job& job = jobs[n];
    const HoldoutSplit& split = job.synthetic ? split_s : split_o;
    auto model = train_model(job.model, split.train);
    if (job.task == Task::rating)
      results[n] = {job.model.label, "rmse", evaluate_rmse(*model, split.test)};
    else
      results[n] = {job.model.label, recall_name,
                    evaluate_recall(*model, split.test, protocol.top_k, protocol.relevance_threshold)};
  });

  BenchmarkResult out;
  for (bool syn : {false, true}) {
    auto& boards = syn ? out.synthetic : out.original;
    for (Task task : {Task::rating, Task::ranking}) {
      Leaderboard lb{task, syn ? "synthetic" : "original", {}};
      for (std::size_t n = 0; n < jobs.size(); ++n)
        if (jobs[n].synthetic == syn && jobs[n].task == task) lb.entries.push_back(results[n]);
      if (!lb.entries.empty()) boards.push_back(std::move(lb));
    }
  }
  return out;
}

/// CSV rows "task,dataset_tag,model,metric,value", header first.
inline void write_leaderboards(std::ostream& out, std::span<const Leaderboard> boards) {
  out << "task,dataset_tag,model,metric,value\n";
  for (const auto& lb : boards)
    for (const auto& e : lb.entries)
      out << to_string(lb.task) << ',' << lb.dataset_tag << ',' << e.label << ',' << e.metric << ','
          << format_number(e.value) << '\n';
}

}  // namespace ratesynth
