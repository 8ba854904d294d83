#pragma once

#include <limits>
#include <vector>

#include "ratesynth/model.hpp"
#include "ratesynth/random.hpp"

namespace ratesynth {

/// Co-clustering predictor. Users and items are each assigned to a cluster;
/// the estimate is
///   cocluster mean + (user mean - user-cluster mean) + (item mean - item-cluster mean).
/// Assignments start uniformly at random from the seed and are refined for
/// n_iterations rounds, each moving every user, then every item, to the
/// cluster with the smallest squared reconstruction error under the means of
/// the previous round. Empty clusters take the global mean.
class CoclusteringModel final : public TrainedModel {
 public:
  CoclusteringModel(ModelSpec spec, const RatingDataset& train) : TrainedModel(std::move(spec), train) {
    const std::size_t cu = spec_.n_user_clusters, ci = spec_.n_item_clusters;
    Rng rng(derive_seed(spec_.seed, {"coclustering"}));
    user_cluster_.resize(train_.num_users());
    item_cluster_.resize(train_.num_items());
    for (auto& c : user_cluster_) c = static_cast<std::uint32_t>(rng.below(cu));
    for (auto& c : item_cluster_) c = static_cast<std::uint32_t>(rng.below(ci));

    auto cells = train_.cells();
    for (std::size_t round = 0; round < spec_.n_iterations; ++round) {
      compute_means();
      for (UserIndex u = 0; u < train_.num_users(); ++u) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::uint32_t c = 0; c < cu; ++c) {
          double err = 0;
          for (const Cell& cell : train_.user_cells(u)) {
            const double d = cell.rating - estimate_with(u, cell.item, c, item_cluster_[cell.item]);
            err += d * d;
          }
          if (err < best) best = err, arg = c;
        }
        user_cluster_[u] = arg;
      }
      for (ItemIndex i = 0; i < train_.num_items(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::uint32_t c = 0; c < ci; ++c) {
          double err = 0;
          for (std::size_t pos : train_.item_cells(i)) {
            const Cell& cell = cells[pos];
            const double d = cell.rating - estimate_with(cell.user, i, user_cluster_[cell.user], c);
            err += d * d;
          }
          if (err < best) best = err, arg = c;
        }
        item_cluster_[i] = arg;
      }
    }
    compute_means();
  }

  std::uint32_t user_cluster(UserIndex u) const { return user_cluster_[u]; }
  std::uint32_t item_cluster(ItemIndex i) const { return item_cluster_[i]; }

 protected:
  double estimate(UserIndex u, ItemIndex i) const override {
    return estimate_with(u, i, user_cluster_[u], item_cluster_[i]);
  }

  void write_parameters(std::ostream& out) const override {
    for (UserIndex u = 0; u < train_.num_users(); ++u)
      out << "user_cluster " << train_.user_id(u) << ' ' << user_cluster_[u] << '\n';
    for (ItemIndex i = 0; i < train_.num_items(); ++i)
      out << "item_cluster " << train_.item_id(i) << ' ' << item_cluster_[i] << '\n';
    write_vector(out, "user_cluster_mean", "all", user_cluster_mean_);
    write_vector(out, "item_cluster_mean", "all", item_cluster_mean_);
    write_vector(out, "cocluster_mean", "row_major", cocluster_mean_);
  }

 private:
  double estimate_with(UserIndex u, ItemIndex i, std::uint32_t cu, std::uint32_t ci) const {
    return cocluster_mean_[cu * spec_.n_item_clusters + ci] + (user_mean_[u] - user_cluster_mean_[cu]) +
           (item_mean_[i] - item_cluster_mean_[ci]);
  }

  void compute_means() {
    const std::size_t cu = spec_.n_user_clusters, ci = spec_.n_item_clusters;
    std::vector<double> su(cu, 0), si(ci, 0), sc(cu * ci, 0);
    std::vector<std::size_t> nu(cu, 0), ni(ci, 0), nc(cu * ci, 0);
    for (const Cell& c : train_.cells()) {
      const auto a = user_cluster_[c.user], b = item_cluster_[c.item];
      su[a] += c.rating, ++nu[a];
      si[b] += c.rating, ++ni[b];
      sc[a * ci + b] += c.rating, ++nc[a * ci + b];
    }
    auto mean = [&](double s, std::size_t n) { return n ? s / static_cast<double>(n) : mu_; };
    user_cluster_mean_.resize(cu);
    item_cluster_mean_.resize(ci);
    cocluster_mean_.resize(cu * ci);
    for (std::size_t a = 0; a < cu; ++a) user_cluster_mean_[a] = mean(su[a], nu[a]);
    for (std::size_t b = 0; b < ci; ++b) item_cluster_mean_[b] = mean(si[b], ni[b]);
    for (std::size_t k = 0; k < cu * ci; ++k) cocluster_mean_[k] = mean(sc[k], nc[k]);
  }

  std::vector<std::uint32_t> user_cluster_;
  std::vector<std::uint32_t> item_cluster_;
  std::vector<double> user_cluster_mean_;
  std::vector<double> item_cluster_mean_;
  std::vector<double> cocluster_mean_;
};

}  // namespace ratesynth
