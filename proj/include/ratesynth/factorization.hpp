#pragma once

// Latent-factor models trained by SGD: plain MF, biased MF, and BPR-FM.
//
// BPR-FM is a factorization machine over one-hot user and item indicators.
// With only those two fields its pairwise score difference reduces to
//   x_uij = (w_i - w_j) + <v_u, v_i - v_j>,
// i.e. BPR-MF with an item bias; the user terms cancel in every pair.

#include <cmath>
#include <span>
#include <vector>

#include "ratesynth/model.hpp"
#include "ratesynth/random.hpp"

namespace ratesynth {

class FactorModel : public TrainedModel {
 public:
  std::size_t factors() const noexcept { return k_; }
  std::span<const double> user_factors(UserIndex u) const { return {p_.data() + u * k_, k_}; }
  std::span<const double> item_factors(ItemIndex i) const { return {q_.data() + i * k_, k_}; }
  std::span<const double> user_biases() const noexcept { return bu_; }
  std::span<const double> item_biases() const noexcept { return bi_; }

  /// Training objective after each epoch (sum of squared errors for MF/BMF,
  /// summed BPR log-loss over the epoch's triples for BPR-FM).
  const std::vector<double>& epoch_loss() const noexcept { return epoch_loss_; }

 protected:
  FactorModel(ModelSpec spec, const RatingDataset& train) : TrainedModel(std::move(spec), train), k_(spec_.n_factors) {
    Rng rng(derive_seed(spec_.seed, {"init", to_string(spec_.family)}));
    p_.resize(train_.num_users() * k_);
    q_.resize(train_.num_items() * k_);
    for (auto& x : p_) x = rng.uniform(-spec_.init_range, spec_.init_range);
    for (auto& x : q_) x = rng.uniform(-spec_.init_range, spec_.init_range);
    bu_.assign(train_.num_users(), 0.0);
    bi_.assign(train_.num_items(), 0.0);
  }

  double dot(UserIndex u, ItemIndex i) const {
    const double* pu = p_.data() + u * k_;
    const double* qi = q_.data() + i * k_;
    double s = 0;
    for (std::size_t f = 0; f < k_; ++f) s += pu[f] * qi[f];
    return s;
  }

  void write_parameters(std::ostream& out) const override {
    for (UserIndex u = 0; u < train_.num_users(); ++u) {
      out << "user_bias " << train_.user_id(u) << ' ' << format_number(bu_[u]) << '\n';
      write_vector(out, "user_factors", train_.user_id(u), user_factors(u));
    }
    for (ItemIndex i = 0; i < train_.num_items(); ++i) {
      out << "item_bias " << train_.item_id(i) << ' ' << format_number(bi_[i]) << '\n';
      write_vector(out, "item_factors", train_.item_id(i), item_factors(i));
    }
  }

  std::size_t k_;
  std::vector<double> p_, q_;
  std::vector<double> bu_, bi_;
  std::vector<double> epoch_loss_;
};

/// SGD on squared rating error. mf scores p_u . q_i; bmf adds mu + b_u + b_i.
/// Each epoch visits the training cells in a fresh seeded order.
class SgdFactorModel final : public FactorModel {
 public:
  SgdFactorModel(ModelSpec spec, const RatingDataset& train) : FactorModel(std::move(spec), train) {
    biased_ = spec_.family == Family::bmf;
    auto cells = train_.cells();
    std::vector<std::size_t> order(cells.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    const double lr = spec_.learning_rate, reg = spec_.regularization;
    for (std::size_t epoch = 0; epoch < spec_.n_iterations; ++epoch) {
      Rng rng(derive_seed(spec_.seed, {"epoch", to_string(spec_.family), std::to_string(epoch)}));
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t pos : order) {
        const Cell& c = cells[pos];
        const double err = c.rating - estimate(c.user, c.item);
        if (biased_) {
          bu_[c.user] += lr * (err - reg * bu_[c.user]);
          bi_[c.item] += lr * (err - reg * bi_[c.item]);
        }
        double* pu = p_.data() + c.user * k_;
        double* qi = q_.data() + c.item * k_;
        for (std::size_t f = 0; f < k_; ++f) {
          const double puf = pu[f], qif = qi[f];
          pu[f] += lr * (err * qif - reg * puf);
          qi[f] += lr * (err * puf - reg * qif);
        }
      }
      double sse = 0;
      for (const Cell& c : cells) {
        const double e = c.rating - estimate(c.user, c.item);
        sse += e * e;
      }
      epoch_loss_.push_back(sse);
    }
  }

 protected:
  double estimate(UserIndex u, ItemIndex i) const override {
    return biased_ ? mu_ + bu_[u] + bi_[i] + dot(u, i) : dot(u, i);
  }

 private:
  bool biased_ = false;
};

/// Pairwise ranking with BPR loss over (user, rated item, unrated item)
/// triples: |train| triples per epoch, positives drawn uniformly from the
/// training cells, negatives uniformly from the user's unrated items.
class BprFmModel final : public FactorModel {
 public:
  BprFmModel(ModelSpec spec, const RatingDataset& train) : FactorModel(std::move(spec), train) {
    auto cells = train_.cells();
    const std::size_t n_items = train_.num_items();
    const double lr = spec_.learning_rate, reg = spec_.regularization;
    std::vector<double> diff(k_);
    for (std::size_t epoch = 0; epoch < spec_.n_iterations; ++epoch) {
      Rng rng(derive_seed(spec_.seed, {"epoch", "bprfm", std::to_string(epoch)}));
      double loss = 0;
      for (std::size_t step = 0; step < cells.size(); ++step) {
        const Cell& pos = cells[rng.below(cells.size())];
        const UserIndex u = pos.user;
        const ItemIndex i = pos.item;
        if (train_.user_cells(u).size() >= n_items) continue;
        ItemIndex j;
        do {
          j = static_cast<ItemIndex>(rng.below(n_items));
        } while (rated(u, j));

        double* pu = p_.data() + u * k_;
        double* qi = q_.data() + i * k_;
        double* qj = q_.data() + j * k_;
        double x = bi_[i] - bi_[j];
        for (std::size_t f = 0; f < k_; ++f) {
          diff[f] = qi[f] - qj[f];
          x += pu[f] * diff[f];
        }
        // d/dx of log sigmoid(x) is sigmoid(-x).
        const double g = 1.0 / (1.0 + std::exp(x));
        loss += std::log1p(std::exp(-x));
        bi_[i] += lr * (g - reg * bi_[i]);
        bi_[j] += lr * (-g - reg * bi_[j]);
        for (std::size_t f = 0; f < k_; ++f) {
          const double puf = pu[f];
          pu[f] += lr * (g * diff[f] - reg * puf);
          qi[f] += lr * (g * puf - reg * qi[f]);
          qj[f] += lr * (-g * puf - reg * qj[f]);
        }
      }
      epoch_loss_.push_back(loss);
    }
  }

  double score(UserIndex u, ItemIndex i) const override { return bi_[i] + dot(u, i); }

 protected:
  // Scores are not on the rating scale; as a rating predictor the model
  // shifts its score by the global mean so predict() stays meaningful.
  double estimate(UserIndex u, ItemIndex i) const override { return mu_ + score(u, i); }

 private:
  bool rated(UserIndex u, ItemIndex j) const {
    auto row = train_.user_cells(u);
    auto it = std::lower_bound(row.begin(), row.end(), j, [](const Cell& c, ItemIndex x) { return c.item < x; });
    return it != row.end() && it->item == j;
  }
};

}  // namespace ratesynth
