#pragma once

#include <cstddef>

#include "ratesynth/cart.hpp"
#include "ratesynth/random.hpp"

namespace ratesynth {

/// One Bayesian-bootstrap draw over n observations: weights are the n gaps
/// between n-1 sorted uniform cut points on [0, 1], then one observation is
/// picked with those weights. Returns the observation index in [0, n).
///
/// The cumulative weight of the first k observations is the k-th smallest
/// cut point, so the observation hit by a uniform u is simply the number of
/// cut points below u, and neither the cut points nor their order need to
/// be kept. The uniform u is drawn first, then the n-1 cut points.
inline std::size_t bayesian_bootstrap_index(std::size_t n, Rng& rng) {
  const double u = rng.uniform();
  std::size_t below = 0;
  for (std::size_t k = 1; k < n; ++k) below += rng.uniform() < u;
  return below;
}

/// Draws a class (rating-scale position) from a leaf. Observations are laid
/// out in class order, so the leaf's multiset fully determines the draw.
inline std::size_t bayesian_bootstrap_draw(const ClassCounts& leaf, Rng& rng) {
  if (leaf.empty()) throw Error("bootstrap draw from an empty leaf");
  std::size_t k = bayesian_bootstrap_index(static_cast<std::size_t>(leaf.total()), rng);
  for (std::size_t cls = 0; cls < leaf.num_classes(); ++cls) {
    if (k < leaf[cls]) return cls;
    k -= leaf[cls];
  }
  return leaf.num_classes() - 1;  // unreachable
}

inline double bayesian_bootstrap_draw(const ClassCounts& leaf, const RatingScale& scale, Rng& rng) {
  return scale[bayesian_bootstrap_draw(leaf, rng)];
}

}  // namespace ratesynth
