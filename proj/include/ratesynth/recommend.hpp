#pragma once

#include <memory>

#include "ratesynth/coclustering.hpp"
#include "ratesynth/factorization.hpp"
#include "ratesynth/model.hpp"
#include "ratesynth/neighborhood.hpp"

namespace ratesynth {

inline std::unique_ptr<TrainedModel> train_rating_predictor(const ModelSpec& spec, const RatingDataset& train) {
  if (!is_rating_family(spec.family))
    throw Error(std::string(to_string(spec.family)) + " is not a rating-prediction family");
  spec.validate();
  switch (spec.family) {
    case Family::slope_one: return std::make_unique<SlopeOneModel>(spec, train);
    case Family::coclustering: return std::make_unique<CoclusteringModel>(spec, train);
    default: return std::make_unique<KnnModel>(spec, train);
  }
}

inline std::unique_ptr<TrainedModel> train_ranker(const ModelSpec& spec, const RatingDataset& train) {
  if (!is_ranking_family(spec.family)) throw Error(std::string(to_string(spec.family)) + " is not a ranking family");
  spec.validate();
  if (spec.family == Family::bprfm) return std::make_unique<BprFmModel>(spec, train);
  return std::make_unique<SgdFactorModel>(spec, train);
}

inline std::unique_ptr<TrainedModel> train_model(const ModelSpec& spec, const RatingDataset& train) {
  return is_ranking_family(spec.family) ? train_ranker(spec, train) : train_rating_predictor(spec, train);
}

}  // namespace ratesynth
