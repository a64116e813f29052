#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "usat/corpus.hpp"
#include "usat/features.hpp"
#include "usat/models.hpp"

namespace usat {

inline constexpr double kDefaultTestFraction = 0.2;

// Split, popularity table from train only, and full-schema feature vectors.
struct PreparedData {
  DataSplit split;
  PopularityTable table;
  std::vector<FeatureVector> train;
  std::vector<FeatureVector> test;
  std::vector<FeatureVector> holdout;
};

PreparedData prepare_data(const Corpus& corpus, double test_fraction, std::uint64_t split_seed, const Lexicon& lexicon,
                          Execution exec = Execution::kParallel);

// single_turn and multi_turn from test vectors, new_skill from holdout only.
std::map<Segment, std::vector<FeatureVector>> vectors_by_segment(const std::vector<FeatureVector>& test,
                                                                 const std::vector<FeatureVector>& holdout);

// A trained model plus everything needed to featurize new data the same way.
struct ModelArtifact {
  TrainedModel model;
  PopularityTable table;
  Lexicon lexicon;
  std::uint64_t split_seed = 0;
  double test_fraction = kDefaultTestFraction;
};

nlohmann::json artifact_to_json(const ModelArtifact& artifact);
ModelArtifact artifact_from_json(const nlohmann::json& j);
void save_artifact(const std::string& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::string& path);

nlohmann::json popularity_to_json(const PopularityTable& table);
PopularityTable popularity_from_json(const nlohmann::json& j);

}  // namespace usat
