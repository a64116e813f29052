#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "usat/eval.hpp"
#include "usat/features.hpp"
#include "usat/models.hpp"

namespace usat {

// (with - without) / without; NaN when `without` is 0.
double relative_improvement(double with, double without);

// Bootstrap over joint index resamples of metric(with) - metric(without).
ConfidenceInterval paired_difference_ci(const PairedMetric& metric, std::span<const double> pred_with,
                                        std::span<const double> pred_without, std::span<const double> gold,
                                        int n_boot, std::uint64_t seed, Execution exec = Execution::kParallel);

struct MetricDelta {
  double with = 0.0;
  double without = 0.0;
  double relative = 0.0;
  ConfidenceInterval diff;  // point = with - without
  bool significant = false;  // CI excludes 0
};

struct SegmentDelta {
  Segment segment = Segment::kSingleTurn;
  std::size_t n_turns = 0;
  MetricDelta pearson;
  MetricDelta f_dis;
};

struct AblationResult {
  FeatureSet tag = FeatureSet::kParaphrase;
  std::size_t columns_removed = 0;
  std::vector<SegmentDelta> segments;
  std::string error;  // non-empty when this run failed

  bool ok() const { return error.empty(); }
};

struct AblationInput {
  const std::vector<FeatureVector>* train = nullptr;
  // Evaluation vectors per segment, featurized with FeatureSchema::full().
  std::map<Segment, std::vector<FeatureVector>> eval;
};

// Throws ConfigError for a tag outside the five new sets.
void check_ablation_tags(std::span<const FeatureSet> tags);

// Trains the full-schema model once, then one model per removed set.
// A failing run is recorded in its result and the others still complete.
std::vector<AblationResult> ablate(const AblationInput& input, const ModelSpec& spec, std::span<const FeatureSet> tags,
                                   int n_boot, std::uint64_t seed, Execution exec = Execution::kParallel);

nlohmann::json ablation_to_json(const std::vector<AblationResult>& results, const ModelSpec& spec);
std::string render_ablation_markdown(const std::vector<AblationResult>& results);

}  // namespace usat
