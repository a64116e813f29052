#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "usat/common.hpp"
#include "usat/corpus.hpp"
#include "usat/features.hpp"

namespace usat {

struct TrainedModel;

// Product-moment correlation. A constant vector yields 0 with a warning.
double pearson_r(std::span<const double> pred, std::span<const double> gold);

// Mean ranks with ties averaged, 1-based.
std::vector<double> average_ranks(std::span<const double> values);

double spearman_rho(std::span<const double> a, std::span<const double> b);

struct DissatisfactionScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Positive class: rating < threshold, applied to both vectors.
DissatisfactionScore f_dissatisfaction(std::span<const double> pred, std::span<const double> gold,
                                       double threshold = kDissatisfactionThreshold);

using PairedMetric = std::function<double(std::span<const double>, std::span<const double>)>;

double f_dissatisfaction_f1(std::span<const double> pred, std::span<const double> gold);

struct ConfidenceInterval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline constexpr int kDefaultBootstrap = 1000;

// Percentile of sorted values with linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

// Resample indices i.i.d. with replacement; each resample has its own
// derived seed so parallel and serial runs agree bit for bit.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t resample);

// Percentile bootstrap over paired resamples; point = metric on all data.
ConfidenceInterval bootstrap_ci(const PairedMetric& metric, std::span<const double> pred,
                                std::span<const double> gold, int n_boot, std::uint64_t seed,
                                Execution exec = Execution::kParallel);

struct AnnotatorPair {
  std::string first;
  std::string second;
  double rho = 0.0;
};

struct IaaReport {
  double mean_rho = 0.0;
  std::vector<AnnotatorPair> pairs;
  std::size_t turns = 0;
};

IaaReport iaa(const Corpus& corpus);

struct UserRatingCorrelation {
  ConfidenceInterval r;
  std::size_t turns = 0;
};

UserRatingCorrelation user_rating_correlation(const Corpus& corpus, int n_boot = kDefaultBootstrap,
                                              std::uint64_t seed = 0);

struct SegmentMetrics {
  std::size_t n_turns = 0;
  ConfidenceInterval pearson;
  ConfidenceInterval f_dis;
  double spearman = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  std::string model;
  std::map<Segment, SegmentMetrics> segments;  // only segments with >= 2 turns
  std::vector<std::string> notes;
};

SegmentMetrics evaluate_predictions(std::span<const double> pred, std::span<const double> gold, int n_boot,
                                    std::uint64_t seed);

EvalReport segment_report(const TrainedModel& model, const std::map<Segment, std::vector<FeatureVector>>& by_segment,
                          const FeatureSchema& schema, int n_boot, std::uint64_t seed);

nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json iaa_to_json(const IaaReport& report, const std::optional<UserRatingCorrelation>& user);

// Rows = models; columns Cor_s, F-dis_s, Cor_m.t, F-dis_m.t, Cor_n.s, F-dis_n.s.
std::string render_report_table(const std::vector<EvalReport>& reports);

}  // namespace usat
