#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "usat/common.hpp"
#include "usat/corpus.hpp"

namespace usat {

struct DefectRates {
  double unactionable = 0.13;
  double misunderstanding = 0.15;
  double partial = 0.22;
};

// Noise of the simulated per-turn survey rating around the latent quality.
// Calibrated so corr(mean annotator label, user rating) lands in [0.7, 0.85].
inline constexpr double kUserRatingNoiseSd = 1.05;

struct GeneratorConfig {
  int n_dialogues = 1000;
  double single_turn_fraction = 0.9;
  double new_skill_fraction = 0.002;
  int n_domains = 26;
  int intents_per_domain = 4;
  int annotators = 3;
  double annotator_noise_sd = 0.35;
  DefectRates defect_rates;

  // Intents in each domain's tail are sampled rarely and fail more often,
  // which is what gives the popularity features their signal.
  double tail_fraction = 0.25;
  double tail_usage_weight = 0.08;
  double tail_defect_multiplier = 2.0;
  // Quality drop applied to tail-intent turns with no textual trace.
  double tail_penalty = 0.0;

  double multi_turn_defect_multiplier = 1.3;
  double paraphrase_probability = 0.7;
  double user_rating_fraction = 0.05;
  int min_multi_turns = 2;
  int max_multi_turns = 7;
  std::uint64_t seed = 0;

  void validate() const;

  // Variant whose dominant quality signal is only visible through the
  // popularity tables.
  static GeneratorConfig popularity_dominant(int n_dialogues, std::uint64_t seed);
};

struct LatentQuality {
  std::string dialogue_id;
  int index = 0;
  double q = 5.0;
  std::vector<std::string> defects;
};

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<LatentQuality> latent;  // aligned with corpus turns in order
};

// Penalty schedule bounds for each defect kind.
struct QualityRange {
  double lo;
  double hi;
};
inline constexpr QualityRange kUnactionableRange{1.0, 2.0};
inline constexpr QualityRange kMisunderstandingRange{1.0, 2.5};
inline constexpr QualityRange kPartialRange{2.5, 4.0};
inline constexpr QualityRange kCleanRange{4.85, 5.0};

GeneratedCorpus generate_corpus(const GeneratorConfig& config, Execution exec = Execution::kParallel);

std::vector<AnnotatorRating> simulate_annotations(double q, const GeneratorConfig& config, std::mt19937_64& rng);
int simulate_user_rating(double q, std::mt19937_64& rng, double noise_sd = kUserRatingNoiseSd);

// Round half up, then clamp to 1..5.
int clamp_rating(double value);

void write_latent(std::ostream& out, const std::vector<LatentQuality>& latent);

}  // namespace usat
