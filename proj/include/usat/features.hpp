#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "usat/common.hpp"
#include "usat/corpus.hpp"
#include "usat/matrix.hpp"

namespace usat {

enum class FeatureSet {
  kSluConfidence,
  kLengths,
  kTiming,
  kDialogueLength,
  kParaphrase,
  kCohesion,
  kPopularity,
  kUnactionable,
  kDiversity,
};

std::string_view to_string(FeatureSet tag);
FeatureSet parse_feature_set(std::string_view text);

// The five ablatable contextual sets.
inline constexpr FeatureSet kNewFeatureSets[] = {FeatureSet::kParaphrase, FeatureSet::kCohesion,
                                                 FeatureSet::kPopularity, FeatureSet::kUnactionable,
                                                 FeatureSet::kDiversity};
bool is_new_feature_set(FeatureSet tag);

struct FeatureSpec {
  std::string name;
  FeatureSet set;
  bool indicator = false;  // 0/1 column, exempt from standardization
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureSpec> features);

  // Every feature this module can compute, in canonical order.
  static FeatureSchema full();

  FeatureSchema without(FeatureSet tag) const;
  bool contains(FeatureSet tag) const;
  std::size_t count(FeatureSet tag) const;

  std::size_t size() const { return features_.size(); }
  const FeatureSpec& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<FeatureSpec>& features() const { return features_; }
  std::vector<std::string> names() const;
  std::size_t index_of(std::string_view name) const;  // throws ConfigError if absent

  // FNV-1a over names and set tags; models refuse data from other schemas.
  std::uint64_t fingerprint() const;

 private:
  std::vector<FeatureSpec> features_;
};

struct FeatureVector {
  std::vector<double> values;
  double label = 0.0;
  Segment segment = Segment::kSingleTurn;
  std::string dialogue_id;
  int turn_index = 0;
};

// ---- text primitives ----

// Lowercase, split on whitespace, strip leading/trailing punctuation.
std::vector<std::string> tokenize(std::string_view text);

// |A ∩ B| / |A ∪ B| over token sets; 0 when both are empty.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

double cohesion_feature(const Turn& turn);

struct ParaphraseFeatures {
  double syntactic_sim = 0.0;
  double intent_repeat = 0.0;
  double present = 0.0;
};

// Compares turn n with turn n+1 (1-based n).
ParaphraseFeatures paraphrase_features(const Dialogue& dialogue, int n);

// Unique intents over turns 1..n divided by n.
double topic_diversity(const Dialogue& dialogue, int n);

struct Lexicon {
  std::set<std::string> apology;
  std::set<std::string> negation;

  static Lexicon defaults();
  void validate() const;
};

// `apology = a, b` / `negation = c, d` lines; unspecified keys keep defaults.
Lexicon load_lexicon(const std::string& path);
Lexicon parse_lexicon(std::istream& in);

int unactionable_feature(std::string_view system_text, const Lexicon& lexicon);

struct BaseFeatures {
  double asr_confidence = 0.0;
  double nlu_confidence = 0.0;
  double user_len_tokens = 0.0;
  double system_len_tokens = 0.0;
  double inter_request_gap_s = 0.0;
  double gap_present = 0.0;
  double dialogue_len_so_far = 0.0;
};

BaseFeatures base_features(const Dialogue& dialogue, int n);

// ---- popularity ----

struct UsageCount {
  std::uint64_t usage = 0;
  std::uint64_t distinct_users = 0;

  double ratio() const { return distinct_users == 0 ? 0.0 : static_cast<double>(usage) / distinct_users; }
};

class PopularityTable {
 public:
  struct Lookup {
    double count = 0.0;
    double ratio = 0.0;
    bool missing = true;
  };

  // Counts over every turn of `train`; users approximated by dialogue ids.
  static PopularityTable build(const Corpus& train);

  Lookup domain(std::string_view name) const;
  Lookup intent(std::string_view name) const;

  const std::map<std::string, UsageCount, std::less<>>& domains() const { return domains_; }
  const std::map<std::string, UsageCount, std::less<>>& intents() const { return intents_; }

  void set(std::map<std::string, UsageCount, std::less<>> domains,
           std::map<std::string, UsageCount, std::less<>> intents);

 private:
  std::map<std::string, UsageCount, std::less<>> domains_;
  std::map<std::string, UsageCount, std::less<>> intents_;
};

struct PopularityFeatures {
  double domain_count_log1p = 0.0;
  double domain_ratio = 0.0;
  double intent_count_log1p = 0.0;
  double intent_ratio = 0.0;
  double domain_count_raw = 0.0;
  double intent_count_raw = 0.0;
  double domain_missing = 0.0;
  double intent_missing = 0.0;
};

PopularityFeatures popularity_features(const Turn& turn, const PopularityTable& table);

// ---- assembly ----

// All features of FeatureSchema::full() for turn n, in canonical order.
std::vector<double> featurize_turn(const Dialogue& dialogue, int n, const PopularityTable& table,
                                   const Lexicon& lexicon);

std::vector<FeatureVector> featurize_corpus(const Corpus& corpus, const PopularityTable& table,
                                            const FeatureSchema& schema, const Lexicon& lexicon = Lexicon::defaults(),
                                            Execution exec = Execution::kParallel);

Matrix to_matrix(const std::vector<FeatureVector>& vectors);
std::vector<double> labels_of(const std::vector<FeatureVector>& vectors);

void write_feature_csv(std::ostream& out, const FeatureSchema& schema, const std::vector<FeatureVector>& vectors);

// z-scores from training statistics. Indicator columns pass through
// unchanged; zero-variance columns are only centered.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> scale) : mean_(std::move(mean)), scale_(std::move(scale)) {}

  static Standardizer fit(const Matrix& train, const FeatureSchema& schema);

  Matrix apply(const Matrix& x) const;
  void apply_row(std::span<double> row) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }
  bool empty() const { return mean_.empty(); }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace usat
