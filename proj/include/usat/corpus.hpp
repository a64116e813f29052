#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace usat {

enum class Segment { kSingleTurn, kMultiTurn, kNewSkill };

inline constexpr std::array<Segment, 3> kAllSegments = {Segment::kSingleTurn, Segment::kMultiTurn,
                                                        Segment::kNewSkill};

std::string_view to_string(Segment segment);
Segment parse_segment(std::string_view text);

struct AnnotatorRating {
  std::string annotator_id;
  int rating = 0;  // 1..5

  bool operator==(const AnnotatorRating&) const = default;
};

// One user request / system response exchange.
struct Turn {
  int index = 0;  // 1-based position in the dialogue
  std::string user_text;
  std::string system_text;
  double timestamp_s = 0.0;
  double asr_confidence = 0.0;
  std::string nlu_intent;
  double nlu_confidence = 0.0;
  std::string nlu_domain;
  std::vector<AnnotatorRating> annotations;
  std::optional<int> user_rating;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string dialogue_id;
  Segment segment = Segment::kSingleTurn;
  std::string domain;
  std::vector<Turn> turns;

  std::size_t size() const { return turns.size(); }
  bool operator==(const Dialogue&) const = default;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  std::map<std::string, std::string> metadata;

  std::size_t turn_count() const;
  bool empty() const { return dialogues.empty(); }
};

struct DataSplit {
  Corpus train;
  Corpus test;
  Corpus holdout;  // new_skill dialogues only
};

// Throws DataError naming the dialogue and field on the first violation.
void validate_dialogue(const Dialogue& dialogue);
void validate_corpus(const Corpus& corpus);

// JSONL: one dialogue per line. Errors carry the 1-based line number.
Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);

std::string dialogue_to_json_line(const Dialogue& dialogue);

// Arithmetic mean of the annotators' ratings. Throws DataError when empty.
double aggregate_label(std::span<const AnnotatorRating> annotations);

enum class Satisfaction { kSatisfactory, kDissatisfactory };

inline constexpr double kDissatisfactionThreshold = 3.0;

// satisfactory iff rating >= 3. Throws DataError outside [1,5].
Satisfaction binarize(double rating);

// new_skill dialogues go to holdout; the rest are split per dialogue,
// stratified by segment, deterministically for a given seed.
DataSplit split_corpus(const Corpus& corpus, double test_fraction, std::uint64_t seed);

struct SegmentHistogram {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  std::array<std::size_t, 5> counts{};  // bins 1..5
  std::array<double, 5> percent{};
};

struct CorpusStats {
  std::map<Segment, SegmentHistogram> segments;  // always holds all three segments
};

// Round-half-up bin of an aggregated label, in 1..5.
int rating_bin(double label);

CorpusStats corpus_stats(const Corpus& corpus);
void write_stats_csv(std::ostream& out, const CorpusStats& stats);
std::string stats_summary(const CorpusStats& stats);

}  // namespace usat
