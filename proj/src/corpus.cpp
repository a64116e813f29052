#include "usat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "usat/common.hpp"

namespace usat {

using nlohmann::json;

std::string_view to_string(Segment segment) {
  switch (segment) {
    case Segment::kSingleTurn: return "single_turn";
    case Segment::kMultiTurn: return "multi_turn";
    case Segment::kNewSkill: return "new_skill";
  }
  return "unknown";
}

Segment parse_segment(std::string_view text) {
  if (text == "single_turn") return Segment::kSingleTurn;
  if (text == "multi_turn") return Segment::kMultiTurn;
  if (text == "new_skill") return Segment::kNewSkill;
  throw DataError("unknown segment '" + std::string(text) + "'");
}

std::size_t Corpus::turn_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.turns.size();
  return n;
}

namespace {

[[noreturn]] void fail(const Dialogue& d, const std::string& what) {
  throw DataError("dialogue '" + d.dialogue_id + "': " + what);
}

[[noreturn]] void fail_turn(const Dialogue& d, const Turn& t, const std::string& what) {
  throw DataError("dialogue '" + d.dialogue_id + "' turn " + std::to_string(t.index) + ": " + what);
}

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace

void validate_dialogue(const Dialogue& d) {
  if (d.dialogue_id.empty()) throw DataError("dialogue with empty dialogue_id");
  if (d.turns.empty()) fail(d, "turns: dialogue has no turns");
  if (d.segment == Segment::kSingleTurn && d.turns.size() != 1) {
    fail(d, "segment: single_turn dialogue has " + std::to_string(d.turns.size()) + " turns");
  }
  double last_ts = 0.0;
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const Turn& t = d.turns[i];
    if (t.index != static_cast<int>(i) + 1) {
      fail(d, "index: expected " + std::to_string(i + 1) + ", found " + std::to_string(t.index));
    }
    if (t.user_text.empty()) fail_turn(d, t, "user_text is empty");
    if (!in_unit(t.asr_confidence)) fail_turn(d, t, "asr_confidence outside [0,1]");
    if (!in_unit(t.nlu_confidence)) fail_turn(d, t, "nlu_confidence outside [0,1]");
    if (!std::isfinite(t.timestamp_s) || t.timestamp_s < 0.0) fail_turn(d, t, "timestamp_s negative");
    if (i > 0 && t.timestamp_s < last_ts) fail_turn(d, t, "timestamp_s decreases");
    last_ts = t.timestamp_s;
    if (t.annotations.empty()) fail_turn(d, t, "annotations: turn is unlabeled");
    for (const auto& a : t.annotations) {
      if (a.rating < 1 || a.rating > 5) {
        fail_turn(d, t, "annotations: rating " + std::to_string(a.rating) + " from '" + a.annotator_id +
                            "' outside 1..5");
      }
    }
    if (t.user_rating && (*t.user_rating < 1 || *t.user_rating > 5)) {
      fail_turn(d, t, "user_rating outside 1..5");
    }
  }
}

void validate_corpus(const Corpus& corpus) {
  std::set<std::string_view> ids;
  for (const auto& d : corpus.dialogues) {
    validate_dialogue(d);
    if (!ids.insert(d.dialogue_id).second) fail(d, "dialogue_id is not unique");
  }
}

namespace {

const std::set<std::string, std::less<>> kDialogueKeys = {"dialogue_id", "segment", "domain", "turns"};
const std::set<std::string, std::less<>> kTurnKeys = {
    "index",       "user_text",      "system_text", "timestamp_s", "asr_confidence",
    "nlu_intent",  "nlu_confidence", "nlu_domain",  "annotations", "user_rating"};
const std::set<std::string, std::less<>> kAnnotationKeys = {"annotator_id", "rating"};

void warn_unknown(const json& obj, const std::set<std::string, std::less<>>& known, std::string_view where,
                  std::set<std::string>& reported) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) {
      std::string tag = std::string(where) + "." + key;
      if (reported.insert(tag).second) warn("ignoring unknown field '" + tag + "'");
    }
  }
}

template <typename T>
T required(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + key + "' has the wrong type");
  }
}

Dialogue dialogue_from_json(const json& j, std::set<std::string>& reported) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  warn_unknown(j, kDialogueKeys, "dialogue", reported);
  Dialogue d;
  d.dialogue_id = required<std::string>(j, "dialogue_id");
  try {
    d.segment = parse_segment(required<std::string>(j, "segment"));
    d.domain = required<std::string>(j, "domain");
    const json& turns = j.at("turns");
    if (!turns.is_array()) throw DataError("field 'turns' is not an array");
    for (const json& tj : turns) {
      warn_unknown(tj, kTurnKeys, "turn", reported);
      Turn t;
      t.index = required<int>(tj, "index");
      t.user_text = required<std::string>(tj, "user_text");
      t.system_text = required<std::string>(tj, "system_text");
      t.timestamp_s = required<double>(tj, "timestamp_s");
      t.asr_confidence = required<double>(tj, "asr_confidence");
      t.nlu_intent = required<std::string>(tj, "nlu_intent");
      t.nlu_confidence = required<double>(tj, "nlu_confidence");
      t.nlu_domain = required<std::string>(tj, "nlu_domain");
      for (const json& aj : required<json>(tj, "annotations")) {
        warn_unknown(aj, kAnnotationKeys, "annotation", reported);
        t.annotations.push_back({required<std::string>(aj, "annotator_id"), required<int>(aj, "rating")});
      }
      if (auto it = tj.find("user_rating"); it != tj.end() && !it->is_null()) {
        t.user_rating = required<int>(tj, "user_rating");
      }
      d.turns.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError("dialogue '" + d.dialogue_id + "': " + e.what());
  } catch (const DataError& e) {
    throw DataError("dialogue '" + d.dialogue_id + "': " + e.what());
  }
  return d;
}

json dialogue_to_json(const Dialogue& d) {
  json turns = json::array();
  for (const Turn& t : d.turns) {
    json ann = json::array();
    for (const auto& a : t.annotations) ann.push_back({{"annotator_id", a.annotator_id}, {"rating", a.rating}});
    json tj = {{"index", t.index},
               {"user_text", t.user_text},
               {"system_text", t.system_text},
               {"timestamp_s", t.timestamp_s},
               {"asr_confidence", t.asr_confidence},
               {"nlu_intent", t.nlu_intent},
               {"nlu_confidence", t.nlu_confidence},
               {"nlu_domain", t.nlu_domain},
               {"annotations", std::move(ann)}};
    if (t.user_rating) tj["user_rating"] = *t.user_rating;
    turns.push_back(std::move(tj));
  }
  return {{"dialogue_id", d.dialogue_id},
          {"segment", std::string(to_string(d.segment))},
          {"domain", d.domain},
          {"turns", std::move(turns)}};
}

}  // namespace

std::string dialogue_to_json_line(const Dialogue& dialogue) { return dialogue_to_json(dialogue).dump(); }

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::set<std::string> reported;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Dialogue d = dialogue_from_json(j, reported);
      validate_dialogue(d);
      if (!ids.insert(d.dialogue_id).second) {
        throw DataError("dialogue '" + d.dialogue_id + "': dialogue_id is not unique");
      }
      corpus.dialogues.push_back(std::move(d));
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": parse error: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (corpus.dialogues.empty()) warn("corpus is empty");
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  Corpus corpus = read_corpus(in);
  corpus.metadata["source"] = path;
  return corpus;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.dialogues) out << dialogue_to_json(d).dump() << '\n';
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

double aggregate_label(std::span<const AnnotatorRating> annotations) {
  if (annotations.empty()) throw DataError("turn is unlabeled (no annotations)");
  double sum = 0.0;
  for (const auto& a : annotations) sum += a.rating;
  return sum / static_cast<double>(annotations.size());
}

Satisfaction binarize(double rating) {
  if (!(rating >= 1.0 && rating <= 5.0)) {
    throw DataError("rating " + std::to_string(rating) + " outside [1,5]");
  }
  return rating >= kDissatisfactionThreshold ? Satisfaction::kSatisfactory : Satisfaction::kDissatisfactory;
}

DataSplit split_corpus(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("cannot split an empty corpus");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0,1)");

  DataSplit split;
  split.train.metadata = split.test.metadata = split.holdout.metadata = corpus.metadata;

  std::map<Segment, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
    strata[corpus.dialogues[i].segment].push_back(i);
  }
  if (!strata.contains(Segment::kSingleTurn) && !strata.contains(Segment::kMultiTurn)) {
    throw DataError("corpus holds only new_skill dialogues; nothing to train on");
  }

  std::vector<char> in_test(corpus.dialogues.size(), 0);
  for (Segment seg : {Segment::kSingleTurn, Segment::kMultiTurn}) {
    auto it = strata.find(seg);
    if (it == strata.end()) continue;
    std::vector<std::size_t> order = it->second;
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(seg)));
    std::shuffle(order.begin(), order.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(order.size())));
    for (std::size_t k = 0; k < n_test; ++k) in_test[order[k]] = 1;
  }

  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
    const Dialogue& d = corpus.dialogues[i];
    if (d.segment == Segment::kNewSkill) {
      split.holdout.dialogues.push_back(d);
    } else if (in_test[i]) {
      split.test.dialogues.push_back(d);
    } else {
      split.train.dialogues.push_back(d);
    }
  }
  return split;
}

int rating_bin(double label) {
  int bin = static_cast<int>(std::floor(label + 0.5));
  return std::clamp(bin, 1, 5);
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (Segment s : kAllSegments) stats.segments[s] = {};
  for (const auto& d : corpus.dialogues) {
    SegmentHistogram& h = stats.segments[d.segment];
    ++h.dialogues;
    for (const auto& t : d.turns) {
      if (t.annotations.empty()) {
        throw DataError("dialogue '" + d.dialogue_id + "' turn " + std::to_string(t.index) + " is unlabeled");
      }
      ++h.turns;
      ++h.counts[rating_bin(aggregate_label(t.annotations)) - 1];
    }
  }
  for (auto& [_, h] : stats.segments) {
    if (h.turns == 0) continue;
    for (std::size_t b = 0; b < 5; ++b) {
      h.percent[b] = 100.0 * static_cast<double>(h.counts[b]) / static_cast<double>(h.turns);
    }
  }
  return stats;
}

void write_stats_csv(std::ostream& out, const CorpusStats& stats) {
  out << "segment,bin,count,percent\n";
  std::size_t total = 0;
  for (const auto& [_, h] : stats.segments) total += h.turns;
  if (total == 0) return;
  for (const auto& [seg, h] : stats.segments) {
    for (std::size_t b = 0; b < 5; ++b) {
      out << to_string(seg) << ',' << b + 1 << ',' << h.counts[b] << ',' << std::fixed << std::setprecision(4)
          << h.percent[b] << '\n';
    }
  }
}

std::string stats_summary(const CorpusStats& stats) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "segment" << std::right << std::setw(10) << "dialogues" << std::setw(8)
     << "turns";
  for (int b = 1; b <= 5; ++b) os << std::setw(9) << ("RQ=" + std::to_string(b));
  os << '\n';
  for (const auto& [seg, h] : stats.segments) {
    os << std::left << std::setw(12) << to_string(seg) << std::right << std::setw(10) << h.dialogues
       << std::setw(8) << h.turns;
    for (double p : h.percent) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(1) << p << '%';
      os << std::setw(9) << cell.str();
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace usat
