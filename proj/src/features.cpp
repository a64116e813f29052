#include "usat/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace usat {

std::string_view to_string(FeatureSet tag) {
  switch (tag) {
    case FeatureSet::kSluConfidence: return "slu_confidence";
    case FeatureSet::kLengths: return "lengths";
    case FeatureSet::kTiming: return "timing";
    case FeatureSet::kDialogueLength: return "dialogue_length";
    case FeatureSet::kParaphrase: return "paraphrase";
    case FeatureSet::kCohesion: return "cohesion";
    case FeatureSet::kPopularity: return "popularity";
    case FeatureSet::kUnactionable: return "unactionable";
    case FeatureSet::kDiversity: return "diversity";
  }
  return "unknown";
}

FeatureSet parse_feature_set(std::string_view text) {
  for (auto tag : {FeatureSet::kSluConfidence, FeatureSet::kLengths, FeatureSet::kTiming,
                   FeatureSet::kDialogueLength, FeatureSet::kParaphrase, FeatureSet::kCohesion,
                   FeatureSet::kPopularity, FeatureSet::kUnactionable, FeatureSet::kDiversity}) {
    if (to_string(tag) == text) return tag;
  }
  throw ConfigError("unknown feature set '" + std::string(text) + "'");
}

bool is_new_feature_set(FeatureSet tag) {
  return std::find(std::begin(kNewFeatureSets), std::end(kNewFeatureSets), tag) != std::end(kNewFeatureSets);
}

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : features_) {
    if (!seen.insert(f.name).second) throw ConfigError("duplicate feature name '" + f.name + "'");
  }
}

FeatureSchema FeatureSchema::full() {
  using FS = FeatureSet;
  return FeatureSchema({
      {"asr_confidence", FS::kSluConfidence},
      {"nlu_confidence", FS::kSluConfidence},
      {"user_len_tokens", FS::kLengths},
      {"system_len_tokens", FS::kLengths},
      {"inter_request_gap_s", FS::kTiming},
      {"gap_present", FS::kTiming, true},
      {"dialogue_len_so_far", FS::kDialogueLength},
      {"paraphrase_syntactic_sim", FS::kParaphrase},
      {"paraphrase_intent_repeat", FS::kParaphrase, true},
      {"paraphrase_present", FS::kParaphrase, true},
      {"cohesion_jaccard", FS::kCohesion},
      {"domain_count_log1p", FS::kPopularity},
      {"domain_ratio", FS::kPopularity},
      {"intent_count_log1p", FS::kPopularity},
      {"intent_ratio", FS::kPopularity},
      {"domain_count_raw", FS::kPopularity},
      {"intent_count_raw", FS::kPopularity},
      {"domain_missing", FS::kPopularity, true},
      {"intent_missing", FS::kPopularity, true},
      {"unactionable", FS::kUnactionable, true},
      {"topic_diversity", FS::kDiversity},
  });
}

FeatureSchema FeatureSchema::without(FeatureSet tag) const {
  if (!contains(tag)) throw ConfigError("feature set '" + std::string(to_string(tag)) + "' is not in the schema");
  std::vector<FeatureSpec> kept;
  for (const auto& f : features_) {
    if (f.set != tag) kept.push_back(f);
  }
  return FeatureSchema(std::move(kept));
}

bool FeatureSchema::contains(FeatureSet tag) const { return count(tag) > 0; }

std::size_t FeatureSchema::count(FeatureSet tag) const {
  return static_cast<std::size_t>(
      std::count_if(features_.begin(), features_.end(), [tag](const FeatureSpec& f) { return f.set == tag; }));
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  throw ConfigError("feature '" + std::string(name) + "' is not in the schema");
}

std::uint64_t FeatureSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& f : features_) {
    mix(f.name);
    mix(to_string(f.set));
  }
  return h;
}

// ---- text primitives ----

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string_view> sa(a.begin(), a.end());
  std::set<std::string_view> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double cohesion_feature(const Turn& turn) { return jaccard(tokenize(turn.user_text), tokenize(turn.system_text)); }

namespace {

void check_turn_index(const Dialogue& dialogue, int n) {
  if (n < 1 || n > static_cast<int>(dialogue.turns.size())) {
    throw DataError("dialogue '" + dialogue.dialogue_id + "': turn index " + std::to_string(n) + " out of range");
  }
}

}  // namespace

ParaphraseFeatures paraphrase_features(const Dialogue& dialogue, int n) {
  check_turn_index(dialogue, n);
  if (n == static_cast<int>(dialogue.turns.size())) return {};
  const Turn& cur = dialogue.turns[static_cast<std::size_t>(n - 1)];
  const Turn& next = dialogue.turns[static_cast<std::size_t>(n)];
  return {jaccard(tokenize(cur.user_text), tokenize(next.user_text)),
          cur.nlu_intent == next.nlu_intent ? 1.0 : 0.0, 1.0};
}

double topic_diversity(const Dialogue& dialogue, int n) {
  check_turn_index(dialogue, n);
  std::set<std::string_view> unique;
  for (int k = 0; k < n; ++k) unique.insert(dialogue.turns[static_cast<std::size_t>(k)].nlu_intent);
  return static_cast<double>(unique.size()) / n;
}

Lexicon Lexicon::defaults() {
  return {{"sorry", "apologies", "apologize"}, {"don't", "dont", "can't", "cant", "cannot", "unable", "not", "no"}};
}

void Lexicon::validate() const {
  if (apology.empty()) throw ConfigError("lexicon has no apology terms");
  if (negation.empty()) throw ConfigError("lexicon has no negation terms");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::set<std::string> parse_terms(std::string_view list) {
  std::set<std::string> out;
  std::string item;
  std::istringstream in{std::string(list)};
  while (std::getline(in, item, ',')) {
    for (auto& tok : tokenize(item)) out.insert(std::move(tok));
  }
  return out;
}

}  // namespace

Lexicon parse_lexicon(std::istream& in) {
  Lexicon lex = Lexicon::defaults();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("lexicon line " + std::to_string(line_no) + ": expected key = terms");
    std::string key = trim(std::string_view(t).substr(0, eq));
    auto terms = parse_terms(std::string_view(t).substr(eq + 1));
    if (key == "apology") {
      lex.apology = std::move(terms);
    } else if (key == "negation") {
      lex.negation = std::move(terms);
    } else {
      throw ConfigError("lexicon line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  lex.validate();
  return lex;
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon file '" + path + "'");
  return parse_lexicon(in);
}

int unactionable_feature(std::string_view system_text, const Lexicon& lexicon) {
  lexicon.validate();
  bool apology = false;
  bool negation = false;
  for (const auto& tok : tokenize(system_text)) {
    apology = apology || lexicon.apology.contains(tok);
    negation = negation || lexicon.negation.contains(tok);
  }
  return apology && negation ? 1 : 0;
}

BaseFeatures base_features(const Dialogue& dialogue, int n) {
  check_turn_index(dialogue, n);
  const Turn& t = dialogue.turns[static_cast<std::size_t>(n - 1)];
  BaseFeatures f;
  f.asr_confidence = t.asr_confidence;
  f.nlu_confidence = t.nlu_confidence;
  f.user_len_tokens = static_cast<double>(tokenize(t.user_text).size());
  f.system_len_tokens = static_cast<double>(tokenize(t.system_text).size());
  if (n < static_cast<int>(dialogue.turns.size())) {
    const double gap = dialogue.turns[static_cast<std::size_t>(n)].timestamp_s - t.timestamp_s;
    if (gap < 0.0) {
      throw DataError("dialogue '" + dialogue.dialogue_id + "' turn " + std::to_string(n) +
                      ": negative inter-request gap");
    }
    f.inter_request_gap_s = gap;
    f.gap_present = 1.0;
  }
  f.dialogue_len_so_far = n;
  return f;
}

// ---- popularity ----

PopularityTable PopularityTable::build(const Corpus& train) {
  std::map<std::string, std::set<std::string_view>, std::less<>> domain_users;
  std::map<std::string, std::set<std::string_view>, std::less<>> intent_users;
  PopularityTable table;
  for (const auto& d : train.dialogues) {
    for (const auto& t : d.turns) {
      ++table.domains_[t.nlu_domain].usage;
      ++table.intents_[t.nlu_intent].usage;
      domain_users[t.nlu_domain].insert(d.dialogue_id);
      intent_users[t.nlu_intent].insert(d.dialogue_id);
    }
  }
  for (auto& [k, v] : table.domains_) v.distinct_users = domain_users[k].size();
  for (auto& [k, v] : table.intents_) v.distinct_users = intent_users[k].size();
  return table;
}

namespace {

PopularityTable::Lookup lookup(const std::map<std::string, UsageCount, std::less<>>& m, std::string_view key) {
  auto it = m.find(key);
  if (it == m.end() || it->second.usage == 0) return {};
  return {static_cast<double>(it->second.usage), it->second.ratio(), false};
}

}  // namespace

PopularityTable::Lookup PopularityTable::domain(std::string_view name) const { return lookup(domains_, name); }
PopularityTable::Lookup PopularityTable::intent(std::string_view name) const { return lookup(intents_, name); }

void PopularityTable::set(std::map<std::string, UsageCount, std::less<>> domains,
                          std::map<std::string, UsageCount, std::less<>> intents) {
  domains_ = std::move(domains);
  intents_ = std::move(intents);
}

PopularityFeatures popularity_features(const Turn& turn, const PopularityTable& table) {
  const auto d = table.domain(turn.nlu_domain);
  const auto i = table.intent(turn.nlu_intent);
  PopularityFeatures f;
  f.domain_count_log1p = std::log1p(d.count);
  f.domain_ratio = d.ratio;
  f.intent_count_log1p = std::log1p(i.count);
  f.intent_ratio = i.ratio;
  f.domain_count_raw = d.count;
  f.intent_count_raw = i.count;
  f.domain_missing = d.missing ? 1.0 : 0.0;
  f.intent_missing = i.missing ? 1.0 : 0.0;
  return f;
}

// ---- assembly ----

std::vector<double> featurize_turn(const Dialogue& dialogue, int n, const PopularityTable& table,
                                   const Lexicon& lexicon) {
  const Turn& t = dialogue.turns.at(static_cast<std::size_t>(n - 1));
  const BaseFeatures b = base_features(dialogue, n);
  const ParaphraseFeatures p = paraphrase_features(dialogue, n);
  const PopularityFeatures pop = popularity_features(t, table);
  std::vector<double> v = {
      b.asr_confidence,       b.nlu_confidence,     b.user_len_tokens,        b.system_len_tokens,
      b.inter_request_gap_s,  b.gap_present,        b.dialogue_len_so_far,    p.syntactic_sim,
      p.intent_repeat,        p.present,            cohesion_feature(t),      pop.domain_count_log1p,
      pop.domain_ratio,       pop.intent_count_log1p, pop.intent_ratio,       pop.domain_count_raw,
      pop.intent_count_raw,   pop.domain_missing,   pop.intent_missing,
      static_cast<double>(unactionable_feature(t.system_text, lexicon)),
      topic_diversity(dialogue, n),
  };
  return v;
}

std::vector<FeatureVector> featurize_corpus(const Corpus& corpus, const PopularityTable& table,
                                            const FeatureSchema& schema, const Lexicon& lexicon, Execution exec) {
  lexicon.validate();
  const FeatureSchema full = FeatureSchema::full();
  std::vector<std::size_t> columns;
  for (const auto& f : schema.features()) columns.push_back(full.index_of(f.name));

  std::vector<std::size_t> offset(corpus.dialogues.size() + 1, 0);
  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) offset[i + 1] = offset[i] + corpus.dialogues[i].size();
  std::vector<FeatureVector> out(offset.back());

  auto one = [&](std::size_t di) {
    const Dialogue& d = corpus.dialogues[di];
    for (std::size_t k = 0; k < d.turns.size(); ++k) {
      const int n = static_cast<int>(k) + 1;
      std::vector<double> all = featurize_turn(d, n, table, lexicon);
      FeatureVector& fv = out[offset[di] + k];
      fv.values.resize(columns.size());
      for (std::size_t c = 0; c < columns.size(); ++c) fv.values[c] = all[columns[c]];
      fv.label = aggregate_label(d.turns[k].annotations);
      fv.segment = d.segment;
      fv.dialogue_id = d.dialogue_id;
      fv.turn_index = n;
    }
  };

  const auto count = static_cast<std::ptrdiff_t>(corpus.dialogues.size());
  if (exec == Execution::kParallel) {
    // Exceptions cannot leave an OpenMP region; capture the first one.
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        one(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(usat_featurize_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }
  return out;
}

Matrix to_matrix(const std::vector<FeatureVector>& vectors) {
  if (vectors.empty()) return {};
  Matrix m(vectors.size(), vectors.front().values.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != m.cols()) throw DataError("feature vectors have differing widths");
    std::copy(vectors[i].values.begin(), vectors[i].values.end(), m.row(i).begin());
  }
  return m;
}

std::vector<double> labels_of(const std::vector<FeatureVector>& vectors) {
  std::vector<double> y;
  y.reserve(vectors.size());
  for (const auto& v : vectors) y.push_back(v.label);
  return y;
}

void write_feature_csv(std::ostream& out, const FeatureSchema& schema, const std::vector<FeatureVector>& vectors) {
  for (const auto& f : schema.features()) out << f.name << ',';
  out << "label,segment,dialogue_id,turn_index\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& v : vectors) {
    for (double x : v.values) out << x << ',';
    out << v.label << ',' << to_string(v.segment) << ',' << v.dialogue_id << ',' << v.turn_index << '\n';
  }
}

Standardizer Standardizer::fit(const Matrix& train, const FeatureSchema& schema) {
  if (train.empty()) throw DataError("cannot standardize with an empty training set");
  if (train.cols() != schema.size()) throw DataError("training matrix width does not match the schema");
  const std::size_t p = train.cols();
  std::vector<double> mean(p, 0.0);
  std::vector<double> scale(p, 1.0);
  const double n = static_cast<double>(train.rows());
  for (std::size_t j = 0; j < p; ++j) {
    if (schema[j].indicator) continue;
    double m = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) m += train(i, j);
    m /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) ss += (train(i, j) - m) * (train(i, j) - m);
    const double sd = std::sqrt(ss / n);
    mean[j] = m;
    if (sd > 0.0) scale[j] = sd;
  }
  return {std::move(mean), std::move(scale)};
}

void Standardizer::apply_row(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean_[j]) / scale_[j];
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (!x.empty() && x.cols() != mean_.size()) throw DataError("matrix width does not match standardizer");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) apply_row(out.row(i));
  return out;
}

}  // namespace usat
