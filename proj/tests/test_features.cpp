#include <doctest.h>

#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "support.hpp"
#include "usat/features.hpp"
#include "usat/pipeline.hpp"
#include "usat/synth.hpp"

using namespace usat;
using usat::test::make_dialogue;
using usat::test::make_turn;

using Tokens = std::vector<std::string>;

TEST_CASE("tokenize lowercases, splits and strips punctuation") {
  CHECK(tokenize("Play latest hits.") == Tokens{"play", "latest", "hits"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("sci-fi movie") == Tokens{"sci-fi", "movie"});
  CHECK(tokenize("  ...  \"Hello,\"   world!  ") == Tokens{"hello", "world"});
  CHECK(tokenize("I don't know") == Tokens{"i", "don't", "know"});
}

TEST_CASE("jaccard worked examples") {
  const auto q = tokenize("recommend a sci-fi movie");
  CHECK(jaccard(q, q) == 1.0);
  CHECK(jaccard(q, tokenize("here is a sci-fi movie")) == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
  const double comedy = jaccard(q, tokenize("here is a comedy movie"));
  CHECK(comedy == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
  CHECK(comedy < jaccard(q, tokenize("here is a sci-fi movie")));
  CHECK(jaccard({}, {}) == 0.0);
  CHECK(jaccard({"a"}, {}) == 0.0);
}

TEST_CASE("cohesion is jaccard of request and response") {
  CHECK(cohesion_feature(make_turn(1, "play jazz", "")) == 0.0);
  CHECK(cohesion_feature(make_turn(1, "play jazz", "playing jazz for you")) ==
        doctest::Approx(1.0 / 5.0).epsilon(1e-15));
  CHECK(cohesion_feature(make_turn(1, "play jazz", "play jazz")) == 1.0);
}

TEST_CASE("paraphrase features compare with the next turn") {
  const Dialogue d = make_dialogue(
      "d", Segment::kMultiTurn,
      {make_turn(1, "cancel my evening appointment", "which one", 0.0, "CancelEvent", "Calendar"),
       make_turn(2, "cancel my 7pm event if it is raining today", "done", 4.0, "CancelEvent", "Calendar"),
       make_turn(3, "play jazz", "playing jazz", 9.0, "PlayMusic", "Music")});
  const auto p1 = paraphrase_features(d, 1);
  CHECK(p1.syntactic_sim == doctest::Approx(2.0 / 11.0).epsilon(1e-15));
  CHECK(p1.intent_repeat == 1.0);
  CHECK(p1.present == 1.0);
  const auto p2 = paraphrase_features(d, 2);
  CHECK(p2.intent_repeat == 0.0);
  const auto last = paraphrase_features(d, 3);
  CHECK(last.syntactic_sim == 0.0);
  CHECK(last.intent_repeat == 0.0);
  CHECK(last.present == 0.0);

  const Dialogue same = make_dialogue("s", Segment::kMultiTurn,
                                      {make_turn(1, "play jazz", "", 0.0), make_turn(2, "play jazz", "", 1.0)});
  const auto ps = paraphrase_features(same, 1);
  CHECK(ps.syntactic_sim == 1.0);
  CHECK(ps.intent_repeat == 1.0);
  CHECK(ps.present == 1.0);
}

TEST_CASE("topic diversity counts unique intents so far") {
  const Dialogue d = make_dialogue("d", Segment::kMultiTurn,
                                   {make_turn(1, "a", "", 0, "PlayMusic"), make_turn(2, "b", "", 1, "PlayMusic"),
                                    make_turn(3, "c", "", 2, "CancelEvent")});
  CHECK(topic_diversity(d, 1) == 1.0);
  CHECK(topic_diversity(d, 2) == 0.5);
  CHECK(topic_diversity(d, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const Dialogue distinct = make_dialogue(
      "e", Segment::kMultiTurn, {make_turn(1, "a", "", 0, "A"), make_turn(2, "b", "", 1, "B"), make_turn(3, "c", "", 2, "C")});
  CHECK(topic_diversity(distinct, 3) == 1.0);
}

TEST_CASE("unactionable detection needs apology and negation") {
  const Lexicon lex = Lexicon::defaults();
  CHECK(unactionable_feature("Sorry I don't know that one", lex) == 1);
  CHECK(unactionable_feature("sorry I don't know how to do that", lex) == 1);
  CHECK(unactionable_feature("Shuffling from your playlist.", lex) == 0);
  CHECK(unactionable_feature("Sorry about that.", lex) == 0);
  CHECK(unactionable_feature("I can't find it", lex) == 0);
  CHECK(unactionable_feature("SORRY, I CANNOT!", lex) == 1);
}

TEST_CASE("lexicon parsing and validation") {
  std::istringstream in("# custom\napology = oops, whoops\n");
  const Lexicon lex = parse_lexicon(in);
  CHECK(lex.apology == std::set<std::string>{"oops", "whoops"});
  CHECK(lex.negation == Lexicon::defaults().negation);
  CHECK(unactionable_feature("Oops, I can't", lex) == 1);
  CHECK(unactionable_feature("Sorry, I can't", lex) == 0);

  std::istringstream empty("negation = \n");
  CHECK_THROWS_AS(parse_lexicon(empty), ConfigError);
  std::istringstream unknown("apologies = a\n");
  CHECK_THROWS_AS(parse_lexicon(unknown), ConfigError);
  Lexicon blank;
  CHECK_THROWS_AS(blank.validate(), ConfigError);
  CHECK_THROWS_AS(load_lexicon("/nonexistent/lexicon.txt"), ConfigError);
}

TEST_CASE("base features") {
  const Dialogue single = make_dialogue("s", Segment::kSingleTurn, {make_turn(1, "play latest hits.", "okay", 0.0)});
  const auto b = base_features(single, 1);
  CHECK(b.gap_present == 0.0);
  CHECK(b.inter_request_gap_s == 0.0);
  CHECK(b.dialogue_len_so_far == 1.0);
  CHECK(b.user_len_tokens == 3.0);
  CHECK(b.system_len_tokens == 1.0);
  CHECK(b.asr_confidence == 0.9);
  CHECK(b.nlu_confidence == 0.8);

  const Dialogue two = make_dialogue("t", Segment::kMultiTurn,
                                     {make_turn(1, "a", "", 0.0), make_turn(2, "b", "", 12.5)});
  const auto g = base_features(two, 1);
  CHECK(g.inter_request_gap_s == 12.5);
  CHECK(g.gap_present == 1.0);
  CHECK(base_features(two, 2).dialogue_len_so_far == 2.0);

  Dialogue bad = two;
  bad.turns[1].timestamp_s = -1.0;
  CHECK_THROWS_AS(base_features(bad, 1), DataError);
}

TEST_CASE("popularity table counts usage and distinct dialogues") {
  Corpus train;
  train.dialogues.push_back(make_dialogue(
      "a", Segment::kMultiTurn,
      {make_turn(1, "x", "", 0, "PlayMusic", "Music"), make_turn(2, "y", "", 1, "PlayMusic", "Music")}));
  train.dialogues.push_back(
      make_dialogue("b", Segment::kSingleTurn, {make_turn(1, "z", "", 0, "PlayMusic", "Music")}));
  const auto table = PopularityTable::build(train);
  const auto intent = table.intent("PlayMusic");
  CHECK(intent.count == 3.0);
  CHECK(intent.ratio == 1.5);
  CHECK_FALSE(intent.missing);
  const auto unseen = table.intent("BookFlight");
  CHECK(unseen.count == 0.0);
  CHECK(unseen.ratio == 0.0);
  CHECK(unseen.missing);

  Corpus one;
  one.dialogues.push_back(train.dialogues[0]);
  const auto solo = PopularityTable::build(one);
  CHECK(solo.domain("Music").ratio == solo.domain("Music").count);

  const auto f = popularity_features(make_turn(1, "q", "", 0, "PlayMusic", "Music"), table);
  CHECK(f.intent_count_log1p == doctest::Approx(std::log1p(3.0)).epsilon(1e-15));
  CHECK(f.intent_count_log1p == doctest::Approx(1.3862943611198906).epsilon(1e-15));
  CHECK(f.intent_count_raw == 3.0);
  CHECK(f.intent_missing == 0.0);
  const auto g = popularity_features(make_turn(1, "q", "", 0, "Summon", "Quest"), table);
  CHECK(g.domain_count_log1p == 0.0);
  CHECK(g.domain_ratio == 0.0);
  CHECK(g.domain_missing == 1.0);
  CHECK(g.intent_missing == 1.0);
}

TEST_CASE("feature schema accounting") {
  const FeatureSchema full = FeatureSchema::full();
  std::set<std::string> names;
  for (const auto& f : full.features()) CHECK(names.insert(f.name).second);
  for (FeatureSet tag : kNewFeatureSets) {
    const FeatureSchema reduced = full.without(tag);
    CHECK(reduced.size() + full.count(tag) == full.size());
    CHECK_FALSE(reduced.contains(tag));
    CHECK(reduced.fingerprint() != full.fingerprint());
    CHECK_THROWS(reduced.without(tag));
  }
  CHECK(FeatureSchema::full().fingerprint() == full.fingerprint());
  CHECK_THROWS_AS(full.index_of("no_such_feature"), ConfigError);
  CHECK(parse_feature_set("popularity") == FeatureSet::kPopularity);
  CHECK_THROWS_AS(parse_feature_set("bogus"), ConfigError);
}

TEST_CASE("featurize_corpus shapes, purity and parallel equivalence") {
  GeneratorConfig c;
  c.n_dialogues = 300;
  c.seed = 17;
  c.new_skill_fraction = 0.05;
  const Corpus corpus = generate_corpus(c).corpus;
  const auto table = PopularityTable::build(corpus);
  const FeatureSchema schema = FeatureSchema::full();
  const auto a = featurize_corpus(corpus, table, schema, Lexicon::defaults(), Execution::kSerial);
  const auto b = featurize_corpus(corpus, table, schema, Lexicon::defaults(), Execution::kParallel);
  REQUIRE(a.size() == corpus.turn_count());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].values == b[i].values);
    CHECK(a[i].values.size() == schema.size());
    for (double v : a[i].values) CHECK(std::isfinite(v));
  }
  CHECK(to_matrix(a) == to_matrix(b));

  Corpus reversed = corpus;
  std::reverse(reversed.dialogues.begin(), reversed.dialogues.end());
  const auto r = featurize_corpus(reversed, table, schema);
  std::map<std::pair<std::string, int>, std::vector<double>> by_key;
  for (const auto& v : a) by_key[{v.dialogue_id, v.turn_index}] = v.values;
  for (const auto& v : r) CHECK(by_key.at({v.dialogue_id, v.turn_index}) == v.values);

  const FeatureSchema reduced = schema.without(FeatureSet::kCohesion);
  const auto p = featurize_corpus(corpus, table, reduced);
  for (std::size_t i = 0; i < p.size(); ++i) {
    REQUIRE(p[i].values.size() == reduced.size());
    for (std::size_t j = 0; j < reduced.size(); ++j) {
      CHECK(p[i].values[j] == a[i].values[schema.index_of(reduced[j].name)]);
    }
  }
}

TEST_CASE("feature CSV layout") {
  const Corpus corpus = usat::test::toy_corpus(2, 1, 0);
  const auto table = PopularityTable::build(corpus);
  const FeatureSchema schema = FeatureSchema::full();
  std::ostringstream os;
  write_feature_csv(os, schema, featurize_corpus(corpus, table, schema));
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("asr_confidence,", 0) == 0);
  CHECK(header.size() > 40);
  CHECK(header.substr(header.size() - 36) == "label,segment,dialogue_id,turn_index");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("standardizer uses training statistics") {
  const FeatureSchema schema(std::vector<FeatureSpec>{{"a", FeatureSet::kLengths, false},
                                                      {"b", FeatureSet::kLengths, false},
                                                      {"flag", FeatureSet::kTiming, true}});
  Matrix train(4, 3);
  const double a[] = {1, 2, 3, 2}, flag[] = {0, 1, 1, 0};
  for (int i = 0; i < 4; ++i) {
    train(i, 0) = a[i];
    train(i, 1) = 7.0;
    train(i, 2) = flag[i];
  }
  const Standardizer s = Standardizer::fit(train, schema);
  CHECK(s.mean()[0] == 2.0);
  CHECK(s.scale()[1] == 1.0);
  CHECK(s.mean()[1] == 7.0);
  CHECK(s.mean()[2] == 0.0);
  Matrix test(1, 3);
  test(0, 0) = 2.0 + s.scale()[0];
  test(0, 1) = 9.0;
  test(0, 2) = 1.0;
  const Matrix z = s.apply(test);
  CHECK(z(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z(0, 1) == 2.0);
  CHECK(z(0, 2) == 1.0);
}

// ---- property suites: 1000 generated cases each ----

namespace {

std::string random_text(std::mt19937_64& rng, int max_words = 8) {
  static const char* words[] = {"play", "jazz", "sorry", "don't", "Play", "JAZZ", "the", "a", "sci-fi", "movie",
                                "cannot", "timer", "set", "x", "!", "okay", "Sorry,", "no.", "it's", "music"};
  std::uniform_int_distribution<int> n(0, max_words), w(0, 19);
  std::string s;
  const int k = n(rng);
  for (int i = 0; i < k; ++i) {
    if (i) s += ' ';
    s += words[w(rng)];
  }
  return s;
}

std::string mangle_case_and_punctuation(std::string s, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  for (char& ch : s) {
    if (coin(rng)) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  std::string out;
  std::istringstream in(s);
  static const char* marks[] = {"", ",", ".", "!", "?", "\"", "(", ")"};
  std::uniform_int_distribution<int> m(0, 7);
  for (std::string tok; in >> tok;) {
    if (!out.empty()) out += ' ';
    out += marks[m(rng)] + tok + marks[m(rng)];
  }
  return out;
}

}  // namespace

TEST_CASE("property: jaccard is bounded, symmetric and 1 exactly on equal sets") {
  std::mt19937_64 rng(101);
  for (int i = 0; i < 1000; ++i) {
    const auto a = tokenize(random_text(rng));
    const auto b = tokenize(random_text(rng));
    const double j = jaccard(a, b);
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
    CHECK(j == jaccard(b, a));
    const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    CHECK((j == 1.0) == (sa == sb && !sa.empty()));
    if (!a.empty()) CHECK(jaccard(a, a) == 1.0);
  }
}

TEST_CASE("property: topic diversity lies in [1/n, 1] and drops on repeats") {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> len(1, 12), intent(0, 4);
  for (int i = 0; i < 1000; ++i) {
    const int n = len(rng);
    std::vector<Turn> turns;
    for (int k = 1; k <= n; ++k) turns.push_back(make_turn(k, "q", "", k, "I" + std::to_string(intent(rng))));
    Dialogue d = make_dialogue("d", n == 1 ? Segment::kSingleTurn : Segment::kMultiTurn, turns);
    for (int k = 1; k <= n; ++k) {
      const double v = topic_diversity(d, k);
      CHECK(v >= 1.0 / k - 1e-15);
      CHECK(v <= 1.0);
    }
    const double before = topic_diversity(d, n);
    d.turns.push_back(make_turn(n + 1, "q", "", n + 1, d.turns[intent(rng) % n].nlu_intent));
    d.segment = Segment::kMultiTurn;
    CHECK(topic_diversity(d, n + 1) <= before);
  }
}

TEST_CASE("property: unactionable detection ignores case and punctuation") {
  std::mt19937_64 rng(303);
  const Lexicon lex = Lexicon::defaults();
  int positives = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string text = random_text(rng, 10);
    const int base = unactionable_feature(text, lex);
    positives += base;
    CHECK(unactionable_feature(mangle_case_and_punctuation(text, rng), lex) == base);
  }
  CHECK(positives > 50);
}

TEST_CASE("property: popularity features depend only on the training split") {
  GeneratorConfig c;
  c.n_dialogues = 150;
  c.seed = 404;
  const Corpus corpus = generate_corpus(c).corpus;
  const PreparedData base = prepare_data(corpus, 0.3, 404, Lexicon::defaults(), Execution::kSerial);
  std::set<std::string> test_ids;
  for (const auto& d : base.split.test.dialogues) test_ids.insert(d.dialogue_id);
  const FeatureSchema schema = FeatureSchema::full();
  std::vector<std::size_t> pop_cols;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema[j].set == FeatureSet::kPopularity) pop_cols.push_back(j);
  }
  std::mt19937_64 rng(405);
  std::uniform_int_distribution<int> fake(0, 3);
  for (int i = 0; i < 1000; ++i) {
    Corpus mutated = corpus;
    std::string touched;
    for (auto& d : mutated.dialogues) {
      if (!test_ids.count(d.dialogue_id) || !touched.empty()) continue;
      if (fake(rng) != 0) continue;
      touched = d.dialogue_id;
      for (auto& t : d.turns) {
        t.nlu_intent = "Injected" + std::to_string(fake(rng));
        t.nlu_domain = t.nlu_intent;
      }
    }
    const PreparedData run = prepare_data(mutated, 0.3, 404, Lexicon::defaults(), Execution::kSerial);
    CHECK(run.table.intents().size() == base.table.intents().size());
    CHECK(run.table.domains().size() == base.table.domains().size());
    REQUIRE(run.train.size() == base.train.size());
    for (std::size_t k = 0; k < run.train.size(); ++k) CHECK(run.train[k].values == base.train[k].values);
    REQUIRE(run.test.size() == base.test.size());
    for (std::size_t k = 0; k < run.test.size(); ++k) {
      if (run.test[k].dialogue_id == touched) {
        for (std::size_t j : pop_cols) {
          if (schema[j].indicator) CHECK(run.test[k].values[j] == 1.0);
        }
        continue;
      }
      for (std::size_t j : pop_cols) CHECK(run.test[k].values[j] == base.test[k].values[j]);
    }
  }
}
