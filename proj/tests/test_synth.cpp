#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "support.hpp"
#include "usat/features.hpp"
#include "usat/synth.hpp"

using namespace usat;

namespace {

std::string serialize(const GeneratedCorpus& g) {
  std::ostringstream os;
  write_corpus(os, g.corpus);
  write_latent(os, g.latent);
  return os.str();
}

GeneratorConfig small(int n, std::uint64_t seed) {
  GeneratorConfig c;
  c.n_dialogues = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = serialize(generate_corpus(small(10, 7)));
  const auto b = serialize(generate_corpus(small(10, 7)));
  CHECK(a == b);
  CHECK(a != serialize(generate_corpus(small(10, 8))));
}

TEST_CASE("parallel generation matches the serial reference") {
  GeneratorConfig c = small(400, 21);
  c.new_skill_fraction = 0.05;
  CHECK(serialize(generate_corpus(c, Execution::kSerial)) == serialize(generate_corpus(c, Execution::kParallel)));
}

TEST_CASE("generated corpora pass validation and round-trip") {
  GeneratorConfig c = small(300, 5);
  c.new_skill_fraction = 0.05;
  c.user_rating_fraction = 0.3;
  const auto g = generate_corpus(c);
  CHECK_NOTHROW(validate_corpus(g.corpus));
  std::stringstream ss;
  write_corpus(ss, g.corpus);
  const Corpus back = read_corpus(ss);
  REQUIRE(back.dialogues.size() == g.corpus.dialogues.size());
  for (std::size_t i = 0; i < back.dialogues.size(); ++i) CHECK(back.dialogues[i] == g.corpus.dialogues[i]);
  CHECK(g.latent.size() == g.corpus.turn_count());
}

TEST_CASE("segments follow the configured fractions") {
  GeneratorConfig c = small(1000, 3);
  c.new_skill_fraction = 0.03;
  const auto g = generate_corpus(c);
  std::map<Segment, int> counts;
  for (const auto& d : g.corpus.dialogues) {
    ++counts[d.segment];
    if (d.segment == Segment::kSingleTurn) CHECK(d.size() == 1);
    if (d.segment == Segment::kMultiTurn) {
      CHECK(d.size() >= 2);
      CHECK(d.size() <= 7);
    }
  }
  CHECK(std::abs(counts[Segment::kSingleTurn] - 900) <= 1);
  CHECK(std::abs(counts[Segment::kNewSkill] - 30) <= 1);
  CHECK(std::abs(counts[Segment::kMultiTurn] - 70) <= 1);
}

TEST_CASE("new-skill dialogues use a domain and vocabulary absent elsewhere") {
  GeneratorConfig c = small(600, 9);
  c.new_skill_fraction = 0.05;
  const auto g = generate_corpus(c);
  std::set<std::string> skill_domains, other_domains, skill_tokens, other_tokens;
  for (const auto& d : g.corpus.dialogues) {
    const bool skill = d.segment == Segment::kNewSkill;
    (skill ? skill_domains : other_domains).insert(d.domain);
    for (const auto& t : d.turns) {
      (skill ? skill_domains : other_domains).insert(t.nlu_domain);
      for (const auto& tok : tokenize(t.user_text)) (skill ? skill_tokens : other_tokens).insert(tok);
    }
  }
  REQUIRE(!skill_domains.empty());
  for (const auto& s : skill_domains) CHECK(other_domains.count(s) == 0);
  for (const auto& s : skill_tokens) CHECK_MESSAGE(other_tokens.count(s) == 0, s);
}

TEST_CASE("no defects and no noise gives every label 5") {
  GeneratorConfig c = small(200, 4);
  c.defect_rates = {0.0, 0.0, 0.0};
  c.annotator_noise_sd = 0.0;
  const auto g = generate_corpus(c);
  for (const auto& d : g.corpus.dialogues) {
    for (const auto& t : d.turns) CHECK(aggregate_label(t.annotations) == 5.0);
  }
}

TEST_CASE("unactionable rate 1 makes every response unactionable") {
  GeneratorConfig c = small(200, 6);
  c.defect_rates = {1.0, 0.0, 0.0};
  c.new_skill_fraction = 0.05;
  const auto g = generate_corpus(c);
  const Lexicon lex = Lexicon::defaults();
  std::size_t i = 0;
  for (const auto& d : g.corpus.dialogues) {
    for (const auto& t : d.turns) {
      CHECK_MESSAGE(unactionable_feature(t.system_text, lex) == 1, t.system_text);
      CHECK(g.latent[i].q <= 2.0);
      ++i;
    }
  }
}

TEST_CASE("latent quality is consistent with defect tags") {
  GeneratorConfig c = small(800, 12);
  c.new_skill_fraction = 0.02;
  const auto g = generate_corpus(c);
  const Lexicon lex = Lexicon::defaults();
  std::size_t i = 0;
  double sum_u = 0.0, sum_rest = 0.0;
  int n_u = 0, n_rest = 0;
  for (const auto& d : g.corpus.dialogues) {
    for (const auto& t : d.turns) {
      const auto& lq = g.latent[i++];
      CHECK(lq.dialogue_id == d.dialogue_id);
      CHECK(lq.index == t.index);
      CHECK(lq.q >= 1.0);
      CHECK(lq.q <= 5.0);
      const bool unact = std::find(lq.defects.begin(), lq.defects.end(), "unactionable") != lq.defects.end();
      if (unact) {
        CHECK(unactionable_feature(t.system_text, lex) == 1);
        sum_u += lq.q;
        ++n_u;
      } else {
        CHECK(unactionable_feature(t.system_text, lex) == 0);
        sum_rest += lq.q;
        ++n_rest;
      }
      if (lq.defects.empty()) CHECK(lq.q >= kCleanRange.lo);
    }
  }
  REQUIRE(n_u > 0);
  REQUIRE(n_rest > 0);
  CHECK(sum_u / n_u < sum_rest / n_rest);
}

TEST_CASE("dissatisfied turns are often followed by a same-intent paraphrase") {
  GeneratorConfig c = small(2000, 13);
  c.single_turn_fraction = 0.0;
  const auto g = generate_corpus(c);
  std::size_t i = 0;
  int dissatisfied_with_next = 0, repeats = 0;
  for (const auto& d : g.corpus.dialogues) {
    for (std::size_t k = 0; k < d.turns.size(); ++k, ++i) {
      if (k + 1 == d.turns.size() || g.latent[i].q >= 3.0) continue;
      const bool misunderstood = std::find(g.latent[i].defects.begin(), g.latent[i].defects.end(),
                                           "misunderstanding") != g.latent[i].defects.end();
      if (misunderstood) continue;
      ++dissatisfied_with_next;
      repeats += d.turns[k].nlu_intent == d.turns[k + 1].nlu_intent;
    }
  }
  REQUIRE(dissatisfied_with_next > 100);
  CHECK(static_cast<double>(repeats) / dissatisfied_with_next > 0.6);
}

TEST_CASE("simulate_annotations follows the rounding and clamping rule") {
  std::mt19937_64 rng(1);
  GeneratorConfig c;
  c.annotator_noise_sd = 0.0;
  for (const auto& a : simulate_annotations(4.0, c, rng)) CHECK(a.rating == 4);
  CHECK(simulate_annotations(4.0, c, rng).size() == 3);
  c.annotator_noise_sd = 2.0;
  for (int i = 0; i < 500; ++i) {
    for (const auto& a : simulate_annotations(5.0, c, rng)) CHECK(a.rating <= 5);
    for (const auto& a : simulate_annotations(1.0, c, rng)) CHECK(a.rating >= 1);
  }
  CHECK(clamp_rating(2.5) == 3);
  CHECK(clamp_rating(2.49) == 2);
  CHECK(clamp_rating(7.0) == 5);
  CHECK(clamp_rating(-3.0) == 1);
}

TEST_CASE("simulate_user_rating rounds the latent quality when noiseless") {
  std::mt19937_64 rng(2);
  CHECK(simulate_user_rating(3.6, rng, 0.0) == 4);
  CHECK(simulate_user_rating(1.2, rng, 0.0) == 1);
  for (int i = 0; i < 500; ++i) {
    const int r = simulate_user_rating(1.0, rng);
    CHECK(r >= 1);
    CHECK(r <= 5);
  }
}

TEST_CASE("invalid generator configurations are rejected") {
  auto bad = [](auto mutate) {
    GeneratorConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](auto& c) { c.n_dialogues = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.single_turn_fraction = 1.2; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) {
                    c.single_turn_fraction = 0.8;
                    c.new_skill_fraction = 0.3;
                  }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.defect_rates.partial = -0.1; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.annotators = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.annotator_noise_sd = -1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(generate_corpus(bad([](auto& c) { c.n_dialogues = 0; })), ConfigError);
}
