#include "usat/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string_view>

#include <json.hpp>

namespace usat {
namespace {

struct DomainVocab {
  std::string_view name;
  std::array<std::string_view, 4> nouns;
};

// Vocabulary of the regular domains. Noun sets are disjoint across domains.
constexpr std::array<DomainVocab, 26> kDomains = {{
    {"Music", {"song", "playlist", "album", "jazz"}},
    {"Calendar", {"appointment", "meeting", "schedule", "evening"}},
    {"Weather", {"forecast", "rain", "temperature", "umbrella"}},
    {"Movies", {"movie", "sci-fi", "showtime", "cinema"}},
    {"Shopping", {"order", "cart", "package", "delivery"}},
    {"Recipes", {"recipe", "pasta", "dinner", "ingredients"}},
    {"News", {"headlines", "briefing", "politics", "story"}},
    {"Sports", {"score", "match", "team", "league"}},
    {"Timers", {"timer", "countdown", "minutes", "kitchen"}},
    {"Alarms", {"alarm", "wakeup", "snooze", "morning"}},
    {"Lists", {"list", "groceries", "todo", "item"}},
    {"Books", {"audiobook", "chapter", "novel", "author"}},
    {"Podcasts", {"podcast", "episode", "host", "series"}},
    {"Radio", {"station", "fm", "broadcast", "channel"}},
    {"Traffic", {"commute", "route", "highway", "congestion"}},
    {"Restaurants", {"restaurant", "reservation", "table", "sushi"}},
    {"Travel", {"flight", "hotel", "trip", "airport"}},
    {"SmartHome", {"lights", "thermostat", "lamp", "bedroom"}},
    {"Messaging", {"message", "text", "inbox", "reply"}},
    {"Calling", {"call", "contact", "phone", "mom"}},
    {"Notes", {"note", "memo", "idea", "notebook"}},
    {"Fitness", {"workout", "steps", "run", "calories"}},
    {"Finance", {"balance", "account", "stocks", "budget"}},
    {"Games", {"game", "puzzle", "trivia", "level"}},
    {"Knowledge", {"fact", "question", "definition", "history"}},
    {"Local", {"pharmacy", "store", "hours", "nearby"}},
}};

constexpr std::array<std::string_view, 8> kVerbs = {"play", "find", "set", "check",
                                                    "add", "cancel", "show", "start"};

// The unseen-domain skill shares no words with the regular templates apart
// from the apology/negation lexicon.
constexpr DomainVocab kNewSkill = {"DragonQuest", {"dragon", "castle", "potion", "sword"}};
constexpr std::array<std::string_view, 4> kNewSkillVerbs = {"embark", "wield", "summon", "forge"};

struct Intent {
  std::string name;
  std::string domain;
  std::string_view verb;
  const DomainVocab* vocab = nullptr;
  bool tail = false;
  bool new_skill = false;
};

struct Catalog {
  std::vector<Intent> intents;                   // regular intents
  std::vector<std::vector<std::size_t>> by_domain;
  std::vector<double> domain_weights;            // Zipf-like usage
  std::vector<std::vector<double>> intent_weights;
  std::vector<Intent> new_skill_intents;
};

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

Catalog build_catalog(const GeneratorConfig& config) {
  Catalog cat;
  const int n_tail = std::clamp(static_cast<int>(std::ceil(config.tail_fraction * config.intents_per_domain)), 0,
                                config.intents_per_domain - 1 > 0 ? config.intents_per_domain - 1 : 0);
  for (int d = 0; d < config.n_domains; ++d) {
    const DomainVocab& vocab = kDomains[static_cast<std::size_t>(d)];
    cat.domain_weights.push_back(1.0 / std::pow(d + 1.0, 0.6));
    std::vector<std::size_t> members;
    std::vector<double> weights;
    for (int k = 0; k < config.intents_per_domain; ++k) {
      Intent intent;
      intent.verb = kVerbs[static_cast<std::size_t>(k)];
      intent.name = capitalize(intent.verb) + std::string(vocab.name);
      intent.domain = std::string(vocab.name);
      intent.vocab = &vocab;
      intent.tail = k >= config.intents_per_domain - n_tail;
      members.push_back(cat.intents.size());
      weights.push_back(intent.tail ? config.tail_usage_weight : 1.0);
      cat.intents.push_back(std::move(intent));
    }
    cat.by_domain.push_back(std::move(members));
    cat.intent_weights.push_back(std::move(weights));
  }
  for (std::string_view verb : kNewSkillVerbs) {
    Intent intent;
    intent.verb = verb;
    intent.name = capitalize(verb) + std::string(kNewSkill.name);
    intent.domain = std::string(kNewSkill.name);
    intent.vocab = &kNewSkill;
    intent.new_skill = true;
    cat.new_skill_intents.push_back(std::move(intent));
  }
  return cat;
}

enum class Defect { kNone, kUnactionable, kMisunderstanding, kPartial };

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

template <typename T, std::size_t N>
const T& pick(std::mt19937_64& rng, const std::array<T, N>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

std::string fill(std::string_view tmpl, const Intent& intent, std::string_view n1, std::string_view n2) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      switch (tmpl[i + 1]) {
        case 'v': out += intent.verb; break;
        case 'a': out += n1; break;
        case 'b': out += n2; break;
        default: out += tmpl.substr(i, 3);
      }
      i += 2;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

struct Nouns {
  std::string_view first;
  std::string_view second;
};

Nouns pick_nouns(std::mt19937_64& rng, const Intent& intent) {
  std::array<std::size_t, 4> idx = {0, 1, 2, 3};
  std::shuffle(idx.begin(), idx.end(), rng);
  return {intent.vocab->nouns[idx[0]], intent.vocab->nouns[idx[1]]};
}

constexpr std::array<std::string_view, 4> kUserTemplates = {"{v} {a} {b}", "please {v} my {a} {b}",
                                                            "can you {v} the {a} {b}", "{v} {a} {b} now"};
constexpr std::array<std::string_view, 3> kRephraseTemplates = {"i said {v} the {b} {a}", "i want you to {v} {a} {b}",
                                                                "{v} {b} {a} i said"};
constexpr std::array<std::string_view, 3> kCleanTemplates = {"okay going to {v} your {a} {b}",
                                                             "sure here is the {a} {b} you asked for",
                                                             "alright {v} {a} {b} done"};
constexpr std::array<std::string_view, 2> kPartialTemplates = {"i found a {a} but could not get the {b}",
                                                               "here is something close to your {a}"};
constexpr std::array<std::string_view, 4> kUnactionableTemplates = {
    "sorry i don't know how to do that", "sorry i can't help with {a} right now",
    "i apologize i am unable to {v} that", "apologies that is not something i can do"};

constexpr std::array<std::string_view, 3> kSkillUserTemplates = {"{v} {a} {b}", "thou shalt {v} {a} {b}",
                                                                 "hark {v} yon {a} {b}"};
constexpr std::array<std::string_view, 2> kSkillRephraseTemplates = {"verily {v} {b} {a}", "{v} {a} {b} forthwith"};
constexpr std::array<std::string_view, 2> kSkillCleanTemplates = {"behold thy {a} {b}", "thy quest {v} {a} {b} begins"};
constexpr std::array<std::string_view, 1> kSkillPartialTemplates = {"behold a {a} yet thy {b} eludes thee"};
constexpr std::array<std::string_view, 2> kSkillUnactionableTemplates = {"alas sorry thou cannot {v} yon thing",
                                                                         "sorry mortal unable to heed thee"};

struct TurnPlan {
  Turn turn;
  LatentQuality latent;
};

class DialogueGenerator {
 public:
  DialogueGenerator(const GeneratorConfig& config, const Catalog& catalog) : config_(config), catalog_(catalog) {}

  std::pair<Dialogue, std::vector<LatentQuality>> generate(const std::string& id, Segment segment,
                                                           std::mt19937_64& rng) const {
    Dialogue d;
    d.dialogue_id = id;
    d.segment = segment;
    const bool skill = segment == Segment::kNewSkill;
    int n_turns = 1;
    if (segment != Segment::kSingleTurn) {
      n_turns = std::uniform_int_distribution<int>(config_.min_multi_turns, config_.max_multi_turns)(rng);
    }

    std::size_t primary = 0;
    if (!skill) primary = sample_index(rng, catalog_.domain_weights);
    d.domain = skill ? std::string(kNewSkill.name) : std::string(kDomains[primary].name);

    std::vector<LatentQuality> latent;
    double clock = 0.0;
    const Intent* carry = nullptr;  // intent the user is re-asking for
    for (int n = 1; n <= n_turns; ++n) {
      const Intent& intent = carry ? *carry : choose_intent(rng, skill, primary, n == 1);
      const bool rephrase = carry != nullptr;
      carry = nullptr;

      TurnPlan plan = make_turn(rng, intent, segment, rephrase);
      plan.turn.index = n;
      plan.turn.timestamp_s = clock;
      plan.latent.dialogue_id = id;
      plan.latent.index = n;

      const bool dissatisfied = plan.latent.q < kDissatisfactionThreshold;
      if (n < n_turns) {
        if (dissatisfied && uniform(rng, 0.0, 1.0) < config_.paraphrase_probability) {
          carry = &intent;
          clock += uniform(rng, 1.0, 4.0);
        } else if (dissatisfied) {
          clock += uniform(rng, 2.0, 10.0);
        } else {
          clock += uniform(rng, 5.0, 25.0);
        }
      }
      d.turns.push_back(std::move(plan.turn));
      latent.push_back(std::move(plan.latent));
    }
    return {std::move(d), std::move(latent)};
  }

 private:
  static std::size_t sample_index(std::mt19937_64& rng, const std::vector<double>& weights) {
    return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
  }

  const Intent& choose_intent(std::mt19937_64& rng, bool skill, std::size_t primary, bool first) const {
    if (skill) return pick(rng, catalog_.new_skill_intents);
    std::size_t domain = primary;
    if (!first && uniform(rng, 0.0, 1.0) < 0.3) domain = sample_index(rng, catalog_.domain_weights);
    const auto& members = catalog_.by_domain[domain];
    return catalog_.intents[members[sample_index(rng, catalog_.intent_weights[domain])]];
  }

  Defect draw_defect(std::mt19937_64& rng, const Intent& intent, Segment segment) const {
    double scale = 1.0;
    if (intent.tail) scale *= config_.tail_defect_multiplier;
    if (segment != Segment::kSingleTurn) scale *= config_.multi_turn_defect_multiplier;
    double u = config_.defect_rates.unactionable * scale;
    double m = config_.defect_rates.misunderstanding * scale;
    double p = config_.defect_rates.partial * scale;
    const double total = u + m + p;
    if (total > 1.0) {
      u /= total;
      m /= total;
      p /= total;
    }
    const double r = uniform(rng, 0.0, 1.0);
    if (r < u) return Defect::kUnactionable;
    if (r < u + m) return Defect::kMisunderstanding;
    if (r < u + m + p) return Defect::kPartial;
    return Defect::kNone;
  }

  const Intent& wrong_intent(std::mt19937_64& rng, const Intent& intent) const {
    const auto& pool = intent.new_skill ? catalog_.new_skill_intents : catalog_.intents;
    if (pool.size() < 2) return intent;
    for (;;) {
      const Intent& other = pick(rng, pool);
      if (other.name != intent.name) return other;
    }
  }

  TurnPlan make_turn(std::mt19937_64& rng, const Intent& intent, Segment segment, bool rephrase) const {
    TurnPlan plan;
    Turn& t = plan.turn;
    const bool skill = intent.new_skill;
    const Nouns nouns = pick_nouns(rng, intent);

    std::string_view user_tmpl;
    if (skill) {
      user_tmpl = rephrase ? pick(rng, kSkillRephraseTemplates) : pick(rng, kSkillUserTemplates);
    } else {
      user_tmpl = rephrase ? pick(rng, kRephraseTemplates) : pick(rng, kUserTemplates);
    }
    t.user_text = fill(user_tmpl, intent, nouns.first, nouns.second);

    const Defect defect = draw_defect(rng, intent, segment);
    QualityRange range = kCleanRange;
    const Intent* served = &intent;
    switch (defect) {
      case Defect::kNone: {
        if (!skill && uniform(rng, 0.0, 1.0) < 0.1) {
          t.system_text = "okay.";
        } else {
          auto tmpl = skill ? pick(rng, kSkillCleanTemplates) : pick(rng, kCleanTemplates);
          t.system_text = fill(tmpl, intent, nouns.first, nouns.second);
        }
        t.asr_confidence = uniform(rng, 0.7, 1.0);
        t.nlu_confidence = uniform(rng, 0.65, 1.0);
        break;
      }
      case Defect::kUnactionable: {
        range = kUnactionableRange;
        plan.latent.defects.emplace_back("unactionable");
        auto tmpl = skill ? pick(rng, kSkillUnactionableTemplates) : pick(rng, kUnactionableTemplates);
        t.system_text = fill(tmpl, intent, nouns.first, nouns.second);
        t.asr_confidence = uniform(rng, 0.6, 1.0);
        t.nlu_confidence = uniform(rng, 0.4, 0.95);
        break;
      }
      case Defect::kMisunderstanding: {
        range = kMisunderstandingRange;
        plan.latent.defects.emplace_back("misunderstanding");
        served = &wrong_intent(rng, intent);
        const Nouns other = pick_nouns(rng, *served);
        auto tmpl = skill ? pick(rng, kSkillCleanTemplates) : pick(rng, kCleanTemplates);
        t.system_text = fill(tmpl, *served, other.first, other.second);
        t.asr_confidence = uniform(rng, 0.35, 0.85);
        t.nlu_confidence = uniform(rng, 0.25, 0.75);
        break;
      }
      case Defect::kPartial: {
        range = kPartialRange;
        plan.latent.defects.emplace_back("partial");
        auto tmpl = skill ? pick(rng, kSkillPartialTemplates) : pick(rng, kPartialTemplates);
        t.system_text = fill(tmpl, intent, nouns.first, nouns.second);
        t.asr_confidence = uniform(rng, 0.55, 1.0);
        t.nlu_confidence = uniform(rng, 0.5, 0.95);
        break;
      }
    }
    t.nlu_intent = served->name;
    t.nlu_domain = served->domain;

    double q = uniform(rng, range.lo, range.hi);
    if (intent.tail && config_.tail_penalty > 0.0) {
      q = std::max(1.0, q - config_.tail_penalty);
      plan.latent.defects.emplace_back("tail");
    }
    plan.latent.q = q;
    t.annotations = simulate_annotations(q, config_, rng);
    if (uniform(rng, 0.0, 1.0) < config_.user_rating_fraction) t.user_rating = simulate_user_rating(q, rng);
    return plan;
  }

  const GeneratorConfig& config_;
  const Catalog& catalog_;
};

}  // namespace

void GeneratorConfig::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
  };
  if (n_dialogues < 1) throw ConfigError("n_dialogues must be at least 1");
  prob(single_turn_fraction, "single_turn_fraction");
  prob(new_skill_fraction, "new_skill_fraction");
  if (single_turn_fraction + new_skill_fraction > 1.0 + 1e-12) {
    throw ConfigError("segment fractions sum to more than 1");
  }
  if (n_domains < 1 || n_domains > static_cast<int>(kDomains.size())) {
    throw ConfigError("n_domains must lie in [1," + std::to_string(kDomains.size()) + "]");
  }
  if (intents_per_domain < 1 || intents_per_domain > static_cast<int>(kVerbs.size())) {
    throw ConfigError("intents_per_domain must lie in [1," + std::to_string(kVerbs.size()) + "]");
  }
  if (annotators < 1) throw ConfigError("annotators must be at least 1");
  if (!(annotator_noise_sd >= 0.0)) throw ConfigError("annotator_noise_sd must be non-negative");
  prob(defect_rates.unactionable, "defect_rates.unactionable");
  prob(defect_rates.misunderstanding, "defect_rates.misunderstanding");
  prob(defect_rates.partial, "defect_rates.partial");
  if (defect_rates.unactionable + defect_rates.misunderstanding + defect_rates.partial > 1.0 + 1e-12) {
    throw ConfigError("defect rates sum to more than 1");
  }
  prob(tail_fraction, "tail_fraction");
  if (!(tail_usage_weight > 0.0)) throw ConfigError("tail_usage_weight must be positive");
  if (!(tail_defect_multiplier >= 0.0)) throw ConfigError("tail_defect_multiplier must be non-negative");
  if (!(tail_penalty >= 0.0 && tail_penalty <= 4.0)) throw ConfigError("tail_penalty must lie in [0,4]");
  if (!(multi_turn_defect_multiplier >= 0.0)) throw ConfigError("multi_turn_defect_multiplier must be non-negative");
  prob(paraphrase_probability, "paraphrase_probability");
  prob(user_rating_fraction, "user_rating_fraction");
  if (min_multi_turns < 2 || max_multi_turns < min_multi_turns) {
    throw ConfigError("multi-turn length range must satisfy 2 <= min <= max");
  }
}

GeneratorConfig GeneratorConfig::popularity_dominant(int n_dialogues, std::uint64_t seed) {
  GeneratorConfig c;
  c.n_dialogues = n_dialogues;
  c.seed = seed;
  c.defect_rates = {0.03, 0.03, 0.05};
  c.tail_fraction = 0.5;
  c.tail_usage_weight = 0.25;
  c.tail_defect_multiplier = 1.0;
  c.tail_penalty = 2.5;
  return c;
}

int clamp_rating(double value) { return std::clamp(static_cast<int>(std::floor(value + 0.5)), 1, 5); }

std::vector<AnnotatorRating> simulate_annotations(double q, const GeneratorConfig& config, std::mt19937_64& rng) {
  std::vector<AnnotatorRating> out;
  out.reserve(static_cast<std::size_t>(config.annotators));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int a = 1; a <= config.annotators; ++a) {
    const double e = config.annotator_noise_sd > 0.0 ? config.annotator_noise_sd * noise(rng) : 0.0;
    out.push_back({"ann" + std::to_string(a), clamp_rating(q + e)});
  }
  return out;
}

int simulate_user_rating(double q, std::mt19937_64& rng, double noise_sd) {
  const double e = noise_sd > 0.0 ? noise_sd * std::normal_distribution<double>(0.0, 1.0)(rng) : 0.0;
  return clamp_rating(q + e);
}

GeneratedCorpus generate_corpus(const GeneratorConfig& config, Execution exec) {
  config.validate();
  const Catalog catalog = build_catalog(config);

  const auto n = static_cast<std::size_t>(config.n_dialogues);
  auto n_new = static_cast<std::size_t>(std::llround(config.new_skill_fraction * static_cast<double>(n)));
  auto n_single = static_cast<std::size_t>(std::llround(config.single_turn_fraction * static_cast<double>(n)));
  n_new = std::min(n_new, n);
  n_single = std::min(n_single, n - n_new);
  std::vector<Segment> segments(n, Segment::kMultiTurn);
  std::fill_n(segments.begin(), n_single, Segment::kSingleTurn);
  std::fill_n(segments.begin() + static_cast<std::ptrdiff_t>(n_single), n_new, Segment::kNewSkill);
  std::mt19937_64 master(derive_seed(config.seed, 0xD1A1));
  std::shuffle(segments.begin(), segments.end(), master);

  std::vector<Dialogue> dialogues(n);
  std::vector<std::vector<LatentQuality>> latent(n);
  const DialogueGenerator gen(config, catalog);
  auto one = [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "d%06zu", i + 1);
    std::mt19937_64 rng(derive_seed(config.seed, i + 1));
    auto [d, lq] = gen.generate(id, segments[i], rng);
    dialogues[i] = std::move(d);
    latent[i] = std::move(lq);
  };
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }

  GeneratedCorpus out;
  out.corpus.dialogues = std::move(dialogues);
  out.corpus.metadata = {{"name", "synthetic"},
                         {"seed", std::to_string(config.seed)},
                         {"source", "usat synth"}};
  for (auto& lq : latent) {
    for (auto& q : lq) out.latent.push_back(std::move(q));
  }
  return out;
}

void write_latent(std::ostream& out, const std::vector<LatentQuality>& latent) {
  for (const auto& lq : latent) {
    nlohmann::json j = {{"dialogue_id", lq.dialogue_id}, {"index", lq.index}, {"q", lq.q}, {"defects", lq.defects}};
    out << j.dump() << '\n';
  }
}

}  // namespace usat
