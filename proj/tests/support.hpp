#pragma once

#include <random>
#include <string>
#include <vector>

#include "usat/common.hpp"
#include "usat/corpus.hpp"
#include "usat/matrix.hpp"

namespace usat::test {

// Collects warnings for the lifetime of the guard.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_sink(std::move(previous_)); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  bool contains(std::string_view needle) const {
    for (const auto& m : messages) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

  std::vector<std::string> messages;

 private:
  WarningSink previous_;
};

inline Turn make_turn(int index, std::string user, std::string system, double ts = 0.0, std::string intent = "PlayMusic",
                      std::string domain = "Music", std::vector<int> ratings = {4, 4, 4}) {
  Turn t;
  t.index = index;
  t.user_text = std::move(user);
  t.system_text = std::move(system);
  t.timestamp_s = ts;
  t.asr_confidence = 0.9;
  t.nlu_intent = std::move(intent);
  t.nlu_confidence = 0.8;
  t.nlu_domain = std::move(domain);
  for (std::size_t a = 0; a < ratings.size(); ++a) {
    t.annotations.push_back({"ann" + std::to_string(a + 1), ratings[a]});
  }
  return t;
}

inline Dialogue make_dialogue(std::string id, Segment segment, std::vector<Turn> turns, std::string domain = "Music") {
  Dialogue d;
  d.dialogue_id = std::move(id);
  d.segment = segment;
  d.domain = std::move(domain);
  d.turns = std::move(turns);
  return d;
}

// Corpus of `n` single-turn dialogues plus `m` multi-turn and `k` new-skill ones.
inline Corpus toy_corpus(int n, int m, int k) {
  Corpus c;
  int id = 0;
  auto next_id = [&] { return "t" + std::to_string(id++); };
  for (int i = 0; i < n; ++i) {
    c.dialogues.push_back(make_dialogue(next_id(), Segment::kSingleTurn,
                                        {make_turn(1, "play some jazz", "playing jazz", 0.0, "PlayMusic", "Music",
                                                   {1 + i % 5, 1 + i % 5, 1 + (i + 1) % 5})}));
  }
  for (int i = 0; i < m; ++i) {
    c.dialogues.push_back(make_dialogue(next_id(), Segment::kMultiTurn,
                                        {make_turn(1, "set a timer", "sorry I can't do that", 0.0, "SetTimer", "Timer",
                                                   {2, 2, 3}),
                                         make_turn(2, "set a timer for ten minutes", "timer set", 5.0, "SetTimer",
                                                   "Timer", {5, 4, 5})},
                                        "Timer"));
  }
  for (int i = 0; i < k; ++i) {
    c.dialogues.push_back(make_dialogue(next_id(), Segment::kNewSkill,
                                        {make_turn(1, "summon the dragon", "the dragon appears", 0.0, "SummonQuest",
                                                   "Quest", {4, 5, 4})},
                                        "Quest"));
  }
  return c;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) x(r, c) = u(rng);
  }
  return x;
}

inline std::string temp_path(const std::string& name) {
  return (std::string(USAT_TEST_TMPDIR) + "/" + name);
}

}  // namespace usat::test
