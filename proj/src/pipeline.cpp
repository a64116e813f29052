#include "usat/pipeline.hpp"

#include <fstream>

namespace usat {

PreparedData prepare_data(const Corpus& corpus, double test_fraction, std::uint64_t split_seed, const Lexicon& lexicon,
                          Execution exec) {
  PreparedData d;
  d.split = split_corpus(corpus, test_fraction, split_seed);
  d.table = PopularityTable::build(d.split.train);
  const FeatureSchema full = FeatureSchema::full();
  d.train = featurize_corpus(d.split.train, d.table, full, lexicon, exec);
  d.test = featurize_corpus(d.split.test, d.table, full, lexicon, exec);
  d.holdout = featurize_corpus(d.split.holdout, d.table, full, lexicon, exec);
  return d;
}

std::map<Segment, std::vector<FeatureVector>> vectors_by_segment(const std::vector<FeatureVector>& test,
                                                                 const std::vector<FeatureVector>& holdout) {
  std::map<Segment, std::vector<FeatureVector>> out;
  out[Segment::kSingleTurn];
  out[Segment::kMultiTurn];
  for (const auto& v : test) {
    if (v.segment != Segment::kNewSkill) out[v.segment].push_back(v);
  }
  out[Segment::kNewSkill] = holdout;
  return out;
}

nlohmann::json popularity_to_json(const PopularityTable& table) {
  auto dump = [](const auto& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, c] : m) j[name] = {c.usage, c.distinct_users};
    return j;
  };
  return {{"domains", dump(table.domains())}, {"intents", dump(table.intents())}};
}

PopularityTable popularity_from_json(const nlohmann::json& j) {
  auto read = [](const nlohmann::json& o) {
    std::map<std::string, UsageCount, std::less<>> m;
    for (auto it = o.begin(); it != o.end(); ++it) {
      m[it.key()] = {it.value().at(0).get<std::uint64_t>(), it.value().at(1).get<std::uint64_t>()};
    }
    return m;
  };
  PopularityTable t;
  t.set(read(j.at("domains")), read(j.at("intents")));
  return t;
}

nlohmann::json artifact_to_json(const ModelArtifact& a) {
  return {{"model", model_to_json(a.model)},
          {"popularity", popularity_to_json(a.table)},
          {"lexicon", {{"apology", a.lexicon.apology}, {"negation", a.lexicon.negation}}},
          {"split", {{"seed", a.split_seed}, {"test_fraction", a.test_fraction}}}};
}

ModelArtifact artifact_from_json(const nlohmann::json& j) {
  ModelArtifact a;
  a.model = model_from_json(j.at("model"));
  try {
    a.table = popularity_from_json(j.at("popularity"));
    a.lexicon.apology = j.at("lexicon").at("apology").get<std::set<std::string>>();
    a.lexicon.negation = j.at("lexicon").at("negation").get<std::set<std::string>>();
    a.split_seed = j.at("split").at("seed").get<std::uint64_t>();
    a.test_fraction = j.at("split").at("test_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  }
  return a;
}

void save_artifact(const std::string& path, const ModelArtifact& artifact) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << artifact_to_json(artifact).dump(1) << '\n';
}

ModelArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model artifact " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return artifact_from_json(j);
}

}  // namespace usat
