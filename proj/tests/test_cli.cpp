#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "usat/cli.hpp"
#include "usat/pipeline.hpp"

using namespace usat;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = usat::test::temp_path("cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

// Small corpus shared by the slower subcommand tests.
std::string shared_corpus() {
  static const std::string path = [] {
    const std::string dir = fresh_dir("shared");
    const Run r = run({"synth", "--dialogues", "300", "--new-skill-fraction", "0.05", "--seed", "21", "--out-dir", dir});
    REQUIRE(r.code == 0);
    return dir + "/corpus.jsonl";
  }();
  return path;
}

}  // namespace

TEST_CASE("synth writes the requested dialogues and is reproducible") {
  const std::string dir = fresh_dir("synth");
  const Run a = run({"synth", "--dialogues", "500", "--seed", "7", "-o", "corpus.jsonl", "--out-dir", dir});
  REQUIRE(a.code == 0);
  const std::string first = slurp(dir + "/corpus.jsonl");
  CHECK(line_count(first) == 500);
  CHECK(fs::exists(dir + "/corpus.latent.jsonl"));
  const Run b = run({"--seed", "7", "synth", "--dialogues", "500", "-o", "corpus.jsonl", "--out-dir", dir});
  REQUIRE(b.code == 0);
  CHECK(slurp(dir + "/corpus.jsonl") == first);
}

TEST_CASE("subcommands with randomness require a seed") {
  const std::string dir = fresh_dir("noseed");
  const Run synth = run({"synth", "--dialogues", "5", "--out-dir", dir});
  CHECK(synth.code == kExitUsage);
  CHECK(synth.err.find("--seed") != std::string::npos);
  CHECK(synth.err.find("usage") != std::string::npos);
  CHECK(run({"train", shared_corpus(), "--out-dir", dir}).code == kExitUsage);
  CHECK(run({"ablate", shared_corpus(), "--out-dir", dir}).code == kExitUsage);
  CHECK(run({"featurize", shared_corpus(), "--out-dir", dir}).code == kExitUsage);
}

TEST_CASE("usage errors exit with code two") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"synth", "--dialogues", "many", "--seed", "1"}).code == kExitUsage);
  CHECK(run({"--seed", "1", "synth", "--preset", "unknown", "--out-dir", fresh_dir("preset")}).code == kExitUsage);
  CHECK(run({"--seed", "1", "train", shared_corpus(), "--model", "xgboost", "--out-dir", fresh_dir("kind")}).code ==
        kExitUsage);
  CHECK(run({"--seed", "1", "train", shared_corpus(), "--param", "bogus=3", "--out-dir", fresh_dir("param")}).code ==
        kExitUsage);
  CHECK(run({"--seed", "1", "ablate", shared_corpus(), "--sets", "lengths", "--out-dir", fresh_dir("sets")}).code ==
        kExitUsage);
  const Run help = run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("ablate") != std::string::npos);
}

TEST_CASE("stats reports histograms and data errors") {
  const std::string dir = fresh_dir("stats");
  const Run r = run({"stats", shared_corpus(), "--out-dir", dir});
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir + "/stats.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "segment,bin,count,percent");
  std::map<std::string, double> totals;
  while (std::getline(csv, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    totals[line.substr(0, a)] += std::stod(line.substr(b + 1));
  }
  CHECK(totals.size() == 3);
  for (const auto& [seg, total] : totals) CHECK(total == doctest::Approx(100.0).epsilon(1e-4));

  const std::string empty = dir + "/empty.jsonl";
  std::ofstream(empty).close();
  REQUIRE(run({"stats", empty, "-o", "empty.csv", "--out-dir", dir}).code == 0);
  CHECK(slurp(dir + "/empty.csv") == "segment,bin,count,percent\n");

  const std::string bad = dir + "/bad.jsonl";
  std::ofstream(bad) << slurp(shared_corpus()).substr(0, 10) << "\n";
  const Run broken = run({"stats", bad, "--out-dir", dir});
  CHECK(broken.code == kExitDataError);
  CHECK(broken.err.find("line 1") != std::string::npos);
  CHECK(run({"stats", dir + "/missing.jsonl", "--out-dir", dir}).code == kExitDataError);
}

TEST_CASE("train echoes the hyperparameters it used and saves a loadable artifact") {
  const std::string dir = fresh_dir("train");
  const Run r = run({"--seed", "5", "train", shared_corpus(), "--model", "gbrt", "--param", "n_stages=20", "--out-dir", dir});
  REQUIRE(r.code == 0);
  const std::string log = slurp(dir + "/train_gbrt.log");
  CHECK(log.find("max_depth=23") != std::string::npos);
  CHECK(log.find("min_samples_leaf=17") != std::string::npos);
  CHECK(log.find("min_samples_split=59") != std::string::npos);
  CHECK(log.find("n_stages=20") != std::string::npos);
  CHECK(log.find("test pearson_r=") != std::string::npos);
  CHECK(fs::exists(dir + "/importance_gbrt.json"));

  const ModelArtifact artifact = load_artifact(dir + "/model_gbrt.json");
  const PreparedData data = prepare_data(load_corpus(shared_corpus()), artifact.test_fraction, 5, Lexicon::defaults());
  ModelSpec spec = ModelSpec::defaults(ModelKind::kGbrt, 5);
  spec.set("n_stages", 20);
  const TrainedModel direct = train_model(spec, FeatureSchema::full(), to_matrix(data.train), labels_of(data.train));
  const Matrix xt = to_matrix(data.test);
  CHECK(predict(artifact.model, FeatureSchema::full().fingerprint(), xt) ==
        predict(direct, FeatureSchema::full().fingerprint(), xt));

  const Run again = run({"--seed", "5", "train", shared_corpus(), "--model", "gbrt", "--param", "n_stages=20", "-o",
                         "again.json", "--out-dir", dir});
  REQUIRE(again.code == 0);
  CHECK(slurp(dir + "/again.json") == slurp(dir + "/model_gbrt.json"));
}

TEST_CASE("train all, eval and reruns are byte-identical") {
  const std::string dir = fresh_dir("eval");
  const std::vector<std::string> train_args = {"--seed", "8", "train", shared_corpus(), "--model", "all", "--out-dir", dir};
  REQUIRE(run(train_args).code == 0);
  // A name every kind does not define is rejected under --model all.
  CHECK(run({"--seed", "8", "train", shared_corpus(), "--model", "all", "--param", "epochs=5", "--out-dir", dir}).code ==
        kExitUsage);
  for (const char* kind : {"lasso", "tree", "forest", "gbrt", "svr", "mlp"}) {
    CHECK(fs::exists(dir + "/model_" + std::string(kind) + ".json"));
  }
  const std::string forest = slurp(dir + "/model_forest.json");
  const std::string mlp = slurp(dir + "/model_mlp.json");
  REQUIRE(run(train_args).code == 0);
  CHECK(slurp(dir + "/model_forest.json") == forest);
  CHECK(slurp(dir + "/model_mlp.json") == mlp);

  const std::vector<std::string> eval_args = {"eval", shared_corpus(), "--model", dir + "/model_gbrt.json", "--model",
                                              dir + "/model_lasso.json", "--bootstrap", "200", "--seed", "3",
                                              "--out-dir", dir};
  REQUIRE(run(eval_args).code == 0);
  const std::string json = slurp(dir + "/eval_report.json");
  const std::string table = slurp(dir + "/eval_report.txt");
  REQUIRE(run(eval_args).code == 0);
  CHECK(slurp(dir + "/eval_report.json") == json);
  CHECK(slurp(dir + "/eval_report.txt") == table);
  for (const char* col : {"Cor_s", "F-dis_s", "Cor_m.t", "F-dis_m.t", "Cor_n.s", "F-dis_n.s"}) {
    CHECK(table.find(col) != std::string::npos);
  }
  const auto j = nlohmann::json::parse(json);
  CHECK(j.dump().find("new_skill") != std::string::npos);
}

TEST_CASE("a corpus without new-skill dialogues marks those columns n/a") {
  const std::string dir = fresh_dir("nonewskill");
  REQUIRE(run({"synth", "--dialogues", "150", "--new-skill-fraction", "0", "--seed", "2", "--out-dir", dir}).code == 0);
  const std::string corpus = dir + "/corpus.jsonl";
  REQUIRE(run({"--seed", "2", "train", corpus, "--model", "tree", "--out-dir", dir}).code == 0);
  const Run r = run({"eval", corpus, "--model", dir + "/model_tree.json", "--bootstrap", "50", "--out-dir", dir});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir + "/eval_report.txt").find("n/a") != std::string::npos);
  CHECK(r.out.find("new_skill: omitted") != std::string::npos);
}

TEST_CASE("ablate runs the requested sets") {
  const std::string dir = fresh_dir("ablate");
  const std::vector<std::string> args = {"--seed", "4", "ablate", shared_corpus(), "--sets", "popularity,cohesion",
                                         "--param", "n_stages=15", "--bootstrap", "100", "--out-dir", dir};
  REQUIRE(run(args).code == 0);
  const std::string json = slurp(dir + "/ablation.json");
  const auto j = nlohmann::json::parse(json);
  CHECK(j["model"] == "gbrt");
  REQUIRE(j["runs"].size() == 2);
  CHECK(j["runs"][0]["feature_set"] == "popularity");
  CHECK(slurp(dir + "/ablation.md").find("| cohesion |") != std::string::npos);
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir + "/ablation.json") == json);

  const Run all = run({"--seed", "4", "ablate", shared_corpus(), "--param", "n_stages=5", "--bootstrap", "20",
                       "--out-dir", dir});
  REQUIRE(all.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir + "/ablation.json"))["runs"].size() == 5);
}

TEST_CASE("iaa on a noiseless corpus") {
  const std::string dir = fresh_dir("iaa");
  REQUIRE(run({"synth", "--dialogues", "200", "--noise-sd", "0", "--user-rating-fraction", "0.5", "--seed", "6",
               "--out-dir", dir})
              .code == 0);
  const Run r = run({"iaa", dir + "/corpus.jsonl", "--bootstrap", "100", "--out-dir", dir});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir + "/iaa.json"));
  CHECK(j["mean_rho"] == 1.0);
  CHECK(j["pairs"].size() == 3);
  CHECK(j.contains("user_rating_correlation"));
}

TEST_CASE("options can come from a config file") {
  const std::string dir = fresh_dir("config");
  const std::string cfg = dir + "/run.ini";
  std::ofstream(cfg) << "seed=12\n";
  REQUIRE(run({"--config", cfg, "synth", "--dialogues", "20", "--out-dir", dir}).code == 0);
  const std::string from_config = slurp(dir + "/corpus.jsonl");
  REQUIRE(run({"--seed", "12", "synth", "--dialogues", "20", "--out-dir", dir}).code == 0);
  CHECK(slurp(dir + "/corpus.jsonl") == from_config);
}
