#include "usat/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "usat/ablation.hpp"
#include "usat/eval.hpp"
#include "usat/pipeline.hpp"
#include "usat/synth.hpp"

namespace usat {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string lexicon;
  int bootstrap = kDefaultBootstrap;
};

std::uint64_t require_seed(const GlobalOptions& g, const char* command) {
  if (!g.seed) throw ConfigError(std::string("--seed is required for ") + command);
  return *g.seed;
}

fs::path output_path(const GlobalOptions& g, const std::string& name) {
  fs::path dir(g.out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

Lexicon lexicon_of(const GlobalOptions& g) { return g.lexicon.empty() ? Lexicon::defaults() : load_lexicon(g.lexicon); }

ModelSpec build_spec(ModelKind kind, std::uint64_t seed, const std::vector<std::string>& params,
                     std::optional<int> hidden_layers) {
  ModelSpec spec = ModelSpec::defaults(kind, seed);
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + p + "'");
    const std::string name = p.substr(0, eq);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(p.substr(eq + 1), &used);
      if (used != p.size() - eq - 1) throw std::invalid_argument(p);
    } catch (const std::logic_error&) {
      throw ConfigError("--param " + name + ": not a number");
    }
    spec.set(name, value);
  }
  if (hidden_layers) {
    if (kind != ModelKind::kMlp) throw ConfigError("--hidden-layers applies to the mlp model only");
    spec.set("hidden_layers", *hidden_layers);
  }
  return spec;
}

std::string describe_spec(const ModelSpec& spec) {
  std::ostringstream os;
  os << "model=" << to_string(spec.kind) << " seed=" << spec.seed;
  for (const auto& [name, value] : spec.hyperparameters) os << ' ' << name << '=' << value;
  return os.str();
}

struct SynthOptions {
  int dialogues = 1000;
  std::string preset = "default";
  double single_turn_fraction = 0.9;
  double new_skill_fraction = 0.002;
  int annotators = 3;
  double noise_sd = 0.35;
  double user_rating_fraction = 0.05;
  std::string output = "corpus.jsonl";
  std::string latent;
};

int cmd_synth(const GlobalOptions& g, const SynthOptions& o, const CLI::App& app, std::ostream& out) {
  const std::uint64_t seed = require_seed(g, "synth");
  GeneratorConfig config;
  if (o.preset == "popularity") {
    config = GeneratorConfig::popularity_dominant(o.dialogues, seed);
  } else if (o.preset != "default") {
    throw ConfigError("unknown preset '" + o.preset + "' (expected default or popularity)");
  }
  config.n_dialogues = o.dialogues;
  config.seed = seed;
  if (app.count("--single-turn-fraction")) config.single_turn_fraction = o.single_turn_fraction;
  if (app.count("--new-skill-fraction")) config.new_skill_fraction = o.new_skill_fraction;
  if (app.count("--annotators")) config.annotators = o.annotators;
  if (app.count("--noise-sd")) config.annotator_noise_sd = o.noise_sd;
  if (app.count("--user-rating-fraction")) config.user_rating_fraction = o.user_rating_fraction;
  config.validate();

  const auto generated = generate_corpus(config);
  const fs::path corpus_path = output_path(g, o.output);
  save_corpus(corpus_path.string(), generated.corpus);
  fs::path latent_path = o.latent.empty() ? fs::path(corpus_path).replace_extension(".latent.jsonl")
                                          : output_path(g, o.latent);
  std::ofstream latent(latent_path, std::ios::binary);
  if (!latent) throw DataError("cannot write " + latent_path.string());
  write_latent(latent, generated.latent);
  out << "wrote " << generated.corpus.dialogues.size() << " dialogues (" << generated.corpus.turn_count()
      << " turns) to " << corpus_path.string() << "\n";
  out << "wrote latent quality to " << latent_path.string() << "\n";
  return kExitOk;
}

int cmd_stats(const GlobalOptions& g, const std::string& corpus_path, const std::string& output, std::ostream& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const CorpusStats stats = corpus_stats(corpus);
  std::ostringstream csv;
  write_stats_csv(csv, stats);
  const fs::path path = output_path(g, output);
  write_text(path, csv.str());
  out << stats_summary(stats);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_featurize(const GlobalOptions& g, const std::string& corpus_path, double test_fraction, std::ostream& out) {
  const std::uint64_t seed = require_seed(g, "featurize");
  const Corpus corpus = load_corpus(corpus_path);
  const PreparedData data = prepare_data(corpus, test_fraction, seed, lexicon_of(g));
  const FeatureSchema schema = FeatureSchema::full();
  const std::pair<const char*, const std::vector<FeatureVector>*> parts[] = {
      {"features_train.csv", &data.train}, {"features_test.csv", &data.test}, {"features_holdout.csv", &data.holdout}};
  for (const auto& [name, vectors] : parts) {
    std::ostringstream csv;
    write_feature_csv(csv, schema, *vectors);
    const fs::path path = output_path(g, name);
    write_text(path, csv.str());
    out << "wrote " << vectors->size() << " rows to " << path.string() << "\n";
  }
  const fs::path pop = output_path(g, "popularity.json");
  write_text(pop, popularity_to_json(data.table).dump(1) + "\n");
  out << "wrote " << pop.string() << "\n";
  return kExitOk;
}

struct TrainOptions {
  std::string corpus;
  std::string model = "gbrt";
  std::vector<std::string> params;
  std::optional<int> hidden_layers;
  double test_fraction = kDefaultTestFraction;
  std::string output;
};

std::vector<ModelKind> model_kinds(const std::string& name) {
  if (name == "all") return {std::begin(kAllModelKinds), std::end(kAllModelKinds)};
  return {parse_model_kind(name)};
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& out) {
  const std::uint64_t seed = require_seed(g, "train");
  const auto kinds = model_kinds(o.model);
  if (!o.output.empty() && kinds.size() > 1) throw ConfigError("--output names one file; omit it with --model all");
  std::vector<ModelSpec> specs;
  for (ModelKind k : kinds) specs.push_back(build_spec(k, seed, o.params, o.hidden_layers));

  const Corpus corpus = load_corpus(o.corpus);
  const Lexicon lexicon = lexicon_of(g);
  const PreparedData data = prepare_data(corpus, o.test_fraction, seed, lexicon);
  const FeatureSchema schema = FeatureSchema::full();
  const Matrix x = to_matrix(data.train);
  const auto y = labels_of(data.train);

  for (const ModelSpec& spec : specs) {
    const std::string kind(to_string(spec.kind));
    std::ostringstream log;
    log << describe_spec(spec) << "\n";
    log << "split seed=" << seed << " test_fraction=" << o.test_fraction << " train_turns=" << data.train.size()
        << " test_turns=" << data.test.size() << " holdout_turns=" << data.holdout.size() << "\n";
    log << "features=" << schema.size() << " schema_fingerprint=" << schema.fingerprint() << "\n";
    out << log.str();

    ModelArtifact artifact;
    artifact.model = train_model(spec, schema, x, y);
    artifact.table = data.table;
    artifact.lexicon = lexicon;
    artifact.split_seed = seed;
    artifact.test_fraction = o.test_fraction;

    const fs::path model_path = output_path(g, o.output.empty() ? "model_" + kind + ".json" : o.output);
    save_artifact(model_path.string(), artifact);

    if (data.test.size() >= 2) {
      const Matrix xt = to_matrix(data.test);
      const auto yt = labels_of(data.test);
      const auto pred = predict(artifact.model, schema.fingerprint(), xt);
      std::ostringstream metrics;
      metrics << "test pearson_r=" << pearson_r(pred, yt) << " f_dissatisfaction=" << f_dissatisfaction_f1(pred, yt)
              << "\n";
      const ImportanceReport imp = feature_importance(artifact.model, xt, yt, derive_seed(seed, 0x1a9));
      metrics << "importance method=" << to_string(imp.method) << "\n";
      nlohmann::json ranking = nlohmann::json::array();
      for (const auto& [name, score] : imp.scores) {
        metrics << "  " << name << " " << score << "\n";
        ranking.push_back({{"feature", name}, {"score", score}});
      }
      log << metrics.str();
      out << metrics.str();
      write_text(output_path(g, "importance_" + kind + ".json"),
                 nlohmann::json{{"model", kind}, {"method", std::string(to_string(imp.method))}, {"ranking", ranking}}
                         .dump(1) +
                     "\n");
    }
    const fs::path log_path = output_path(g, "train_" + kind + ".log");
    write_text(log_path, log.str());
    out << "wrote " << model_path.string() << " and " << log_path.string() << "\n";
  }
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const std::string& corpus_path, const std::vector<std::string>& models,
             std::ostream& out) {
  const std::uint64_t seed = g.seed.value_or(0);
  const Corpus corpus = load_corpus(corpus_path);
  std::vector<EvalReport> reports;
  nlohmann::json all = nlohmann::json::array();
  for (const auto& path : models) {
    const ModelArtifact artifact = load_artifact(path);
    const DataSplit split = split_corpus(corpus, artifact.test_fraction, artifact.split_seed);
    const FeatureSchema& schema = artifact.model.schema;
    const auto test = featurize_corpus(split.test, artifact.table, schema, artifact.lexicon);
    const auto holdout = featurize_corpus(split.holdout, artifact.table, schema, artifact.lexicon);
    EvalReport report = segment_report(artifact.model, vectors_by_segment(test, holdout), schema, g.bootstrap, seed);
    all.push_back(report_to_json(report));
    for (const auto& note : report.notes) out << "note: " << report.model << ": " << note << "\n";
    reports.push_back(std::move(report));
  }
  const std::string table = render_report_table(reports);
  const fs::path json_path = output_path(g, "eval_report.json");
  const fs::path table_path = output_path(g, "eval_report.txt");
  write_text(json_path, nlohmann::json{{"seed", seed}, {"bootstrap", g.bootstrap}, {"reports", all}}.dump(1) + "\n");
  write_text(table_path, table);
  out << table;
  out << "wrote " << json_path.string() << " and " << table_path.string() << "\n";
  return kExitOk;
}

struct AblateOptions {
  std::string corpus;
  std::string model = "gbrt";
  std::vector<std::string> sets;
  std::vector<std::string> params;
  std::optional<int> hidden_layers;
  double test_fraction = kDefaultTestFraction;
};

int cmd_ablate(const GlobalOptions& g, const AblateOptions& o, std::ostream& out) {
  const std::uint64_t seed = require_seed(g, "ablate");
  const ModelSpec spec = build_spec(parse_model_kind(o.model), seed, o.params, o.hidden_layers);
  std::vector<FeatureSet> tags;
  if (o.sets.empty()) {
    tags.assign(std::begin(kNewFeatureSets), std::end(kNewFeatureSets));
  } else {
    for (const auto& s : o.sets) tags.push_back(parse_feature_set(s));
  }
  check_ablation_tags(tags);

  const Corpus corpus = load_corpus(o.corpus);
  const PreparedData data = prepare_data(corpus, o.test_fraction, seed, lexicon_of(g));
  AblationInput input;
  input.train = &data.train;
  input.eval = vectors_by_segment(data.test, data.holdout);
  out << describe_spec(spec) << "\n";
  const auto results = ablate(input, spec, tags, g.bootstrap, seed);

  const std::string md = render_ablation_markdown(results);
  const fs::path json_path = output_path(g, "ablation.json");
  const fs::path md_path = output_path(g, "ablation.md");
  write_text(json_path, ablation_to_json(results, spec).dump(1) + "\n");
  write_text(md_path, md);
  out << md;
  out << "wrote " << json_path.string() << " and " << md_path.string() << "\n";
  const bool failed = std::any_of(results.begin(), results.end(), [](const auto& r) { return !r.ok(); });
  return failed ? kExitDataError : kExitOk;
}

int cmd_iaa(const GlobalOptions& g, const std::string& corpus_path, std::ostream& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const IaaReport report = iaa(corpus);
  std::optional<UserRatingCorrelation> user;
  std::size_t rated = 0;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) rated += t.user_rating.has_value();
  }
  if (rated >= 2) user = user_rating_correlation(corpus, g.bootstrap, g.seed.value_or(0));
  out << "turns=" << report.turns << " mean_spearman_rho=" << report.mean_rho << "\n";
  for (const auto& p : report.pairs) out << "  " << p.first << " vs " << p.second << ": " << p.rho << "\n";
  if (user) {
    out << "user_rating_correlation r=" << user->r.point << " [" << user->r.lower << ", " << user->r.upper
        << "] over " << user->turns << " turns\n";
  }
  const fs::path path = output_path(g, "iaa.json");
  write_text(path, iaa_to_json(report, user).dump(1) + "\n");
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turn-level user satisfaction estimation toolkit", "usat"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value configuration file");

  GlobalOptions g;
  app.add_option("--seed", g.seed, "master seed (required by synth, featurize, train, ablate)");
  app.add_option("--out-dir", g.out_dir, "directory for output files")->capture_default_str();
  app.add_option("--lexicon", g.lexicon, "apology/negation lexicon file")->check(CLI::ExistingFile);
  app.add_option("--bootstrap", g.bootstrap, "bootstrap resamples for confidence intervals")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated corpus");
  synth->add_option("--dialogues", so.dialogues, "number of dialogues")->capture_default_str();
  synth->add_option("--preset", so.preset, "default or popularity")->capture_default_str();
  synth->add_option("--single-turn-fraction", so.single_turn_fraction);
  synth->add_option("--new-skill-fraction", so.new_skill_fraction);
  synth->add_option("--annotators", so.annotators);
  synth->add_option("--noise-sd", so.noise_sd, "annotator noise standard deviation");
  synth->add_option("--user-rating-fraction", so.user_rating_fraction);
  synth->add_option("-o,--output", so.output, "corpus JSONL path")->capture_default_str();
  synth->add_option("--latent", so.latent, "latent quality sidecar path");

  std::string stats_corpus, stats_out = "stats.csv";
  auto* stats = app.add_subcommand("stats", "rating histograms per segment");
  stats->add_option("corpus", stats_corpus)->required();
  stats->add_option("-o,--output", stats_out, "histogram CSV path")->capture_default_str();

  std::string feat_corpus;
  double feat_fraction = kDefaultTestFraction;
  auto* featurize = app.add_subcommand("featurize", "write feature CSVs for the train/test/holdout split");
  featurize->add_option("corpus", feat_corpus)->required();
  featurize->add_option("--test-fraction", feat_fraction)->capture_default_str();

  TrainOptions to;
  auto* train = app.add_subcommand("train", "train a model and save its artifact");
  train->add_option("corpus", to.corpus)->required();
  train->add_option("--model", to.model, "lasso, tree, forest, gbrt, svr, mlp or all")->capture_default_str();
  train->add_option("--param", to.params, "hyperparameter override name=value (repeatable)");
  train->add_option("--hidden-layers", to.hidden_layers, "mlp hidden layer count");
  train->add_option("--test-fraction", to.test_fraction)->capture_default_str();
  train->add_option("-o,--output", to.output, "artifact path (default model_<kind>.json)");

  std::string eval_corpus;
  std::vector<std::string> eval_models;
  auto* eval = app.add_subcommand("eval", "per-segment metrics with bootstrap confidence intervals");
  eval->add_option("corpus", eval_corpus)->required();
  eval->add_option("--model", eval_models, "model artifact (repeatable)")->required();

  AblateOptions ao;
  auto* ablate_cmd = app.add_subcommand("ablate", "remove one feature set at a time and retrain");
  ablate_cmd->add_option("corpus", ao.corpus)->required();
  ablate_cmd->add_option("--model", ao.model)->capture_default_str();
  ablate_cmd->add_option("--sets", ao.sets, "feature sets to ablate (default: all five)")->delimiter(',');
  ablate_cmd->add_option("--param", ao.params, "hyperparameter override name=value (repeatable)");
  ablate_cmd->add_option("--hidden-layers", ao.hidden_layers, "mlp hidden layer count");
  ablate_cmd->add_option("--test-fraction", ao.test_fraction)->capture_default_str();

  std::string iaa_corpus;
  auto* iaa_cmd = app.add_subcommand("iaa", "inter-annotator agreement and user-rating correlation");
  iaa_cmd->add_option("corpus", iaa_corpus)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(g, so, *synth, out);
    if (*stats) return cmd_stats(g, stats_corpus, stats_out, out);
    if (*featurize) return cmd_featurize(g, feat_corpus, feat_fraction, out);
    if (*train) return cmd_train(g, to, out);
    if (*eval) return cmd_eval(g, eval_corpus, eval_models, out);
    if (*ablate_cmd) return cmd_ablate(g, ao, out);
    if (*iaa_cmd) return cmd_iaa(g, iaa_corpus, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\nRun 'usat --help' for usage.\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace usat
