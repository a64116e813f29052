#include "usat/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "usat/eval.hpp"

namespace usat {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLasso: return "lasso";
    case ModelKind::kTree: return "tree";
    case ModelKind::kForest: return "forest";
    case ModelKind::kGbrt: return "gbrt";
    case ModelKind::kSvr: return "svr";
    case ModelKind::kMlp: return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind k : kAllModelKinds) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

ModelSpec ModelSpec::defaults(ModelKind kind, std::uint64_t seed) {
  ModelSpec s;
  s.kind = kind;
  s.seed = seed;
  switch (kind) {
    case ModelKind::kLasso:
      s.hyperparameters = {{"alpha", 0.001}, {"tol", 1e-6}, {"max_sweeps", 10000}};
      break;
    case ModelKind::kTree:
      s.hyperparameters = {{"max_depth", 33}, {"min_samples_leaf", 31}, {"min_samples_split", 23}};
      break;
    case ModelKind::kForest:
      s.hyperparameters = {{"max_depth", 49}, {"min_samples_leaf", 11}, {"min_samples_split", 27},
                           {"n_trees", 100},  {"bootstrap", 1},         {"max_features", 0}};
      break;
    case ModelKind::kGbrt:
      s.hyperparameters = {{"max_depth", 23}, {"min_samples_leaf", 17}, {"min_samples_split", 59},
                           {"n_stages", 100}, {"shrinkage", 0.1}};
      break;
    case ModelKind::kSvr:
      s.hyperparameters = {{"C", 2.0}, {"gamma", 0.024}, {"epsilon", 0.1}, {"tol", 1e-3}};
      break;
    case ModelKind::kMlp:
      s.hyperparameters = {{"hidden_layers", 3},      {"hidden_size", 100}, {"batch_size", 128},
                           {"learning_rate", 0.01},   {"momentum", 0.9},    {"epochs", 200},
                           {"init_scale", 1.0}};
      break;
  }
  return s;
}

double ModelSpec::get(const std::string& name) const {
  auto it = hyperparameters.find(name);
  if (it == hyperparameters.end()) {
    throw ConfigError("model '" + std::string(to_string(kind)) + "' has no hyperparameter '" + name + "'");
  }
  return it->second;
}

int ModelSpec::get_int(const std::string& name) const { return static_cast<int>(std::lround(get(name))); }

void ModelSpec::set(const std::string& name, double value) {
  get(name);
  if (!std::isfinite(value)) throw ConfigError("hyperparameter '" + name + "' must be finite");
  hyperparameters[name] = value;
}

LassoParams ModelSpec::lasso() const { return {get("alpha"), get("tol"), get_int("max_sweeps")}; }

TreeParams ModelSpec::tree() const {
  return {get_int("max_depth"), get_int("min_samples_leaf"), get_int("min_samples_split"), 0};
}

ForestParams ModelSpec::forest() const {
  ForestParams p;
  p.tree = tree();
  p.n_trees = get_int("n_trees");
  p.bootstrap = get_int("bootstrap") != 0;
  p.max_features = get_int("max_features");
  return p;
}

GbrtParams ModelSpec::gbrt() const {
  GbrtParams p;
  p.tree = tree();
  p.n_stages = get_int("n_stages");
  p.shrinkage = get("shrinkage");
  return p;
}

SvrParams ModelSpec::svr() const {
  SvrParams p;
  p.c = get("C");
  p.gamma = get("gamma");
  p.epsilon = get("epsilon");
  p.tol = get("tol");
  return p;
}

MlpParams ModelSpec::mlp() const {
  MlpParams p;
  p.hidden_layers = get_int("hidden_layers");
  p.hidden_size = get_int("hidden_size");
  p.batch_size = get_int("batch_size");
  p.learning_rate = get("learning_rate");
  p.momentum = get("momentum");
  p.epochs = get_int("epochs");
  p.init_scale = get("init_scale");
  return p;
}

bool needs_standardization(ModelKind kind) {
  return kind == ModelKind::kLasso || kind == ModelKind::kSvr || kind == ModelKind::kMlp;
}

double TrainedModel::predict_raw(std::span<const double> row) const {
  std::vector<double> buf;
  std::span<const double> x = row;
  if (!standardizer.empty()) {
    buf.assign(row.begin(), row.end());
    standardizer.apply_row(buf);
    x = buf;
  }
  return std::visit([x](const auto& p) { return p.predict(x); }, parameters);
}

TrainedModel train_model(const ModelSpec& spec, const FeatureSchema& schema, const Matrix& x, std::span<const double> y,
                         Execution exec) {
  if (x.rows() != y.size()) throw DataError("label count does not match rows");
  if (x.rows() < 2) throw DataError("need at least two training rows");
  if (x.cols() != schema.size()) throw DataError("training matrix width does not match the schema");

  TrainedModel model;
  model.spec = spec;
  model.schema = schema;
  Matrix xs;
  const Matrix* input = &x;
  if (needs_standardization(spec.kind)) {
    model.standardizer = Standardizer::fit(x, schema);
    xs = model.standardizer.apply(x);
    input = &xs;
  }
  switch (spec.kind) {
    case ModelKind::kLasso: model.parameters = fit_lasso(*input, y, spec.lasso()); break;
    case ModelKind::kTree: model.parameters = fit_tree(*input, y, spec.tree(), exec); break;
    case ModelKind::kForest: model.parameters = fit_forest(*input, y, spec.forest(), spec.seed, exec); break;
    case ModelKind::kGbrt: model.parameters = fit_gbrt(*input, y, spec.gbrt(), exec); break;
    case ModelKind::kSvr: model.parameters = fit_svr(*input, y, spec.svr(), exec); break;
    case ModelKind::kMlp: model.parameters = fit_mlp(*input, y, spec.mlp(), spec.seed).net; break;
  }
  return model;
}

std::vector<double> predict(const TrainedModel& model, std::uint64_t schema_fingerprint, const Matrix& x) {
  if (schema_fingerprint != model.fingerprint()) {
    throw DataError("feature schema fingerprint does not match the trained model");
  }
  if (!x.empty() && x.cols() != model.schema.size()) throw DataError("feature matrix width does not match the model");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out[i] = std::clamp(model.predict_raw(x.row(i)), kMinRating, kMaxRating);
  }
  return out;
}

std::string_view to_string(ImportanceMethod method) {
  switch (method) {
    case ImportanceMethod::kImpurity: return "impurity";
    case ImportanceMethod::kCoefficientMagnitude: return "coefficient_magnitude";
    case ImportanceMethod::kPermutation: return "permutation";
  }
  return "unknown";
}

namespace {

std::vector<double> tree_importance(const ModelParameters& p, std::size_t n_features) {
  std::vector<double> total(n_features, 0.0);
  auto add = [&](const RegressionTree& t) {
    auto imp = t.impurity_importance();
    for (std::size_t j = 0; j < n_features; ++j) total[j] += imp[j];
  };
  if (auto* t = std::get_if<RegressionTree>(&p)) add(*t);
  if (auto* f = std::get_if<Forest>(&p)) {
    for (const auto& t : f->trees) add(t);
  }
  if (auto* g = std::get_if<Gbrt>(&p)) {
    for (const auto& t : g->trees) add(t);
  }
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  if (sum > 0.0) {
    for (double& v : total) v /= sum;
  }
  return total;
}

}  // namespace

ImportanceReport feature_importance(const TrainedModel& model, const Matrix& x_val, std::span<const double> y_val,
                                    std::uint64_t seed) {
  const std::size_t p = model.schema.size();
  ImportanceReport report;
  std::vector<double> scores(p, 0.0);
  switch (model.kind()) {
    case ModelKind::kTree:
    case ModelKind::kForest:
    case ModelKind::kGbrt:
      report.method = ImportanceMethod::kImpurity;
      scores = tree_importance(model.parameters, p);
      break;
    case ModelKind::kLasso: {
      report.method = ImportanceMethod::kCoefficientMagnitude;
      const auto& w = std::get<LassoFit>(model.parameters).weights;
      for (std::size_t j = 0; j < p; ++j) scores[j] = std::abs(w[j]);
      break;
    }
    case ModelKind::kSvr:
    case ModelKind::kMlp: {
      report.method = ImportanceMethod::kPermutation;
      if (x_val.rows() < 2) throw DataError("permutation importance needs at least two validation rows");
      ScopedWarningSilencer quiet;
      const double base = pearson_r(predict(model, model.fingerprint(), x_val), y_val);
      for (std::size_t j = 0; j < p; ++j) {
        double drop = 0.0;
        for (int s = 0; s < kPermutationRepeats; ++s) {
          Matrix shuffled = x_val;
          std::vector<double> col = x_val.column(j);
          std::mt19937_64 rng(derive_seed(seed, j * kPermutationRepeats + static_cast<std::size_t>(s)));
          std::shuffle(col.begin(), col.end(), rng);
          for (std::size_t i = 0; i < col.size(); ++i) shuffled(i, j) = col[i];
          drop += base - pearson_r(predict(model, model.fingerprint(), shuffled), y_val);
        }
        scores[j] = std::max(0.0, drop / kPermutationRepeats);
      }
      break;
    }
  }
  for (std::size_t j = 0; j < p; ++j) report.scores.emplace_back(model.schema[j].name, scores[j]);
  std::stable_sort(report.scores.begin(), report.scores.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return report;
}

// ---- serialization ----

json schema_to_json(const FeatureSchema& schema) {
  json arr = json::array();
  for (const auto& f : schema.features()) {
    arr.push_back({{"name", f.name}, {"set", std::string(to_string(f.set))}, {"indicator", f.indicator}});
  }
  return arr;
}

FeatureSchema schema_from_json(const json& j) {
  std::vector<FeatureSpec> specs;
  for (const auto& f : j) {
    specs.push_back({f.at("name").get<std::string>(), parse_feature_set(f.at("set").get<std::string>()),
                     f.at("indicator").get<bool>()});
  }
  return FeatureSchema(std::move(specs));
}

namespace {

json tree_to_json(const RegressionTree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       value = json::array(), samples = json::array(), gain = json::array();
  for (const auto& n : t.nodes()) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    samples.push_back(n.samples);
    gain.push_back(n.gain);
  }
  return {{"n_features", t.n_features()}, {"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},               {"value", value},     {"samples", samples},     {"gain", gain}};
}

RegressionTree tree_from_json(const json& j) {
  const auto& feature = j.at("feature");
  std::vector<TreeNode> nodes(feature.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].feature = feature[i].get<int>();
    nodes[i].threshold = j.at("threshold")[i].get<double>();
    nodes[i].left = j.at("left")[i].get<int>();
    nodes[i].right = j.at("right")[i].get<int>();
    nodes[i].value = j.at("value")[i].get<double>();
    nodes[i].samples = j.at("samples")[i].get<std::size_t>();
    nodes[i].gain = j.at("gain")[i].get<double>();
  }
  return RegressionTree(std::move(nodes), j.at("n_features").get<std::size_t>());
}

json trees_to_json(const std::vector<RegressionTree>& trees) {
  json arr = json::array();
  for (const auto& t : trees) arr.push_back(tree_to_json(t));
  return arr;
}

std::vector<RegressionTree> trees_from_json(const json& j) {
  std::vector<RegressionTree> out;
  for (const auto& t : j) out.push_back(tree_from_json(t));
  return out;
}

json params_to_json(const ModelParameters& p) {
  struct Visitor {
    json operator()(const LassoFit& f) const {
      return {{"weights", f.weights}, {"intercept", f.intercept}, {"sweeps", f.sweeps}};
    }
    json operator()(const RegressionTree& t) const { return tree_to_json(t); }
    json operator()(const Forest& f) const { return {{"trees", trees_to_json(f.trees)}}; }
    json operator()(const Gbrt& g) const {
      return {{"base", g.base}, {"shrinkage", g.shrinkage}, {"trees", trees_to_json(g.trees)}, {"train_mse", g.train_mse}};
    }
    json operator()(const SvrFit& s) const {
      return {{"cols", s.support_vectors.cols()}, {"support_vectors", s.support_vectors.data()},
              {"coefficients", s.coefficients},   {"bias", s.bias},
              {"gamma", s.gamma},                 {"iterations", s.iterations}};
    }
    json operator()(const Mlp& m) const { return {{"widths", m.widths()}, {"parameters", m.parameters()}}; }
  };
  return std::visit(Visitor{}, p);
}

ModelParameters params_from_json(ModelKind kind, const json& j) {
  switch (kind) {
    case ModelKind::kLasso: {
      LassoFit f;
      f.weights = j.at("weights").get<std::vector<double>>();
      f.intercept = j.at("intercept").get<double>();
      f.sweeps = j.at("sweeps").get<int>();
      return f;
    }
    case ModelKind::kTree: return tree_from_json(j);
    case ModelKind::kForest: return Forest{trees_from_json(j.at("trees"))};
    case ModelKind::kGbrt: {
      Gbrt g;
      g.base = j.at("base").get<double>();
      g.shrinkage = j.at("shrinkage").get<double>();
      g.trees = trees_from_json(j.at("trees"));
      g.train_mse = j.at("train_mse").get<std::vector<double>>();
      return g;
    }
    case ModelKind::kSvr: {
      SvrFit s;
      const auto cols = j.at("cols").get<std::size_t>();
      const auto flat = j.at("support_vectors").get<std::vector<double>>();
      s.coefficients = j.at("coefficients").get<std::vector<double>>();
      s.support_vectors = Matrix(s.coefficients.size(), cols);
      if (flat.size() != s.coefficients.size() * cols) throw DataError("svr artifact: support vector size mismatch");
      for (std::size_t i = 0; i < s.coefficients.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) s.support_vectors(i, c) = flat[i * cols + c];
      }
      s.bias = j.at("bias").get<double>();
      s.gamma = j.at("gamma").get<double>();
      s.iterations = j.at("iterations").get<long>();
      return s;
    }
    case ModelKind::kMlp: {
      Mlp m;
      m.assign(j.at("widths").get<std::vector<std::size_t>>(), j.at("parameters").get<std::vector<double>>());
      return m;
    }
  }
  throw DataError("unknown model kind in artifact");
}

}  // namespace

json model_to_json(const TrainedModel& model) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = std::string(to_string(model.kind()));
  j["seed"] = model.spec.seed;
  j["hyperparameters"] = model.spec.hyperparameters;
  j["schema"] = schema_to_json(model.schema);
  j["schema_fingerprint"] = model.fingerprint();
  j["standardizer"] = {{"mean", model.standardizer.mean()}, {"scale", model.standardizer.scale()}};
  j["parameters"] = params_to_json(model.parameters);
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("unsupported model format version " + j.at("format_version").dump());
    }
    TrainedModel m;
    m.spec.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.spec.seed = j.at("seed").get<std::uint64_t>();
    m.spec.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
    m.schema = schema_from_json(j.at("schema"));
    if (m.fingerprint() != j.at("schema_fingerprint").get<std::uint64_t>()) {
      throw DataError("model artifact schema fingerprint mismatch");
    }
    m.standardizer = Standardizer(j.at("standardizer").at("mean").get<std::vector<double>>(),
                                  j.at("standardizer").at("scale").get<std::vector<double>>());
    m.parameters = params_from_json(m.spec.kind, j.at("parameters"));
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  }
}

}  // namespace usat
