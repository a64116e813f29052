#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "usat/common.hpp"
#include "usat/features.hpp"
#include "usat/lasso.hpp"
#include "usat/matrix.hpp"
#include "usat/mlp.hpp"
#include "usat/svr.hpp"
#include "usat/tree.hpp"

namespace usat {

enum class ModelKind { kLasso, kTree, kForest, kGbrt, kSvr, kMlp };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::kLasso, ModelKind::kTree, ModelKind::kForest,
                                               ModelKind::kGbrt,  ModelKind::kSvr,  ModelKind::kMlp};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);  // throws ConfigError

// Kind plus named hyperparameters. Unknown names are rejected.
struct ModelSpec {
  ModelKind kind = ModelKind::kGbrt;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;

  static ModelSpec defaults(ModelKind kind, std::uint64_t seed = 0);

  double get(const std::string& name) const;
  int get_int(const std::string& name) const;
  void set(const std::string& name, double value);

  LassoParams lasso() const;
  TreeParams tree() const;
  ForestParams forest() const;
  GbrtParams gbrt() const;
  SvrParams svr() const;
  MlpParams mlp() const;
};

using ModelParameters = std::variant<LassoFit, RegressionTree, Forest, Gbrt, SvrFit, Mlp>;

struct TrainedModel {
  ModelSpec spec;
  FeatureSchema schema;
  Standardizer standardizer;  // empty for the tree-based kinds
  ModelParameters parameters;

  ModelKind kind() const { return spec.kind; }
  std::uint64_t fingerprint() const { return schema.fingerprint(); }

  // Unclipped model output for one raw (unstandardized) feature row.
  double predict_raw(std::span<const double> row) const;
};

bool needs_standardization(ModelKind kind);

// Standardizes when the kind requires it, then fits.
TrainedModel train_model(const ModelSpec& spec, const FeatureSchema& schema, const Matrix& x, std::span<const double> y,
                         Execution exec = Execution::kParallel);

inline constexpr double kMinRating = 1.0;
inline constexpr double kMaxRating = 5.0;

// Model output clipped to [1,5]; refuses rows built under another schema.
std::vector<double> predict(const TrainedModel& model, std::uint64_t schema_fingerprint, const Matrix& x);

enum class ImportanceMethod { kImpurity, kCoefficientMagnitude, kPermutation };
std::string_view to_string(ImportanceMethod method);

struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::kImpurity;
  std::vector<std::pair<std::string, double>> scores;  // sorted descending
};

inline constexpr int kPermutationRepeats = 5;

ImportanceReport feature_importance(const TrainedModel& model, const Matrix& x_val, std::span<const double> y_val,
                                    std::uint64_t seed);

// Versioned JSON artifact; reloaded models give bit-identical predictions.
inline constexpr int kModelFormatVersion = 1;
nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

}  // namespace usat
