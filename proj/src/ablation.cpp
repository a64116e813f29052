#include "usat/ablation.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace usat {

double relative_improvement(double with, double without) {
  if (without == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (with - without) / without;
}

ConfidenceInterval paired_difference_ci(const PairedMetric& metric, std::span<const double> pred_with,
                                        std::span<const double> pred_without, std::span<const double> gold,
                                        int n_boot, std::uint64_t seed, Execution exec) {
  if (pred_with.size() != gold.size() || pred_without.size() != gold.size()) {
    throw DataError("paired_difference_ci: prediction and gold lengths differ");
  }
  const std::size_t n = gold.size();
  if (n < 2) throw DataError("paired_difference_ci: need at least two values");
  if (n_boot < 1) throw ConfigError("paired_difference_ci: resample count must be positive");
  ConfidenceInterval ci;
  ci.point = metric(pred_with, gold) - metric(pred_without, gold);
  std::vector<double> stats(static_cast<std::size_t>(n_boot));
  auto one = [&](std::size_t b) {
    const auto idx = bootstrap_indices(n, seed, b);
    std::vector<double> w(n), wo(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = pred_with[idx[i]];
      wo[i] = pred_without[idx[i]];
      g[i] = gold[idx[i]];
    }
    stats[b] = metric(w, g) - metric(wo, g);
  };
  const auto total = static_cast<long>(n_boot);
  if (exec == Execution::kParallel) {
#pragma omp parallel
    {
      ScopedWarningSilencer quiet;
#pragma omp for schedule(static)
      for (long b = 0; b < total; ++b) one(static_cast<std::size_t>(b));
    }
  } else {
    ScopedWarningSilencer quiet;
    for (long b = 0; b < total; ++b) one(static_cast<std::size_t>(b));
  }
  ci.lower = std::min(percentile(stats, 0.025), ci.point);
  ci.upper = std::max(percentile(stats, 0.975), ci.point);
  return ci;
}

void check_ablation_tags(std::span<const FeatureSet> tags) {
  for (FeatureSet t : tags) {
    if (!is_new_feature_set(t)) {
      throw ConfigError("feature set '" + std::string(to_string(t)) + "' cannot be ablated");
    }
  }
}

namespace {

Matrix project(const std::vector<FeatureVector>& vectors, const std::vector<std::size_t>& cols) {
  Matrix out(vectors.size(), cols.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = vectors[i].values[cols[j]];
  }
  return out;
}

std::vector<std::size_t> columns_of(const FeatureSchema& full, const FeatureSchema& reduced) {
  std::vector<std::size_t> cols;
  for (const auto& f : reduced.features()) cols.push_back(full.index_of(f.name));
  return cols;
}

MetricDelta delta(const PairedMetric& metric, const std::vector<double>& with, const std::vector<double>& without,
                  const std::vector<double>& gold, int n_boot, std::uint64_t seed, Execution exec) {
  MetricDelta d;
  {
    ScopedWarningSilencer quiet;
    d.with = metric(with, gold);
    d.without = metric(without, gold);
  }
  d.relative = relative_improvement(d.with, d.without);
  d.diff = paired_difference_ci(metric, with, without, gold, n_boot, seed, exec);
  d.significant = d.diff.lower > 0.0 || d.diff.upper < 0.0;
  return d;
}

}  // namespace

std::vector<AblationResult> ablate(const AblationInput& input, const ModelSpec& spec, std::span<const FeatureSet> tags,
                                   int n_boot, std::uint64_t seed, Execution exec) {
  check_ablation_tags(tags);
  if (!input.train || input.train->size() < 2) throw DataError("ablation: need at least two training turns");
  const FeatureSchema full = FeatureSchema::full();
  for (FeatureSet t : tags) {
    if (!full.contains(t)) throw ConfigError("feature set '" + std::string(to_string(t)) + "' is not in the schema");
  }

  const auto y = labels_of(*input.train);
  const Matrix x_full = to_matrix(*input.train);
  const TrainedModel full_model = train_model(spec, full, x_full, y, exec);

  std::map<Segment, std::vector<double>> gold, pred_full;
  for (const auto& [seg, vecs] : input.eval) {
    if (vecs.size() < 2) continue;
    gold[seg] = labels_of(vecs);
    pred_full[seg] = predict(full_model, full.fingerprint(), to_matrix(vecs));
  }

  std::vector<AblationResult> results;
  for (FeatureSet tag : tags) {
    AblationResult r;
    r.tag = tag;
    try {
      const FeatureSchema reduced = full.without(tag);
      r.columns_removed = full.size() - reduced.size();
      const auto cols = columns_of(full, reduced);
      const TrainedModel m = train_model(spec, reduced, project(*input.train, cols), y, exec);
      for (const auto& [seg, g] : gold) {
        const auto pred = predict(m, reduced.fingerprint(), project(input.eval.at(seg), cols));
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(seg));
        SegmentDelta sd;
        sd.segment = seg;
        sd.n_turns = g.size();
        sd.pearson = delta(pearson_r, pred_full[seg], pred, g, n_boot, derive_seed(s, 0), exec);
        sd.f_dis = delta(f_dissatisfaction_f1, pred_full[seg], pred, g, n_boot, derive_seed(s, 1), exec);
        r.segments.push_back(sd);
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json delta_json(const MetricDelta& d) {
  return {{"with", d.with},
          {"without", d.without},
          {"relative_improvement", number(d.relative)},
          {"diff", d.diff.point},
          {"diff_lower", d.diff.lower},
          {"diff_upper", d.diff.upper},
          {"significant", d.significant}};
}

std::string fmt(double v, int digits, bool sign = false) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  if (sign) os << std::showpos;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

nlohmann::json ablation_to_json(const std::vector<AblationResult>& results, const ModelSpec& spec) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json j = {{"feature_set", std::string(to_string(r.tag))}, {"columns_removed", r.columns_removed}};
    if (!r.ok()) {
      j["error"] = r.error;
    } else {
      nlohmann::json segs = nlohmann::json::object();
      for (const auto& s : r.segments) {
        segs[std::string(to_string(s.segment))] = {
            {"n_turns", s.n_turns}, {"pearson_r", delta_json(s.pearson)}, {"f_dissatisfaction", delta_json(s.f_dis)}};
      }
      j["segments"] = segs;
    }
    runs.push_back(j);
  }
  return {{"model", std::string(to_string(spec.kind))},
          {"seed", spec.seed},
          {"hyperparameters", spec.hyperparameters},
          {"runs", runs}};
}

std::string render_ablation_markdown(const std::vector<AblationResult>& results) {
  std::ostringstream os;
  os << "| feature set | segment | n | r with | r without | Δr | Δr 95% CI | relative Δr | ΔF-dis | ΔF-dis 95% CI | "
        "significant (r / F) |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : results) {
    if (!r.ok()) {
      os << "| " << to_string(r.tag) << " | error: " << r.error << " | | | | | | | | | |\n";
      continue;
    }
    for (const auto& s : r.segments) {
      os << "| " << to_string(r.tag) << " | " << to_string(s.segment) << " | " << s.n_turns << " | "
         << fmt(s.pearson.with, 3) << " | " << fmt(s.pearson.without, 3) << " | " << fmt(s.pearson.diff.point, 3, true)
         << " | [" << fmt(s.pearson.diff.lower, 3, true) << ", " << fmt(s.pearson.diff.upper, 3, true) << "] | "
         << fmt(100.0 * s.pearson.relative, 2, true) << "% | " << fmt(s.f_dis.diff.point, 3, true) << " | ["
         << fmt(s.f_dis.diff.lower, 3, true) << ", " << fmt(s.f_dis.diff.upper, 3, true) << "] | "
         << (s.pearson.significant ? "yes" : "no") << " / " << (s.f_dis.significant ? "yes" : "no") << " |\n";
    }
  }
  return os.str();
}

}  // namespace usat
