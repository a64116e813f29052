#include "usat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "usat/models.hpp"

namespace usat {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DataError(std::string(what) + ": vectors differ in length");
}

}  // namespace

double pearson_r(std::span<const double> pred, std::span<const double> gold) {
  check_lengths(pred, gold, "pearson_r");
  const std::size_t n = pred.size();
  if (n < 2) throw DataError("pearson_r: need at least two values");
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(n);
  const double mg = std::accumulate(gold.begin(), gold.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = pred[i] - mp;
    const double dg = gold[i] - mg;
    sxy += dp * dg;
    sxx += dp * dp;
    syy += dg * dg;
  }
  if (sxx == 0.0 || syy == 0.0) {
    warn("correlation of a constant vector is undefined; reporting 0");
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b, "spearman_rho");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson_r(ra, rb);
}

DissatisfactionScore f_dissatisfaction(std::span<const double> pred, std::span<const double> gold, double threshold) {
  check_lengths(pred, gold, "f_dissatisfaction");
  DissatisfactionScore s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] < threshold;
    const bool g = gold[i] < threshold;
    if (p && g) ++s.tp;
    else if (p) ++s.fp;
    else if (g) ++s.fn;
  }
  if (s.tp + s.fp + s.fn == 0) {
    warn("no dissatisfactory turns in gold or predictions; F-dissatisfaction reported as 0");
    return s;
  }
  s.precision = s.tp + s.fp == 0 ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  s.recall = s.tp + s.fn == 0 ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

double f_dissatisfaction_f1(std::span<const double> pred, std::span<const double> gold) {
  return f_dissatisfaction(pred, gold).f1;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t resample) {
  std::mt19937_64 rng(derive_seed(seed, resample));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

ConfidenceInterval bootstrap_ci(const PairedMetric& metric, std::span<const double> pred, std::span<const double> gold,
                                int n_boot, std::uint64_t seed, Execution exec) {
  check_lengths(pred, gold, "bootstrap_ci");
  const std::size_t n = pred.size();
  if (n < 2) throw DataError("bootstrap_ci: need at least two values");
  if (n_boot < 1) throw ConfigError("bootstrap_ci: resample count must be positive");
  ConfidenceInterval ci;
  ci.point = metric(pred, gold);
  std::vector<double> stats(static_cast<std::size_t>(n_boot));
  auto one = [&](std::size_t b) {
    const auto idx = bootstrap_indices(n, seed, b);
    std::vector<double> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pred[idx[i]];
      g[i] = gold[idx[i]];
    }
    stats[b] = metric(p, g);
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

IaaReport iaa(const Corpus& corpus) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> columns;
  IaaReport report;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) {
      auto ann = t.annotations;
      std::sort(ann.begin(), ann.end(),
                [](const AnnotatorRating& a, const AnnotatorRating& b) { return a.annotator_id < b.annotator_id; });
      if (report.turns == 0) {
        for (const auto& a : ann) ids.push_back(a.annotator_id);
        columns.resize(ids.size());
      }
      bool same = ann.size() == ids.size();
      for (std::size_t k = 0; same && k < ann.size(); ++k) same = ann[k].annotator_id == ids[k];
      if (!same) {
        throw DataError("iaa: dialogue " + d.dialogue_id + " turn " + std::to_string(t.index) +
                        " has a different annotator set");
      }
      for (std::size_t k = 0; k < ann.size(); ++k) columns[k].push_back(ann[k].rating);
      ++report.turns;
    }
  }
  if (report.turns < 2) throw DataError("iaa: need at least two annotated turns");
  if (ids.size() < 2) throw DataError("iaa: need at least two annotators");
  double sum = 0.0;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      const double rho = spearman_rho(columns[a], columns[b]);
      report.pairs.push_back({ids[a], ids[b], rho});
      sum += rho;
    }
  }
  report.mean_rho = sum / static_cast<double>(report.pairs.size());
  return report;
}

UserRatingCorrelation user_rating_correlation(const Corpus& corpus, int n_boot, std::uint64_t seed) {
  std::vector<double> labels, ratings;
  for (const auto& d : corpus.dialogues) {
    for (const auto& t : d.turns) {
      if (!t.user_rating) continue;
      labels.push_back(aggregate_label(t.annotations));
      ratings.push_back(*t.user_rating);
    }
  }
  if (labels.size() < 2) throw DataError("user_rating_correlation: fewer than two turns carry a user rating");
  UserRatingCorrelation out;
  out.turns = labels.size();
  out.r = bootstrap_ci(pearson_r, labels, ratings, n_boot, seed);
  return out;
}

SegmentMetrics evaluate_predictions(std::span<const double> pred, std::span<const double> gold, int n_boot,
                                    std::uint64_t seed) {
  SegmentMetrics m;
  m.n_turns = pred.size();
  m.pearson = bootstrap_ci(pearson_r, pred, gold, n_boot, derive_seed(seed, 0));
  m.f_dis = bootstrap_ci(f_dissatisfaction_f1, pred, gold, n_boot, derive_seed(seed, 1));
  m.spearman = spearman_rho(pred, gold);
  const auto f = f_dissatisfaction(pred, gold);
  m.precision = f.precision;
  m.recall = f.recall;
  return m;
}

EvalReport segment_report(const TrainedModel& model, const std::map<Segment, std::vector<FeatureVector>>& by_segment,
                          const FeatureSchema& schema, int n_boot, std::uint64_t seed) {
  EvalReport report;
  report.model = std::string(to_string(model.kind()));
  for (Segment s : kAllSegments) {
    auto it = by_segment.find(s);
    const std::size_t n = it == by_segment.end() ? 0 : it->second.size();
    if (n < 2) {
      report.notes.push_back(std::string(to_string(s)) + ": omitted (" + std::to_string(n) + " turns)");
      continue;
    }
    const auto pred = predict(model, schema.fingerprint(), to_matrix(it->second));
    const auto gold = labels_of(it->second);
    report.segments[s] = evaluate_predictions(pred, gold, n_boot, derive_seed(seed, static_cast<std::uint64_t>(s)));
  }
  return report;
}

namespace {

nlohmann::json ci_json(const ConfidenceInterval& ci) {
  return {{"point", ci.point}, {"lower", ci.lower}, {"upper", ci.upper}};
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string ci_cell(const ConfidenceInterval& ci) {
  return fixed(ci.point) + " [" + fixed(ci.lower) + ", " + fixed(ci.upper) + "]";
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json segments = nlohmann::json::object();
  for (const auto& [seg, m] : report.segments) {
    segments[std::string(to_string(seg))] = {{"n_turns", m.n_turns},     {"pearson_r", ci_json(m.pearson)},
                                             {"f_dissatisfaction", ci_json(m.f_dis)},
                                             {"spearman_rho", m.spearman}, {"precision", m.precision},
                                             {"recall", m.recall}};
  }
  return {{"model", report.model}, {"segments", segments}, {"notes", report.notes}};
}

nlohmann::json iaa_to_json(const IaaReport& report, const std::optional<UserRatingCorrelation>& user) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.pairs) pairs.push_back({{"first", p.first}, {"second", p.second}, {"rho", p.rho}});
  nlohmann::json j = {{"mean_rho", report.mean_rho}, {"turns", report.turns}, {"pairs", pairs}};
  if (user) j["user_rating_correlation"] = {{"turns", user->turns}, {"pearson_r", ci_json(user->r)}};
  return j;
}

std::string render_report_table(const std::vector<EvalReport>& reports) {
  const std::vector<std::string> header = {"model",   "Cor_s",     "F-dis_s", "Cor_m.t",
                                           "F-dis_m.t", "Cor_n.s", "F-dis_n.s"};
  std::vector<std::vector<std::string>> rows = {header};
  for (const auto& r : reports) {
    std::vector<std::string> row = {r.model};
    for (Segment s : kAllSegments) {
      auto it = r.segments.find(s);
      if (it == r.segments.end()) {
        row.push_back("n/a");
        row.push_back("n/a");
      } else {
        row.push_back(ci_cell(it->second.pearson));
        row.push_back(ci_cell(it->second.f_dis));
      }
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      if (c + 1 == row.size()) {
        os << row[c];
      } else {
        os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace usat
