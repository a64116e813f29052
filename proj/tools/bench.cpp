// Serial reference vs OpenMP kernel timings; also checks the outputs agree.
//   usat_bench [scale]

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>

#include <omp.h>

#include "usat/eval.hpp"
#include "usat/features.hpp"
#include "usat/models.hpp"
#include "usat/svr.hpp"
#include "usat/synth.hpp"
#include "usat/tree.hpp"

using namespace usat;

namespace {

template <typename F>
double seconds(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const std::string& name, double serial, double parallel, bool same) {
  std::cout << std::left << std::setw(22) << name << std::right << std::fixed << std::setprecision(3) << std::setw(10)
            << serial << std::setw(10) << parallel << std::setw(9) << std::setprecision(2) << serial / parallel << "x"
            << "  " << (same ? "identical" : "MISMATCH") << "\n";
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) x(r, c) = u(rng);
  }
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  const int scale = argc > 1 ? std::max(1, std::atoi(argv[1])) : 1;
  set_warning_sink([](std::string_view) {});
  std::cout << "threads: " << omp_get_max_threads() << ", scale: " << scale << "\n";
  std::cout << std::left << std::setw(22) << "kernel" << std::right << std::setw(10) << "serial s" << std::setw(10)
            << "omp s" << std::setw(10) << "speedup" << "\n";
  bool all_same = true;

  GeneratorConfig cfg;
  cfg.n_dialogues = 4000 * scale;
  cfg.seed = 1;
  GeneratedCorpus gs, gp;
  const double gen_s = seconds([&] { gs = generate_corpus(cfg, Execution::kSerial); });
  const double gen_p = seconds([&] { gp = generate_corpus(cfg, Execution::kParallel); });
  const bool gen_same = gs.corpus.dialogues == gp.corpus.dialogues;
  report("generate_corpus", gen_s, gen_p, gen_same);
  all_same &= gen_same;

  const PopularityTable table = PopularityTable::build(gs.corpus);
  const FeatureSchema schema = FeatureSchema::full();
  std::vector<FeatureVector> fs, fp;
  const double feat_s = seconds([&] { fs = featurize_corpus(gs.corpus, table, schema, Lexicon::defaults(), Execution::kSerial); });
  const double feat_p = seconds([&] { fp = featurize_corpus(gs.corpus, table, schema, Lexicon::defaults(), Execution::kParallel); });
  bool feat_same = fs.size() == fp.size();
  for (std::size_t i = 0; feat_same && i < fs.size(); ++i) feat_same = fs[i].values == fp[i].values;
  report("featurize_corpus", feat_s, feat_p, feat_same);
  all_same &= feat_same;

  const Matrix x = to_matrix(fs);
  const auto y = labels_of(fs);
  ForestParams forest;
  forest.n_trees = 50;
  Forest a, b;
  const double forest_s = seconds([&] { a = fit_forest(x, y, forest, 7, Execution::kSerial); });
  const double forest_p = seconds([&] { b = fit_forest(x, y, forest, 7, Execution::kParallel); });
  bool forest_same = true;
  for (std::size_t i = 0; i < std::min<std::size_t>(x.rows(), 500); ++i) {
    forest_same &= a.predict(x.row(i)) == b.predict(x.row(i));
  }
  report("fit_forest (50 trees)", forest_s, forest_p, forest_same);
  all_same &= forest_same;

  std::mt19937_64 rng(3);
  const Matrix k = random_matrix(2000 * static_cast<std::size_t>(scale), 30, rng);
  Matrix ks, kp;
  const double kern_s = seconds([&] { ks = rbf_kernel_matrix(k, 0.024, Execution::kSerial); });
  const double kern_p = seconds([&] { kp = rbf_kernel_matrix(k, 0.024, Execution::kParallel); });
  report("rbf_kernel_matrix", kern_s, kern_p, ks == kp);
  all_same &= ks == kp;

  std::vector<double> pred(y.size());
  std::normal_distribution<double> noise(0.0, 0.5);
  for (std::size_t i = 0; i < y.size(); ++i) pred[i] = y[i] + noise(rng);
  ConfidenceInterval cs, cp;
  const double boot_s = seconds([&] { cs = bootstrap_ci(pearson_r, pred, y, 1000, 5, Execution::kSerial); });
  const double boot_p = seconds([&] { cp = bootstrap_ci(pearson_r, pred, y, 1000, 5, Execution::kParallel); });
  const bool boot_same = cs.lower == cp.lower && cs.upper == cp.upper;
  report("bootstrap_ci (1000)", boot_s, boot_p, boot_same);
  all_same &= boot_same;

  TreeParams tp{33, 31, 23, 0};
  RegressionTree ts, tpar;
  const double tree_s = seconds([&] { ts = fit_tree(x, y, tp, Execution::kSerial); });
  const double tree_p = seconds([&] { tpar = fit_tree(x, y, tp, Execution::kParallel); });
  bool tree_same = ts.nodes().size() == tpar.nodes().size();
  for (std::size_t i = 0; tree_same && i < ts.nodes().size(); ++i) {
    tree_same = ts.nodes()[i].threshold == tpar.nodes()[i].threshold && ts.nodes()[i].value == tpar.nodes()[i].value;
  }
  report("fit_tree split search", tree_s, tree_p, tree_same);
  all_same &= tree_same;

  return all_same ? 0 : 1;
}
