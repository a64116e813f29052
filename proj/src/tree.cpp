#include "usat/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace usat {

double split_tie_tolerance(double parent_sse) { return 1e-12 * std::max(1.0, parent_sse); }

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(i)].value;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::vector<double> RegressionTree::impurity_importance() const {
  std::vector<double> out(n_features_, 0.0);
  for (const auto& n : nodes_) {
    if (n.feature >= 0) out[static_cast<std::size_t>(n.feature)] += n.gain;
  }
  return out;
}

namespace {

using Lists = std::vector<std::vector<std::uint32_t>>;

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows, const TreeParams& params,
              std::uint64_t seed, Execution exec)
      : x_(x), rows_(rows.begin(), rows.end()), params_(params), rng_(seed), exec_(exec), p_(x.cols()) {
    local_y_.resize(rows_.size());
    for (std::size_t k = 0; k < rows_.size(); ++k) local_y_[k] = y[rows_[k]];
    centered_.resize(rows_.size());
    goes_left_.resize(rows_.size());
  }

  RegressionTree build() {
    if (rows_.empty()) throw DataError("cannot fit a tree on empty data");
    Lists lists(p_);
    for (std::size_t f = 0; f < p_; ++f) {
      auto& l = lists[f];
      l.resize(rows_.size());
      std::iota(l.begin(), l.end(), 0U);
      std::stable_sort(l.begin(), l.end(), [&](std::uint32_t a, std::uint32_t b) { return value(a, f) < value(b, f); });
    }
    if (p_ == 0) {
      lists.emplace_back(rows_.size());
      std::iota(lists[0].begin(), lists[0].end(), 0U);
    }
    grow(std::move(lists), 0);
    return RegressionTree(std::move(nodes_), p_);
  }

  // Best split among `features` for the node whose samples are `lists`.
  SplitCandidate best_split(const Lists& lists, const std::vector<std::size_t>& features, double parent_sse) {
    const std::size_t n = lists[0].size();
    std::vector<SplitCandidate> per_feature(features.size());
    auto scan = [&](std::size_t fi) { per_feature[fi] = scan_feature(lists[features[fi]], features[fi], parent_sse); };
    const auto nf = static_cast<std::ptrdiff_t>(features.size());
    if (exec_ == Execution::kParallel && n * features.size() >= 20000) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t fi = 0; fi < nf; ++fi) scan(static_cast<std::size_t>(fi));
    } else {
      for (std::ptrdiff_t fi = 0; fi < nf; ++fi) scan(static_cast<std::size_t>(fi));
    }
    const double tol = split_tie_tolerance(parent_sse);
    SplitCandidate best;
    for (const auto& c : per_feature) {
      if (c.valid() && (!best.valid() || c.gain > best.gain + tol)) best = c;
    }
    return best;
  }

  void center(const std::vector<std::uint32_t>& members, double mean) {
    for (std::uint32_t k : members) centered_[k] = local_y_[k] - mean;
  }

 private:
  double value(std::uint32_t k, std::size_t f) const { return x_(rows_[k], f); }

  SplitCandidate scan_feature(const std::vector<std::uint32_t>& order, std::size_t f, double parent_sse) const {
    const std::size_t n = order.size();
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    double total = 0.0;
    for (std::uint32_t k : order) total += centered_[k];
    const double base = total * total / static_cast<double>(n);
    const double tol = split_tie_tolerance(parent_sse);

    SplitCandidate best;
    double left = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left += centered_[order[i]];
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < min_leaf) continue;
      if (n_right < min_leaf) break;
      const double a = value(order[i], f);
      const double b = value(order[i + 1], f);
      if (!(a < b)) continue;
      const double right = total - left;
      const double gain = left * left / static_cast<double>(n_left) + right * right / static_cast<double>(n_right) - base;
      if (!best.valid() || gain > best.gain + tol) {
        double t = a + (b - a) / 2.0;
        if (!(t < b)) t = a;
        best = {static_cast<int>(f), t, gain};
      }
    }
    return best;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> features(p_);
    std::iota(features.begin(), features.end(), 0);
    const auto m = static_cast<std::size_t>(params_.max_features);
    if (params_.max_features > 0 && m < p_) {
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, p_ - 1);
        std::swap(features[i], features[pick(rng_)]);
      }
      features.resize(m);
      std::sort(features.begin(), features.end());
    }
    return features;
  }

  int grow(Lists lists, int depth) {
    const auto& members = lists[0];
    const std::size_t n = members.size();
    double sum = 0.0;
    for (std::uint32_t k : members) sum += local_y_[k];
    const double mean = sum / static_cast<double>(n);
    double sse = 0.0;
    for (std::uint32_t k : members) sse += (local_y_[k] - mean) * (local_y_[k] - mean);

    const int index = static_cast<int>(nodes_.size());
    TreeNode leaf;
    leaf.value = mean;
    leaf.samples = n;
    nodes_.push_back(leaf);

    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if (depth >= params_.max_depth || n < static_cast<std::size_t>(params_.min_samples_split) || n < 2 * min_leaf ||
        p_ == 0 || sse <= 0.0) {
      return index;
    }

    center(members, mean);
    const SplitCandidate split = best_split(lists, candidate_features(), sse);
    if (!split.valid() || split.gain <= split_tie_tolerance(sse)) return index;

    const auto f = static_cast<std::size_t>(split.feature);
    for (std::uint32_t k : members) goes_left_[k] = value(k, f) <= split.threshold ? 1 : 0;
    Lists left(p_);
    Lists right(p_);
    for (std::size_t g = 0; g < p_; ++g) {
      left[g].reserve(n);
      right[g].reserve(n);
      for (std::uint32_t k : lists[g]) (goes_left_[k] ? left[g] : right[g]).push_back(k);
      std::vector<std::uint32_t>().swap(lists[g]);
    }

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    node.gain = split.gain;
    return index;
  }

  const Matrix& x_;
  std::vector<std::size_t> rows_;
  std::vector<double> local_y_;
  std::vector<double> centered_;
  std::vector<char> goes_left_;
  TreeParams params_;
  std::mt19937_64 rng_;
  Execution exec_;
  std::size_t p_;
  std::vector<TreeNode> nodes_;
};

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

void check_xy(const Matrix& x, std::span<const double> y) {
  if (x.rows() == 0) throw DataError("cannot fit on empty data");
  if (y.size() != x.rows()) throw DataError("label count does not match rows");
}

}  // namespace

SplitCandidate find_best_split(const Matrix& x, std::span<const double> y, const TreeParams& params, Execution exec) {
  check_xy(x, y);
  const auto rows = all_rows(x.rows());
  TreeBuilder builder(x, y, rows, params, 0, exec);
  Lists lists(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& l = lists[f];
    l.resize(rows.size());
    std::iota(l.begin(), l.end(), 0U);
    std::stable_sort(l.begin(), l.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sse = 0.0;
  for (double v : y) sse += (v - mean) * (v - mean);
  builder.center(lists[0], mean);
  std::vector<std::size_t> features(x.cols());
  std::iota(features.begin(), features.end(), 0);
  return builder.best_split(lists, features, sse);
}

RegressionTree fit_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                        const TreeParams& params, std::uint64_t seed, Execution exec) {
  check_xy(x, y);
  return TreeBuilder(x, y, rows, params, seed, exec).build();
}

RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params, Execution exec) {
  check_xy(x, y);
  const auto rows = all_rows(x.rows());
  return TreeBuilder(x, y, rows, params, 0, exec).build();
}

double Forest::predict(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return trees.empty() ? 0.0 : sum / static_cast<double>(trees.size());
}

Forest fit_forest(const Matrix& x, std::span<const double> y, const ForestParams& params, std::uint64_t seed,
                  Execution exec) {
  check_xy(x, y);
  if (params.n_trees < 1) throw ConfigError("forest needs at least one tree");
  const std::size_t n = x.rows();
  TreeParams tree = params.tree;
  if (params.max_features == 0) {
    tree.max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
  } else {
    tree.max_features = params.max_features < 0 ? 0 : params.max_features;
  }

  Forest forest;
  forest.trees.resize(static_cast<std::size_t>(params.n_trees));
  auto one = [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      std::mt19937_64 rng(tree_seed);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    // Split search stays serial inside a tree; trees are the parallel unit.
    forest.trees[t] = fit_tree(x, y, rows, tree, splitmix64(tree_seed), Execution::kSerial);
  };
  const auto count = static_cast<std::ptrdiff_t>(params.n_trees);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < count; ++t) one(static_cast<std::size_t>(t));
  } else {
    for (std::ptrdiff_t t = 0; t < count; ++t) one(static_cast<std::size_t>(t));
  }
  return forest;
}

double Gbrt::predict(std::span<const double> x) const {
  double out = base;
  for (const auto& t : trees) out += shrinkage * t.predict(x);
  return out;
}

Gbrt fit_gbrt(const Matrix& x, std::span<const double> y, const GbrtParams& params, Execution exec) {
  check_xy(x, y);
  if (params.n_stages < 0) throw ConfigError("gbrt stage count must be non-negative");
  if (!(params.shrinkage > 0.0 && params.shrinkage <= 1.0)) throw ConfigError("gbrt shrinkage must lie in (0,1]");
  const std::size_t n = x.rows();
  Gbrt model;
  model.shrinkage = params.shrinkage;
  for (double v : y) model.base += v;
  model.base /= static_cast<double>(n);

  std::vector<double> f(n, model.base);
  std::vector<double> resid(n);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
    return s / static_cast<double>(n);
  };
  model.train_mse.push_back(mse());
  const auto rows = all_rows(n);
  for (int m = 0; m < params.n_stages; ++m) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - f[i];
    RegressionTree tree = fit_tree(x, resid, rows, params.tree, 0, exec);
    for (std::size_t i = 0; i < n; ++i) f[i] += params.shrinkage * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.train_mse.push_back(mse());
  }
  return model;
}

}  // namespace usat
