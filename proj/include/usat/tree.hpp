#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "usat/common.hpp"
#include "usat/matrix.hpp"

namespace usat {

struct TreeParams {
  int max_depth = 33;
  int min_samples_leaf = 31;
  int min_samples_split = 23;
  // Features considered per split; 0 means all of them.
  int max_features = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  std::size_t samples = 0;
  double gain = 0.0;  // reduction of summed squared deviations
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes, std::size_t n_features)
      : nodes_(std::move(nodes)), n_features_(n_features) {}

  double predict(std::span<const double> x) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t n_features() const { return n_features_; }
  int depth() const;
  std::size_t leaf_count() const;

  // Summed gain per feature (unnormalized).
  std::vector<double> impurity_importance() const;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;

  bool valid() const { return feature >= 0; }
};

// Gains within this relative band of each other count as ties.
double split_tie_tolerance(double parent_sse);

// Best root split over all features honoring the leaf-size constraint;
// ties go to the lowest feature index, then lowest threshold.
SplitCandidate find_best_split(const Matrix& x, std::span<const double> y, const TreeParams& params,
                               Execution exec = Execution::kParallel);

// Fits on the rows listed in `rows` (duplicates allowed for bootstrap
// resamples). `seed` drives per-split feature subsampling only.
RegressionTree fit_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                        const TreeParams& params, std::uint64_t seed = 0, Execution exec = Execution::kParallel);

RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params,
                        Execution exec = Execution::kParallel);

struct ForestParams {
  TreeParams tree{49, 11, 27, 0};
  int n_trees = 100;
  bool bootstrap = true;
  // 0 selects ceil(sqrt(p)); negative selects all features.
  int max_features = 0;
};

struct Forest {
  std::vector<RegressionTree> trees;
  double predict(std::span<const double> x) const;
};

Forest fit_forest(const Matrix& x, std::span<const double> y, const ForestParams& params, std::uint64_t seed,
                  Execution exec = Execution::kParallel);

struct GbrtParams {
  TreeParams tree{23, 17, 59, 0};
  int n_stages = 100;
  double shrinkage = 0.1;
};

struct Gbrt {
  double base = 0.0;
  double shrinkage = 0.1;
  std::vector<RegressionTree> trees;
  // Training MSE after each stage; index 0 is the constant model.
  std::vector<double> train_mse;

  double predict(std::span<const double> x) const;
};

Gbrt fit_gbrt(const Matrix& x, std::span<const double> y, const GbrtParams& params,
              Execution exec = Execution::kParallel);

}  // namespace usat
