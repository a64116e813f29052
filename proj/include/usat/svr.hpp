#pragma once

#include <span>
#include <vector>

#include "usat/common.hpp"
#include "usat/matrix.hpp"

namespace usat {

struct SvrParams {
  double c = 2.0;
  double gamma = 0.024;
  double epsilon = 0.1;
  double tol = 1e-3;  // KKT violation tolerance
  long max_iterations = 10'000'000;
};

struct SvrFit {
  Matrix support_vectors;
  std::vector<double> coefficients;  // alpha_i - alpha_i* per support vector
  double bias = 0.0;
  double gamma = 0.0;
  long iterations = 0;
  // Dual objective sampled at the end of each pass of n pair updates.
  std::vector<double> dual_trace;

  double predict(std::span<const double> x) const;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// Full symmetric Gram matrix, one row per OpenMP work item.
Matrix rbf_kernel_matrix(const Matrix& x, double gamma, Execution exec = Execution::kParallel);

// Dual of epsilon-insensitive regression in the signed form
//   D(b) = -1/2 bᵀKb + yᵀb - eps·Σ|b_i|,  Σ b_i = 0,  |b_i| <= C.
double svr_dual_objective(const Matrix& kernel, std::span<const double> y, std::span<const double> beta,
                          double epsilon);

// Sequential pairwise dual ascent: the maximal KKT-violating pair is moved
// along the equality-preserving direction by an exact piecewise line search.
SvrFit fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params,
               Execution exec = Execution::kParallel);

}  // namespace usat
