#pragma once

#include <span>
#include <vector>

#include "usat/matrix.hpp"

namespace usat {

struct LassoParams {
  double alpha = 0.001;
  double tol = 1e-6;  // max absolute coefficient change per sweep
  int max_sweeps = 10000;
};

struct LassoFit {
  std::vector<double> weights;
  double intercept = 0.0;
  int sweeps = 0;
  // Objective after each full coordinate sweep (index 0 = start).
  std::vector<double> objective_trace;

  double predict(std::span<const double> x) const;
};

// (1/2n)·||y - Xw - b||² + alpha·||w||₁
double lasso_objective(const Matrix& x, std::span<const double> y, std::span<const double> w, double b,
                       double alpha);

double soft_threshold(double value, double threshold);

// Cyclic coordinate descent; the intercept is profiled out by centering.
LassoFit fit_lasso(const Matrix& x, std::span<const double> y, const LassoParams& params);

}  // namespace usat
