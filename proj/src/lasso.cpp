#include "usat/lasso.hpp"

#include <cmath>

#include "usat/common.hpp"

namespace usat {

double LassoFit::predict(std::span<const double> x) const {
  double out = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) out += weights[j] * x[j];
  return out;
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

double lasso_objective(const Matrix& x, std::span<const double> y, std::span<const double> w, double b,
                       double alpha) {
  const std::size_t n = x.rows();
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - b;
    for (std::size_t j = 0; j < w.size(); ++j) r -= x(i, j) * w[j];
    rss += r * r;
  }
  double l1 = 0.0;
  for (double v : w) l1 += std::abs(v);
  return rss / (2.0 * static_cast<double>(n)) + alpha * l1;
}

LassoFit fit_lasso(const Matrix& x, std::span<const double> y, const LassoParams& params) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (n < 2) throw DataError("lasso needs at least two samples");
  if (y.size() != n) throw DataError("lasso: label count does not match rows");
  if (!(params.alpha >= 0.0)) throw ConfigError("lasso alpha must be non-negative");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("lasso: non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("lasso: non-finite label");
  }

  const double nd = static_cast<double>(n);
  std::vector<double> xmean(p, 0.0);
  double ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ymean += y[i];
    for (std::size_t j = 0; j < p; ++j) xmean[j] += x(i, j);
  }
  ymean /= nd;
  for (double& m : xmean) m /= nd;

  // Column-major centered copy for contiguous coordinate updates.
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<double> sq(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      cols[j][i] = x(i, j) - xmean[j];
      sq[j] += cols[j][i] * cols[j][i];
    }
    sq[j] /= nd;
  }

  LassoFit fit;
  fit.weights.assign(p, 0.0);
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - ymean;

  auto intercept = [&] {
    double b = ymean;
    for (std::size_t j = 0; j < p; ++j) b -= xmean[j] * fit.weights[j];
    return b;
  };
  fit.objective_trace.push_back(lasso_objective(x, y, fit.weights, intercept(), params.alpha));

  for (int sweep = 1; sweep <= params.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (sq[j] == 0.0) continue;
      const double old = fit.weights[j];
      double c = 0.0;
      const auto& col = cols[j];
      for (std::size_t i = 0; i < n; ++i) c += col[i] * resid[i];
      c = c / nd + sq[j] * old;
      const double updated = soft_threshold(c, params.alpha) / sq[j];
      const double delta = updated - old;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) resid[i] -= col[i] * delta;
        fit.weights[j] = updated;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    fit.sweeps = sweep;
    fit.objective_trace.push_back(lasso_objective(x, y, fit.weights, intercept(), params.alpha));
    if (max_delta < params.tol) break;
  }
  fit.intercept = intercept();
  return fit;
}

}  // namespace usat
