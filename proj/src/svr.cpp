#include "usat/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace usat {

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

Matrix rbf_kernel_matrix(const Matrix& x, double gamma, Execution exec) {
  const std::size_t n = x.rows();
  Matrix k(n, n);
  auto row = [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) k(i, j) = rbf_kernel(x.row(i), x.row(j), gamma);
  };
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t i = 0; i < count; ++i) row(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) row(static_cast<std::size_t>(i));
  }
  return k;
}

double svr_dual_objective(const Matrix& kernel, std::span<const double> y, std::span<const double> beta,
                          double epsilon) {
  const std::size_t n = beta.size();
  double quad = 0.0;
  double lin = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (beta[i] == 0.0) continue;
    double kb = 0.0;
    for (std::size_t j = 0; j < n; ++j) kb += kernel(i, j) * beta[j];
    quad += beta[i] * kb;
    lin += y[i] * beta[i];
    l1 += std::abs(beta[i]);
  }
  return -0.5 * quad + lin - epsilon * l1;
}

double SvrFit::predict(std::span<const double> x) const {
  double out = bias;
  for (std::size_t s = 0; s < coefficients.size(); ++s) {
    out += coefficients[s] * rbf_kernel(support_vectors.row(s), x, gamma);
  }
  return out;
}

namespace {

double sign_or(double v, double at_zero) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : at_zero); }

void warn_if_unstandardized(const Matrix& x) {
  for (std::size_t j = 0; j < x.cols(); ++j) {
    bool binary = true;
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      binary = binary && (v == 0.0 || v == 1.0);
      mean += v;
    }
    mean /= static_cast<double>(x.rows());
    if (!binary && std::abs(mean) > 0.5) {
      warn("svr: feature column " + std::to_string(j) + " looks unstandardized (mean " + std::to_string(mean) + ")");
      return;
    }
  }
}

}  // namespace

SvrFit fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params, Execution exec) {
  const std::size_t n = x.rows();
  if (n == 0) throw DataError("svr: empty training data");
  if (y.size() != n) throw DataError("svr: label count does not match rows");
  if (!(params.c > 0.0) || !(params.gamma > 0.0) || !(params.epsilon >= 0.0)) {
    throw ConfigError("svr: C and gamma must be positive, epsilon non-negative");
  }
  warn_if_unstandardized(x);

  const Matrix k = rbf_kernel_matrix(x, params.gamma, exec);
  const double c = params.c;
  const double eps = params.epsilon;
  std::vector<double> beta(n, 0.0);
  std::vector<double> grad(y.begin(), y.end());  // y - K·beta

  SvrFit fit;
  fit.gamma = params.gamma;
  double objective = 0.0;
  fit.dual_trace.push_back(objective);

  long it = 0;
  for (; it < params.max_iterations; ++it) {
    // Steepest feasible ascent rates for raising (up) or lowering (down) a coordinate.
    std::size_t i = n;
    double best_up = -std::numeric_limits<double>::infinity();
    std::size_t j1 = n;
    std::size_t j2 = n;
    double down1 = -std::numeric_limits<double>::infinity();
    double down2 = down1;
    for (std::size_t t = 0; t < n; ++t) {
      if (beta[t] < c) {
        const double up = grad[t] - eps * sign_or(beta[t], 1.0);
        if (up > best_up) {
          best_up = up;
          i = t;
        }
      }
      if (beta[t] > -c) {
        const double down = -grad[t] + eps * sign_or(beta[t], -1.0);
        if (down > down1) {
          down2 = down1;
          j2 = j1;
          down1 = down;
          j1 = t;
        } else if (down > down2) {
          down2 = down;
          j2 = t;
        }
      }
    }
    const std::size_t j = j1 != i ? j1 : j2;
    const double best_down = j1 != i ? down1 : down2;
    if (i == n || j == n || best_up + best_down < params.tol) break;

    const double eta = std::max(0.0, k(i, i) + k(j, j) - 2.0 * k(i, j));
    const double dg = grad[i] - grad[j];
    const double limit = std::min(c - beta[i], beta[j] + c);
    auto phi = [&](double t) {
      return t * dg - 0.5 * eta * t * t - eps * (std::abs(beta[i] + t) - std::abs(beta[i])) -
             eps * (std::abs(beta[j] - t) - std::abs(beta[j]));
    };

    double knots[4] = {0.0, limit, limit, limit};
    int nk = 2;
    if (-beta[i] > 0.0 && -beta[i] < limit) knots[nk++] = -beta[i];
    if (beta[j] > 0.0 && beta[j] < limit) knots[nk++] = beta[j];
    std::sort(knots, knots + nk);

    double step = 0.0;
    double gain = 0.0;
    for (int s = 0; s + 1 < nk; ++s) {
      const double a = knots[s];
      const double b = knots[s + 1];
      if (!(b > a)) continue;
      const double mid = 0.5 * (a + b);
      const double slope = dg - eps * sign_or(beta[i] + mid, 0.0) + eps * sign_or(beta[j] - mid, 0.0);
      double t = eta > 0.0 ? std::clamp(slope / eta, a, b) : (slope > 0.0 ? b : a);
      const double v = phi(t);
      if (v > gain) {
        gain = v;
        step = t;
      }
    }
    if (!(step > 0.0)) break;

    const double new_i = step == c - beta[i] ? c : beta[i] + step;
    const double new_j = step == beta[j] + c ? -c : beta[j] - step;
    const double di = new_i - beta[i];
    const double dj = new_j - beta[j];
    beta[i] = new_i;
    beta[j] = new_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] -= di * k(t, i) + dj * k(t, j);
    objective += gain;
    if ((it + 1) % static_cast<long>(n) == 0) fit.dual_trace.push_back(objective);
  }
  fit.iterations = it;
  fit.dual_trace.push_back(objective);
  if (it >= params.max_iterations) warn("svr: iteration limit reached before KKT tolerance");

  // Bias from free support vectors, else the midpoint of the feasible interval.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double g = grad[t];
    if (beta[t] > 0.0 && beta[t] < c) {
      free_sum += g - eps;
      ++free_count;
    } else if (beta[t] < 0.0 && beta[t] > -c) {
      free_sum += g + eps;
      ++free_count;
    } else if (beta[t] == 0.0) {
      lower = std::max(lower, g - eps);
      upper = std::min(upper, g + eps);
    } else if (beta[t] >= c) {
      upper = std::min(upper, g - eps);
    } else {
      lower = std::max(lower, g + eps);
    }
  }
  if (free_count > 0) {
    fit.bias = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    fit.bias = 0.5 * (lower + upper);
  } else {
    fit.bias = std::isfinite(lower) ? lower : (std::isfinite(upper) ? upper : 0.0);
  }

  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (beta[t] != 0.0) sv.push_back(t);
  }
  fit.support_vectors = x.select_rows(sv);
  for (std::size_t t : sv) fit.coefficients.push_back(beta[t]);
  return fit;
}

}  // namespace usat
