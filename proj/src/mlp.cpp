#include "usat/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "usat/common.hpp"

namespace usat {

Mlp::Mlp(std::size_t inputs, int hidden_layers, int hidden_size) {
  if (hidden_layers < 0 || hidden_size < 1) throw ConfigError("mlp: invalid layer configuration");
  std::vector<std::size_t> widths = {inputs};
  for (int l = 0; l < hidden_layers; ++l) widths.push_back(static_cast<std::size_t>(hidden_size));
  widths.push_back(1);
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) total += widths[l] * widths[l + 1] + widths[l + 1];
  assign(std::move(widths), std::vector<double>(total, 0.0));
}

void Mlp::assign(std::vector<std::size_t> widths, std::vector<double> params) {
  widths_ = std::move(widths);
  offsets_.clear();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(off);
    off += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
  if (params.size() != off) throw DataError("mlp: parameter count does not match layer widths");
  params_ = std::move(params);
}

void Mlp::initialize(double scale, double output_bias, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::fill(params_.begin(), params_.end(), 0.0);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const bool last = l + 1 == layer_count();
    const double sd = scale * std::sqrt((last ? 1.0 : 2.0) / static_cast<double>(std::max<std::size_t>(in, 1)));
    for (std::size_t k = 0; k < in * out; ++k) {
      const double z = normal(rng);
      params_[offsets_[l] + k] = sd * z;
    }
  }
  params_[bias_offset(layer_count() - 1)] = output_bias;
}

void Mlp::forward(std::span<const double> x, std::vector<std::vector<double>>& acts) const {
  acts.resize(widths_.size());
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + in * out;
    const bool hidden = l + 1 < layer_count();
    auto& next = acts[l + 1];
    next.resize(out);
    const double* a = acts[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = w + o * in;
      double z = b[o];
      for (std::size_t i = 0; i < in; ++i) z += wr[i] * a[i];
      next[o] = hidden ? (z > 0.0 ? z : 0.0) : z;
    }
  }
}

double Mlp::predict(std::span<const double> x) const {
  std::vector<std::vector<double>> acts;
  forward(x, acts);
  return acts.back()[0];
}

double Mlp::loss(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                 std::vector<char>* pattern) const {
  std::vector<std::vector<double>> acts;
  double sum = 0.0;
  if (pattern) pattern->clear();
  for (std::size_t r : rows) {
    forward(x.row(r), acts);
    const double e = acts.back()[0] - y[r];
    sum += e * e;
    if (pattern) {
      for (std::size_t l = 1; l + 1 < acts.size(); ++l) {
        for (double a : acts[l]) pattern->push_back(a > 0.0 ? 1 : 0);
      }
    }
  }
  return sum / (2.0 * static_cast<double>(rows.size()));
}

double Mlp::loss_and_gradient(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                              std::vector<double>& grad, std::vector<char>* pattern) const {
  grad.assign(params_.size(), 0.0);
  if (pattern) pattern->clear();
  const double m = static_cast<double>(rows.size());
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev;
  double sum = 0.0;
  for (std::size_t r : rows) {
    forward(x.row(r), acts);
    const double e = acts.back()[0] - y[r];
    sum += e * e;
    if (pattern) {
      for (std::size_t l = 1; l + 1 < acts.size(); ++l) {
        for (double a : acts[l]) pattern->push_back(a > 0.0 ? 1 : 0);
      }
    }
    delta.assign(1, e / m);
    for (std::size_t l = layer_count(); l-- > 0;) {
      const std::size_t in = widths_[l];
      const std::size_t out = widths_[l + 1];
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + in * out;
      const double* a = acts[l].data();
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* gwr = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += d * a[i];
        gb[o] += d;
      }
      if (l == 0) break;
      prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += wr[i] * d;
      }
      for (std::size_t i = 0; i < in; ++i) {
        if (!(a[i] > 0.0)) prev[i] = 0.0;
      }
      delta.swap(prev);
    }
  }
  return sum / (2.0 * m);
}

MlpFit fit_mlp(const Matrix& x, std::span<const double> y, const MlpParams& params, std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (n == 0) throw DataError("mlp: empty training data");
  if (y.size() != n) throw DataError("mlp: label count does not match rows");
  if (params.batch_size < 1 || params.epochs < 0) throw ConfigError("mlp: invalid batch size or epoch count");

  MlpFit fit;
  fit.net = Mlp(x.cols(), params.hidden_layers, params.hidden_size);
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  fit.net.initialize(params.init_scale, mean_y, derive_seed(seed, 0));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  fit.initial_loss = fit.net.loss(x, y, order);

  std::vector<double>& w = fit.net.parameters();
  std::vector<double> velocity(w.size(), 0.0);
  std::vector<double> grad;
  std::mt19937_64 rng(derive_seed(seed, 1));
  const auto batch = static_cast<std::size_t>(params.batch_size);
  int blown = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      const double l = fit.net.loss_and_gradient(x, y, rows, grad);
      total += l * static_cast<double>(rows.size());
      for (std::size_t k = 0; k < w.size(); ++k) {
        velocity[k] = params.momentum * velocity[k] - params.learning_rate * grad[k];
        w[k] += velocity[k];
      }
    }
    const double epoch_loss = total / static_cast<double>(n);
    fit.epoch_loss.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("mlp: training diverged (non-finite loss); lower the learning rate");
    }
    blown = epoch_loss > 10.0 * std::max(fit.initial_loss, 1e-8) ? blown + 1 : 0;
    if (blown >= 5) {
      throw TrainingError("mlp: loss above 10x its initial value for 5 epochs at epoch " + std::to_string(epoch + 1) +
                          "; lower the learning rate");
    }
  }
  return fit;
}

}  // namespace usat
