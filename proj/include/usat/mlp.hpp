#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "usat/matrix.hpp"

namespace usat {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MlpParams {
  int hidden_layers = 3;
  int hidden_size = 100;
  int batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 200;
  // Multiplies the fan-in scaled initial weight spread; 0 gives zero weights.
  double init_scale = 1.0;
};

// Fully connected ReLU network with a single linear output. All parameters
// live in one flat vector: for each layer, row-major weights then biases.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t inputs, int hidden_layers, int hidden_size);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + widths_[layer] * widths_[layer + 1]; }

  double predict(std::span<const double> x) const;

  // Loss = (1/2m)·Σ(f(x) - y)² over the given rows; gradient has the layout
  // of parameters(). `pattern`, when non-null, receives the ReLU on/off mask.
  double loss_and_gradient(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                           std::vector<double>& grad, std::vector<char>* pattern = nullptr) const;

  double loss(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
              std::vector<char>* pattern = nullptr) const;

  void initialize(double scale, double output_bias, std::uint64_t seed);

  void assign(std::vector<std::size_t> widths, std::vector<double> params);

 private:
  void forward(std::span<const double> x, std::vector<std::vector<double>>& acts) const;

  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct MlpFit {
  Mlp net;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
};

// Mini-batch SGD with momentum; deterministic for a seed.
MlpFit fit_mlp(const Matrix& x, std::span<const double> y, const MlpParams& params, std::uint64_t seed);

}  // namespace usat
