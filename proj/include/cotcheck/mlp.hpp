#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cotcheck {

// Row-major dense matrix of feature rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data.data() + r * cols, cols);
  }
};

struct TrainConfig {
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 100;
  int batch_size = 32;
  std::pair<double, double> class_weights{1.0, 1.0};  // (class 0, class 1)
  std::uint64_t shuffle_seed = 0;
};

// Feed-forward net with rectified hidden layers (32 and 16 units) and a
// logistic output unit.
struct MlpModel {
  std::vector<std::size_t> layer_dims;          // {F, 32, 16, 1}
  std::vector<std::vector<double>> weights;     // per layer, in*out row-major
  std::vector<std::vector<double>> biases;      // per layer
  TrainConfig train_config;
  std::uint64_t seed = 0;

  std::size_t feature_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
  std::size_t parameter_count() const;
};

// Balanced inverse-frequency weights: w_c = N / (2 * N_c). Both classes must
// be present.
std::pair<double, double> class_weights(const std::vector<int>& labels);

// Seeded fan-in-scaled uniform weights, zero biases. Same seed gives a
// bit-identical model.
MlpModel init_model(std::size_t feature_dim, std::uint64_t seed);

// P(correct) for one feature row.
double forward(const MlpModel& model, std::span<const double> x);

int predict_label(const MlpModel& model, std::span<const double> x, double threshold = 0.5);

// Mean class-weighted binary cross-entropy over the batch.
double weighted_bce_loss(const MlpModel& model, const Matrix& features,
                         const std::vector<int>& labels,
                         std::pair<double, double> class_wts);

// Analytic gradient of weighted_bce_loss with respect to the flat parameter
// vector (exposed so tests can compare against finite differences).
std::vector<double> loss_gradient(const MlpModel& model, const Matrix& features,
                                  const std::vector<int>& labels,
                                  std::pair<double, double> class_wts);

std::vector<double> flatten_parameters(const MlpModel& model);
void set_parameters(MlpModel& model, const std::vector<double>& flat);

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_losses;  // mean weighted BCE per epoch
};

// Minibatch Adam on the class-weighted BCE. Fully determined by
// (features, labels, config, seed); aborts with a diagnostic if the loss
// turns non-finite.
TrainResult train(const Matrix& features, const std::vector<int>& labels,
                  const TrainConfig& config, std::uint64_t seed);

// Versioned binary parameter dump with the config and seed embedded;
// round-trips bit-exactly.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace cotcheck
