#include "cotcheck/mlp.hpp"

#include "cotcheck/corpus.hpp"
#include "cotcheck/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace cotcheck {
namespace {

constexpr std::uint32_t kModelMagic = 0x4d4c5043;  // "CPLM"
constexpr std::uint32_t kModelVersion = 1;

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Activations for one sample across all layers; kept flat per layer.
struct ForwardState {
  std::vector<std::vector<double>> pre;   // pre-activation per non-input layer
  std::vector<std::vector<double>> post;  // activations, post[0] = input copy
};

void forward_pass(const MlpModel& model, std::span<const double> x, ForwardState& state) {
  const std::size_t layers = model.weights.size();
  state.pre.resize(layers);
  state.post.resize(layers + 1);
  state.post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in_dim = model.layer_dims[l];
    const std::size_t out_dim = model.layer_dims[l + 1];
    auto& z = state.pre[l];
    z.assign(model.biases[l].begin(), model.biases[l].end());
    const auto& w = model.weights[l];
    const auto& a = state.post[l];
    for (std::size_t i = 0; i < in_dim; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      const double* wrow = w.data() + i * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) z[j] += ai * wrow[j];
    }
    auto& out = state.post[l + 1];
    out.resize(out_dim);
    const bool last = (l + 1 == layers);
    for (std::size_t j = 0; j < out_dim; ++j) {
      out[j] = last ? sigmoid(z[j]) : std::max(0.0, z[j]);
    }
  }
}

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  explicit Gradients(const MlpModel& model) {
    weights.reserve(model.weights.size());
    biases.reserve(model.biases.size());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      weights.emplace_back(model.weights[l].size(), 0.0);
      biases.emplace_back(model.biases[l].size(), 0.0);
    }
  }

  void zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  }
};

// Accumulates d(weighted BCE)/d(params) for one sample, scaled by `scale`.
void backprop_sample(const MlpModel& model, const ForwardState& state, int label,
                     double sample_weight, double scale, Gradients& grads) {
  const std::size_t layers = model.weights.size();
  const double p = state.post[layers][0];
  // dL/dz_out for BCE through the sigmoid
  std::vector<double> delta{sample_weight * scale * (p - static_cast<double>(label))};

  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in_dim = model.layer_dims[l];
    const std::size_t out_dim = model.layer_dims[l + 1];
    const auto& a = state.post[l];
    auto& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    for (std::size_t j = 0; j < out_dim; ++j) gb[j] += delta[j];
    for (std::size_t i = 0; i < in_dim; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      double* grow = gw.data() + i * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) grow[j] += ai * delta[j];
    }
    if (l == 0) break;
    std::vector<double> prev(in_dim, 0.0);
    const auto& w = model.weights[l];
    for (std::size_t i = 0; i < in_dim; ++i) {
      if (state.pre[l - 1][i] <= 0.0) continue;  // ReLU gate
      const double* wrow = w.data() + i * out_dim;
      double acc = 0.0;
      for (std::size_t j = 0; j < out_dim; ++j) acc += wrow[j] * delta[j];
      prev[i] = acc;
    }
    delta = std::move(prev);
  }
}

void check_training_input(const Matrix& features, const std::vector<int>& labels) {
  if (features.rows != labels.size() || features.rows == 0) {
    throw DataError("train: features and labels must be non-empty and equal-length");
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw DataError("train: features contain non-finite values");
  }
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y == 0) has0 = true;
    else if (y == 1) has1 = true;
    else throw DataError("train: labels must be 0/1");
  }
  if (!has0 || !has1) throw DataError("train: both classes must be present");
}

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

std::pair<double, double> class_weights(const std::vector<int>& labels) {
  std::size_t n0 = 0, n1 = 0;
  for (int y : labels) {
    if (y == 0) ++n0;
    else if (y == 1) ++n1;
    else throw DataError("class_weights: labels must be 0/1");
  }
  if (n0 == 0 || n1 == 0) throw DataError("class_weights: both classes must be present");
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
}

MlpModel init_model(std::size_t feature_dim, std::uint64_t seed) {
  if (feature_dim == 0) throw DataError("init_model: feature_dim must be >= 1");
  MlpModel model;
  model.seed = seed;
  model.layer_dims = {feature_dim, 32, 16, 1};
  Rng rng(derive_seed(seed, "init"));
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const std::size_t in_dim = model.layer_dims[l];
    const std::size_t out_dim = model.layer_dims[l + 1];
    const double limit = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::vector<double> w(in_dim * out_dim);
    for (auto& v : w) v = rng.uniform(-limit, limit);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(out_dim, 0.0);
  }
  return model;
}

double forward(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.feature_dim()) {
    throw DataError("forward: input has dimension " + std::to_string(x.size()) +
                    ", model expects " + std::to_string(model.feature_dim()));
  }
  ForwardState state;
  forward_pass(model, x, state);
  return state.post.back()[0];
}

int predict_label(const MlpModel& model, std::span<const double> x, double threshold) {
  return forward(model, x) >= threshold ? 1 : 0;
}

double weighted_bce_loss(const MlpModel& model, const Matrix& features,
                         const std::vector<int>& labels,
                         std::pair<double, double> class_wts) {
  if (features.rows != labels.size() || features.rows == 0) {
    throw DataError("weighted_bce_loss: bad input sizes");
  }
  constexpr double eps = 1e-12;
  double sum = 0.0;
  ForwardState state;
  for (std::size_t r = 0; r < features.rows; ++r) {
    forward_pass(model, features.row(r), state);
    const double p = std::clamp(state.post.back()[0], eps, 1.0 - eps);
    const int y = labels[r];
    const double w = y == 1 ? class_wts.second : class_wts.first;
    sum += -w * (y == 1 ? std::log(p) : std::log1p(-p));
  }
  return sum / static_cast<double>(features.rows);
}

std::vector<double> loss_gradient(const MlpModel& model, const Matrix& features,
                                  const std::vector<int>& labels,
                                  std::pair<double, double> class_wts) {
  if (features.rows != labels.size() || features.rows == 0) {
    throw DataError("loss_gradient: bad input sizes");
  }
  Gradients grads(model);
  ForwardState state;
  const double scale = 1.0 / static_cast<double>(features.rows);
  for (std::size_t r = 0; r < features.rows; ++r) {
    forward_pass(model, features.row(r), state);
    const int y = labels[r];
    const double w = y == 1 ? class_wts.second : class_wts.first;
    backprop_sample(model, state, y, w, scale, grads);
  }
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    flat.insert(flat.end(), grads.weights[l].begin(), grads.weights[l].end());
    flat.insert(flat.end(), grads.biases[l].begin(), grads.biases[l].end());
  }
  return flat;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    flat.insert(flat.end(), model.weights[l].begin(), model.weights[l].end());
    flat.insert(flat.end(), model.biases[l].begin(), model.biases[l].end());
  }
  return flat;
}

void set_parameters(MlpModel& model, const std::vector<double>& flat) {
  if (flat.size() != model.parameter_count()) {
    throw DataError("set_parameters: size mismatch");
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (auto& v : model.weights[l]) v = flat[k++];
    for (auto& v : model.biases[l]) v = flat[k++];
  }
}

TrainResult train(const Matrix& features, const std::vector<int>& labels,
                  const TrainConfig& config, std::uint64_t seed) {
  check_training_input(features, labels);
  if (config.epochs < 1 || config.batch_size < 1) {
    throw DataError("train: epochs and batch_size must be >= 1");
  }
  if (config.learning_rate <= 0.0 || config.class_weights.first <= 0.0 ||
      config.class_weights.second <= 0.0) {
    throw DataError("train: learning rate and class weights must be positive");
  }

  TrainResult result;
  result.model = init_model(features.cols, seed);
  result.model.train_config = config;
  MlpModel& model = result.model;

  Gradients grads(model);
  Gradients adam_m(model);
  Gradients adam_v(model);
  ForwardState state;

  Rng shuffle_rng(derive_seed(seed ^ config.shuffle_seed, "shuffle"));
  std::vector<std::size_t> order(features.rows);
  std::iota(order.begin(), order.end(), 0);

  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double eps = config.adam_epsilon;
  long long step = 0;
  constexpr double clip = 1e-12;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double batch_n = static_cast<double>(end - start);
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t r = order[k];
        forward_pass(model, features.row(r), state);
        const int y = labels[r];
        const double w = y == 1 ? config.class_weights.second : config.class_weights.first;
        const double p = std::clamp(state.post.back()[0], clip, 1.0 - clip);
        epoch_loss += -w * (y == 1 ? std::log(p) : std::log1p(-p));
        backprop_sample(model, state, y, w, 1.0 / batch_n, grads);
      }
      ++step;
      const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
          for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + eps);
          }
        };
        update(model.weights[l], grads.weights[l], adam_m.weights[l], adam_v.weights[l]);
        update(model.biases[l], grads.biases[l], adam_m.biases[l], adam_v.biases[l]);
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train: loss became non-finite at epoch " +
                               std::to_string(epoch) + "; check feature scaling");
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_model: cannot open " + path);
  write_raw(out, kModelMagic);
  write_raw(out, kModelVersion);
  write_raw(out, model.seed);
  write_raw(out, model.train_config.learning_rate);
  write_raw(out, model.train_config.adam_beta1);
  write_raw(out, model.train_config.adam_beta2);
  write_raw(out, model.train_config.adam_epsilon);
  write_raw(out, model.train_config.epochs);
  write_raw(out, model.train_config.batch_size);
  write_raw(out, model.train_config.class_weights.first);
  write_raw(out, model.train_config.class_weights.second);
  write_raw(out, model.train_config.shuffle_seed);
  const std::uint32_t n_dims = static_cast<std::uint32_t>(model.layer_dims.size());
  write_raw(out, n_dims);
  for (std::size_t d : model.layer_dims) {
    const std::uint64_t v = d;
    write_raw(out, v);
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    out.write(reinterpret_cast<const char*>(model.weights[l].data()),
              static_cast<std::streamsize>(model.weights[l].size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.biases[l].data()),
              static_cast<std::streamsize>(model.biases[l].size() * sizeof(double)));
  }
  if (!out) throw DataError("save_model: write failed for " + path);
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_model: cannot open " + path);
  std::uint32_t magic = 0, version = 0;
  read_raw(in, magic);
  read_raw(in, version);
  if (magic != kModelMagic) throw DataError("load_model: not a model file: " + path);
  if (version != kModelVersion) {
    throw DataError("load_model: unsupported version " + std::to_string(version));
  }
  MlpModel model;
  read_raw(in, model.seed);
  read_raw(in, model.train_config.learning_rate);
  read_raw(in, model.train_config.adam_beta1);
  read_raw(in, model.train_config.adam_beta2);
  read_raw(in, model.train_config.adam_epsilon);
  read_raw(in, model.train_config.epochs);
  read_raw(in, model.train_config.batch_size);
  read_raw(in, model.train_config.class_weights.first);
  read_raw(in, model.train_config.class_weights.second);
  read_raw(in, model.train_config.shuffle_seed);
  std::uint32_t n_dims = 0;
  read_raw(in, n_dims);
  if (!in || n_dims < 2 || n_dims > 16) throw DataError("load_model: corrupt header");
  model.layer_dims.resize(n_dims);
  for (auto& d : model.layer_dims) {
    std::uint64_t v = 0;
    read_raw(in, v);
    d = static_cast<std::size_t>(v);
  }
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    std::vector<double> w(model.layer_dims[l] * model.layer_dims[l + 1]);
    std::vector<double> b(model.layer_dims[l + 1]);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  if (!in) throw DataError("load_model: truncated file: " + path);
  return model;
}

}  // namespace cotcheck
