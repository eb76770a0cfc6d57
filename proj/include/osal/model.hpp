#pragma once

#include "osal/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace osal {

enum class OptimizerKind { sgd, adam };
enum class Activation { relu, elu, tanh };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

struct ClassifierConfig {
  int input_dim = 0;
  std::vector<int> hidden = {32};  // empty = linear softmax
  int num_classes = 0;
  double learning_rate = 5e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  Activation activation = Activation::elu;
  int batch_size = 32;
  int semi_batch_size = 64;  // labeled + unlabeled halves together
  int epochs_supervised = 10;
  int epochs_semi = 3;
  // Optional shared backbone: flat parameters of every layer except the
  // output layer. The output layer is always drawn from the seed.
  std::vector<double> warm_start;

  void validate() const {
    if (input_dim < 1) throw std::invalid_argument("model: input_dim must be positive");
    if (num_classes < 1) throw std::invalid_argument("model: num_classes must be positive");
    for (int h : hidden)
      if (h < 1) throw std::invalid_argument("model: hidden sizes must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("model: learning_rate must be positive");
    if (batch_size < 1 || semi_batch_size < 1) throw std::invalid_argument("model: batch sizes must be positive");
    if (epochs_supervised < 1 || epochs_semi < 1) throw std::invalid_argument("model: epochs must be positive");
    if (!warm_start.empty() && warm_start.size() != backbone_parameter_count())
      throw std::invalid_argument("model: warm_start size does not match the hidden layers");
  }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(num_classes);
    return sizes;
  }

  std::size_t parameter_count() const { return backbone_parameter_count() + head_parameter_count(); }

  std::size_t backbone_parameter_count() const {
    const auto sizes = layer_sizes();
    std::size_t n = 0;
    for (std::size_t l = 1; l + 1 < sizes.size(); ++l)
      n += static_cast<std::size_t>(sizes[l - 1] + 1) * static_cast<std::size_t>(sizes[l]);
    return n;
  }

  std::size_t head_parameter_count() const {
    const int in = hidden.empty() ? input_dim : hidden.back();
    return static_cast<std::size_t>(in + 1) * static_cast<std::size_t>(num_classes);
  }
};

// ---------------------------------------------------------------------------
// Softmax helpers

/// Column-wise softmax, shifted by the column max.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_columns(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
  out.array().rowwise() /= out.colwise().sum().array();
  return out;
}

/// log-sum-exp per column.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> log_sum_exp_columns(
    const Eigen::MatrixBase<Derived>& logits) {
  const auto max = logits.colwise().maxCoeff().eval();
  return (max.array() + (logits.rowwise() - max).array().exp().colwise().sum().log()).matrix();
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

// ---------------------------------------------------------------------------
// Training data

template <typename Scalar = double>
struct WeightedExamples {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> features;  // dim x n
  std::vector<int> labels;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  int size() const { return static_cast<int>(labels.size()); }

  void validate(int num_classes, int input_dim) const {
    if (labels.empty()) throw std::invalid_argument("train: empty example list");
    if (features.cols() != static_cast<Eigen::Index>(labels.size()) ||
        weights.size() != static_cast<Eigen::Index>(labels.size()))
      throw std::invalid_argument("train: features, labels and weights disagree in length");
    if (features.rows() != input_dim) throw std::invalid_argument("train: feature dimension mismatch");
    for (int y : labels)
      if (y < 0 || y >= num_classes) throw std::invalid_argument("train: label out of range");
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      if (!(weights[i] >= Scalar(0))) throw std::invalid_argument("train: negative weight");
  }

  WeightedExamples subset(std::span<const std::size_t> idx) const {
    WeightedExamples out;
    out.features.resize(features.rows(), static_cast<Eigen::Index>(idx.size()));
    out.weights.resize(static_cast<Eigen::Index>(idx.size()));
    out.labels.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.features.col(static_cast<Eigen::Index>(i)) = features.col(static_cast<Eigen::Index>(idx[i]));
      out.weights[static_cast<Eigen::Index>(i)] = weights[static_cast<Eigen::Index>(idx[i])];
      out.labels.push_back(labels[idx[i]]);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Multilayer perceptron

template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;

    friend bool operator==(const Layer& a, const Layer& b) { return a.weight == b.weight && a.bias == b.bias; }
  };

  Mlp() = default;

  /// All-zero parameters.
  explicit Mlp(ClassifierConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto sizes = config_.layer_sizes();
    for (std::size_t l = 1; l < sizes.size(); ++l)
      layers_.push_back({Matrix::Zero(sizes[l], sizes[l - 1]), Vector::Zero(sizes[l])});
  }

  /// Glorot-uniform weights and zero biases, drawn layer by layer in row-major
  /// order. A warm_start blob then overwrites the hidden layers.
  static Mlp init(const ClassifierConfig& config, std::uint64_t seed) {
    Mlp m(config);
    Rng rng(seed);
    for (auto& layer : m.layers_) {
      const double fan = static_cast<double>(layer.weight.rows() + layer.weight.cols());
      const double a = std::sqrt(6.0 / fan);
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = Scalar(rng.uniform(-a, a));
    }
    if (!config.warm_start.empty()) {
      auto flat = m.parameters();
      std::copy(config.warm_start.begin(), config.warm_start.end(), flat.begin());
      m.set_parameters(flat);
    }
    return m;
  }

  const ClassifierConfig& config() const { return config_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  int num_classes() const { return config_.num_classes; }
  int input_dim() const { return config_.input_dim; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  std::vector<Scalar> parameters() const {
    std::vector<Scalar> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias[r]);
    }
    return out;
  }

  void set_parameters(std::span<const Scalar> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("model: parameter blob size mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
    }
  }

  template <typename Derived>
  Matrix logits(const Eigen::MatrixBase<Derived>& x) const {
    check_input(x.rows());
    Matrix a = x.template cast<Scalar>();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = (l + 1 < layers_.size()) ? activate(z) : std::move(z);
    }
    return a;
  }

  /// Class probabilities, one column per input column.
  template <typename Derived>
  Matrix predict_batch(const Eigen::MatrixBase<Derived>& x) const {
    return softmax_columns(logits(x));
  }

  template <typename Derived>
  Vector predict(const Eigen::MatrixBase<Derived>& x) const {
    if (x.cols() != 1) throw std::invalid_argument("model: predict expects a single column");
    return predict_batch(x).col(0);
  }

  /// Activations feeding the output layer (the input itself for a linear model).
  template <typename Derived>
  Matrix penultimate(const Eigen::MatrixBase<Derived>& x) const {
    check_input(x.rows());
    Matrix a = x.template cast<Scalar>();
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = activate(z);
    }
    return a;
  }

  /// (1/normalizer) * sum_i w_i * CE(f(x_i), y_i). Fills `grad` (same shapes
  /// as layers()) when non-null.
  Scalar loss_and_gradient(const Matrix& x, std::span<const int> labels, const Vector& weights, Scalar normalizer,
                           std::vector<Layer>* grad) const {
    check_input(x.rows());
    const Eigen::Index n = x.cols();
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // inputs per layer
    post.push_back(x);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * post.back();
      z.colwise() += layers_[l].bias;
      if (l + 1 < layers_.size()) post.push_back(activate(z));
      pre.push_back(std::move(z));
    }
    const Matrix& out = pre.back();
    const auto lse = log_sum_exp_columns(out);
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) loss += weights[i] * (lse[i] - out(labels[i], i));
    loss /= normalizer;
    if (!grad) return loss;

    // dL/dz at the output: w_i / normalizer * (softmax - onehot)
    Matrix delta = softmax_columns(out);
    for (Eigen::Index i = 0; i < n; ++i) delta(labels[i], i) -= Scalar(1);
    delta.array().rowwise() *= (weights.transpose() / normalizer).array();

    grad->resize(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      (*grad)[l].weight = delta * post[l].transpose();
      (*grad)[l].bias = delta.rowwise().sum();
      if (l > 0) {
        Matrix back = layers_[l].weight.transpose() * delta;
        delta = back.cwiseProduct(activation_derivative(pre[l - 1]));
      }
    }
    return loss;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) { return a.layers_ == b.layers_; }

 private:
  void check_input(Eigen::Index rows) const {
    if (rows != config_.input_dim)
      throw std::invalid_argument("model: expected input dimension " + std::to_string(config_.input_dim) + ", got " +
                                  std::to_string(rows));
  }

  Matrix activate(const Matrix& z) const {
    switch (config_.activation) {
      case Activation::relu: return z.cwiseMax(Scalar(0));
      case Activation::elu: return z.unaryExpr([](Scalar v) { return v > 0 ? v : std::expm1(v); });
      case Activation::tanh: return z.array().tanh().matrix();
    }
    return z;
  }

  Matrix activation_derivative(const Matrix& z) const {
    switch (config_.activation) {
      case Activation::relu: return z.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); });
      case Activation::elu: return z.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : std::exp(v); });
      case Activation::tanh: return (Scalar(1) - z.array().tanh().square()).matrix();
    }
    return z;
  }

  ClassifierConfig config_;
  std::vector<Layer> layers_;
};

using Classifier = Mlp<double>;

// ---------------------------------------------------------------------------
// Optimisation

/// Minibatch optimizer bound to one model. Batch losses are divided by a
/// caller-supplied normalizer (the nominal batch size), so zero-weight rows
/// change nothing.
template <typename Scalar>
class Trainer {
 public:
  using Model = Mlp<Scalar>;
  using Layer = typename Model::Layer;

  Trainer(Model& model, OptimizerKind kind, double learning_rate)
      : model_(&model), kind_(kind), lr_(static_cast<Scalar>(learning_rate)) {
    if (kind_ == OptimizerKind::adam) {
      for (const auto& l : model.layers()) {
        m_.push_back({Model::Matrix::Zero(l.weight.rows(), l.weight.cols()), Model::Vector::Zero(l.bias.size())});
      }
      v_ = m_;
    }
  }

  Scalar step(const typename Model::Matrix& x, std::span<const int> labels, const typename Model::Vector& weights,
              Scalar normalizer) {
    std::vector<Layer> grad;
    const Scalar loss = model_->loss_and_gradient(x, labels, weights, normalizer, &grad);
    auto& layers = model_->layers();
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight -= lr_ * grad[l].weight;
        layers[l].bias -= lr_ * grad[l].bias;
      }
      return loss;
    }
    ++t_;
    const Scalar b1 = Scalar(0.9), b2 = Scalar(0.999), eps = Scalar(1e-8);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
      param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, m_[l].weight, v_[l].weight, grad[l].weight);
      update(layers[l].bias, m_[l].bias, v_[l].bias, grad[l].bias);
    }
    return loss;
  }

 private:
  Model* model_;
  OptimizerKind kind_;
  Scalar lr_;
  std::vector<Layer> m_, v_;
  long t_ = 0;
};

/// Mean weighted cross-entropy over the whole set, (1/N) sum w * CE.
template <typename Scalar>
Scalar weighted_loss(const Mlp<Scalar>& model, const WeightedExamples<Scalar>& data) {
  return model.loss_and_gradient(data.features, data.labels, data.weights, Scalar(data.size()), nullptr);
}

/// Minibatch training on (1/N) sum w * CE for `epochs` epochs. Each epoch
/// visits a fresh seeded permutation.
template <typename Scalar>
Mlp<Scalar> train_weighted(Mlp<Scalar> model, const WeightedExamples<Scalar>& data, int epochs, int batch_size,
                           std::uint64_t shuffle_seed) {
  data.validate(model.num_classes(), model.input_dim());
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("train: epochs and batch size must be positive");
  Trainer<Scalar> trainer(model, model.config().optimizer, model.config().learning_rate);
  Rng rng(shuffle_seed);
  const auto n = static_cast<std::size_t>(data.size());
  for (int e = 0; e < epochs; ++e) {
    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
      const auto count = std::min(n - start, static_cast<std::size_t>(batch_size));
      const auto batch = data.subset(std::span(order).subspan(start, count));
      trainer.step(batch.features, batch.labels, batch.weights, Scalar(batch_size));
    }
  }
  return model;
}

/// Uses the config's supervised epoch count and batch size.
template <typename Scalar>
Mlp<Scalar> train_weighted(Mlp<Scalar> model, const WeightedExamples<Scalar>& data, std::uint64_t shuffle_seed) {
  const auto& c = model.config();
  return train_weighted(std::move(model), data, c.epochs_supervised, c.batch_size, shuffle_seed);
}

/// Unit-weight convenience wrapper.
template <typename Scalar>
Mlp<Scalar> train(Mlp<Scalar> model, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& features,
                  const std::vector<int>& labels, int epochs, int batch_size, std::uint64_t shuffle_seed) {
  WeightedExamples<Scalar> data{features, labels,
                                Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(static_cast<Eigen::Index>(labels.size()))};
  return train_weighted(std::move(model), data, epochs, batch_size, shuffle_seed);
}

/// Compares analytic gradients of the weighted loss against central
/// differences. Relative error per parameter is |a - n| / max(|a|, |n|, 1e-6).
template <typename Scalar>
Scalar gradient_check(const Mlp<Scalar>& model, const WeightedExamples<Scalar>& batch, Scalar step = Scalar(1e-5)) {
  const Scalar normalizer = Scalar(std::max(1, batch.size()));
  std::vector<typename Mlp<Scalar>::Layer> grad;
  model.loss_and_gradient(batch.features, batch.labels, batch.weights, normalizer, &grad);
  std::vector<Scalar> analytic;
  for (const auto& l : grad) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) analytic.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) analytic.push_back(l.bias[r]);
  }

  Mlp<Scalar> probe = model;
  auto params = model.parameters();
  Scalar worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Scalar saved = params[k];
    params[k] = saved + step;
    probe.set_parameters(params);
    const Scalar up = probe.loss_and_gradient(batch.features, batch.labels, batch.weights, normalizer, nullptr);
    params[k] = saved - step;
    probe.set_parameters(params);
    const Scalar down = probe.loss_and_gradient(batch.features, batch.labels, batch.weights, normalizer, nullptr);
    params[k] = saved;
    const Scalar numeric = (up - down) / (Scalar(2) * step);
    const Scalar denom = std::max({std::abs(analytic[k]), std::abs(numeric), Scalar(1e-6)});
    worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Serialization: one text header line, then the flat parameters as raw
// little-endian IEEE-754 doubles.

inline void save_parameters(std::ostream& out, const Classifier& model) {
  const auto& c = model.config();
  out << "osal-mlp 1 input_dim=" << c.input_dim << " hidden=";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) out << (i ? "," : "") << c.hidden[i];
  out << " classes=" << c.num_classes << " activation=" << to_string(c.activation)
      << " count=" << model.parameter_count() << '\n';
  const auto params = model.parameters();
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
}

inline std::string serialize_parameters(const Classifier& model) {
  std::ostringstream ss;
  save_parameters(ss, model);
  return ss.str();
}

/// Restores parameters into a model whose config matches the header.
inline Classifier load_parameters(std::istream& in, ClassifierConfig config) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("osal-mlp 1 ", 0) != 0)
    throw std::runtime_error("model: bad parameter header");
  Classifier model(std::move(config));
  std::ostringstream expected;
  {
    std::ostringstream tmp;
    save_parameters(tmp, model);
    const auto s = tmp.str();
    expected << s.substr(0, s.find('\n'));
  }
  if (header != expected.str()) throw std::runtime_error("model: header does not match config: " + header);
  std::vector<double> params(model.parameter_count());
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!in) throw std::runtime_error("model: truncated parameter blob");
  model.set_parameters(params);
  return model;
}

}  // namespace osal
