// Small fully connected Q-network with hand-written backpropagation.
//
// Layers map x -> act(W x + b). The usual stack is rectifier on the first
// hidden layer, logistic on later hidden layers and identity on the output,
// but any per-layer mix is accepted.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace vnet {

enum class Activation { Relu, Sigmoid, Linear };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation: " + std::string(s));
}

enum class LossMode { SquaredError, Bce };

inline constexpr double kBceClamp = 1e-7;

template <typename Scalar>
Scalar logistic(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
struct LossValue {
  Scalar value = 0;
  Scalar dpred = 0;  // d loss / d prediction
};

/// Loss between one network output and its target.
///
/// SquaredError: (pred - target)^2 / 2 on raw values.
/// Bce: both sides pass through logistic(x / temperature); the squashed
/// prediction is clamped to [1e-7, 1 - 1e-7] before the logs.
template <typename Scalar>
LossValue<Scalar> loss(Scalar pred, Scalar target, LossMode mode, Scalar temperature = Scalar(1)) {
  if (mode == LossMode::SquaredError) {
    const Scalar e = pred - target;
    return {Scalar(0.5) * e * e, e};
  }
  const Scalar p_raw = logistic(pred / temperature);
  const Scalar t = logistic(target / temperature);
  const Scalar lo = Scalar(kBceClamp), hi = Scalar(1) - Scalar(kBceClamp);
  const Scalar p = std::clamp(p_raw, lo, hi);
  const Scalar value = -(t * std::log(p) + (Scalar(1) - t) * std::log(Scalar(1) - p));
  const Scalar grad = (p_raw == p) ? (p - t) / temperature : Scalar(0);
  return {value, grad};
}

template <typename Scalar = double>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weight;  // out x in
  Vector bias;
  Activation activation = Activation::Linear;

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

template <typename Scalar = double>
class Fnn {
 public:
  using Layer = DenseLayer<Scalar>;
  using Matrix = typename Layer::Matrix;
  using Vector = typename Layer::Vector;
  /// Same shape as the network; holds d loss / d parameter.
  using Gradient = std::vector<Layer>;

  Fnn() = default;

  /// `sizes` = {input, hidden..., output}; one activation per layer.
  Fnn(const std::vector<int>& sizes, const std::vector<Activation>& activations) {
    if (sizes.size() < 2 || activations.size() != sizes.size() - 1)
      throw std::invalid_argument("Fnn: need >= 2 sizes and one activation per layer");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] < 1 || sizes[l + 1] < 1) throw std::invalid_argument("Fnn: layer sizes must be >= 1");
      layers_.push_back({Matrix::Zero(sizes[l + 1], sizes[l]), Vector::Zero(sizes[l + 1]), activations[l]});
    }
  }

  /// Rectifier first hidden layer, logistic further hidden layers, linear output.
  static Fnn q_network(int inputs, const std::vector<int>& hidden, int outputs) {
    std::vector<int> sizes{inputs};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(outputs);
    std::vector<Activation> acts;
    for (std::size_t l = 0; l < hidden.size(); ++l) acts.push_back(l == 0 ? Activation::Relu : Activation::Sigmoid);
    acts.push_back(Activation::Linear);
    return Fnn(sizes, acts);
  }

  /// Uniform fan-in scaled initialisation, biases zero.
  template <typename Rng>
  void init_random(Rng& rng, Scalar scale = Scalar(1)) {
    for (Layer& layer : layers_) {
      const Scalar bound = scale * std::sqrt(Scalar(6) / static_cast<Scalar>(layer.inputs()));
      std::uniform_real_distribution<double> u(-static_cast<double>(bound), static_cast<double>(bound));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = Scalar(u(rng));
      layer.bias.setZero();
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  Eigen::Index inputs() const { return layers_.front().inputs(); }
  Eigen::Index outputs() const { return layers_.back().outputs(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  Vector forward(const Vector& x) const {
    Vector a = x;
    for (const Layer& l : layers_) a = activate(l.activation, l.weight * a + l.bias);
    return a;
  }

  /// Gradient of loss(output[action], target) w.r.t. every parameter.
  /// Only the selected output unit carries error back.
  LossValue<Scalar> backward(const Vector& x, int action, Scalar target, LossMode mode, Scalar temperature,
                             Gradient& grad) const {
    std::vector<Vector> post{x};
    std::vector<Vector> pre;
    for (const Layer& l : layers_) {
      pre.push_back(l.weight * post.back() + l.bias);
      post.push_back(activate(l.activation, pre.back()));
    }
    const LossValue<Scalar> lv = loss(post.back()(action), target, mode, temperature);

    if (grad.size() != layers_.size()) grad = zero_gradient();
    Vector delta = Vector::Zero(outputs());
    delta(action) = lv.dpred;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      delta = delta.cwiseProduct(derivative(layers_[l].activation, pre[l], post[l + 1]));
      grad[l].weight.noalias() += delta * post[l].transpose();
      grad[l].bias += delta;
      if (l > 0) delta = layers_[l].weight.transpose() * delta;
    }
    return lv;
  }

  Gradient zero_gradient() const {
    Gradient g;
    for (const Layer& l : layers_)
      g.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size()), l.activation});
    return g;
  }

  /// theta += step * g
  void add_scaled(const Gradient& g, Scalar step) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weight += step * g[l].weight;
      layers_[l].bias += step * g[l].bias;
    }
  }

  /// Flat parameter vector, layer by layer, weights (column-major) then bias.
  Vector flatten() const {
    Vector out(parameter_count());
    Eigen::Index at = 0;
    for (const Layer& l : layers_) {
      out.segment(at, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
      at += l.weight.size();
      out.segment(at, l.bias.size()) = l.bias;
      at += l.bias.size();
    }
    return out;
  }

  void unflatten(const Vector& theta) {
    if (theta.size() != parameter_count()) throw std::invalid_argument("Fnn::unflatten: size mismatch");
    Eigen::Index at = 0;
    for (Layer& l : layers_) {
      Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = theta.segment(at, l.weight.size());
      at += l.weight.size();
      l.bias = theta.segment(at, l.bias.size());
      at += l.bias.size();
    }
  }

  bool all_finite() const {
    for (const Layer& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  static Scalar gradient_norm(const Gradient& g) {
    Scalar s = 0;
    for (const Layer& l : g) s += l.weight.squaredNorm() + l.bias.squaredNorm();
    return std::sqrt(s);
  }

 private:
  static Vector activate(Activation a, const Vector& z) {
    switch (a) {
      case Activation::Relu: return z.cwiseMax(Scalar(0));
      case Activation::Sigmoid: return z.unaryExpr([](Scalar v) { return logistic(v); });
      case Activation::Linear: return z;
    }
    return z;
  }

  static Vector derivative(Activation a, const Vector& z, const Vector& out) {
    switch (a) {
      case Activation::Relu: return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
      case Activation::Sigmoid: return out.cwiseProduct((Vector::Ones(out.size()) - out));
      case Activation::Linear: return Vector::Ones(z.size());
    }
    return Vector::Ones(z.size());
  }

  std::vector<Layer> layers_;
};

}  // namespace vnet
