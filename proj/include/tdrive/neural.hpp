#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "tdrive/error.hpp"
#include "tdrive/random.hpp"

namespace tdrive::nn {

template <class T>
using MatrixOf = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VectorOf = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using Matrix = MatrixOf<double>;
using Vector = VectorOf<double>;

enum class Activation { ReLU, Tanh, Identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

inline Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::ReLU;
  if (text == "tanh") return Activation::Tanh;
  if (text == "identity") return Activation::Identity;
  throw Error("unknown activation '" + std::string(text) + "'");
}

/// Flush-to-zero and denormals-are-zero for the lifetime of the guard.
/// Single-precision training drifts into subnormal moments, which are
/// slow on x86. No-op elsewhere.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

/// One affine map; weight is (outputs x inputs).
template <class T>
struct BasicDenseLayer {
  MatrixOf<T> weight;
  VectorOf<T> bias;
};
using DenseLayer = BasicDenseLayer<double>;

template <class T>
bool same_shapes(const std::vector<BasicDenseLayer<T>>& a, const std::vector<BasicDenseLayer<T>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
        a[i].bias.size() != b[i].bias.size())
      return false;
  }
  return true;
}

template <class T>
std::vector<BasicDenseLayer<T>> zeros_like(const std::vector<BasicDenseLayer<T>>& layers) {
  std::vector<BasicDenseLayer<T>> out;
  out.reserve(layers.size());
  for (const auto& l : layers)
    out.push_back({MatrixOf<T>::Zero(l.weight.rows(), l.weight.cols()), VectorOf<T>::Zero(l.bias.size())});
  return out;
}

/// Dense network: ReLU on hidden layers, configurable output activation.
/// Batched calls take one sample per column. T is the parameter and
/// arithmetic width.
template <class T>
class BasicMlp {
 public:
  using Scalar = T;
  using Mat = MatrixOf<T>;
  using Vec = VectorOf<T>;
  using Layer = BasicDenseLayer<T>;

  BasicMlp() = default;

  /// Zero-initialised network.
  BasicMlp(std::vector<int> layer_sizes, Activation output) : sizes_(std::move(layer_sizes)), output_(output) {
    if (sizes_.size() < 2) throw Error("Mlp: need at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw Error("Mlp: layer sizes must be positive");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
      layers_.push_back({Mat::Zero(sizes_[i + 1], sizes_[i]), Vec::Zero(sizes_[i + 1])});
  }

  /// Uniform(+-1/sqrt(fan_in)) initialisation; the last layer is scaled by
  /// final_scale.
  BasicMlp(std::vector<int> layer_sizes, Activation output, Rng& rng, double final_scale = 1.0)
      : BasicMlp(std::move(layer_sizes), output) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      const double scale = l + 1 == layers_.size() ? final_scale : 1.0;
      auto& w = layers_[l].weight;
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<T>(scale * rng.uniform(-bound, bound));
      for (Eigen::Index r = 0; r < layers_[l].bias.size(); ++r)
        layers_[l].bias(r) = static_cast<T>(scale * rng.uniform(-bound, bound));
    }
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation output_activation() const { return output_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  Mat forward(const Mat& inputs) const {
    check_input(inputs.rows());
    Mat a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Mat z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = activate(std::move(z), l + 1 == layers_.size() ? output_ : Activation::ReLU);
    }
    return a;
  }

  std::vector<double> forward(std::span<const double> input) const {
    const Mat x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size())).cast<T>();
    const Mat y = forward(x);
    return {y.data(), y.data() + y.size()};
  }

  void check_input(Eigen::Index rows) const {
    if (rows != sizes_.front())
      throw Error("Mlp: input has " + std::to_string(rows) + " rows, expected " +
                  std::to_string(sizes_.front()));
  }

  static Mat activate(Mat z, Activation a) {
    switch (a) {
      case Activation::ReLU: return z.cwiseMax(T(0));
      case Activation::Tanh: return z.array().tanh().matrix();
      case Activation::Identity: return z;
    }
    return z;
  }

  friend bool operator==(const BasicMlp& a, const BasicMlp& b) {
    if (a.sizes_ != b.sizes_ || a.output_ != b.output_) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i)
      if (a.layers_[i].weight != b.layers_[i].weight || a.layers_[i].bias != b.layers_[i].bias)
        return false;
    return true;
  }

 private:
  std::vector<int> sizes_;
  Activation output_ = Activation::Identity;
  std::vector<Layer> layers_;
};
using Mlp = BasicMlp<double>;

/// Post-activation values of every layer, input first.
template <class T>
struct BasicForwardTrace {
  std::vector<MatrixOf<T>> activations;
  const MatrixOf<T>& output() const { return activations.back(); }
};
using ForwardTrace = BasicForwardTrace<double>;

template <class T>
BasicForwardTrace<T> forward_trace(const BasicMlp<T>& net, const MatrixOf<std::type_identity_t<T>>& inputs) {
  net.check_input(inputs.rows());
  BasicForwardTrace<T> trace;
  trace.activations.reserve(net.layers().size() + 1);
  trace.activations.push_back(inputs);
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    MatrixOf<T> z = layers[l].weight * trace.activations.back();
    z.colwise() += layers[l].bias;
    trace.activations.push_back(
        BasicMlp<T>::activate(std::move(z), l + 1 == layers.size() ? net.output_activation() : Activation::ReLU));
  }
  return trace;
}

/// Partials of a scalar loss with respect to every parameter and the input.
template <class T>
struct BasicGradients {
  std::vector<BasicDenseLayer<T>> layers;
  MatrixOf<T> input;  // one column per sample
};
using Gradients = BasicGradients<double>;

/// Reverse-mode partials of sum_columns <upstream, output>, given the trace
/// of the same forward pass. Parameter gradients are summed over the batch.
template <class T>
BasicGradients<T> backward(const BasicMlp<T>& net, const BasicForwardTrace<T>& trace,
                           const MatrixOf<std::type_identity_t<T>>& upstream) {
  const auto& layers = net.layers();
  const MatrixOf<T>& out = trace.output();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw Error("backward: upstream is " + std::to_string(upstream.rows()) + "x" +
                std::to_string(upstream.cols()) + ", output is " + std::to_string(out.rows()) + "x" +
                std::to_string(out.cols()));
  BasicGradients<T> g;
  g.layers.resize(layers.size());

  MatrixOf<T> delta;
  switch (net.output_activation()) {
    case Activation::Tanh: delta = upstream.cwiseProduct((T(1) - out.array().square()).matrix()); break;
    case Activation::ReLU: delta = upstream.cwiseProduct((out.array() > T(0)).template cast<T>().matrix()); break;
    case Activation::Identity: delta = upstream; break;
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const MatrixOf<T>& a_prev = trace.activations[l];
    g.layers[l].weight.noalias() = delta * a_prev.transpose();
    g.layers[l].bias = delta.rowwise().sum();
    MatrixOf<T> back = layers[l].weight.transpose() * delta;
    if (l == 0) {
      g.input = std::move(back);
    } else {
      delta = back.cwiseProduct((a_prev.array() > T(0)).template cast<T>().matrix());
    }
  }
  return g;
}

/// Partials with respect to the input only; no parameter gradients.
template <class T>
MatrixOf<T> backward_input(const BasicMlp<T>& net, const BasicForwardTrace<T>& trace,
                           const MatrixOf<std::type_identity_t<T>>& upstream) {
  const auto& layers = net.layers();
  const MatrixOf<T>& out = trace.output();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw Error("backward_input: upstream shape does not match the output");
  MatrixOf<T> delta;
  switch (net.output_activation()) {
    case Activation::Tanh: delta = upstream.cwiseProduct((T(1) - out.array().square()).matrix()); break;
    case Activation::ReLU: delta = upstream.cwiseProduct((out.array() > T(0)).template cast<T>().matrix()); break;
    case Activation::Identity: delta = upstream; break;
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    MatrixOf<T> back = layers[l].weight.transpose() * delta;
    if (l == 0) return back;
    delta = back.cwiseProduct((trace.activations[l].array() > T(0)).template cast<T>().matrix());
  }
  return delta;
}

template <class T>
BasicGradients<T> backward(const BasicMlp<T>& net, const MatrixOf<std::type_identity_t<T>>& input,
                           const MatrixOf<std::type_identity_t<T>>& upstream) {
  return backward(net, forward_trace(net, input), upstream);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct BasicAdamState {
  AdamConfig config;
  std::vector<BasicDenseLayer<T>> m;
  std::vector<BasicDenseLayer<T>> v;
  std::int64_t step = 0;

  BasicAdamState() = default;
  BasicAdamState(const BasicMlp<T>& net, AdamConfig cfg)
      : config(cfg), m(zeros_like(net.layers())), v(zeros_like(net.layers())) {}
};
using AdamState = BasicAdamState<double>;

/// Bias-corrected Adam update of every parameter.
template <class T>
void adam_step(BasicMlp<T>& net, const BasicGradients<T>& grads, BasicAdamState<T>& opt) {
  if (!same_shapes(net.layers(), grads.layers) || !same_shapes(net.layers(), opt.m) ||
      !same_shapes(net.layers(), opt.v))
    throw Error("adam_step: gradient or moment shapes do not match the network");
  ++opt.step;
  const auto& c = opt.config;
  const double t = static_cast<double>(opt.step);
  const T beta1 = static_cast<T>(c.beta1);
  const T beta2 = static_cast<T>(c.beta2);
  const T lr = static_cast<T>(c.lr);
  const T eps = static_cast<T>(c.eps);
  const T correct1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
  const T correct2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = beta1 * m + (T(1) - beta1) * grad;
    v = beta2 * v + (T(1) - beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / correct1) / ((v.array() / correct2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    update(net.layers()[l].weight, grads.layers[l].weight, opt.m[l].weight, opt.v[l].weight);
    update(net.layers()[l].bias, grads.layers[l].bias, opt.m[l].bias, opt.v[l].bias);
  }
}

/// target <- tau * online + (1 - tau) * target, parameter-wise.
template <class T>
void polyak_update(BasicMlp<T>& target, const BasicMlp<T>& online, double tau) {
  if (target.layer_sizes() != online.layer_sizes() ||
      target.output_activation() != online.output_activation())
    throw Error("polyak_update: architectures differ");
  if (tau < 0.0 || tau > 1.0) throw Error("polyak_update: tau must lie in [0, 1]");
  const T a = static_cast<T>(tau);
  const T b = static_cast<T>(1.0 - tau);
  for (std::size_t l = 0; l < target.layers().size(); ++l) {
    auto& t = target.layers()[l];
    const auto& o = online.layers()[l];
    t.weight = a * o.weight + b * t.weight;
    t.bias = a * o.bias + b * t.bias;
  }
}

}  // namespace tdrive::nn
