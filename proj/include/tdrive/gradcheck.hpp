#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tdrive/neural.hpp"
#include "tdrive/random.hpp"

namespace tdrive::nn {

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::size_t compared = 0;
  std::size_t skipped_small = 0;  // both magnitudes below the floor
  std::size_t skipped_kink = 0;   // perturbation flipped a ReLU
};

struct GradcheckOptions {
  double step = 1e-5;
  double floor = 1e-8;
};

namespace detail {

// Scalar loss <upstream, f(x)> plus the hidden ReLU on/off pattern.
struct Probe {
  double loss = 0.0;
  std::vector<bool> pattern;
};

inline Probe probe(const Mlp& net, const Vector& input, const Vector& upstream) {
  const ForwardTrace trace = forward_trace(net, input);
  Probe p;
  p.loss = upstream.dot(trace.output().col(0));
  for (std::size_t l = 1; l + 1 < trace.activations.size(); ++l) {
    const auto& a = trace.activations[l];
    for (Eigen::Index i = 0; i < a.size(); ++i) p.pattern.push_back(a(i) > 0.0);
  }
  return p;
}

}  // namespace detail

/// Compares backward() against central finite differences of the scalar
/// <upstream, forward(net, input)> for every parameter and input entry.
/// Entries whose perturbation crosses a ReLU kink are skipped.
inline GradcheckReport gradient_check(const Mlp& net, const Vector& input, const Vector& upstream,
                                      const GradcheckOptions& opt = {}) {
  const Gradients analytic = backward(net, Matrix(input), Matrix(upstream));
  const auto base = detail::probe(net, input, upstream);
  GradcheckReport report;

  auto compare = [&](double a, double plus_minus_diff) {
    const double n = plus_minus_diff / (2.0 * opt.step);
    if (std::abs(a) < opt.floor && std::abs(n) < opt.floor) {
      ++report.skipped_small;
      return;
    }
    const double rel = std::abs(a - n) / std::max(std::abs(a), std::abs(n));
    report.max_relative_error = std::max(report.max_relative_error, rel);
    ++report.compared;
  };

  Mlp work = net;
  auto perturb = [&](double& slot, double a, auto&& eval) {
    const double saved = slot;
    slot = saved + opt.step;
    const auto plus = eval();
    slot = saved - opt.step;
    const auto minus = eval();
    slot = saved;
    if (plus.pattern != base.pattern || minus.pattern != base.pattern) {
      ++report.skipped_kink;
      return;
    }
    compare(a, plus.loss - minus.loss);
  };

  auto eval_net = [&] { return detail::probe(work, input, upstream); };
  for (std::size_t l = 0; l < work.layers().size(); ++l) {
    auto& layer = work.layers()[l];
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        perturb(layer.weight(r, c), analytic.layers[l].weight(r, c), eval_net);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
      perturb(layer.bias(r), analytic.layers[l].bias(r), eval_net);
  }

  Vector x = input;
  auto eval_input = [&] { return detail::probe(net, x, upstream); };
  for (Eigen::Index i = 0; i < x.size(); ++i) perturb(x(i), analytic.input(i, 0), eval_input);
  return report;
}

/// Gradient check on a freshly initialised random network.
inline GradcheckReport random_gradient_check(const std::vector<int>& sizes, Activation output,
                                             std::uint64_t seed, const GradcheckOptions& opt = {}) {
  Rng rng(seed);
  const Mlp net(sizes, output, rng);
  Vector input(sizes.front());
  for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.uniform(-1.0, 1.0);
  Vector upstream(sizes.back());
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream(i) = rng.uniform(-1.0, 1.0);
  return gradient_check(net, input, upstream, opt);
}

}  // namespace tdrive::nn
