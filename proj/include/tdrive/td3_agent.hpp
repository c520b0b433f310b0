#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tdrive/error.hpp"
#include "tdrive/neural.hpp"
#include "tdrive/random.hpp"
#include "tdrive/replay_buffer.hpp"

namespace tdrive::td3 {

/// Width of network parameters and training arithmetic. Batches, targets
/// and actions cross the agent boundary as double.
using Real = float;
using Net = nn::BasicMlp<Real>;
using NetOptimizer = nn::BasicAdamState<Real>;

struct Td3Config {
  double gamma = 0.99;
  double lr = 0.0003;
  int batch = 64;
  double exploration_noise_sigma = 0.1;
  int exploration_steps = 10000;
  int policy_delay = 2;
  double tau = 0.005;
  double target_noise_sigma = 0.2;
  double target_noise_clip = 0.5;
  int episodes = 2000;
  int max_steps = 500;
  int replay_capacity = 5000;
  std::vector<int> hidden_sizes{256, 256};
  double actor_final_scale = 0.1;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("config: gamma must lie in (0, 1]");
    if (!(lr > 0.0)) throw Error("config: lr must be positive");
    if (batch <= 0) throw Error("config: batch must be positive");
    if (replay_capacity <= 0) throw Error("config: replay_capacity must be positive");
    if (batch > replay_capacity) throw Error("config: batch must not exceed replay_capacity");
    if (policy_delay < 1) throw Error("config: policy_delay must be at least 1");
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("config: tau must lie in [0, 1]");
    if (exploration_noise_sigma < 0.0) throw Error("config: exploration_noise_sigma must be >= 0");
    if (target_noise_sigma < 0.0) throw Error("config: target_noise_sigma must be >= 0");
    if (target_noise_clip < 0.0) throw Error("config: target_noise_clip must be >= 0");
    if (exploration_steps < 0) throw Error("config: exploration_steps must be >= 0");
    if (episodes < 0) throw Error("config: episodes must be >= 0");
    if (max_steps <= 0) throw Error("config: max_steps must be positive");
    for (int h : hidden_sizes)
      if (h <= 0) throw Error("config: hidden sizes must be positive");
  }
};

/// A target-smoothing noise draw before and after clipping.
struct NoiseDraw {
  double raw = 0.0;
  double clipped = 0.0;
};

inline NoiseDraw draw_target_noise(Rng& rng, double sigma, double clip) {
  const double raw = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
  return {raw, std::clamp(raw, -clip, clip)};
}

/// Per-sample pieces of the clipped double-Q target.
struct TdTargets {
  nn::Vector q1;  // Q1'(s', a~)
  nn::Vector q2;  // Q2'(s', a~)
  nn::Vector y;   // r + bootstrap * gamma * min(q1, q2)
};

struct TrainDiagnostics {
  double critic_loss = 0.0;  // mean of the two critics' MSE
  std::optional<double> actor_loss;
  bool did_actor_update = false;
};

template <class T>
nn::MatrixOf<T> stack_rows(const nn::MatrixOf<T>& top, const nn::MatrixOf<T>& bottom) {
  nn::MatrixOf<T> out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

/// Whether a train_step follows the environment step that brought the
/// total to env_steps.
inline bool learning_enabled(const Td3Config& cfg, std::int64_t env_steps, std::size_t buffer_size) {
  return env_steps >= cfg.exploration_steps && buffer_size >= static_cast<std::size_t>(cfg.batch);
}

/// Twin-critic deterministic actor-critic learner.
class Td3Agent {
 public:
  Td3Agent() = default;

  Td3Agent(int state_size, Td3Config cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
    if (state_size <= 0) throw Error("Td3Agent: state size must be positive");
    std::vector<int> actor_sizes{state_size};
    std::vector<int> critic_sizes{state_size + kActionSize};
    for (int h : cfg_.hidden_sizes) {
      actor_sizes.push_back(h);
      critic_sizes.push_back(h);
    }
    actor_sizes.push_back(kActionSize);
    critic_sizes.push_back(1);
    actor_ = Net(actor_sizes, nn::Activation::Tanh, rng_, cfg_.actor_final_scale);
    critic1_ = Net(critic_sizes, nn::Activation::Identity, rng_);
    critic2_ = Net(critic_sizes, nn::Activation::Identity, rng_);
    actor_target_ = actor_;
    critic1_target_ = critic1_;
    critic2_target_ = critic2_;
    const nn::AdamConfig adam{cfg_.lr, 0.9, 0.999, 1e-8};
    actor_opt_ = NetOptimizer(actor_, adam);
    critic1_opt_ = NetOptimizer(critic1_, adam);
    critic2_opt_ = NetOptimizer(critic2_, adam);
  }

  int state_size() const { return actor_.input_size(); }
  const Td3Config& config() const { return cfg_; }
  Td3Config& mutable_config() { return cfg_; }

  /// Actor output, plus N(0, sigma) per component when exploring, clamped
  /// to [-1, 1].
  RawAction select_action(std::span<const double> state, bool explore) {
    check_state(state.size());
    const nn::FlushDenormals ftz;
    const auto out = actor_.forward(state);
    RawAction a{};
    for (int i = 0; i < kActionSize; ++i) {
      double v = out[static_cast<std::size_t>(i)];
      if (explore) v += rng_.normal(0.0, cfg_.exploration_noise_sigma);
      a[static_cast<std::size_t>(i)] = std::clamp(v, -1.0, 1.0);
    }
    return a;
  }

  /// Uniform draw from [-1, 1]^3, used during the warm-up phase.
  RawAction random_action() {
    RawAction a{};
    for (auto& v : a) v = rng_.uniform(-1.0, 1.0);
    return a;
  }

  /// Action for the environment step numbered env_steps (0-based): uniform
  /// during the first exploration_steps steps, noisy actor afterwards.
  RawAction behaviour_action(std::span<const double> state, std::int64_t env_steps) {
    if (env_steps < cfg_.exploration_steps) return random_action();
    return select_action(state, true);
  }

  /// clamp(actor_target(s') + clip(noise), -1, 1), one column per sample.
  nn::Matrix smoothed_target_actions(const nn::Matrix& next_states) {
    const nn::FlushDenormals ftz;
    nn::Matrix a = actor_target_.forward(next_states.cast<Real>()).cast<double>();
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double noise = draw_target_noise(rng_, cfg_.target_noise_sigma, cfg_.target_noise_clip).clipped;
        a(r, c) = std::clamp(a(r, c) + noise, -1.0, 1.0);
      }
    return a;
  }

  RawAction smoothed_target_action(std::span<const double> next_state) {
    check_state(next_state.size());
    const nn::Matrix s = Eigen::Map<const nn::Vector>(next_state.data(), static_cast<Eigen::Index>(next_state.size()));
    const nn::Matrix a = smoothed_target_actions(s);
    return {a(0, 0), a(1, 0), a(2, 0)};
  }

  /// Clipped double-Q targets for a batch.
  TdTargets critic_targets(const Batch& batch) {
    if (batch.size() == 0) throw Error("critic_targets: empty batch");
    const nn::FlushDenormals ftz;
    const nn::Matrix next_actions = smoothed_target_actions(batch.next_states);
    const Net::Mat input = stack_rows(batch.next_states, next_actions).cast<Real>();
    TdTargets t;
    t.q1 = critic1_target_.forward(input).row(0).transpose().cast<double>();
    t.q2 = critic2_target_.forward(input).row(0).transpose().cast<double>();
    t.y = batch.rewards.array() + batch.bootstrap.array() * cfg_.gamma * t.q1.cwiseMin(t.q2).array();
    return t;
  }

  /// One critic update; every policy_delay-th call also updates the actor
  /// and soft-updates all three targets.
  TrainDiagnostics train_step(const ReplayBuffer& buffer) {
    const auto n = static_cast<std::size_t>(cfg_.batch);
    if (buffer.size() < n)
      throw Error("train_step: buffer holds " + std::to_string(buffer.size()) + " transitions, batch needs " +
                  std::to_string(n));
    const Batch batch = buffer.sample(n, rng_);
    return train_on_batch(batch);
  }

  TrainDiagnostics train_on_batch(const Batch& batch) {
    if (batch.states.rows() != state_size()) throw Error("train_step: batch state size mismatch");
    const nn::FlushDenormals ftz;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const TdTargets targets = critic_targets(batch);
    const Net::Vec y = targets.y.cast<Real>();
    const Net::Mat states = batch.states.cast<Real>();
    const Net::Mat sa = stack_rows(states, Net::Mat(batch.actions.cast<Real>()));

    TrainDiagnostics diag;
    auto update_critic = [&](Net& critic, NetOptimizer& opt) {
      const auto trace = nn::forward_trace(critic, sa);
      const Net::Vec err = trace.output().row(0).transpose() - y;
      const Net::Mat upstream = static_cast<Real>(2.0 * inv_n) * err.transpose();
      nn::adam_step(critic, nn::backward(critic, trace, upstream), opt);
      return err.template cast<double>().squaredNorm() * inv_n;
    };
    diag.critic_loss = 0.5 * (update_critic(critic1_, critic1_opt_) + update_critic(critic2_, critic2_opt_));

    ++update_count_;
    if (update_count_ % cfg_.policy_delay == 0) {
      const auto actor_trace = nn::forward_trace(actor_, states);
      const Net::Mat input = stack_rows(states, actor_trace.output());
      const auto critic_trace = nn::forward_trace(critic1_, input);
      diag.actor_loss = -critic_trace.output().template cast<double>().mean();
      // d(-mean Q)/dQ = -1/n; only the action rows of the critic input matter.
      const Net::Mat upstream = Net::Mat::Constant(1, batch.size(), static_cast<Real>(-inv_n));
      const Net::Mat action_grad = nn::backward_input(critic1_, critic_trace, upstream).bottomRows(kActionSize);
      nn::adam_step(actor_, nn::backward(actor_, actor_trace, action_grad), actor_opt_);
      nn::polyak_update(actor_target_, actor_, cfg_.tau);
      nn::polyak_update(critic1_target_, critic1_, cfg_.tau);
      nn::polyak_update(critic2_target_, critic2_, cfg_.tau);
      diag.did_actor_update = true;
      ++actor_update_count_;
    }
    return diag;
  }

  nn::Vector q_values(int which, const nn::Matrix& states, const nn::Matrix& actions) const {
    const Net& net = which == 1 ? critic1_ : critic2_;
    const nn::FlushDenormals ftz;
    return net.forward(stack_rows(states, actions).cast<Real>()).row(0).transpose().cast<double>();
  }

  bool all_finite() const {
    return actor_.all_finite() && critic1_.all_finite() && critic2_.all_finite() &&
           actor_target_.all_finite() && critic1_target_.all_finite() && critic2_target_.all_finite();
  }

  const Net& actor() const { return actor_; }
  const Net& actor_target() const { return actor_target_; }
  const Net& critic1() const { return critic1_; }
  const Net& critic2() const { return critic2_; }
  const Net& critic1_target() const { return critic1_target_; }
  const Net& critic2_target() const { return critic2_target_; }
  Net& actor() { return actor_; }
  Net& actor_target() { return actor_target_; }
  Net& critic1() { return critic1_; }
  Net& critic2() { return critic2_; }
  Net& critic1_target() { return critic1_target_; }
  Net& critic2_target() { return critic2_target_; }
  NetOptimizer& actor_opt() { return actor_opt_; }
  NetOptimizer& critic1_opt() { return critic1_opt_; }
  NetOptimizer& critic2_opt() { return critic2_opt_; }
  const NetOptimizer& actor_opt() const { return actor_opt_; }
  const NetOptimizer& critic1_opt() const { return critic1_opt_; }
  const NetOptimizer& critic2_opt() const { return critic2_opt_; }
  std::int64_t update_count() const { return update_count_; }
  std::int64_t actor_update_count() const { return actor_update_count_; }
  void set_update_counts(std::int64_t updates, std::int64_t actor_updates) {
    update_count_ = updates;
    actor_update_count_ = actor_updates;
  }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  void check_state(std::size_t n) const {
    if (static_cast<int>(n) != state_size())
      throw Error("Td3Agent: state has " + std::to_string(n) + " entries, actor expects " +
                  std::to_string(state_size()));
  }

  Td3Config cfg_;
  Rng rng_;
  Net actor_, actor_target_;
  Net critic1_, critic2_, critic1_target_, critic2_target_;
  NetOptimizer actor_opt_, critic1_opt_, critic2_opt_;
  std::int64_t update_count_ = 0;
  std::int64_t actor_update_count_ = 0;
};

}  // namespace tdrive::td3
