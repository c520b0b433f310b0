#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tdrive/done_kind.hpp"
#include "tdrive/error.hpp"
#include "tdrive/neural.hpp"
#include "tdrive/random.hpp"

namespace tdrive::td3 {

inline constexpr int kActionSize = 3;
using RawAction = std::array<double, kActionSize>;

struct Transition {
  std::vector<double> state;
  RawAction action{};
  double reward = 0.0;
  std::vector<double> next_state;
  DoneKind done_kind = DoneKind::Running;
};

/// Timeouts are truncations, not absorbing states, so they still bootstrap.
inline double bootstrap_mask(DoneKind kind) {
  return kind == DoneKind::Collision || kind == DoneKind::Goal ? 0.0 : 1.0;
}

/// Column-per-sample view of a sampled set of transitions.
struct Batch {
  nn::Matrix states;
  nn::Matrix actions;
  nn::Vector rewards;
  nn::Matrix next_states;
  nn::Vector bootstrap;

  Eigen::Index size() const { return states.cols(); }
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000, int state_size = 0)
      : capacity_(capacity), state_size_(state_size) {
    if (capacity_ == 0) throw Error("ReplayBuffer: capacity must be positive");
    store_.reserve(capacity_);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return store_.size(); }
  int state_size() const { return state_size_; }

  void push(Transition t) {
    if (state_size_ == 0) state_size_ = static_cast<int>(t.state.size());
    if (static_cast<int>(t.state.size()) != state_size_ ||
        static_cast<int>(t.next_state.size()) != state_size_)
      throw Error("ReplayBuffer: transition state length " + std::to_string(t.state.size()) +
                  " does not match " + std::to_string(state_size_));
    for (double a : t.action)
      if (!(a >= -1.0 && a <= 1.0)) throw Error("ReplayBuffer: action component outside [-1, 1]");
    if (store_.size() < capacity_) {
      store_.push_back(std::move(t));
    } else {
      store_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// Transition by age, 0 = oldest still stored.
  const Transition& oldest(std::size_t age) const {
    if (age >= store_.size()) throw Error("ReplayBuffer: age out of range");
    const std::size_t start = store_.size() < capacity_ ? 0 : cursor_;
    return store_[(start + age) % capacity_];
  }

  /// Uniform draw of n slot indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (n == 0 || store_.size() < n)
      throw Error("ReplayBuffer: cannot sample " + std::to_string(n) + " from " +
                  std::to_string(store_.size()) + " transitions");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.index(store_.size()));
    return idx;
  }

  Batch gather(const std::vector<std::size_t>& indices) const {
    const auto n = static_cast<Eigen::Index>(indices.size());
    Batch b;
    b.states.resize(state_size_, n);
    b.next_states.resize(state_size_, n);
    b.actions.resize(kActionSize, n);
    b.rewards.resize(n);
    b.bootstrap.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Transition& t = store_.at(indices[static_cast<std::size_t>(k)]);
      b.states.col(k) = Eigen::Map<const nn::Vector>(t.state.data(), state_size_);
      b.next_states.col(k) = Eigen::Map<const nn::Vector>(t.next_state.data(), state_size_);
      for (int a = 0; a < kActionSize; ++a) b.actions(a, k) = t.action[static_cast<std::size_t>(a)];
      b.rewards(k) = t.reward;
      b.bootstrap(k) = bootstrap_mask(t.done_kind);
    }
    return b;
  }

  Batch sample(std::size_t n, Rng& rng) const { return gather(sample_indices(n, rng)); }

 private:
  std::size_t capacity_;
  int state_size_;
  std::vector<Transition> store_;
  std::size_t cursor_ = 0;
};

}  // namespace tdrive::td3
