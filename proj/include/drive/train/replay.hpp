#pragma once

#include <optional>
#include <random>
#include <vector>

#include "drive/agent/agent.hpp"

namespace drive::train {

template <typename T>
struct Transition {
  nn::NdArray<T> s;       // [state_dim]
  nn::NdArray<T> action;  // [action_dim], raw
  double reward = 0.0;
  agent::Hidden<T> h_in;   // hidden state the action was computed from
  agent::Hidden<T> h_out;  // hidden state after the step, paired with s_next
  nn::NdArray<T> s_next;
  bool done = false;
  // Supervision for the actor regularisers.
  int t = 0;
  int t_a = -1;
  int label = 0;
  std::optional<percept::FixationPoint> gt;
};

template <typename T>
struct Batch {
  nn::NdArray<T> s, s_next, action;  // [n×·]
  nn::NdArray<T> reward, done;       // [n×1]
  agent::Hidden<T> h_in, h_out;
  nn::NdArray<T> label;       // [n×1]
  nn::NdArray<T> bce_weight;  // [n×1], e^{−max(0, t_a − t)} for positives, 1 for negatives
  nn::NdArray<T> gt;          // [n×2]
  nn::NdArray<T> gt_mask;     // [n×1], 1 where t > t_a and a ground-truth fixation exists

  std::size_t size() const { return s.rows(); }
  static Batch from(const std::vector<const Transition<T>*>& items);
};

// Fixed-capacity ring buffer with oldest-first eviction and uniform sampling.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition<T> tr);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }
  // i-th oldest entry still held.
  const Transition<T>& at(std::size_t i) const;
  Batch<T> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::size_t pushed_ = 0;
  std::vector<Transition<T>> items_;
};

}  // namespace drive::train
