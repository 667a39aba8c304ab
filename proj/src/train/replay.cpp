#include "drive/train/replay.hpp"

#include <cmath>

#include "drive/reward/reward.hpp"

namespace drive::train {

template <typename T>
Batch<T> Batch<T>::from(const std::vector<const Transition<T>*>& items) {
  DRIVE_REQUIRE(!items.empty(), "cannot build an empty batch");
  const std::size_t n = items.size(), sd = items[0]->s.size(), ad = items[0]->action.size();
  Batch b;
  b.s = nn::NdArray<T>(nn::Shape{n, sd});
  b.s_next = nn::NdArray<T>(nn::Shape{n, sd});
  b.action = nn::NdArray<T>(nn::Shape{n, ad});
  b.reward = b.done = b.label = b.bce_weight = b.gt_mask = nn::NdArray<T>(nn::Shape{n, 1});
  b.gt = nn::NdArray<T>(nn::Shape{n, 2});
  std::vector<const agent::Hidden<T>*> hin, hout;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = *items[i];
    DRIVE_REQUIRE(tr.s.size() == sd && tr.s_next.size() == sd && tr.action.size() == ad,
                  "batch transitions disagree in shape");
    std::copy_n(tr.s.data(), sd, b.s.data() + i * sd);
    std::copy_n(tr.s_next.data(), sd, b.s_next.data() + i * sd);
    std::copy_n(tr.action.data(), ad, b.action.data() + i * ad);
    b.reward[i] = static_cast<T>(tr.reward);
    b.done[i] = tr.done ? T{1} : T{0};
    b.label[i] = static_cast<T>(tr.label);
    b.bce_weight[i] = static_cast<T>(reward::exp_bce_weight(tr.t, tr.label, tr.t_a));
    if (tr.gt && tr.label == 1 && tr.t > tr.t_a) {
      b.gt_mask[i] = T{1};
      b.gt.at(i, 0) = static_cast<T>(tr.gt->x);
      b.gt.at(i, 1) = static_cast<T>(tr.gt->y);
    }
    hin.push_back(&tr.h_in);
    hout.push_back(&tr.h_out);
  }
  b.h_in = agent::Hidden<T>::stack(hin);
  b.h_out = agent::Hidden<T>::stack(hout);
  return b;
}

template <typename T>
ReplayBuffer<T>::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  DRIVE_REQUIRE(capacity > 0, "replay capacity must be positive");
}

template <typename T>
void ReplayBuffer<T>::push(Transition<T> tr) {
  ++pushed_;
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tr));
    return;
  }
  items_[head_] = std::move(tr);
  head_ = (head_ + 1) % capacity_;
}

template <typename T>
const Transition<T>& ReplayBuffer<T>::at(std::size_t i) const {
  DRIVE_REQUIRE(i < items_.size(), "replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

template <typename T>
Batch<T> ReplayBuffer<T>::sample(std::size_t n, std::mt19937_64& rng) const {
  DRIVE_REQUIRE(!items_.empty(), "cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition<T>*> chosen(n);
  for (auto& c : chosen) c = &items_[pick(rng)];
  return Batch<T>::from(chosen);
}

template struct Batch<float>;
template struct Batch<double>;
template class ReplayBuffer<float>;
template class ReplayBuffer<double>;

}  // namespace drive::train
