#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "mcgan/tensor.hpp"

namespace mcgan {

// Adam with bias correction. Gradients are cleared after each update.
template <class T>
class AdamT {
 public:
  explicit AdamT(T lr = T(1e-5), T beta1 = T(0.5), T beta2 = T(0.999),
                 T epsilon = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void add_param(TensorT<T> p) {
    if (!p.requires_grad())
      throw ContractError("adam: parameter does not require grad");
    params_.push_back(p);
    slots_.emplace(p.node().get(),
                   Slot{std::vector<T>(p.numel(), T(0)),
                        std::vector<T>(p.numel(), T(0))});
  }

  void add_params(const std::vector<TensorT<T>>& ps) {
    for (const auto& p : ps) add_param(p);
  }

  void step() {
    ++step_count_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(step_count_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(step_count_));
    for (auto& p : params_) {
      if (!p.has_grad())
        throw ContractError("adam: missing gradient for a parameter");
      Slot& s = slots_.at(p.node().get());
      auto& d = p.data();
      auto& g = p.grad();
      for (size_t i = 0; i < d.size(); ++i) {
        s.m[i] = beta1_ * s.m[i] + (T(1) - beta1_) * g[i];
        s.v[i] = beta2_ * s.v[i] + (T(1) - beta2_) * g[i] * g[i];
        const T mhat = s.m[i] / bc1;
        const T vhat = s.v[i] / bc2;
        d[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      p.zero_grad();
    }
  }

  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t c) { step_count_ = c; }
  T learning_rate() const { return lr_; }
  void set_learning_rate(T lr) { lr_ = lr; }

  const std::vector<TensorT<T>>& params() const { return params_; }

  // Moment buffers for a parameter, exposed for checkpointing.
  std::vector<T>& moment1(const TensorT<T>& p) { return slots_.at(p.node().get()).m; }
  std::vector<T>& moment2(const TensorT<T>& p) { return slots_.at(p.node().get()).v; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  T lr_, beta1_, beta2_, eps_;
  int64_t step_count_ = 0;
  std::vector<TensorT<T>> params_;
  std::unordered_map<detail::Node<T>*, Slot> slots_;
};

using Adam = AdamT<float>;

}  // namespace mcgan
