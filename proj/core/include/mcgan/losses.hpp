#pragma once

#include "mcgan/ops.hpp"

namespace mcgan {

// Discriminator objective on per-item scores in (0,1):
// -mean[ log(s_real) + log(1 - s_fake) ], eps-guarded logs.
template <class T>
TensorT<T> d_loss_fn(TensorT<T> scores_real, TensorT<T> scores_fake,
                     T eps = T(1e-8)) {
  TensorT<T> lr = log_(add_scalar(scores_real, eps));
  TensorT<T> lf = log_(add_scalar(neg(scores_fake), T(1) + eps));
  return neg(mean(add(lr, lf)));
}

// Non-saturating generator objective with an optional L1 content term:
// -mean log(s_fake) + lambda * mean |fake - real|.
template <class T>
TensorT<T> g_loss_fn(TensorT<T> scores_fake, TensorT<T> fake, TensorT<T> real,
                     T lambda, T eps = T(1e-8)) {
  TensorT<T> adv = neg(mean(log_(add_scalar(scores_fake, eps))));
  if (lambda == T(0)) return adv;
  return add(adv, scale(mean(abs_(sub(fake, real))), lambda));
}

}  // namespace mcgan
