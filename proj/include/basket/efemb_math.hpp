#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "basket/simd/kernels.hpp"

// Bernoulli negative-sampling objective and its gradients, templated over
// float (training) and double (numerical checks). Both precisions run the
// same code path.

namespace basket {

// Logistic function clamped into the open interval (0, 1) so that downstream
// logs stay finite over the full double range used here (|x| <= ~700).
template <typename T>
T stable_sigmoid(T x) {
  T v;
  if (x >= T(0)) {
    const T e = std::exp(-x);
    v = T(1) / (T(1) + e);
  } else {
    const T e = std::exp(x);
    v = e / (T(1) + e);
  }
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
  return std::clamp(v, lo, hi);
}

// log(sigmoid(x)) without overflow; log(1 - sigmoid(x)) == log_sigmoid(-x).
template <typename T>
T log_sigmoid(T x) {
  return x >= T(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

// log s(rho_i.ctx) + sum_k log(1 - s(rho_k.ctx)) - lambda (|rho_i|^2 + sum_k |rho_k|^2)
template <typename T>
T pair_objective(std::span<const T> rho_i, std::span<const T> ctx,
                 const std::vector<std::span<const T>>& negatives, T lambda) {
  const std::size_t d = rho_i.size();
  T obj = log_sigmoid(simd::dot(rho_i.data(), ctx.data(), d));
  T reg = simd::dot(rho_i.data(), rho_i.data(), d);
  for (const auto& neg : negatives) {
    obj += log_sigmoid(-simd::dot(neg.data(), ctx.data(), d));
    reg += simd::dot(neg.data(), neg.data(), d);
  }
  return obj - lambda * reg;
}

template <typename T>
struct PairGradients {
  std::vector<T> rho_target;     // d/d rho_i
  std::vector<T> alpha_context;  // d/d alpha_j, identical for every context j
  std::vector<T> negatives;      // K x D flattened, d/d rho_k

  void resize(std::size_t dim, std::size_t k) {
    rho_target.assign(dim, T(0));
    alpha_context.assign(dim, T(0));
    negatives.assign(dim * k, T(0));
  }
};

// Ascent gradients of pair_objective. `ctx_weight` is the pooling factor the
// context vector applied to each alpha_j (1/(|items|-1) for mean, 1 for sum).
// Returns the objective value, whose sigmoid terms are shared with the
// gradients.
template <typename T>
T pair_gradients(std::span<const T> rho_i, std::span<const T> ctx,
                 const std::vector<std::span<const T>>& negatives, T lambda,
                 T ctx_weight, PairGradients<T>& out) {
  const std::size_t d = rho_i.size();
  const std::size_t k = negatives.size();
  out.resize(d, k);

  const T pos_score = simd::dot(rho_i.data(), ctx.data(), d);
  const T pos_sigma = stable_sigmoid(pos_score);
  T obj = log_sigmoid(pos_score);
  T reg = simd::dot(rho_i.data(), rho_i.data(), d);

  // d/d rho_i = (1 - s_i) ctx - 2 lambda rho_i
  simd::axpy(T(1) - pos_sigma, ctx.data(), out.rho_target.data(), d);
  simd::axpy(T(-2) * lambda, rho_i.data(), out.rho_target.data(), d);

  // d/d alpha_j = w [(1 - s_i) rho_i - sum_k s_k rho_k]
  simd::axpy((T(1) - pos_sigma) * ctx_weight, rho_i.data(), out.alpha_context.data(), d);

  for (std::size_t ki = 0; ki < k; ++ki) {
    const T* neg = negatives[ki].data();
    const T neg_score = simd::dot(neg, ctx.data(), d);
    const T neg_sigma = stable_sigmoid(neg_score);
    obj += log_sigmoid(-neg_score);
    reg += simd::dot(neg, neg, d);

    T* g_neg = out.negatives.data() + ki * d;
    simd::axpy(-neg_sigma, ctx.data(), g_neg, d);     // d/d rho_k = -s_k ctx - 2 lambda rho_k
    simd::axpy(T(-2) * lambda, neg, g_neg, d);
    simd::axpy(-neg_sigma * ctx_weight, neg, out.alpha_context.data(), d);
  }
  return obj - lambda * reg;
}

}  // namespace basket
