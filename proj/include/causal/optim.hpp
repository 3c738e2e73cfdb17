#pragma once

#include <cstdint>

#include "causal/neuralnet.hpp"

namespace causal::nn {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  BiGruAttParams<T> m;
  BiGruAttParams<T> v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(const BiGruAttParams<T>& like)
      : m(like.input_dim(), like.hidden_dim()), v(like.input_dim(), like.hidden_dim()) {}
};

// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
void adam_step(BiGruAttParams<T>& params, const BiGruAttParams<T>& grads, AdamState<T>& state, double lr,
               const AdamSettings& settings = {});

template <typename T>
double global_norm(const BiGruAttParams<T>& grads);

// Rescales all gradients by threshold / norm when the global L2 norm
// exceeds the threshold. Returns the norm before clipping.
template <typename T>
double clip_gradients(BiGruAttParams<T>& grads, double threshold);

}  // namespace causal::nn
