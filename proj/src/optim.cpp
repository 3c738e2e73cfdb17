#include "causal/optim.hpp"

#include <cmath>
#include <vector>

namespace causal::nn {

namespace {

template <typename Params, typename Ptr>
std::vector<Ptr> blocks(Params& p, std::vector<Eigen::Index>* sizes) {
  std::vector<Ptr> out;
  for_each_tensor(p, [&](const std::string&, auto& t) {
    out.push_back(t.data());
    if (sizes) sizes->push_back(t.size());
  });
  return out;
}

}  // namespace

template <typename T>
void adam_step(BiGruAttParams<T>& params, const BiGruAttParams<T>& grads, AdamState<T>& state, double lr,
               const AdamSettings& s) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  std::vector<Eigen::Index> sizes;
  auto theta = blocks<BiGruAttParams<T>, T*>(params, &sizes);
  auto m = blocks<BiGruAttParams<T>, T*>(state.m, nullptr);
  auto v = blocks<BiGruAttParams<T>, T*>(state.v, nullptr);
  auto g = blocks<const BiGruAttParams<T>, const T*>(grads, nullptr);
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (Eigen::Index i = 0; i < sizes[k]; ++i) {
      const T gi = g[k][i];
      m[k][i] = b1 * m[k][i] + (T(1) - b1) * gi;
      v[k][i] = b2 * v[k][i] + (T(1) - b2) * gi * gi;
      const double m_hat = static_cast<double>(m[k][i]) / c1;
      const double v_hat = static_cast<double>(v[k][i]) / c2;
      theta[k][i] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + s.eps));
    }
  }
}

template <typename T>
double global_norm(const BiGruAttParams<T>& grads) {
  double sq = 0.0;
  for_each_tensor(grads, [&](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double x = static_cast<double>(t.data()[i]);
      sq += x * x;
    }
  });
  return std::sqrt(sq);
}

template <typename T>
double clip_gradients(BiGruAttParams<T>& grads, double threshold) {
  const double norm = global_norm(grads);
  if (norm > threshold) {
    const T scale = static_cast<T>(threshold / norm);
    for_each_tensor(grads, [&](const std::string&, auto& t) { t *= scale; });
  }
  return norm;
}

template void adam_step(BiGruAttParams<float>&, const BiGruAttParams<float>&, AdamState<float>&, double,
                        const AdamSettings&);
template void adam_step(BiGruAttParams<double>&, const BiGruAttParams<double>&, AdamState<double>&, double,
                        const AdamSettings&);
template double global_norm(const BiGruAttParams<float>&);
template double global_norm(const BiGruAttParams<double>&);
template double clip_gradients(BiGruAttParams<float>&, double);
template double clip_gradients(BiGruAttParams<double>&, double);

}  // namespace causal::nn
