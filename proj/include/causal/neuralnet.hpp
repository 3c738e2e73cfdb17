#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causal/random.hpp"

// Bidirectional GRU encoder with linear self-attention pooling and a
// sigmoid output, plus its reverse-mode gradients. Everything is templated
// on the scalar type: float for training, double for gradient checking.
namespace causal::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr int kDefaultHidden = 128;

// z = sig(W_z x + U_z h + b_z)
// r = sig(W_r x + U_r h + b_r)
// c = tanh(W_h x + U_h (r * h) + b_h)
// h' = (1 - z) * h + z * c
template <typename T>
struct GruCellParams {
  Mat<T> w_z, w_r, w_h;  // hidden x input
  Mat<T> u_z, u_r, u_h;  // hidden x hidden
  Vec<T> b_z, b_r, b_h;

  GruCellParams() = default;
  GruCellParams(Eigen::Index input_dim, Eigen::Index hidden_dim);

  Eigen::Index input_dim() const { return w_z.cols(); }
  Eigen::Index hidden_dim() const { return w_z.rows(); }
};

template <typename T>
struct BiGruAttParams {
  GruCellParams<T> forward;
  GruCellParams<T> backward;
  Vec<T> u_att;  // 2 * hidden
  Vec<T> u_p;    // 2 * hidden
  T b_p = T(0);

  BiGruAttParams() = default;
  // All-zero parameters of the given shape.
  BiGruAttParams(Eigen::Index input_dim, Eigen::Index hidden_dim);

  Eigen::Index input_dim() const { return forward.input_dim(); }
  Eigen::Index hidden_dim() const { return forward.hidden_dim(); }
  std::size_t parameter_count() const;

  // Throws ValidationError on inconsistent shapes.
  void validate() const;

  template <typename U>
  BiGruAttParams<U> cast() const;
};

// Calls fn(name, tensor) for every parameter block in a fixed order. The
// tensor argument is an Eigen object (b_p is passed as a 1x1 map).
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  using Scalar = std::remove_cvref_t<decltype(p.b_p)>;
  auto cell = [&](auto& c, const std::string& prefix) {
    fn(prefix + ".w_z", c.w_z);
    fn(prefix + ".w_r", c.w_r);
    fn(prefix + ".w_h", c.w_h);
    fn(prefix + ".u_z", c.u_z);
    fn(prefix + ".u_r", c.u_r);
    fn(prefix + ".u_h", c.u_h);
    fn(prefix + ".b_z", c.b_z);
    fn(prefix + ".b_r", c.b_r);
    fn(prefix + ".b_h", c.b_h);
  };
  cell(p.forward, "gru_forward");
  cell(p.backward, "gru_backward");
  fn(std::string("u_att"), p.u_att);
  fn(std::string("u_p"), p.u_p);
  if constexpr (std::is_const_v<Params>) {
    Eigen::Map<const Mat<Scalar>> b(&p.b_p, 1, 1);
    fn(std::string("b_p"), b);
  } else {
    Eigen::Map<Mat<Scalar>> b(&p.b_p, 1, 1);
    fn(std::string("b_p"), b);
  }
}

// Single GRU update. Throws RuntimeError if the new state is not finite.
template <typename T>
Vec<T> gru_step(const GruCellParams<T>& cell, const Vec<T>& x, const Vec<T>& h_prev);

// Activations kept for back-propagation through time.
template <typename T>
struct GruTrace {
  Mat<T> states;  // hidden x (n + 1); column 0 is the zero initial state
  Mat<T> z, r, c;  // hidden x n
};

// Runs the cell over the columns of `inputs` in order, from h_0 = 0.
template <typename T>
GruTrace<T> gru_run(const GruCellParams<T>& cell, const Mat<T>& inputs);

// H: column i is [h_i^f; h_i^b], the forward state after reading inputs
// 0..i and the backward state after reading n-1..i.
template <typename T>
Mat<T> bigru_forward(const BiGruAttParams<T>& params, const Mat<T>& inputs);

template <typename T>
struct AttentionOutput {
  Vec<T> raw_scores;  // u_att . h_i
  Vec<T> scores;      // softmax over positions
  Vec<T> sentence;    // sum_i scores_i h_i
};

template <typename T>
AttentionOutput<T> attend(const Vec<T>& u_att, const Mat<T>& states);

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Probability that the sentence is causal.
template <typename T>
T predict(const Vec<T>& u_p, T b_p, const Vec<T>& sentence) {
  return sigmoid(u_p.dot(sentence) + b_p);
}

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
template <typename T>
T loss(T p, int gold);

template <typename T>
struct ForwardRecord {
  Mat<T> inputs;       // after input dropout
  GruTrace<T> fwd;
  GruTrace<T> bwd;     // over the reversed inputs
  Mat<T> output_mask;  // empty when dropout is off
  Mat<T> states;       // H after output dropout
  AttentionOutput<T> attention;
  T logit = T(0);
  T probability = T(0);
};

// Inverted dropout at `dropout_rate` on the BiGRU inputs and outputs when
// `dropout_rng` is non-null; deterministic pass otherwise.
template <typename T>
ForwardRecord<T> forward(const BiGruAttParams<T>& params, const Mat<T>& inputs, T dropout_rate = T(0),
                         Rng* dropout_rng = nullptr);

// Accumulates scale * dL/dtheta for one recorded example into `grads`.
// Inputs receive no gradient. Throws RuntimeError on a non-finite gradient.
template <typename T>
void backward(const BiGruAttParams<T>& params, const ForwardRecord<T>& record, int gold, T scale,
              BiGruAttParams<T>& grads);

// Mean loss over a batch and the gradient of that mean.
template <typename T>
struct BatchGradient {
  BiGruAttParams<T> grads;
  T loss = T(0);
};

template <typename T>
BatchGradient<T> batch_gradient(const BiGruAttParams<T>& params, const std::vector<const Mat<T>*>& inputs,
                                const std::vector<int>& golds, T dropout_rate = T(0),
                                Rng* dropout_rng = nullptr);

// u_att ~ U(+-sqrt(6 / (2 * hidden + 1))); every other weight and bias
// ~ U(+-1 / sqrt(hidden)).
template <typename T>
BiGruAttParams<T> init_params(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed);

}  // namespace causal::nn
