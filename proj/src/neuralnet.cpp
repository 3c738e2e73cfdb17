#include "causal/neuralnet.hpp"

#include <algorithm>
#include <cmath>

#include "causal/error.hpp"

namespace causal::nn {

template <typename T>
GruCellParams<T>::GruCellParams(Eigen::Index input_dim, Eigen::Index hidden_dim)
    : w_z(Mat<T>::Zero(hidden_dim, input_dim)),
      w_r(Mat<T>::Zero(hidden_dim, input_dim)),
      w_h(Mat<T>::Zero(hidden_dim, input_dim)),
      u_z(Mat<T>::Zero(hidden_dim, hidden_dim)),
      u_r(Mat<T>::Zero(hidden_dim, hidden_dim)),
      u_h(Mat<T>::Zero(hidden_dim, hidden_dim)),
      b_z(Vec<T>::Zero(hidden_dim)),
      b_r(Vec<T>::Zero(hidden_dim)),
      b_h(Vec<T>::Zero(hidden_dim)) {}

template <typename T>
BiGruAttParams<T>::BiGruAttParams(Eigen::Index input_dim, Eigen::Index hidden_dim)
    : forward(input_dim, hidden_dim),
      backward(input_dim, hidden_dim),
      u_att(Vec<T>::Zero(2 * hidden_dim)),
      u_p(Vec<T>::Zero(2 * hidden_dim)) {}

template <typename T>
std::size_t BiGruAttParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

namespace {

template <typename T>
void check_cell(const GruCellParams<T>& c, Eigen::Index d_in, Eigen::Index d_h, const char* name) {
  auto ok = [&](const auto& m, Eigen::Index r, Eigen::Index k) { return m.rows() == r && m.cols() == k; };
  if (!ok(c.w_z, d_h, d_in) || !ok(c.w_r, d_h, d_in) || !ok(c.w_h, d_h, d_in) || !ok(c.u_z, d_h, d_h) ||
      !ok(c.u_r, d_h, d_h) || !ok(c.u_h, d_h, d_h) || c.b_z.size() != d_h || c.b_r.size() != d_h ||
      c.b_h.size() != d_h) {
    throw ValidationError(std::string("inconsistent shapes in ") + name + " GRU cell");
  }
}

}  // namespace

template <typename T>
void BiGruAttParams<T>::validate() const {
  const auto d_in = input_dim();
  const auto d_h = hidden_dim();
  if (d_in <= 0 || d_h <= 0) throw ValidationError("model dimensions must be positive");
  check_cell(forward, d_in, d_h, "forward");
  check_cell(backward, d_in, d_h, "backward");
  if (u_att.size() != 2 * d_h || u_p.size() != 2 * d_h) {
    throw ValidationError("attention and output vectors must have length 2 * hidden");
  }
}

template <typename T>
template <typename U>
BiGruAttParams<U> BiGruAttParams<T>::cast() const {
  BiGruAttParams<U> out(input_dim(), hidden_dim());
  auto cast_cell = [](const GruCellParams<T>& from, GruCellParams<U>& to) {
    to.w_z = from.w_z.template cast<U>();
    to.w_r = from.w_r.template cast<U>();
    to.w_h = from.w_h.template cast<U>();
    to.u_z = from.u_z.template cast<U>();
    to.u_r = from.u_r.template cast<U>();
    to.u_h = from.u_h.template cast<U>();
    to.b_z = from.b_z.template cast<U>();
    to.b_r = from.b_r.template cast<U>();
    to.b_h = from.b_h.template cast<U>();
  };
  cast_cell(forward, out.forward);
  cast_cell(backward, out.backward);
  out.u_att = u_att.template cast<U>();
  out.u_p = u_p.template cast<U>();
  out.b_p = static_cast<U>(b_p);
  return out;
}

namespace {

template <typename Derived>
auto logistic(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

}  // namespace

template <typename T>
Vec<T> gru_step(const GruCellParams<T>& cell, const Vec<T>& x, const Vec<T>& h_prev) {
  if (x.size() != cell.input_dim() || h_prev.size() != cell.hidden_dim()) {
    throw ValidationError("gru_step: dimension mismatch");
  }
  const Vec<T> z = logistic(cell.w_z * x + cell.u_z * h_prev + cell.b_z);
  const Vec<T> r = logistic(cell.w_r * x + cell.u_r * h_prev + cell.b_r);
  const Vec<T> rh = r.cwiseProduct(h_prev);
  const Vec<T> c = (cell.w_h * x + cell.u_h * rh + cell.b_h).array().tanh().matrix();
  Vec<T> h = (Vec<T>::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(c);
  if (!h.allFinite()) throw RuntimeError("gru_step: non-finite hidden state");
  return h;
}

template <typename T>
GruTrace<T> gru_run(const GruCellParams<T>& cell, const Mat<T>& inputs) {
  if (inputs.rows() != cell.input_dim()) throw ValidationError("GRU input dimension mismatch");
  const Eigen::Index n = inputs.cols();
  const Eigen::Index d_h = cell.hidden_dim();
  GruTrace<T> trace;
  trace.states = Mat<T>::Zero(d_h, n + 1);
  trace.z.resize(d_h, n);
  trace.r.resize(d_h, n);
  trace.c.resize(d_h, n);
  // Input projections for every position at once.
  const Mat<T> px_z = (cell.w_z * inputs).colwise() + cell.b_z;
  const Mat<T> px_r = (cell.w_r * inputs).colwise() + cell.b_r;
  const Mat<T> px_h = (cell.w_h * inputs).colwise() + cell.b_h;
  Vec<T> tmp(d_h);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto h_prev = trace.states.col(t);
    tmp.noalias() = cell.u_z * h_prev;
    trace.z.col(t) = logistic(px_z.col(t) + tmp);
    tmp.noalias() = cell.u_r * h_prev;
    trace.r.col(t) = logistic(px_r.col(t) + tmp);
    const Vec<T> rh = trace.r.col(t).cwiseProduct(h_prev);
    tmp.noalias() = cell.u_h * rh;
    trace.c.col(t) = (px_h.col(t) + tmp).array().tanh().matrix();
    trace.states.col(t + 1) = h_prev + trace.z.col(t).cwiseProduct(trace.c.col(t) - h_prev);
  }
  if (!trace.states.allFinite()) throw RuntimeError("GRU produced a non-finite hidden state");
  return trace;
}

namespace {

template <typename T>
Mat<T> assemble_states(const GruTrace<T>& fwd, const GruTrace<T>& bwd) {
  const Eigen::Index d_h = fwd.states.rows();
  const Eigen::Index n = fwd.states.cols() - 1;
  Mat<T> h(2 * d_h, n);
  h.topRows(d_h) = fwd.states.rightCols(n);
  // Backward step j read position n-1-j.
  h.bottomRows(d_h) = bwd.states.rightCols(n).rowwise().reverse();
  return h;
}

}  // namespace

template <typename T>
Mat<T> bigru_forward(const BiGruAttParams<T>& params, const Mat<T>& inputs) {
  if (inputs.cols() < 1) throw ValidationError("bigru_forward: empty sequence");
  const Mat<T> reversed = inputs.rowwise().reverse();
  return assemble_states(gru_run(params.forward, inputs), gru_run(params.backward, reversed));
}

template <typename T>
AttentionOutput<T> attend(const Vec<T>& u_att, const Mat<T>& states) {
  if (states.cols() < 1) throw ValidationError("attend: empty sequence");
  if (u_att.size() != states.rows()) throw ValidationError("attend: dimension mismatch");
  AttentionOutput<T> out;
  out.raw_scores = states.transpose() * u_att;
  const T max = out.raw_scores.maxCoeff();
  out.scores = (out.raw_scores.array() - max).exp().matrix();
  out.scores /= out.scores.sum();
  out.sentence = states * out.scores;
  return out;
}

template <typename T>
T loss(T p, int gold) {
  const T lo = static_cast<T>(kProbClamp);
  const T pc = std::clamp(p, lo, T(1) - lo);
  return gold == 1 ? -std::log(pc) : -std::log(T(1) - pc);
}

template <typename T>
ForwardRecord<T> forward(const BiGruAttParams<T>& params, const Mat<T>& inputs, T dropout_rate,
                         Rng* dropout_rng) {
  if (inputs.cols() < 1) throw ValidationError("forward: empty sequence");
  if (inputs.rows() != params.input_dim()) {
    throw ValidationError("forward: input dimension " + std::to_string(inputs.rows()) +
                          " does not match model dimension " + std::to_string(params.input_dim()));
  }
  const bool drop = dropout_rng != nullptr && dropout_rate > T(0);
  const T keep_scale = drop ? T(1) / (T(1) - dropout_rate) : T(1);
  auto mask = [&](Eigen::Index rows, Eigen::Index cols) {
    Mat<T> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        m(i, j) = dropout_rng->bernoulli(static_cast<double>(dropout_rate)) ? T(0) : keep_scale;
      }
    }
    return m;
  };

  ForwardRecord<T> rec;
  rec.inputs = drop ? Mat<T>(inputs.cwiseProduct(mask(inputs.rows(), inputs.cols()))) : inputs;
  rec.fwd = gru_run(params.forward, rec.inputs);
  rec.bwd = gru_run(params.backward, Mat<T>(rec.inputs.rowwise().reverse()));
  rec.states = assemble_states(rec.fwd, rec.bwd);
  if (drop) {
    rec.output_mask = mask(rec.states.rows(), rec.states.cols());
    rec.states = rec.states.cwiseProduct(rec.output_mask);
  }
  rec.attention = attend(params.u_att, rec.states);
  rec.logit = params.u_p.dot(rec.attention.sentence) + params.b_p;
  rec.probability = sigmoid(rec.logit);
  return rec;
}

namespace {

// Back-propagation through time for one direction. `d_states` holds
// dL/dh_t for t = 1..n in reading order.
template <typename T>
void gru_backward(const GruCellParams<T>& cell, const Mat<T>& inputs, const GruTrace<T>& trace,
                  const Mat<T>& d_states, GruCellParams<T>& g) {
  const Eigen::Index n = inputs.cols();
  const Eigen::Index d_h = cell.hidden_dim();
  Mat<T> d_pre_z(d_h, n), d_pre_r(d_h, n), d_pre_c(d_h, n), reset_state(d_h, n);
  Vec<T> dh_next = Vec<T>::Zero(d_h);
  Vec<T> dh(d_h), d_rh(d_h);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto h_prev = trace.states.col(t);
    const auto z = trace.z.col(t);
    const auto r = trace.r.col(t);
    const auto c = trace.c.col(t);
    dh = d_states.col(t) + dh_next;

    const Vec<T> dz = dh.cwiseProduct(c - h_prev);
    const Vec<T> dc = dh.cwiseProduct(z);
    Vec<T> dh_prev = dh - dh.cwiseProduct(z);

    d_pre_c.col(t) = dc.array() * (T(1) - c.array().square());
    reset_state.col(t) = r.cwiseProduct(h_prev);
    d_rh.noalias() = cell.u_h.transpose() * d_pre_c.col(t);
    const Vec<T> dr = d_rh.cwiseProduct(h_prev);
    dh_prev += d_rh.cwiseProduct(r);

    d_pre_z.col(t) = dz.array() * z.array() * (T(1) - z.array());
    d_pre_r.col(t) = dr.array() * r.array() * (T(1) - r.array());
    dh_prev.noalias() += cell.u_z.transpose() * d_pre_z.col(t);
    dh_prev.noalias() += cell.u_r.transpose() * d_pre_r.col(t);
    dh_next = dh_prev;
  }
  const auto prev_states = trace.states.leftCols(n);
  g.u_z.noalias() += d_pre_z * prev_states.transpose();
  g.u_r.noalias() += d_pre_r * prev_states.transpose();
  g.u_h.noalias() += d_pre_c * reset_state.transpose();
  g.w_z.noalias() += d_pre_z * inputs.transpose();
  g.w_r.noalias() += d_pre_r * inputs.transpose();
  g.w_h.noalias() += d_pre_c * inputs.transpose();
  g.b_z += d_pre_z.rowwise().sum();
  g.b_r += d_pre_r.rowwise().sum();
  g.b_h += d_pre_c.rowwise().sum();
}

}  // namespace

template <typename T>
void backward(const BiGruAttParams<T>& params, const ForwardRecord<T>& rec, int gold, T scale,
              BiGruAttParams<T>& grads) {
  const Eigen::Index d_h = params.hidden_dim();
  const T lo = static_cast<T>(kProbClamp);
  const T p = rec.probability;
  // d(loss)/d(logit) is p - y inside the clamp range; the clamp is flat outside it.
  const T d_logit = (p >= lo && p <= T(1) - lo) ? scale * (p - static_cast<T>(gold)) : T(0);

  const auto& att = rec.attention;
  grads.u_p += d_logit * att.sentence;
  grads.b_p += d_logit;
  const Vec<T> d_sentence = d_logit * params.u_p;

  Mat<T> d_states = d_sentence * att.scores.transpose();
  const Vec<T> d_scores = rec.states.transpose() * d_sentence;
  const T weighted = att.scores.dot(d_scores);
  const Vec<T> d_raw = att.scores.cwiseProduct((d_scores.array() - weighted).matrix());
  grads.u_att.noalias() += rec.states * d_raw;
  d_states.noalias() += params.u_att * d_raw.transpose();
  if (rec.output_mask.size() > 0) d_states = d_states.cwiseProduct(rec.output_mask);

  gru_backward(params.forward, rec.inputs, rec.fwd, Mat<T>(d_states.topRows(d_h)), grads.forward);
  const Mat<T> reversed_inputs = rec.inputs.rowwise().reverse();
  const Mat<T> d_back = d_states.bottomRows(d_h).rowwise().reverse();
  gru_backward(params.backward, reversed_inputs, rec.bwd, d_back, grads.backward);

  bool finite = std::isfinite(grads.b_p);
  for_each_tensor(grads, [&](const std::string&, const auto& t) { finite = finite && t.allFinite(); });
  if (!finite) throw RuntimeError("non-finite gradient");
}

template <typename T>
BatchGradient<T> batch_gradient(const BiGruAttParams<T>& params, const std::vector<const Mat<T>*>& inputs,
                                const std::vector<int>& golds, T dropout_rate, Rng* dropout_rng) {
  if (inputs.empty() || inputs.size() != golds.size()) throw ValidationError("batch_gradient: bad batch");
  BatchGradient<T> out{BiGruAttParams<T>(params.input_dim(), params.hidden_dim()), T(0)};
  const T scale = T(1) / static_cast<T>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto rec = forward(params, *inputs[i], dropout_rate, dropout_rng);
    out.loss += loss(rec.probability, golds[i]);
    backward(params, rec, golds[i], scale, out.grads);
  }
  out.loss *= scale;
  return out;
}

template <typename T>
BiGruAttParams<T> init_params(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed) {
  if (input_dim <= 0 || hidden_dim <= 0) throw ValidationError("init_params: dimensions must be positive");
  BiGruAttParams<T> p(input_dim, hidden_dim);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  const double glorot = std::sqrt(6.0 / static_cast<double>(2 * hidden_dim + 1));
  for_each_tensor(p, [&](const std::string& name, auto& t) {
    const double b = name == "u_att" ? glorot : bound;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(rng.uniform(-b, b));
  });
  return p;
}

#define CAUSAL_NN_INSTANTIATE(T)                                                                       \
  template struct GruCellParams<T>;                                                                    \
  template struct BiGruAttParams<T>;                                                                   \
  template Vec<T> gru_step(const GruCellParams<T>&, const Vec<T>&, const Vec<T>&);                     \
  template GruTrace<T> gru_run(const GruCellParams<T>&, const Mat<T>&);                                \
  template Mat<T> bigru_forward(const BiGruAttParams<T>&, const Mat<T>&);                              \
  template AttentionOutput<T> attend(const Vec<T>&, const Mat<T>&);                                    \
  template T loss(T, int);                                                                             \
  template ForwardRecord<T> forward(const BiGruAttParams<T>&, const Mat<T>&, T, Rng*);                 \
  template void backward(const BiGruAttParams<T>&, const ForwardRecord<T>&, int, T, BiGruAttParams<T>&); \
  template BatchGradient<T> batch_gradient(const BiGruAttParams<T>&, const std::vector<const Mat<T>*>&, \
                                           const std::vector<int>&, T, Rng*);                          \
  template BiGruAttParams<T> init_params(Eigen::Index, Eigen::Index, std::uint64_t);

CAUSAL_NN_INSTANTIATE(float)
CAUSAL_NN_INSTANTIATE(double)

template BiGruAttParams<double> BiGruAttParams<float>::cast<double>() const;
template BiGruAttParams<float> BiGruAttParams<double>::cast<float>() const;
template BiGruAttParams<float> BiGruAttParams<float>::cast<float>() const;
template BiGruAttParams<double> BiGruAttParams<double>::cast<double>() const;

}  // namespace causal::nn
