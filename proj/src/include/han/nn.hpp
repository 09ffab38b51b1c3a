#pragma once

// Recurrent/attention layers with explicit reverse-mode backward passes.
// Every forward fills a cache holding exactly the intermediates its backward
// needs; backward accumulates into caller-provided gradient structures so
// patient-level gradients can be reduced in a fixed order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "han/error.hpp"
#include "han/kernels.hpp"
#include "han/rng.hpp"
#include "han/tensor.hpp"

namespace han::nn {

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// log(1 + e^x) without overflow.
template <class T>
T softplus(T x) {
  const T mag = x < T(0) ? x : -x;  // -|x|
  return std::log1p(std::exp(mag)) + (x > T(0) ? x : T(0));
}

// ---------------------------------------------------------------- params --

// Gate blocks are stacked in the order input, forget, cell, output.
template <class T>
struct LstmParams {
  Tensor<T> w_x;   // 4H x I
  Tensor<T> w_h;   // 4H x H
  Tensor<T> bias;  // 4H

  std::size_t hidden() const { return w_h.cols(); }
  std::size_t input() const { return w_x.cols(); }

  static LstmParams sized(std::size_t input, std::size_t hidden) {
    LstmParams p;
    p.w_x = Tensor<T>(4 * hidden, input);
    p.w_h = Tensor<T>(4 * hidden, hidden);
    p.bias = Tensor<T>(4 * hidden);
    return p;
  }
};

template <class T>
struct AttentionParams {
  Tensor<T> proj;     // A x D
  Tensor<T> bias;     // A
  Tensor<T> context;  // A

  std::size_t attn() const { return proj.rows(); }
  std::size_t dim() const { return proj.cols(); }

  static AttentionParams sized(std::size_t attn, std::size_t dim) {
    AttentionParams p;
    p.proj = Tensor<T>(attn, dim);
    p.bias = Tensor<T>(attn);
    p.context = Tensor<T>(attn);
    return p;
  }
};

template <class T>
struct DenseParams {
  Tensor<T> weight;  // O x I
  Tensor<T> bias;    // O

  static DenseParams sized(std::size_t out, std::size_t in) {
    DenseParams p;
    p.weight = Tensor<T>(out, in);
    p.bias = Tensor<T>(out);
    return p;
  }
};

// ---------------------------------------------------------------- caches --

template <class T>
struct LstmCache {
  Tensor<T> gates;  // S x 4H, post-activation (i, f, g, o)
  Tensor<T> c;      // S x H
  Tensor<T> h;      // S x H
  bool reverse = false;
};

template <class T>
struct BilstmCache {
  LstmCache<T> fwd, bwd;
  Tensor<T> y;  // S x 2H; row t = [h_fwd_t ; h_bwd_t]
};

template <class T>
struct AttnCache {
  Tensor<T> u;         // S x A, tanh-activated projections
  Tensor<T> alpha;     // S, softmax weights
  Tensor<T> pooled;    // D
  Tensor<T> d_scores;  // S; filled by backward (softmax-input gradient)
};

// ----------------------------------------------------------------- LSTM ---

// Single direction over a S x I input; zero initial state. With
// reverse=true the sequence is consumed from the last row to the first, and
// cache rows stay aligned with input rows (cache.h row t is the state after
// consuming row t in the chosen direction).
template <class T>
void lstm_forward(const LstmParams<T>& p, const Tensor<T>& x,
                  LstmCache<T>& cache, bool reverse) {
  const std::size_t S = x.rows();
  const std::size_t H = p.hidden();
  if (x.cols() != p.input()) {
    throw ValidationError("lstm_forward: input width mismatch");
  }
  cache.gates = Tensor<T>(S, 4 * H);
  cache.c = Tensor<T>(S, H);
  cache.h = Tensor<T>(S, H);
  cache.reverse = reverse;

  std::vector<T> z(4 * H);
  const T* h_prev = nullptr;
  const T* c_prev = nullptr;
  for (std::size_t step = 0; step < S; ++step) {
    const std::size_t t = reverse ? S - 1 - step : step;
    kernels::matvec(p.w_x.data(), x.row(t), z.data(), 4 * H, p.input());
    if (h_prev != nullptr) {
      kernels::matvec_acc(p.w_h.data(), h_prev, z.data(), 4 * H, H);
    }
    T* gates = cache.gates.row(t);
    T* c = cache.c.row(t);
    T* h = cache.h.row(t);
    for (std::size_t j = 0; j < H; ++j) {
      const T zi = z[j] + p.bias[j];
      const T zf = z[H + j] + p.bias[H + j];
      const T zg = z[2 * H + j] + p.bias[2 * H + j];
      const T zo = z[3 * H + j] + p.bias[3 * H + j];
      const T gi = sigmoid(zi);
      const T gf = sigmoid(zf);
      const T gg = std::tanh(zg);
      const T go = sigmoid(zo);
      gates[j] = gi;
      gates[H + j] = gf;
      gates[2 * H + j] = gg;
      gates[3 * H + j] = go;
      const T cp = c_prev ? c_prev[j] : T(0);
      c[j] = gf * cp + gi * gg;
      h[j] = go * std::tanh(c[j]);
    }
    h_prev = h;
    c_prev = c;
  }
}

// dh is S x H (gradient w.r.t. every emitted hidden state). Parameter
// gradients accumulate into `grads`; input gradients accumulate into dx.
template <class T>
void lstm_backward(const LstmParams<T>& p, const Tensor<T>& x,
                   const LstmCache<T>& cache, const Tensor<T>& dh,
                   LstmParams<T>& grads, Tensor<T>& dx) {
  const std::size_t S = x.rows();
  const std::size_t H = p.hidden();
  const bool reverse = cache.reverse;

  std::vector<T> dh_next(H, T(0));  // gradient flowing from the later step
  std::vector<T> dc_next(H, T(0));
  std::vector<T> dz(4 * H);
  for (std::size_t step = S; step-- > 0;) {
    // Walk time in the opposite order of the forward pass.
    const std::size_t t = reverse ? S - 1 - step : step;
    const std::size_t t_prev_step = step;  // index of the previous time step
    const bool has_prev = t_prev_step > 0;
    const std::size_t t_prev =
        reverse ? S - 1 - (t_prev_step - 1) : t_prev_step - 1;

    const T* gates = cache.gates.row(t);
    const T* c = cache.c.row(t);
    const T* c_prev = has_prev ? cache.c.row(t_prev) : nullptr;
    const T* h_prev = has_prev ? cache.h.row(t_prev) : nullptr;

    for (std::size_t j = 0; j < H; ++j) {
      const T gi = gates[j];
      const T gf = gates[H + j];
      const T gg = gates[2 * H + j];
      const T go = gates[3 * H + j];
      const T tc = std::tanh(c[j]);
      const T dhj = dh(t, j) + dh_next[j];
      const T dcj = dhj * go * (T(1) - tc * tc) + dc_next[j];
      const T cp = c_prev ? c_prev[j] : T(0);
      dz[j] = dcj * gg * gi * (T(1) - gi);                 // input gate
      dz[H + j] = dcj * cp * gf * (T(1) - gf);             // forget gate
      dz[2 * H + j] = dcj * gi * (T(1) - gg * gg);         // cell candidate
      dz[3 * H + j] = dhj * tc * go * (T(1) - go);         // output gate
      dc_next[j] = dcj * gf;
    }
    kernels::outer_acc(grads.w_x.data(), dz.data(), x.row(t), 4 * H, p.input());
    kernels::matvec_t_acc(p.w_x.data(), dz.data(), dx.row(t), 4 * H, p.input());
    for (std::size_t j = 0; j < 4 * H; ++j) grads.bias[j] += dz[j];
    std::fill(dh_next.begin(), dh_next.end(), T(0));
    if (has_prev) {
      kernels::outer_acc(grads.w_h.data(), dz.data(), h_prev, 4 * H, H);
      kernels::matvec_t_acc(p.w_h.data(), dz.data(), dh_next.data(), 4 * H, H);
    }
  }
}

// --------------------------------------------------------------- bi-LSTM --

template <class T>
void bilstm_forward(const LstmParams<T>& fwd, const LstmParams<T>& bwd,
                    const Tensor<T>& x, BilstmCache<T>& cache) {
  if (fwd.hidden() != bwd.hidden()) {
    throw ValidationError("bilstm: direction widths differ");
  }
  const std::size_t S = x.rows();
  const std::size_t H = fwd.hidden();
  lstm_forward(fwd, x, cache.fwd, /*reverse=*/false);
  lstm_forward(bwd, x, cache.bwd, /*reverse=*/true);
  cache.y = Tensor<T>(S, 2 * H);
  for (std::size_t t = 0; t < S; ++t) {
    T* row = cache.y.row(t);
    const T* hf = cache.fwd.h.row(t);
    const T* hb = cache.bwd.h.row(t);
    for (std::size_t j = 0; j < H; ++j) row[j] = hf[j];
    for (std::size_t j = 0; j < H; ++j) row[H + j] = hb[j];
  }
}

template <class T>
void bilstm_backward(const LstmParams<T>& fwd, const LstmParams<T>& bwd,
                     const Tensor<T>& x, const BilstmCache<T>& cache,
                     const Tensor<T>& dy, LstmParams<T>& gfwd,
                     LstmParams<T>& gbwd, Tensor<T>& dx) {
  const std::size_t S = x.rows();
  const std::size_t H = fwd.hidden();
  Tensor<T> dh_f(S, H), dh_b(S, H);
  for (std::size_t t = 0; t < S; ++t) {
    const T* row = dy.row(t);
    for (std::size_t j = 0; j < H; ++j) dh_f(t, j) = row[j];
    for (std::size_t j = 0; j < H; ++j) dh_b(t, j) = row[H + j];
  }
  lstm_backward(fwd, x, cache.fwd, dh_f, gfwd, dx);
  lstm_backward(bwd, x, cache.bwd, dh_b, gbwd, dx);
}

// Convenience wrapper returning the S x 2H encoding.
template <class T>
Tensor<T> bilstm_encode(const LstmParams<T>& fwd, const LstmParams<T>& bwd,
                        const Tensor<T>& x) {
  BilstmCache<T> cache;
  bilstm_forward(fwd, bwd, x, cache);
  return cache.y;
}

// ------------------------------------------------------------- attention --

// u_t = tanh(proj * h_t + bias); score_t = u_t . context;
// alpha = softmax(score); pooled = sum_t alpha_t h_t.
template <class T>
void attention_forward(const AttentionParams<T>& p, const Tensor<T>& h,
                       AttnCache<T>& cache) {
  const std::size_t S = h.rows();
  const std::size_t A = p.attn();
  const std::size_t D = p.dim();
  if (h.cols() != D) throw ValidationError("attention: input width mismatch");
  if (S == 0) throw ValidationError("attention: empty sequence");
  cache.u = Tensor<T>(S, A);
  cache.alpha = Tensor<T>(S);
  cache.pooled = Tensor<T>(D);
  cache.d_scores = Tensor<T>(S);

  std::vector<T> scores(S);
  for (std::size_t t = 0; t < S; ++t) {
    T* u = cache.u.row(t);
    kernels::matvec(p.proj.data(), h.row(t), u, A, D);
    for (std::size_t a = 0; a < A; ++a) u[a] = std::tanh(u[a] + p.bias[a]);
    scores[t] = kernels::dot(u, p.context.data(), A);
  }
  T mx = scores[0];
  for (const T s : scores) mx = std::max(mx, s);
  T denom = T(0);
  for (std::size_t t = 0; t < S; ++t) {
    cache.alpha[t] = std::exp(scores[t] - mx);
    denom += cache.alpha[t];
  }
  for (std::size_t t = 0; t < S; ++t) {
    cache.alpha[t] /= denom;
    kernels::axpy(cache.alpha[t], h.row(t), cache.pooled.data(), D);
  }
}

// d_pooled is the gradient w.r.t. the pooled vector; d_alpha (optional) adds
// a direct gradient w.r.t. the attention weights. Gradients w.r.t. h
// accumulate into dh. cache.d_scores is (re)filled with the pre-softmax
// score gradient, whose components always sum to zero.
template <class T>
void attention_backward(const AttentionParams<T>& p, const Tensor<T>& h,
                        AttnCache<T>& cache, const Tensor<T>& d_pooled,
                        const Tensor<T>* d_alpha, AttentionParams<T>& grads,
                        Tensor<T>& dh) {
  const std::size_t S = h.rows();
  const std::size_t A = p.attn();
  const std::size_t D = p.dim();

  // alpha enters through pooled = sum alpha_t h_t plus any direct d_alpha.
  std::vector<T> da(S);
  for (std::size_t t = 0; t < S; ++t) {
    da[t] = kernels::dot(d_pooled.data(), h.row(t), D);
    if (d_alpha) da[t] += (*d_alpha)[t];
  }
  T weighted = T(0);
  for (std::size_t t = 0; t < S; ++t) weighted += cache.alpha[t] * da[t];
  for (std::size_t t = 0; t < S; ++t) {
    cache.d_scores[t] = cache.alpha[t] * (da[t] - weighted);
  }

  std::vector<T> du(A);
  for (std::size_t t = 0; t < S; ++t) {
    // Through pooled: dh_t += alpha_t * d_pooled.
    kernels::axpy(cache.alpha[t], d_pooled.data(), dh.row(t), D);
    // Through the score: score_t = u_t . context.
    const T* u = cache.u.row(t);
    const T ds = cache.d_scores[t];
    for (std::size_t a = 0; a < A; ++a) {
      grads.context[a] += ds * u[a];
      // d(tanh pre-activation)
      du[a] = ds * p.context[a] * (T(1) - u[a] * u[a]);
    }
    kernels::outer_acc(grads.proj.data(), du.data(), h.row(t), A, D);
    kernels::matvec_t_acc(p.proj.data(), du.data(), dh.row(t), A, D);
    for (std::size_t a = 0; a < A; ++a) grads.bias[a] += du[a];
  }
}

// Convenience wrapper returning (pooled D-vector, weights S-vector).
template <class T>
std::pair<Tensor<T>, Tensor<T>> attention_pool(const AttentionParams<T>& p,
                                               const Tensor<T>& h) {
  AttnCache<T> cache;
  attention_forward(p, h, cache);
  return {std::move(cache.pooled), std::move(cache.alpha)};
}

// ----------------------------------------------------------------- dense --

template <class T>
void dense_forward(const DenseParams<T>& p, const Tensor<T>& x, Tensor<T>& y) {
  y = Tensor<T>(p.weight.rows());
  kernels::matvec(p.weight.data(), x.data(), y.data(), p.weight.rows(),
                  p.weight.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += p.bias[i];
}

template <class T>
void dense_backward(const DenseParams<T>& p, const Tensor<T>& x,
                    const Tensor<T>& dy, DenseParams<T>& grads, Tensor<T>& dx) {
  kernels::outer_acc(grads.weight.data(), dy.data(), x.data(), p.weight.rows(),
                     p.weight.cols());
  kernels::matvec_t_acc(p.weight.data(), dy.data(), dx.data(), p.weight.rows(),
                        p.weight.cols());
  for (std::size_t i = 0; i < dy.size(); ++i) grads.bias[i] += dy[i];
}

// ------------------------------------------------------------------ loss --

// Per-head binary cross-entropy from the logit, with a positive-class
// weight, in the log-sum-exp form that never exponentiates a positive
// argument:
//   loss = w*y*softplus(-z) + (1-y)*softplus(z)
// Returns the loss; *dlogit receives d(loss)/dz.
template <class T>
T bce_with_logit(T logit, T label, T weight, T* dlogit) {
  const T y = label;
  const T loss = weight * y * softplus(-logit) + (T(1) - y) * softplus(logit);
  if (dlogit) {
    *dlogit = -weight * y * sigmoid(-logit) + (T(1) - y) * sigmoid(logit);
  }
  if (!std::isfinite(static_cast<double>(loss))) {
    throw NumericError("non-finite BCE loss");
  }
  return loss;
}

template <class T>
struct BceResult {
  T loss;
  Tensor<T> dlogits;
};

// Mean over heads of the weighted per-head BCE.
template <class T>
BceResult<T> weighted_bce_with_logits(const Tensor<T>& logits,
                                      const Tensor<T>& labels,
                                      const Tensor<T>& weights) {
  const std::size_t K = logits.size();
  if (labels.size() != K || weights.size() != K || K == 0) {
    throw ValidationError("weighted_bce_with_logits: size mismatch");
  }
  BceResult<T> out;
  out.dlogits = Tensor<T>(K);
  T sum = T(0);
  for (std::size_t k = 0; k < K; ++k) {
    T d;
    sum += bce_with_logit(logits[k], labels[k], weights[k], &d);
    out.dlogits[k] = d / static_cast<T>(K);
  }
  out.loss = sum / static_cast<T>(K);
  return out;
}

// ------------------------------------------------------------------ adam --

template <class T>
struct AdamHyper {
  T lr = T(0.001);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// One bias-corrected update of a single tensor; `t` is the 1-based step.
template <class T>
void adam_update(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& m,
                 Tensor<T>& v, std::int64_t t, const AdamHyper<T>& hp) {
  if (param.size() != grad.size() || param.size() != m.size() ||
      param.size() != v.size()) {
    throw ValidationError("adam_update: shape mismatch");
  }
  if (t < 1) throw UsageError("adam_update: step must be >= 1");
  const T c1 = T(1) - std::pow(hp.beta1, static_cast<T>(t));
  const T c2 = T(1) - std::pow(hp.beta2, static_cast<T>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = hp.beta1 * m[i] + (T(1) - hp.beta1) * g;
    v[i] = hp.beta2 * v[i] + (T(1) - hp.beta2) * g * g;
    const T mhat = m[i] / c1;
    const T vhat = v[i] / c2;
    param[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

// ------------------------------------------------------------ grad check --

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

// Central differences against analytic gradients. `loss` re-evaluates the
// objective from the current parameter values. For each (param, grad) pair,
// up to max_coords coordinates are probed (all of them when the tensor is
// small enough). Error metric: |analytic - numeric| / max(1, |a|, |n|).
template <class T, class LossFn>
GradCheckReport grad_check(LossFn&& loss,
                           std::vector<Tensor<T>*> params,
                           std::vector<const Tensor<T>*> grads, double h,
                           std::size_t max_coords, std::uint64_t seed) {
  if (params.size() != grads.size()) {
    throw ValidationError("grad_check: params/grads length mismatch");
  }
  Rng rng(mix_seed(seed, 0x67636865636bULL));
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = *params[pi];
    const Tensor<T>& g = *grads[pi];
    if (p.size() != g.size()) {
      throw ValidationError("grad_check: tensor shape mismatch");
    }
    std::vector<std::size_t> coords;
    if (p.size() <= max_coords) {
      coords.resize(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < max_coords; ++i) {
        coords.push_back(static_cast<std::size_t>(rng.below(p.size())));
      }
    }
    for (const std::size_t i : coords) {
      const T saved = p[i];
      p[i] = saved + static_cast<T>(h);
      const double lp = loss();
      p[i] = saved - static_cast<T>(h);
      const double lm = loss();
      p[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = static_cast<double>(g[i]);
      const double scale =
          std::max({1.0, std::abs(analytic), std::abs(numeric)});
      report.max_rel_err =
          std::max(report.max_rel_err, std::abs(analytic - numeric) / scale);
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace han::nn
