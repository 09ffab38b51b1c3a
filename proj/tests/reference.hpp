#pragma once

// Independent oracles for the encoder math and the AUC statistic. These are
// deliberately naive re-derivations from the definitions — plain loops over
// std::vector<double>, no shared code with the library kernels — so a test
// agreeing with both implementations is evidence, not circularity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "han/corpus.hpp"
#include "han/embed.hpp"
#include "han/model.hpp"

namespace ref {

using Mat = std::vector<std::vector<double>>;  // row-major

inline Mat to_mat(const han::Tensor<double>& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

inline std::vector<double> to_vec(const han::Tensor<double>& t) {
  return {t.data(), t.data() + t.size()};
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// One LSTM pass over xs; gate blocks ordered input, forget, cell, output.
// States start at zero. Returns the hidden sequence.
inline Mat lstm(const Mat& w_x, const Mat& w_h, const std::vector<double>& b,
                const Mat& xs) {
  const std::size_t H = w_h[0].size();
  std::vector<double> h(H, 0.0), c(H, 0.0);
  Mat out;
  for (const auto& x : xs) {
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r)
      z[r] = dot(w_x[r], x) + dot(w_h[r], h) + b[r];
    std::vector<double> nh(H), nc(H);
    for (std::size_t j = 0; j < H; ++j) {
      const double gi = 1.0 / (1.0 + std::exp(-z[j]));
      const double gf = 1.0 / (1.0 + std::exp(-z[H + j]));
      const double gg = std::tanh(z[2 * H + j]);
      const double go = 1.0 / (1.0 + std::exp(-z[3 * H + j]));
      nc[j] = gf * c[j] + gi * gg;
      nh[j] = go * std::tanh(nc[j]);
    }
    h = nh;
    c = nc;
    out.push_back(h);
  }
  return out;
}

// Forward pass over xs plus a second pass over the reversed sequence;
// row t of the result is [h_fwd_t ; h_bwd_t].
inline Mat bilstm(const han::nn::LstmParams<double>& fwd,
                  const han::nn::LstmParams<double>& bwd, const Mat& xs) {
  const Mat hf = lstm(to_mat(fwd.w_x), to_mat(fwd.w_h), to_vec(fwd.bias), xs);
  Mat rev(xs.rbegin(), xs.rend());
  const Mat hb_rev =
      lstm(to_mat(bwd.w_x), to_mat(bwd.w_h), to_vec(bwd.bias), rev);
  Mat out;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    std::vector<double> row = hf[t];
    const auto& hb = hb_rev[xs.size() - 1 - t];
    row.insert(row.end(), hb.begin(), hb.end());
    out.push_back(row);
  }
  return out;
}

// Additive attention: u_t = tanh(W h_t + b); alpha = softmax(u . ctx);
// pooled = sum_t alpha_t h_t.
inline std::vector<double> attention(const han::nn::AttentionParams<double>& p,
                                     const Mat& hs,
                                     std::vector<double>* alpha_out = nullptr) {
  const Mat w = to_mat(p.proj);
  const std::vector<double> b = to_vec(p.bias), ctx = to_vec(p.context);
  std::vector<double> scores;
  for (const auto& h : hs) {
    std::vector<double> u(w.size());
    for (std::size_t r = 0; r < w.size(); ++r)
      u[r] = std::tanh(dot(w[r], h) + b[r]);
    scores.push_back(dot(u, ctx));
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0;
  std::vector<double> alpha;
  for (const double s : scores) {
    alpha.push_back(std::exp(s - mx));
    z += alpha.back();
  }
  for (double& a : alpha) a /= z;
  std::vector<double> pooled(hs[0].size(), 0.0);
  for (std::size_t t = 0; t < hs.size(); ++t)
    for (std::size_t j = 0; j < pooled.size(); ++j)
      pooled[j] += alpha[t] * hs[t][j];
  if (alpha_out) *alpha_out = alpha;
  return pooled;
}

inline std::vector<double> encode_level(const han::model::LevelParams<double>& p,
                                        const Mat& xs) {
  return attention(p.attn, bilstm(p.fwd, p.bwd, xs));
}

// Whole-model logits, mirroring the documented truncation rule (keep the
// first max_bursts / max_sentences / max_tokens).
inline std::vector<double> forward(const han::model::ModelParams<double>& m,
                                   const han::corpus::PatientSequence& patient,
                                   const han::embed::EmbeddingTable& table) {
  const auto& cfg = m.config;
  Mat burst_vecs;
  const std::size_t nb = std::min(patient.bursts.size(), cfg.max_bursts);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto sentences = patient.bursts[b].merged_sentences();
    Mat sent_vecs;
    const std::size_t ns = std::min(sentences.size(), cfg.max_sentences);
    for (std::size_t s = 0; s < ns; ++s) {
      Mat xs;
      const std::size_t nt = std::min(sentences[s].size(), cfg.max_tokens);
      for (std::size_t t = 0; t < nt; ++t) {
        const double* v = table.lookup(sentences[s][t]);
        xs.emplace_back(v, v + cfg.embed_dim);
      }
      sent_vecs.push_back(encode_level(m.sent, xs));
    }
    burst_vecs.push_back(encode_level(m.doc, sent_vecs));
  }
  const std::vector<double> pvec = encode_level(m.patient, burst_vecs);
  std::vector<double> logits;
  for (const auto& head : m.heads)
    logits.push_back(dot(to_mat(head.weight)[0], pvec) + to_vec(head.bias)[0]);
  return logits;
}

// Pair-counting AUC: fraction of (positive, negative) pairs ranked
// correctly, ties worth one half.
inline double auc(const std::vector<double>& scores,
                  const std::vector<std::uint8_t>& labels) {
  double won = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) won += 1.0;
      else if (scores[i] == scores[j]) won += 0.5;
    }
  }
  return won / static_cast<double>(pairs);
}

}  // namespace ref
