#pragma once

// Three-level encoder: sentence tokens -> sentence vector, burst sentences
// -> burst (document) vector, bursts -> patient vector, with a bi-LSTM plus
// additive attention at each level and K independent sigmoid heads on top.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "han/corpus.hpp"
#include "han/embed.hpp"
#include "han/error.hpp"
#include "han/nn.hpp"
#include "han/rng.hpp"
#include "han/sha256.hpp"

namespace han::model {

struct HanConfig {
  std::size_t embed_dim = 50;
  std::size_t lstm_hidden = 100;  // per direction
  std::size_t attn_size = 200;
  std::size_t n_heads = 1;
  std::size_t max_tokens = 64;      // per sentence
  std::size_t max_sentences = 128;  // per burst document
  std::size_t max_bursts = 256;     // per patient

  std::size_t doc_dim() const { return 2 * lstm_hidden; }

  bool operator==(const HanConfig&) const = default;

  // Structural equality ignoring the head count; fine-tuning swaps heads but
  // must keep the encoder shape.
  bool same_encoder(const HanConfig& o) const {
    HanConfig a = *this, b = o;
    a.n_heads = b.n_heads = 1;
    return a == b;
  }

  void validate() const {
    if (embed_dim == 0 || lstm_hidden == 0 || attn_size == 0 || n_heads == 0 ||
        max_tokens == 0 || max_sentences == 0 || max_bursts == 0) {
      throw ConfigError("model config fields must all be positive");
    }
  }
};

inline void to_json(nlohmann::json& j, const HanConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},
                     {"lstm_hidden", c.lstm_hidden},
                     {"attn_size", c.attn_size},
                     {"n_heads", c.n_heads},
                     {"max_tokens", c.max_tokens},
                     {"max_sentences", c.max_sentences},
                     {"max_bursts", c.max_bursts}};
}

inline void from_json(const nlohmann::json& j, HanConfig& c) {
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("lstm_hidden").get_to(c.lstm_hidden);
  j.at("attn_size").get_to(c.attn_size);
  j.at("n_heads").get_to(c.n_heads);
  j.at("max_tokens").get_to(c.max_tokens);
  j.at("max_sentences").get_to(c.max_sentences);
  j.at("max_bursts").get_to(c.max_bursts);
}

inline std::string config_hash(const HanConfig& c) {
  const nlohmann::json j = c;
  return sha256_hex(j.dump());  // nlohmann::json keeps keys sorted
}

template <class T>
struct LevelParams {
  nn::LstmParams<T> fwd, bwd;
  nn::AttentionParams<T> attn;
};

template <class T>
struct ModelParams {
  HanConfig config;
  LevelParams<T> sent, doc, patient;
  std::vector<nn::DenseParams<T>> heads;  // each 1 x doc_dim

  // Visits every tensor in a fixed, serialization-stable order.
  template <class F>
  void for_each_tensor(F&& f) {
    const char* levels[3] = {"sent", "doc", "patient"};
    LevelParams<T>* lp[3] = {&sent, &doc, &patient};
    for (int i = 0; i < 3; ++i) {
      const std::string base(levels[i]);
      f(base + "/fwd/w_x", lp[i]->fwd.w_x);
      f(base + "/fwd/w_h", lp[i]->fwd.w_h);
      f(base + "/fwd/bias", lp[i]->fwd.bias);
      f(base + "/bwd/w_x", lp[i]->bwd.w_x);
      f(base + "/bwd/w_h", lp[i]->bwd.w_h);
      f(base + "/bwd/bias", lp[i]->bwd.bias);
      f(base + "/attn/proj", lp[i]->attn.proj);
      f(base + "/attn/bias", lp[i]->attn.bias);
      f(base + "/attn/context", lp[i]->attn.context);
    }
    for (std::size_t k = 0; k < heads.size(); ++k) {
      const std::string base = "head/" + std::to_string(k);
      f(base + "/weight", heads[k].weight);
      f(base + "/bias", heads[k].bias);
    }
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&f](const std::string& name, Tensor<T>& t) {
          f(name, static_cast<const Tensor<T>&>(t));
        });
  }

  std::size_t tensor_count() const {
    std::size_t n = 0;
    for_each_tensor([&n](const std::string&, const Tensor<T>&) { ++n; });
    return n;
  }
};

// Closed-form trainable-parameter count:
//   per level: 2 directions * 4H*(I + H + 1), with I = embed_dim at the
//   sentence level and 2H above; per level attention: A*D + 2A; heads:
//   K*(D+1) with D = 2H.
inline std::size_t param_count(const HanConfig& c) {
  const std::size_t H = c.lstm_hidden;
  const std::size_t D = c.doc_dim();
  const std::size_t A = c.attn_size;
  std::size_t total = 0;
  const std::size_t inputs[3] = {c.embed_dim, D, D};
  for (const std::size_t I : inputs) {
    total += 2 * 4 * H * (I + H + 1);
    total += A * D + 2 * A;
  }
  total += c.n_heads * (D + 1);
  return total;
}

namespace detail {

template <class T>
void init_tensor(const std::string& name, Tensor<T>& t, std::uint64_t seed,
                 std::size_t lstm_hidden) {
  Rng rng(mix_seed(seed, fnv1a(name.c_str())));
  const bool is_bias = name.ends_with("/bias");
  const bool is_lstm_bias =
      is_bias && (name.find("/fwd/") != std::string::npos ||
                  name.find("/bwd/") != std::string::npos);
  if (is_lstm_bias) {
    t.fill(T(0));
    // Positive forget-gate bias keeps early memory open.
    for (std::size_t j = lstm_hidden; j < 2 * lstm_hidden; ++j) t[j] = T(1);
    return;
  }
  if (is_bias) {
    t.fill(T(0));
    return;
  }
  // Matrices (and the attention context vector, treated as 1 x A).
  const std::size_t fan_out = t.rank() == 2 ? t.rows() : 1;
  const std::size_t fan_in = t.rank() == 2 ? t.cols() : t.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>(rng.glorot(fan_in, fan_out));
  }
}

}  // namespace detail

// Allocates every tensor at the shape the config dictates, zero-filled.
template <class T>
ModelParams<T> make_zeroed(const HanConfig& config) {
  config.validate();
  ModelParams<T> p;
  p.config = config;
  const std::size_t H = config.lstm_hidden;
  const std::size_t D = config.doc_dim();
  const std::size_t A = config.attn_size;
  const std::size_t inputs[3] = {config.embed_dim, D, D};
  LevelParams<T>* lp[3] = {&p.sent, &p.doc, &p.patient};
  for (int i = 0; i < 3; ++i) {
    lp[i]->fwd = nn::LstmParams<T>::sized(inputs[i], H);
    lp[i]->bwd = nn::LstmParams<T>::sized(inputs[i], H);
    lp[i]->attn = nn::AttentionParams<T>::sized(A, D);
  }
  p.heads.resize(config.n_heads);
  for (auto& head : p.heads) head = nn::DenseParams<T>::sized(1, D);
  return p;
}

// Glorot-uniform matrices, zero biases, forget-gate bias 1. Each tensor
// draws from its own stream keyed by (seed, tensor name), so e.g. head
// initialization is identical whether it happens in build_model or in a
// later replace_head with the same seed.
template <class T>
ModelParams<T> build_model(const HanConfig& config, std::uint64_t seed) {
  ModelParams<T> p = make_zeroed<T>(config);
  p.for_each_tensor([&](const std::string& name, Tensor<T>& t) {
    detail::init_tensor(name, t, seed, config.lstm_hidden);
  });
  return p;
}

// Drops the existing heads and installs new_heads freshly initialized ones.
template <class T>
void replace_head(ModelParams<T>& params, std::size_t new_heads,
                  std::uint64_t seed) {
  if (new_heads == 0) throw ConfigError("replace_head: need at least 1 head");
  const std::size_t D = params.config.doc_dim();
  params.heads.assign(new_heads, nn::DenseParams<T>());
  params.config.n_heads = new_heads;
  for (std::size_t k = 0; k < new_heads; ++k) {
    params.heads[k] = nn::DenseParams<T>::sized(1, D);
    const std::string base = "head/" + std::to_string(k);
    detail::init_tensor(base + "/weight", params.heads[k].weight, seed,
                        params.config.lstm_hidden);
    detail::init_tensor(base + "/bias", params.heads[k].bias, seed,
                        params.config.lstm_hidden);
  }
}

// --------------------------------------------------------------- forward --

template <class T>
struct LevelTape {
  Tensor<T> x;  // level input (owned copy)
  nn::BilstmCache<T> lstm;
  nn::AttnCache<T> attn;
};

template <class T>
struct ForwardTape {
  std::vector<std::vector<LevelTape<T>>> sent;  // [burst][sentence]
  std::vector<LevelTape<T>> doc;                // [burst]
  LevelTape<T> patient;
  Tensor<T> logits;
  bool valid = false;
};

namespace detail {

template <class T>
void encode_level(const LevelParams<T>& level, LevelTape<T>& tape) {
  nn::bilstm_forward(level.fwd, level.bwd, tape.x, tape.lstm);
  nn::attention_forward(level.attn, tape.lstm.y, tape.attn);
}

}  // namespace detail

// Encodes one patient. Caps are applied by truncation from the end (the
// first max_tokens tokens, max_sentences sentences, max_bursts bursts are
// kept). Returns K logits; fills *tape when given (required for backward).
template <class T>
Tensor<T> forward(const ModelParams<T>& params,
                  const corpus::PatientSequence& patient,
                  const embed::EmbeddingTable& table, ForwardTape<T>* tape) {
  const HanConfig& cfg = params.config;
  if (table.dim() != cfg.embed_dim) {
    throw ValidationError("embedding dimension does not match model config");
  }
  if (patient.bursts.empty()) {
    throw ValidationError("patient '" + patient.patient_id + "' has no bursts");
  }
  ForwardTape<T> local;
  ForwardTape<T>& tp = tape ? *tape : local;
  tp.sent.clear();
  tp.doc.clear();
  tp.valid = false;

  const std::size_t n_bursts =
      std::min(patient.bursts.size(), cfg.max_bursts);
  const std::size_t D = cfg.doc_dim();
  tp.patient.x = Tensor<T>(n_bursts, D);
  tp.sent.resize(n_bursts);
  tp.doc.resize(n_bursts);

  for (std::size_t b = 0; b < n_bursts; ++b) {
    const auto sentences = patient.bursts[b].merged_sentences();
    if (sentences.empty()) {
      throw ValidationError("patient '" + patient.patient_id +
                            "' has a burst with no sentences");
    }
    const std::size_t n_sent = std::min(sentences.size(), cfg.max_sentences);
    tp.doc[b].x = Tensor<T>(n_sent, D);
    tp.sent[b].resize(n_sent);
    for (std::size_t s = 0; s < n_sent; ++s) {
      const auto& tokens = sentences[s];
      if (tokens.empty()) {
        throw ValidationError("patient '" + patient.patient_id +
                              "' has an empty sentence");
      }
      const std::size_t n_tok = std::min(tokens.size(), cfg.max_tokens);
      LevelTape<T>& st = tp.sent[b][s];
      st.x = Tensor<T>(n_tok, cfg.embed_dim);
      for (std::size_t i = 0; i < n_tok; ++i) {
        const double* vec = table.lookup(tokens[i]);
        T* row = st.x.row(i);
        for (std::size_t k = 0; k < cfg.embed_dim; ++k) {
          row[k] = static_cast<T>(vec[k]);
        }
      }
      detail::encode_level(params.sent, st);
      std::memcpy(tp.doc[b].x.row(s), st.attn.pooled.data(), D * sizeof(T));
    }
    detail::encode_level(params.doc, tp.doc[b]);
    std::memcpy(tp.patient.x.row(b), tp.doc[b].attn.pooled.data(),
                D * sizeof(T));
  }
  detail::encode_level(params.patient, tp.patient);

  tp.logits = Tensor<T>(params.heads.size());
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    Tensor<T> out;
    nn::dense_forward(params.heads[k], tp.patient.attn.pooled, out);
    tp.logits[k] = out[0];
  }
  tp.logits.ensure_finite("model logits");
  tp.valid = true;
  return tp.logits;
}

// Inference-only forward pass: no tape is kept.
template <class T>
Tensor<T> forward(const ModelParams<T>& params,
                  const corpus::PatientSequence& patient,
                  const embed::EmbeddingTable& table) {
  return forward(params, patient, table, static_cast<ForwardTape<T>*>(nullptr));
}

// Accumulates parameter gradients for one patient into `grads` (which must
// be shaped like `params`; embeddings are frozen so no input gradient is
// reported). The tape must come from a forward() call on the same params.
template <class T>
void backward(const ModelParams<T>& params, ForwardTape<T>& tape,
              const Tensor<T>& dlogits, ModelParams<T>& grads) {
  if (!tape.valid) {
    throw UsageError("backward called without a completed forward tape");
  }
  if (dlogits.size() != params.heads.size()) {
    throw ValidationError("backward: dlogits size mismatch");
  }
  const std::size_t D = params.config.doc_dim();

  // Heads -> patient vector.
  Tensor<T> d_pvec(D);
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    Tensor<T> dy(std::size_t{1});
    dy[0] = dlogits[k];
    nn::dense_backward(params.heads[k], tape.patient.attn.pooled, dy,
                       grads.heads[k], d_pvec);
  }

  // Patient level.
  const std::size_t n_bursts = tape.patient.x.rows();
  Tensor<T> d_burst_vecs(n_bursts, D);
  {
    Tensor<T> dh(tape.patient.lstm.y.rows(), tape.patient.lstm.y.cols());
    nn::attention_backward(params.patient.attn, tape.patient.lstm.y,
                           tape.patient.attn, d_pvec,
                           static_cast<const Tensor<T>*>(nullptr),
                           grads.patient.attn, dh);
    nn::bilstm_backward(params.patient.fwd, params.patient.bwd,
                        tape.patient.x, tape.patient.lstm, dh,
                        grads.patient.fwd, grads.patient.bwd, d_burst_vecs);
  }

  for (std::size_t b = 0; b < n_bursts; ++b) {
    // Document level for burst b.
    Tensor<T> d_doc(D);
    std::memcpy(d_doc.data(), d_burst_vecs.row(b), D * sizeof(T));
    const std::size_t n_sent = tape.doc[b].x.rows();
    Tensor<T> d_sent_vecs(n_sent, D);
    {
      Tensor<T> dh(tape.doc[b].lstm.y.rows(), tape.doc[b].lstm.y.cols());
      nn::attention_backward(params.doc.attn, tape.doc[b].lstm.y,
                             tape.doc[b].attn, d_doc,
                             static_cast<const Tensor<T>*>(nullptr),
                             grads.doc.attn, dh);
      nn::bilstm_backward(params.doc.fwd, params.doc.bwd, tape.doc[b].x,
                          tape.doc[b].lstm, dh, grads.doc.fwd, grads.doc.bwd,
                          d_sent_vecs);
    }
    // Sentence level. Input gradients land in a scratch buffer; the
    // embedding table is frozen.
    for (std::size_t s = 0; s < n_sent; ++s) {
      LevelTape<T>& st = tape.sent[b][s];
      Tensor<T> d_svec(D);
      std::memcpy(d_svec.data(), d_sent_vecs.row(s), D * sizeof(T));
      Tensor<T> dh(st.lstm.y.rows(), st.lstm.y.cols());
      nn::attention_backward(params.sent.attn, st.lstm.y, st.attn, d_svec,
                             static_cast<const Tensor<T>*>(nullptr),
                             grads.sent.attn, dh);
      Tensor<T> dx_sink(st.x.rows(), st.x.cols());
      nn::bilstm_backward(params.sent.fwd, params.sent.bwd, st.x, st.lstm, dh,
                          grads.sent.fwd, grads.sent.bwd, dx_sink);
    }
  }
}

// --------------------------------------------------------- param algebra --

template <class T>
void zero_grads(ModelParams<T>& g) {
  g.for_each_tensor([](const std::string&, Tensor<T>& t) { t.fill(T(0)); });
}

// a += b (same architecture)
template <class T>
void axpy_params(T alpha, const ModelParams<T>& src, ModelParams<T>& dst) {
  std::vector<const Tensor<T>*> from;
  src.for_each_tensor([&](const std::string&, const Tensor<T>& t) {
    from.push_back(&t);
  });
  std::size_t i = 0;
  dst.for_each_tensor([&](const std::string&, Tensor<T>& t) {
    const Tensor<T>& s = *from[i++];
    if (s.size() != t.size()) {
      throw ValidationError("axpy_params: architecture mismatch");
    }
    for (std::size_t k = 0; k < t.size(); ++k) t[k] += alpha * s[k];
  });
}

template <class T>
void scale_params(ModelParams<T>& g, T factor) {
  g.for_each_tensor([factor](const std::string&, Tensor<T>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= factor;
  });
}

// Scales gradients down to max_norm when their global L2 norm exceeds it.
// Returns the pre-clip norm.
template <class T>
T clip_global_norm(ModelParams<T>& grads, T max_norm) {
  T sq = T(0);
  grads.for_each_tensor([&sq](const std::string&, Tensor<T>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) sq += t[i] * t[i];
  });
  const T norm = std::sqrt(sq);
  if (max_norm > T(0) && norm > max_norm) {
    scale_params(grads, max_norm / norm);
  }
  return norm;
}

// ------------------------------------------------------------ checkpoint --

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::vector<std::string> tasks;
  std::int64_t epoch = 0;
  std::string created_at;  // caller-supplied; empty keeps artifacts
                           // byte-reproducible
};

template <class T>
struct Checkpoint {
  ModelParams<T> params;
  CheckpointMeta meta;
};

namespace detail {

template <class T>
const char* dtype_name() {
  if constexpr (sizeof(T) == 4) return "f32";
  else return "f64";
}

template <class V>
void append_le(std::string& out, V v) {
  static_assert(sizeof(V) == 4 || sizeof(V) == 8);
  using U = std::conditional_t<sizeof(V) == 4, std::uint32_t, std::uint64_t>;
  U u;
  std::memcpy(&u, &v, sizeof u);
  for (std::size_t i = 0; i < sizeof u; ++i) {
    out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
}

template <class V>
V read_le(const char* p) {
  using U = std::conditional_t<sizeof(V) == 4, std::uint32_t, std::uint64_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof u; ++i) {
    u |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  V v;
  std::memcpy(&v, &u, sizeof v);
  return v;
}

inline void write_file_atomic(const std::string& path,
                              const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write file: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing file: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

// Layout: <dir>/manifest.json plus <dir>/tensors.bin (row-major
// little-endian values in manifest order). The manifest records each
// tensor's name/shape/offset/dtype and the SHA-256 of the blob.
template <class T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  ckpt.params.for_each_tensor([&](const std::string& name,
                                  const Tensor<T>& t) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = blob.size();
    entry["dtype"] = detail::dtype_name<T>();
    tensors.push_back(std::move(entry));
    for (std::size_t i = 0; i < t.size(); ++i) detail::append_le(blob, t[i]);
  });

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["dtype"] = detail::dtype_name<T>();
  manifest["config"] = ckpt.params.config;
  manifest["config_hash"] = config_hash(ckpt.params.config);
  manifest["metadata"] = {{"seed", ckpt.meta.seed},
                          {"tasks", ckpt.meta.tasks},
                          {"epoch", ckpt.meta.epoch},
                          {"created_at", ckpt.meta.created_at}};
  manifest["tensors"] = std::move(tensors);
  manifest["sha256"] = sha256_hex(blob);

  detail::write_file_atomic(dir + "/tensors.bin", blob);
  detail::write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open checkpoint manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint manifest " + manifest_path + ": " +
                     e.what());
  }
  if (manifest.value("format_version", -1) != 1) {
    throw ValidationError("unsupported checkpoint format_version in " +
                          manifest_path);
  }

  std::ifstream binf(dir + "/tensors.bin", std::ios::binary);
  if (!binf) throw Error("cannot open checkpoint blob: " + dir);
  std::string blob((std::istreambuf_iterator<char>(binf)),
                   std::istreambuf_iterator<char>());
  if (sha256_hex(blob) != manifest.at("sha256").get<std::string>()) {
    throw IntegrityError("checkpoint blob checksum mismatch in " + dir);
  }

  Checkpoint<T> ckpt;
  const HanConfig config = manifest.at("config").get<HanConfig>();
  if (manifest.contains("config_hash") &&
      manifest.at("config_hash").get<std::string>() != config_hash(config)) {
    throw IntegrityError("checkpoint config hash mismatch in " + dir);
  }
  ckpt.params = make_zeroed<T>(config);
  const auto& meta = manifest.at("metadata");
  ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
  ckpt.meta.tasks = meta.at("tasks").get<std::vector<std::string>>();
  ckpt.meta.epoch = meta.at("epoch").get<std::int64_t>();
  ckpt.meta.created_at = meta.at("created_at").get<std::string>();

  const auto& tensors = manifest.at("tensors");
  std::size_t idx = 0;
  ckpt.params.for_each_tensor([&](const std::string& name, Tensor<T>& t) {
    if (idx >= tensors.size()) {
      throw IntegrityError("checkpoint manifest missing tensor '" + name +
                           "'");
    }
    const auto& entry = tensors[idx++];
    if (entry.at("name").get<std::string>() != name) {
      throw IntegrityError("checkpoint tensor order mismatch: expected '" +
                           name + "', found '" +
                           entry.at("name").get<std::string>() + "'");
    }
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape()) {
      throw IntegrityError("checkpoint tensor '" + name +
                           "' has an unexpected shape");
    }
    const std::string dtype = entry.at("dtype").get<std::string>();
    const std::size_t width = dtype == "f32" ? 4 : 8;
    if (dtype != "f32" && dtype != "f64") {
      throw ValidationError("unknown tensor dtype '" + dtype + "'");
    }
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (offset + t.size() * width > blob.size()) {
      throw IntegrityError("checkpoint blob too short for tensor '" + name +
                           "'");
    }
    const char* p = blob.data() + offset;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (width == 4) {
        t[i] = static_cast<T>(detail::read_le<float>(p + 4 * i));
      } else {
        t[i] = static_cast<T>(detail::read_le<double>(p + 8 * i));
      }
    }
  });
  if (idx != tensors.size()) {
    throw IntegrityError("checkpoint manifest has extra tensors");
  }
  return ckpt;
}

}  // namespace han::model
