#pragma once

// Training orchestration: multi-task pre-training, fine-tuning from a
// checkpoint, and from-scratch single-task training share one loop. Results
// are bit-reproducible for a fixed (seed, config, data) triple at any thread
// count: per-patient gradients land in private slots and are reduced in
// patient order, and every random choice derives from the run seed.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "han/cohort.hpp"
#include "han/corpus.hpp"
#include "han/embed.hpp"
#include "han/error.hpp"
#include "han/eval.hpp"
#include "han/model.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace han::trainer {

struct TrainConfig {
  int batch_size = 32;
  double lr = 0.001;
  int max_epochs = 50;
  int patience = 3;
  double clip_norm = 5.0;  // 0 disables clipping
  std::uint64_t seed = 0;
};

struct EpochStats {
  double train_loss = 0;
  double val_loss = 0;
  std::vector<double> val_auc;  // one per head
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;     // 1-based argmin of val loss (first achiever)
  int stopped_epoch = 0;  // last epoch that ran

  std::vector<double> val_losses() const {
    std::vector<double> out;
    out.reserve(epochs.size());
    for (const auto& e : epochs) out.push_back(e.val_loss);
    return out;
  }
};

// epoch,train_loss,val_loss,val_auc_head0,... with full precision.
void write_history_csv(const TrainHistory& history, const std::string& path);
TrainHistory read_history_csv(const std::string& path);

struct TaskSpec {
  std::string name;    // diagnosis code
  double weight = 1.0; // positive-class weight in the loss
};

// Patience rule evaluated over a full validation-loss sequence: an epoch
// "counts against" patience when it fails to set a new strict minimum; the
// counter resets to zero whenever one is set. Returns {stop-after-last-epoch,
// 1-based index of the first minimum}.
std::pair<bool, int> early_stop_decision(const std::vector<double>& val_losses,
                                         int patience);

template <class T>
struct TrainResult {
  model::Checkpoint<T> checkpoint;  // parameters of the best-val-loss epoch
  TrainHistory history;
};

namespace detail {

constexpr std::uint64_t kShuffleTag = 0x73687566666c65ULL;

struct IndexedCohort {
  std::vector<std::size_t> train, val;  // indices into the sequence vector
  std::vector<std::vector<std::uint8_t>> labels;  // [task][patient-index]
};

// Resolves the id-based split and label matrix against the sequence order,
// validating that every referenced patient exists and that each task sees
// both classes in train and val.
IndexedCohort index_cohort(const std::vector<corpus::PatientSequence>& patients,
                           const cohort::LabelMatrix& labels,
                           const std::vector<TaskSpec>& tasks,
                           const cohort::CohortSplit& split);

}  // namespace detail

// Runs the shared loop from the given initial parameters. `labels` rows must
// cover every id in split.train/split.val; tasks.size() must equal the model
// head count. The checkpoint holds the parameters of the epoch with the
// lowest validation loss and metadata {seed, task names, best epoch}.
template <class T>
TrainResult<T> train(model::ModelParams<T> initial,
                     const std::vector<corpus::PatientSequence>& patients,
                     const embed::EmbeddingTable& table,
                     const cohort::LabelMatrix& labels,
                     const std::vector<TaskSpec>& tasks,
                     const cohort::CohortSplit& split, const TrainConfig& cfg) {
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  if (tasks.empty()) throw ConfigError("no tasks given");
  if (initial.config.n_heads != tasks.size()) {
    throw ConfigError("model has " + std::to_string(initial.config.n_heads) +
                      " heads but " + std::to_string(tasks.size()) +
                      " tasks were given");
  }
  const detail::IndexedCohort cohort =
      detail::index_cohort(patients, labels, tasks, split);

  const std::size_t K = tasks.size();
  model::ModelParams<T>& params = initial;

  model::ModelParams<T> adam_m = model::make_zeroed<T>(params.config);
  model::ModelParams<T> adam_v = model::make_zeroed<T>(params.config);
  model::ModelParams<T> grads = model::make_zeroed<T>(params.config);
  nn::AdamHyper<T> hyper;
  hyper.lr = static_cast<T>(cfg.lr);
  std::int64_t adam_t = 0;

  // Stable tensor pointers for the update step (no tensor ever reallocates).
  std::vector<Tensor<T>*> pts, gts, mts, vts;
  std::vector<std::string> tensor_names;
  params.for_each_tensor([&](const std::string& name, Tensor<T>& t) {
    pts.push_back(&t);
    tensor_names.push_back(name);
  });
  grads.for_each_tensor(
      [&gts](const std::string&, Tensor<T>& t) { gts.push_back(&t); });
  adam_m.for_each_tensor(
      [&mts](const std::string&, Tensor<T>& t) { mts.push_back(&t); });
  adam_v.for_each_tensor(
      [&vts](const std::string&, Tensor<T>& t) { vts.push_back(&t); });

  // Per-patient forward/backward used by both phases.
  const auto patient_loss = [&](std::size_t idx, model::ModelParams<T>* grads,
                                std::vector<double>* scores) -> double {
    model::ForwardTape<T> tape;
    const Tensor<T> logits =
        model::forward(params, patients[idx], table, grads ? &tape : nullptr);
    Tensor<T> dlogits(K);
    double loss = 0;
    for (std::size_t k = 0; k < K; ++k) {
      T d = T(0);
      const T y = static_cast<T>(cohort.labels[k][idx]);
      loss += static_cast<double>(nn::bce_with_logit(
          logits[k], y, static_cast<T>(tasks[k].weight), &d));
      dlogits[k] = d;
      if (scores) scores[k][idx] = static_cast<double>(nn::sigmoid(logits[k]));
    }
    if (grads) model::backward(params, tape, dlogits, *grads);
    return loss;
  };

  TrainHistory history;
  model::ModelParams<T> best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  // Gradient slots are reduced in patient order, so thread count never
  // changes the result.
  std::vector<model::ModelParams<T>> slots;
  std::vector<double> slot_loss;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = cohort.train;
    Rng shuffle_rng(mix_seed(cfg.seed, detail::kShuffleTag,
                             static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t b = end - begin;
      while (slots.size() < b) {
        slots.push_back(model::make_zeroed<T>(params.config));
        slot_loss.push_back(0);
      }
      for (std::size_t i = 0; i < b; ++i) model::zero_grads(slots[i]);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(b); ++i) {
        slot_loss[i] = patient_loss(order[begin + i], &slots[i], nullptr);
      }

      model::zero_grads(grads);
      for (std::size_t i = 0; i < b; ++i) {
        model::axpy_params(T(1), slots[i], grads);
        epoch_loss_sum += slot_loss[i];
      }
      model::scale_params(grads, T(1) / static_cast<T>(b));
      if (cfg.clip_norm > 0) {
        model::clip_global_norm(grads, static_cast<T>(cfg.clip_norm));
      }
      ++adam_t;
      for (std::size_t ti = 0; ti < pts.size(); ++ti) {
        nn::adam_update(*pts[ti], *gts[ti], *mts[ti], *vts[ti], adam_t, hyper);
        pts[ti]->ensure_finite("parameters after update (" +
                               tensor_names[ti] + ")");
      }
    }

    // Validation pass.
    std::vector<std::vector<double>> scores(
        K, std::vector<double>(patients.size(), 0.0));
    std::vector<double> val_losses(cohort.val.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cohort.val.size());
         ++i) {
      val_losses[i] = patient_loss(cohort.val[i], nullptr, scores.data());
    }
    EpochStats stats;
    for (const double l : val_losses) stats.val_loss += l;
    stats.val_loss /= static_cast<double>(cohort.val.size());
    stats.train_loss = epoch_loss_sum / static_cast<double>(order.size());
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> s;
      std::vector<std::uint8_t> y;
      s.reserve(cohort.val.size());
      for (const std::size_t idx : cohort.val) {
        s.push_back(scores[k][idx]);
        y.push_back(cohort.labels[k][idx]);
      }
      stats.val_auc.push_back(eval::auc(s, y));
    }
    history.epochs.push_back(std::move(stats));
    history.stopped_epoch = epoch;

    if (history.epochs.back().val_loss < best_val) {
      best_val = history.epochs.back().val_loss;
      best_params = params;
      best_epoch = epoch;
    }
    const auto [stop, argmin] =
        early_stop_decision(history.val_losses(), cfg.patience);
    (void)argmin;
    if (stop) break;
  }
  history.best_epoch = best_epoch;

  TrainResult<T> result;
  result.history = std::move(history);
  result.checkpoint.params = std::move(best_params);
  result.checkpoint.meta.seed = cfg.seed;
  result.checkpoint.meta.epoch = best_epoch;
  for (const auto& t : tasks) result.checkpoint.meta.tasks.push_back(t.name);
  return result;
}

// Multi-task pre-training: builds a fresh K-head model (positive-class
// weights fixed at 1) and trains on the given tasks.
template <class T>
TrainResult<T> pretrain(const model::HanConfig& config,
                        const std::vector<corpus::PatientSequence>& patients,
                        const embed::EmbeddingTable& table,
                        const cohort::LabelMatrix& labels,
                        const std::vector<std::string>& task_codes,
                        const cohort::CohortSplit& split,
                        const TrainConfig& cfg) {
  if (task_codes.empty()) throw ConfigError("pretrain: no tasks given");
  model::HanConfig c = config;
  c.n_heads = task_codes.size();
  std::vector<TaskSpec> tasks;
  for (const auto& code : task_codes) tasks.push_back({code, 1.0});
  return train(model::build_model<T>(c, cfg.seed), patients, table, labels,
               tasks, split, cfg);
}

// Swaps a pre-trained model's heads for one freshly initialized head and
// trains every parameter end-to-end on the target task.
template <class T>
model::ModelParams<T> init_from_checkpoint(const model::Checkpoint<T>& ckpt,
                                           std::uint64_t seed) {
  model::ModelParams<T> params = ckpt.params;
  model::replace_head(params, 1, seed);
  return params;
}

template <class T>
TrainResult<T> finetune(const model::Checkpoint<T>& ckpt,
                        const std::vector<corpus::PatientSequence>& patients,
                        const embed::EmbeddingTable& table,
                        const cohort::LabelMatrix& labels,
                        const TaskSpec& target, const cohort::CohortSplit& split,
                        const TrainConfig& cfg) {
  return train(init_from_checkpoint(ckpt, cfg.seed), patients, table, labels,
               std::vector<TaskSpec>{target}, split, cfg);
}

// From-scratch single-task baseline.
template <class T>
TrainResult<T> train_target(const model::HanConfig& config,
                            const std::vector<corpus::PatientSequence>& patients,
                            const embed::EmbeddingTable& table,
                            const cohort::LabelMatrix& labels,
                            const TaskSpec& target,
                            const cohort::CohortSplit& split,
                            const TrainConfig& cfg) {
  model::HanConfig c = config;
  c.n_heads = 1;
  return train(model::build_model<T>(c, cfg.seed), patients, table, labels,
               std::vector<TaskSpec>{target}, split, cfg);
}

}  // namespace han::trainer
