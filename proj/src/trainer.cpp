#include "han/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "han/csv.hpp"

namespace han::trainer {

std::pair<bool, int> early_stop_decision(const std::vector<double>& val_losses,
                                         int patience) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (val_losses.empty()) return {false, 0};
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_improvement = 0;
  for (std::size_t i = 0; i < val_losses.size(); ++i) {
    if (val_losses[i] < best) {
      best = val_losses[i];
      best_epoch = static_cast<int>(i) + 1;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
  }
  return {since_improvement >= patience, best_epoch};
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write history file: " + path);
  const std::size_t heads =
      history.epochs.empty() ? 0 : history.epochs.front().val_auc.size();
  out << "epoch,train_loss,val_loss";
  for (std::size_t k = 0; k < heads; ++k) out << ",val_auc_head" << k;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const auto& e = history.epochs[i];
    out << (i + 1);
    std::snprintf(buf, sizeof buf, ",%.17g", e.train_loss);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", e.val_loss);
    out << buf;
    for (const double a : e.val_auc) {
      std::snprintf(buf, sizeof buf, ",%.17g", a);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing history file: " + path);
}

TrainHistory read_history_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError("empty history file: " + path);
  const auto& header = rows[0];
  if (header.size() < 3 || header[0] != "epoch" || header[1] != "train_loss" ||
      header[2] != "val_loss") {
    throw ParseError("bad history header in " + path);
  }
  TrainHistory h;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != header.size()) {
      throw ParseError("ragged history row in " + path);
    }
    EpochStats e;
    e.train_loss = std::stod(rows[i][1]);
    e.val_loss = std::stod(rows[i][2]);
    for (std::size_t k = 3; k < rows[i].size(); ++k) {
      e.val_auc.push_back(std::stod(rows[i][k]));
    }
    h.epochs.push_back(std::move(e));
  }
  h.stopped_epoch = static_cast<int>(h.epochs.size());
  h.best_epoch = early_stop_decision(h.val_losses(), 1).second;
  return h;
}

namespace detail {

IndexedCohort index_cohort(const std::vector<corpus::PatientSequence>& patients,
                           const cohort::LabelMatrix& labels,
                           const std::vector<TaskSpec>& tasks,
                           const cohort::CohortSplit& split) {
  if (split.train.empty()) throw ConfigError("training split is empty");
  if (split.val.empty()) throw ConfigError("validation split is empty");

  std::unordered_map<std::string, std::size_t> seq_index;
  seq_index.reserve(patients.size());
  for (std::size_t i = 0; i < patients.size(); ++i) {
    seq_index[patients[i].patient_id] = i;
  }
  std::unordered_map<std::string, std::size_t> label_index;
  label_index.reserve(labels.patients.size());
  for (std::size_t i = 0; i < labels.patients.size(); ++i) {
    label_index[labels.patients[i]] = i;
  }

  IndexedCohort out;
  out.labels.assign(tasks.size(),
                    std::vector<std::uint8_t>(patients.size(), 0));
  // Task columns: match by task name against the label matrix.
  std::vector<std::size_t> cols;
  for (const auto& t : tasks) {
    const auto it =
        std::find(labels.tasks.begin(), labels.tasks.end(), t.name);
    if (it == labels.tasks.end()) {
      throw ConfigError("task '" + t.name + "' not present in label matrix");
    }
    cols.push_back(static_cast<std::size_t>(it - labels.tasks.begin()));
  }
  for (std::size_t p = 0; p < patients.size(); ++p) {
    const auto it = label_index.find(patients[p].patient_id);
    if (it == label_index.end()) continue;  // absent => all-negative row
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      out.labels[k][p] = labels.at(it->second, cols[k]);
    }
  }

  const auto resolve = [&seq_index](const std::vector<std::string>& ids,
                                    const char* what) {
    std::vector<std::size_t> out_idx;
    out_idx.reserve(ids.size());
    for (const auto& id : ids) {
      const auto it = seq_index.find(id);
      if (it == seq_index.end()) {
        throw ConfigError(std::string(what) + " split references patient '" +
                          id + "' with no usable notes");
      }
      out_idx.push_back(it->second);
    }
    return out_idx;
  };
  out.train = resolve(split.train, "train");
  out.val = resolve(split.val, "val");

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto check = [&](const std::vector<std::size_t>& idx,
                           const char* subset) {
      std::size_t pos = 0;
      for (const std::size_t i : idx) pos += out.labels[k][i];
      if (pos == 0) {
        throw ConfigError("task '" + tasks[k].name + "' has no positives in " +
                          subset);
      }
      if (pos == idx.size()) {
        throw ConfigError("task '" + tasks[k].name + "' has no negatives in " +
                          subset);
      }
    };
    check(out.train, "train");
    check(out.val, "val");
  }
  return out;
}

}  // namespace detail

}  // namespace han::trainer
