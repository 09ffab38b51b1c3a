#include "han/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "han/cohort.hpp"
#include "han/corpus.hpp"
#include "han/csv.hpp"
#include "han/embed.hpp"
#include "han/error.hpp"
#include "han/eval.hpp"
#include "han/kernels.hpp"
#include "han/model.hpp"
#include "han/rng.hpp"
#include "han/sha256.hpp"
#include "han/synth.hpp"
#include "han/timeparse.hpp"
#include "han/trainer.hpp"

namespace han::cli {
namespace {

namespace fs = std::filesystem;

std::string now_utc() {
  return format_utc(static_cast<std::int64_t>(std::time(nullptr)));
}

// ----------------------------------------------------------- run manifest --

// Every artifact-producing command leaves a run_manifest.json next to its
// outputs: the resolved configuration plus SHA-256 hashes of every input and
// output file, so a run can be audited and reproduced.
struct Manifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs, outputs;
  std::string started_at, finished_at;
};

void add_input(Manifest& m, const std::string& path) {
  m.inputs[path] = sha256_file(path);
}

void add_output(Manifest& m, const std::string& path) {
  m.outputs[path] = sha256_file(path);
}

void write_manifest(Manifest& m, const std::string& dir,
                    const std::string& stamp) {
  m.finished_at = stamp.empty() ? now_utc() : stamp;
  if (!stamp.empty()) m.started_at = stamp;
  // Output keys are stored relative to the manifest's own directory so the
  // whole output tree stays byte-identical when written somewhere else.
  const std::string prefix = dir + "/";
  std::map<std::string, std::string> outputs;
  for (const auto& [path, digest] : m.outputs) {
    outputs[path.rfind(prefix, 0) == 0 ? path.substr(prefix.size()) : path] =
        digest;
  }
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = nlohmann::json(m.inputs);
  j["outputs"] = nlohmann::json(outputs);
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  model::detail::write_file_atomic(dir + "/run_manifest.json",
                                   j.dump(2) + "\n");
}

// -------------------------------------------------------- shared options --

struct DataOpts {
  std::string corpus, diagnoses, embeddings;
  int min_age = 18;
  double interval_hours = 1.0;

  std::int64_t interval_seconds() const {
    return static_cast<std::int64_t>(std::llround(interval_hours * 3600.0));
  }
};

struct SplitOpts {
  double train = 0.7, val = 0.1, test = 0.2;
};

struct ModelOpts {
  std::size_t hidden = 100, attn = 200;
  std::size_t max_tokens = 64, max_sentences = 128, max_bursts = 256;

  model::HanConfig config(std::size_t embed_dim, std::size_t heads) const {
    model::HanConfig c;
    c.embed_dim = embed_dim;
    c.lstm_hidden = hidden;
    c.attn_size = attn;
    c.n_heads = heads;
    c.max_tokens = max_tokens;
    c.max_sentences = max_sentences;
    c.max_bursts = max_bursts;
    return c;
  }
};

struct TrainOpts {
  int batch_size = 32;
  double lr = 0.001;
  int max_epochs = 50;
  int patience = 3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  trainer::TrainConfig config() const {
    return {batch_size, lr, max_epochs, patience, clip_norm, seed};
  }
};

void add_data_flags(CLI::App* cmd, DataOpts& d, bool need_embeddings) {
  cmd->add_option("--corpus", d.corpus, "patient notes, one JSON per line")
      ->required();
  cmd->add_option("--diagnoses", d.diagnoses, "patient_id,icd9 CSV")
      ->required();
  auto* e = cmd->add_option("--embeddings", d.embeddings,
                            "frozen word-vector text file");
  if (need_embeddings) e->required();
  cmd->add_option("--min-age", d.min_age, "drop younger patients")
      ->capture_default_str();
  cmd->add_option("--interval-hours", d.interval_hours,
                  "note-merge window for bursts")
      ->capture_default_str();
}

void add_split_flags(CLI::App* cmd, SplitOpts& s) {
  cmd->add_option("--train-frac", s.train)->capture_default_str();
  cmd->add_option("--val-frac", s.val)->capture_default_str();
  cmd->add_option("--test-frac", s.test)->capture_default_str();
}

void add_model_flags(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--hidden", m.hidden, "LSTM units per direction")
      ->capture_default_str();
  cmd->add_option("--attn-size", m.attn, "attention projection size")
      ->capture_default_str();
  cmd->add_option("--max-tokens", m.max_tokens, "cap per sentence")
      ->capture_default_str();
  cmd->add_option("--max-sentences", m.max_sentences, "cap per document")
      ->capture_default_str();
  cmd->add_option("--max-bursts", m.max_bursts, "cap per patient")
      ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--batch-size", t.batch_size)->capture_default_str();
  cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--max-epochs", t.max_epochs)->capture_default_str();
  cmd->add_option("--patience", t.patience,
                  "epochs without a new best validation loss before stopping")
      ->capture_default_str();
  cmd->add_option("--clip-norm", t.clip_norm,
                  "global gradient-norm cap; 0 disables")
      ->capture_default_str();
  cmd->add_option("--seed", t.seed)->capture_default_str();
}

nlohmann::ordered_json json_of(const DataOpts& d) {
  nlohmann::ordered_json j;
  j["corpus"] = d.corpus;
  j["diagnoses"] = d.diagnoses;
  if (!d.embeddings.empty()) j["embeddings"] = d.embeddings;
  j["min_age"] = d.min_age;
  j["interval_hours"] = d.interval_hours;
  return j;
}

nlohmann::ordered_json json_of(const SplitOpts& s) {
  nlohmann::ordered_json j;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  return j;
}

nlohmann::ordered_json json_of(const TrainOpts& t) {
  nlohmann::ordered_json j;
  j["batch_size"] = t.batch_size;
  j["lr"] = t.lr;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["clip_norm"] = t.clip_norm;
  return j;
}

// ------------------------------------------------------------- data glue --

struct CohortData {
  std::vector<corpus::PatientSequence> sequences;
  std::vector<std::string> ids;  // sequence order
  cohort::DiagnosisTable diag;
};

CohortData load_cohort(const DataOpts& d, Manifest& man) {
  CohortData c;
  auto raw = corpus::load_corpus(d.corpus);
  add_input(man, d.corpus);
  raw = corpus::filter_patients(std::move(raw), d.min_age);
  c.sequences = corpus::build_sequences(raw, d.interval_seconds());
  if (c.sequences.empty())
    throw ValidationError("no usable patients after filtering");
  c.ids.reserve(c.sequences.size());
  for (const auto& s : c.sequences) c.ids.push_back(s.patient_id);
  c.diag = cohort::load_diagnoses(d.diagnoses);
  add_input(man, d.diagnoses);
  return c;
}

embed::EmbeddingTable load_table(const DataOpts& d, Manifest& man) {
  auto table = embed::load_embeddings(d.embeddings);
  add_input(man, d.embeddings);
  for (const auto& w : table.warnings())
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  return table;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s)
    out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  return out;
}

template <class T>
void write_train_outputs(trainer::TrainResult<T>& res, const std::string& dir,
                         const std::string& created_at, Manifest& man) {
  fs::create_directories(dir);
  res.checkpoint.meta.created_at = created_at;
  const std::string ckdir = dir + "/checkpoint";
  model::save_checkpoint(res.checkpoint, ckdir);
  trainer::write_history_csv(res.history, dir + "/history.csv");
  add_output(man, ckdir + "/manifest.json");
  add_output(man, ckdir + "/tensors.bin");
  add_output(man, dir + "/history.csv");
  const auto& h = res.history;
  const double best = h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_loss;
  std::printf("%s: best epoch %d of %d (val loss %.6f)\n", dir.c_str(),
              h.best_epoch, h.stopped_epoch, best);
}

// Selects the requested task codes, defaulting to every task in the file.
std::vector<std::string> select_codes(
    const std::vector<cohort::PhenotypeTask>& tasks,
    const std::vector<std::string>& requested) {
  if (requested.empty()) {
    std::vector<std::string> all;
    for (const auto& t : tasks) all.push_back(t.icd9);
    return all;
  }
  for (const auto& code : requested) {
    bool known = false;
    for (const auto& t : tasks) known |= t.icd9 == code;
    if (!known)
      throw ConfigError("task code " + code + " is not in the task file");
  }
  return requested;
}

const char* precision_name() {
  const char* env = std::getenv("HAN_PRECISION");
  return env && *env ? env : "f64";
}

// Runs fn<float> or fn<double> per the HAN_PRECISION environment variable.
template <class Fn>
int dispatch_precision(Fn&& fn) {
  const std::string p = precision_name();
  if (p == "f32") return fn(static_cast<float*>(nullptr));
  if (p == "f64") return fn(static_cast<double*>(nullptr));
  throw ConfigError("HAN_PRECISION must be f32 or f64, got '" + p + "'");
}

// ------------------------------------------------------------- commands ---

struct SynthArgs {
  synth::SynthSpec spec;
  std::vector<std::string> low_specs;
  std::string out_dir;
  std::string stamp;
};

// name:icd9:n_pos[:signal[:c0,c1,...]] — empty signal keeps the default.
synth::LowTaskSpec parse_low_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (parts.size() < 3 || parts.size() > 5)
    throw UsageError("--low expects name:icd9:n_pos[:signal[:c0,c1,...]]: " +
                     text);
  synth::LowTaskSpec lt;
  lt.name = parts[0];
  lt.icd9 = parts[1];
  try {
    lt.n_pos = std::stoi(parts[2]);
    if (parts.size() >= 4 && !parts[3].empty()) lt.signal = std::stod(parts[3]);
    if (parts.size() == 5 && !parts[4].empty()) {
      std::string num;
      for (char ch : parts[4] + ",") {
        if (ch == ',') {
          lt.corr.push_back(std::stod(num));
          num.clear();
        } else {
          num += ch;
        }
      }
    }
  } catch (const std::logic_error&) {
    throw UsageError("--low has a non-numeric field: " + text);
  }
  return lt;
}

int cmd_synth(SynthArgs& a) {
  for (const auto& text : a.low_specs)
    a.spec.low_tasks.push_back(parse_low_spec(text));
  Manifest man;
  man.command = "synth";
  man.seed = a.spec.seed;
  man.started_at = a.stamp.empty() ? now_utc() : a.stamp;
  man.config["n_patients"] = a.spec.n_patients;
  man.config["vocab_size"] = a.spec.vocab_size;
  man.config["n_high"] = a.spec.n_high;
  man.config["high_prevalence"] = a.spec.high_prevalence;
  man.config["signal"] = a.spec.signal;
  man.config["noise"] = a.spec.noise;
  man.config["error_rate"] = a.spec.error_rate;
  man.config["embed_dim"] = a.spec.embed_dim;
  man.config["low_tasks"] = a.low_specs;

  const auto out = synth::generate(a.spec);
  fs::create_directories(a.out_dir);
  synth::write_output(out, a.out_dir);
  for (const char* f :
       {"corpus.jsonl", "diagnoses.csv", "tasks.csv", "embeddings.txt"})
    add_output(man, a.out_dir + "/" + f);
  write_manifest(man, a.out_dir, a.stamp);
  std::printf("wrote %zu patients, %zu tasks, vocab %zu to %s\n",
              out.patients.size(), out.tasks.size(), out.vocab.size(),
              a.out_dir.c_str());
  return 0;
}

struct CohortArgs {
  DataOpts data;
  std::string tasks_file;
  std::string out_dir;
  bool tiers = false;
  std::size_t tier_low = 50, tier_high = 550, top_k = 5;
};

int cmd_cohort(CohortArgs& a) {
  Manifest man;
  man.command = "cohort";
  man.started_at = now_utc();
  man.config = json_of(a.data);
  man.config["tasks"] = a.tasks_file;

  const auto c = load_cohort(a.data, man);
  const auto tasks = cohort::load_tasks(a.tasks_file);
  add_input(man, a.tasks_file);
  std::vector<std::string> codes;
  for (const auto& t : tasks) codes.push_back(t.icd9);
  const auto labels = cohort::derive_labels(c.diag, c.ids, codes);
  const auto total = static_cast<std::int64_t>(c.ids.size());

  std::printf("patients with usable notes: %zu\n", c.ids.size());
  std::string summary = "name,icd9,organ_system,n_pos,total,pos_weight\n";
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto n_pos = static_cast<std::int64_t>(labels.positives(t));
    const std::int64_t w = n_pos > 0 ? cohort::pos_weight(n_pos, total) : 0;
    std::printf("  %-24s %-8s n_pos=%lld weight=%lld\n", tasks[t].name.c_str(),
                tasks[t].icd9.c_str(), static_cast<long long>(n_pos),
                static_cast<long long>(w));
    summary += tasks[t].name + "," + tasks[t].icd9 + "," +
               tasks[t].organ_system + "," + std::to_string(n_pos) + "," +
               std::to_string(total) + "," + std::to_string(w) + "\n";
  }

  std::string tiers_csv;
  if (a.tiers) {
    std::map<std::string, std::string> code_to_system;
    for (const auto& t : tasks) code_to_system[t.icd9] = t.organ_system;
    const auto tiers = cohort::prevalence_tiers(c.diag, code_to_system,
                                                a.tier_low, a.tier_high,
                                                a.top_k);
    tiers_csv = "organ_system,tier,icd9\n";
    for (const auto& [system, st] : tiers) {
      std::printf("  %s: %zu high, %zu low-prevalence codes\n", system.c_str(),
                  st.high.size(), st.low.size());
      for (const auto& code : st.high)
        tiers_csv += system + ",high," + code + "\n";
      for (const auto& code : st.low) tiers_csv += system + ",low," + code + "\n";
    }
  }

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    model::detail::write_file_atomic(a.out_dir + "/cohort_summary.csv",
                                     summary);
    add_output(man, a.out_dir + "/cohort_summary.csv");
    if (a.tiers) {
      model::detail::write_file_atomic(a.out_dir + "/tiers.csv", tiers_csv);
      add_output(man, a.out_dir + "/tiers.csv");
    }
    write_manifest(man, a.out_dir, "");
  }
  return 0;
}

struct PretrainArgs {
  DataOpts data;
  SplitOpts split;
  ModelOpts model;
  TrainOpts train;
  std::string tasks_file, out_dir, stamp;
  std::vector<std::string> task_codes;
  bool stl = false;
};

template <class T>
int cmd_pretrain(PretrainArgs& a) {
  Manifest man;
  man.command = "pretrain";
  man.seed = a.train.seed;
  man.started_at = a.stamp.empty() ? now_utc() : a.stamp;
  man.config["data"] = json_of(a.data);
  man.config["split"] = json_of(a.split);
  man.config["train"] = json_of(a.train);
  man.config["mode"] = a.stl ? "stl" : "mtl";
  man.config["precision"] = precision_name();

  const auto c = load_cohort(a.data, man);
  const auto table = load_table(a.data, man);
  const auto tasks = cohort::load_tasks(a.tasks_file);
  add_input(man, a.tasks_file);
  const auto codes = select_codes(tasks, a.task_codes);
  man.config["tasks"] = codes;
  const auto labels = cohort::derive_labels(c.diag, c.ids, codes);
  const auto split = cohort::split(c.ids, a.split.train, a.split.val,
                                   a.split.test, a.train.seed);
  const auto cfg = a.train.config();
  const auto mcfg = a.model.config(table.dim(), codes.size());
  const std::string created = a.stamp.empty() ? man.started_at : a.stamp;

  fs::create_directories(a.out_dir);
  if (!a.stl) {
    auto res = trainer::pretrain<T>(mcfg, c.sequences, table, labels, codes,
                                    split, cfg);
    write_train_outputs(res, a.out_dir, created, man);
  } else {
    for (const auto& code : codes) {
      auto res = trainer::pretrain<T>(mcfg, c.sequences, table, labels,
                                      {code}, split, cfg);
      write_train_outputs(res, a.out_dir + "/stl_" + sanitize(code), created,
                          man);
    }
  }
  write_manifest(man, a.out_dir, a.stamp);
  return 0;
}

struct FinetuneArgs {
  DataOpts data;
  SplitOpts split;
  TrainOpts train;
  std::string checkpoint, target, out_dir, stamp;
  double pos_weight = 0;  // 0: derive from the cohort
};

// Resolves the target task's positive-class weight: an explicit flag wins,
// otherwise the cohort-derived value.
double resolve_weight(double flag_value, const cohort::LabelMatrix& labels) {
  if (flag_value > 0) return flag_value;
  const auto n_pos = static_cast<std::int64_t>(labels.positives(0));
  if (n_pos == 0) throw ConfigError("target task has no positive patients");
  return static_cast<double>(cohort::pos_weight(
      n_pos, static_cast<std::int64_t>(labels.patients.size())));
}

template <class T>
int cmd_finetune(FinetuneArgs& a) {
  Manifest man;
  man.command = "finetune";
  man.seed = a.train.seed;
  man.started_at = a.stamp.empty() ? now_utc() : a.stamp;
  man.config["data"] = json_of(a.data);
  man.config["split"] = json_of(a.split);
  man.config["train"] = json_of(a.train);
  man.config["checkpoint"] = a.checkpoint;
  man.config["target"] = a.target;
  man.config["precision"] = precision_name();

  const auto ckpt = model::load_checkpoint<T>(a.checkpoint);
  add_input(man, a.checkpoint + "/manifest.json");
  add_input(man, a.checkpoint + "/tensors.bin");
  const auto c = load_cohort(a.data, man);
  const auto table = load_table(a.data, man);
  const auto labels = cohort::derive_labels(c.diag, c.ids, {a.target});
  const auto split = cohort::split(c.ids, a.split.train, a.split.val,
                                   a.split.test, a.train.seed);
  const double w = resolve_weight(a.pos_weight, labels);
  man.config["pos_weight"] = w;

  auto res = trainer::finetune<T>(ckpt, c.sequences, table, labels,
                                  {a.target, w}, split, a.train.config());
  fs::create_directories(a.out_dir);
  write_train_outputs(res, a.out_dir,
                      a.stamp.empty() ? man.started_at : a.stamp, man);
  write_manifest(man, a.out_dir, a.stamp);
  return 0;
}

struct TrainTargetArgs {
  DataOpts data;
  SplitOpts split;
  ModelOpts model;
  TrainOpts train;
  std::string target, out_dir, stamp;
  double pos_weight = 0;
};

template <class T>
int cmd_train_target(TrainTargetArgs& a) {
  Manifest man;
  man.command = "train-target";
  man.seed = a.train.seed;
  man.started_at = a.stamp.empty() ? now_utc() : a.stamp;
  man.config["data"] = json_of(a.data);
  man.config["split"] = json_of(a.split);
  man.config["train"] = json_of(a.train);
  man.config["target"] = a.target;
  man.config["precision"] = precision_name();

  const auto c = load_cohort(a.data, man);
  const auto table = load_table(a.data, man);
  const auto labels = cohort::derive_labels(c.diag, c.ids, {a.target});
  const auto split = cohort::split(c.ids, a.split.train, a.split.val,
                                   a.split.test, a.train.seed);
  const double w = resolve_weight(a.pos_weight, labels);
  man.config["pos_weight"] = w;

  auto res = trainer::train_target<T>(a.model.config(table.dim(), 1),
                                      c.sequences, table, labels,
                                      {a.target, w}, split, a.train.config());
  fs::create_directories(a.out_dir);
  write_train_outputs(res, a.out_dir,
                      a.stamp.empty() ? man.started_at : a.stamp, man);
  write_manifest(man, a.out_dir, a.stamp);
  return 0;
}

struct EvalArgs {
  DataOpts data;
  SplitOpts split;
  std::string checkpoint, subset = "test", out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

template <class T>
int cmd_eval(EvalArgs& a) {
  Manifest man;
  man.command = "eval";
  man.started_at = now_utc();
  man.config["data"] = json_of(a.data);
  man.config["split"] = json_of(a.split);
  man.config["checkpoint"] = a.checkpoint;
  man.config["subset"] = a.subset;
  man.config["precision"] = precision_name();

  const auto ckpt = model::load_checkpoint<T>(a.checkpoint);
  add_input(man, a.checkpoint + "/manifest.json");
  add_input(man, a.checkpoint + "/tensors.bin");
  if (ckpt.meta.tasks.empty())
    throw ValidationError("checkpoint lists no tasks");
  const auto c = load_cohort(a.data, man);
  const auto table = load_table(a.data, man);
  const auto labels = cohort::derive_labels(c.diag, c.ids, ckpt.meta.tasks);
  const std::uint64_t seed = a.seed_given ? a.seed : ckpt.meta.seed;
  man.seed = seed;
  const auto split =
      cohort::split(c.ids, a.split.train, a.split.val, a.split.test, seed);
  const std::vector<std::string>* subset = nullptr;
  if (a.subset == "train") subset = &split.train;
  else if (a.subset == "val") subset = &split.val;
  else if (a.subset == "test") subset = &split.test;
  else throw UsageError("--split must be train, val or test");
  if (subset->empty()) throw ValidationError("selected subset is empty");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < c.ids.size(); ++i) index[c.ids[i]] = i;
  std::map<std::string, std::size_t> label_row;
  for (std::size_t i = 0; i < labels.patients.size(); ++i)
    label_row[labels.patients[i]] = i;

  const std::size_t k_heads = ckpt.meta.tasks.size();
  std::vector<std::vector<double>> scores(k_heads);
  std::vector<std::vector<std::uint8_t>> truth(k_heads);
  std::string pred_csv = "patient_id,task,label,score\n";
  for (const auto& id : *subset) {
    const auto it = index.find(id);
    if (it == index.end())
      throw ValidationError("split references patient " + id +
                            " with no usable notes");
    const auto logits =
        model::forward(ckpt.params, c.sequences[it->second], table);
    for (std::size_t k = 0; k < k_heads; ++k) {
      const double p = nn::sigmoid(static_cast<double>(logits[k]));
      const std::uint8_t y = labels.at(label_row.at(id), k);
      scores[k].push_back(p);
      truth[k].push_back(y);
      char line[256];
      std::snprintf(line, sizeof line, "%s,%s,%d,%.17g\n", id.c_str(),
                    ckpt.meta.tasks[k].c_str(), static_cast<int>(y), p);
      pred_csv += line;
    }
  }

  std::string metrics_csv = "task,subset,n,n_pos,auc\n";
  for (std::size_t k = 0; k < k_heads; ++k) {
    const auto n_pos = static_cast<std::size_t>(std::accumulate(
        truth[k].begin(), truth[k].end(), std::size_t{0}));
    const double a_k = eval::auc(scores[k], truth[k]);
    std::printf("%-12s %s auc %.6f  (n=%zu, positives=%zu)\n",
                ckpt.meta.tasks[k].c_str(), a.subset.c_str(), a_k,
                truth[k].size(), n_pos);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%s,%zu,%zu,%.17g\n",
                  ckpt.meta.tasks[k].c_str(), a.subset.c_str(),
                  truth[k].size(), n_pos, a_k);
    metrics_csv += line;
  }

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    model::detail::write_file_atomic(a.out_dir + "/predictions.csv", pred_csv);
    model::detail::write_file_atomic(a.out_dir + "/metrics.csv", metrics_csv);
    add_output(man, a.out_dir + "/predictions.csv");
    add_output(man, a.out_dir + "/metrics.csv");
    write_manifest(man, a.out_dir, "");
  }
  return 0;
}

struct AnalyzeArgs {
  std::string auc_table, mse_table, curves, out_dir;
  double threshold = 0.90;
};

std::map<std::string, std::vector<double>> load_curves(
    const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != csv::Row{"method", "epoch", "val_loss"})
    throw ParseError(path + ": expected header method,epoch,val_loss");
  std::map<std::string, std::vector<std::pair<int, double>>> raw;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3)
      throw ParseError(path + ": line " + std::to_string(i + 1) +
                       ": expected 3 fields");
    try {
      raw[rows[i][0]].emplace_back(std::stoi(rows[i][1]),
                                   std::stod(rows[i][2]));
    } catch (const std::logic_error&) {
      throw ParseError(path + ": line " + std::to_string(i + 1) +
                       ": non-numeric field");
    }
  }
  std::map<std::string, std::vector<double>> out;
  for (auto& [method, pts] : raw) {
    std::sort(pts.begin(), pts.end());
    auto& curve = out[method];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].first != static_cast<int>(i) + 1)
        throw ValidationError(path + ": method " + method +
                              " epochs must run 1..n without gaps");
      curve.push_back(pts[i].second);
    }
  }
  return out;
}

int cmd_analyze(AnalyzeArgs& a) {
  Manifest man;
  man.command = "analyze";
  man.started_at = now_utc();
  man.config["auc_table"] = a.auc_table;
  man.config["threshold"] = a.threshold;

  auto table = eval::load_metric_table(a.auc_table);
  add_input(man, a.auc_table);
  eval::resolve_missing(table);
  const auto cmp = eval::compare_methods(table);
  const auto tol = eval::tolerable_analysis(table, a.threshold);

  std::printf("rows: %d\n", tol.n_rows);
  for (int b = 0; b < 3; ++b) {
    const auto& w = cmp.total[static_cast<std::size_t>(b)];
    std::printf("mtl vs %-12s win %d / lose %d / tie %d\n",
                eval::kMethodNames[static_cast<std::size_t>(b + 1)], w.first,
                w.second, w.ties);
  }
  std::printf("best:       ");
  for (int m = 0; m < 4; ++m)
    std::printf(" %s=%d", eval::kMethodNames[static_cast<std::size_t>(m)],
                tol.best[static_cast<std::size_t>(m)]);
  std::printf("\ntolerable:  ");
  for (int m = 0; m < 4; ++m)
    std::printf(" %s=%d", eval::kMethodNames[static_cast<std::size_t>(m)],
                tol.tolerable[static_cast<std::size_t>(m)]);
  std::printf("\n");

  std::string cmp_csv = "baseline,mtl_wins,baseline_wins,ties\n";
  for (int b = 0; b < 3; ++b) {
    const auto& w = cmp.total[static_cast<std::size_t>(b)];
    cmp_csv += std::string(eval::kMethodNames[static_cast<std::size_t>(b + 1)]) +
               "," + std::to_string(w.first) + "," + std::to_string(w.second) +
               "," + std::to_string(w.ties) + "\n";
  }
  std::string tol_csv = "method,best,tolerable\n";
  for (int m = 0; m < 4; ++m)
    tol_csv += std::string(eval::kMethodNames[static_cast<std::size_t>(m)]) +
               "," + std::to_string(tol.best[static_cast<std::size_t>(m)]) +
               "," + std::to_string(tol.tolerable[static_cast<std::size_t>(m)]) +
               "\n";

  std::string avg_csv;
  if (!a.mse_table.empty()) {
    auto mse_table = eval::load_metric_table(a.mse_table);
    add_input(man, a.mse_table);
    man.config["mse_table"] = a.mse_table;
    eval::resolve_missing(mse_table);
    const auto avg = eval::average_by_system(mse_table);
    avg_csv = "organ_system,mtl,stl_highest,stl_related,target\n";
    for (const auto& [system, vals] : avg) {
      char line[256];
      std::snprintf(line, sizeof line, "%s,%.6g,%.6g,%.6g,%.6g\n",
                    system.c_str(), vals[0], vals[1], vals[2], vals[3]);
      avg_csv += line;
      std::printf("mean (%s): mtl %.4g, stl_highest %.4g, stl_related %.4g, "
                  "target %.4g\n",
                  system.c_str(), vals[0], vals[1], vals[2], vals[3]);
    }
  }

  std::string eff_csv;
  if (!a.curves.empty()) {
    const auto curves = load_curves(a.curves);
    add_input(man, a.curves);
    man.config["curves"] = a.curves;
    const auto eff = eval::epoch_efficiency(curves);
    eff_csv = "method,best_epoch\n";
    for (const auto& [method, epoch] : eff) {
      std::printf("best epoch (%s): %d\n", method.c_str(), epoch);
      eff_csv += method + "," + std::to_string(epoch) + "\n";
    }
  }

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    eval::write_metric_table(table, a.out_dir + "/resolved_table.csv");
    eval::write_boxplot_csv(table, a.out_dir + "/boxplot.csv");
    model::detail::write_file_atomic(a.out_dir + "/comparison.csv", cmp_csv);
    model::detail::write_file_atomic(a.out_dir + "/tolerable.csv", tol_csv);
    for (const char* f :
         {"resolved_table.csv", "boxplot.csv", "comparison.csv",
          "tolerable.csv"})
      add_output(man, a.out_dir + "/" + f);
    if (!avg_csv.empty()) {
      model::detail::write_file_atomic(a.out_dir + "/mse_by_system.csv",
                                       avg_csv);
      add_output(man, a.out_dir + "/mse_by_system.csv");
    }
    if (!eff_csv.empty()) {
      model::detail::write_file_atomic(a.out_dir + "/epoch_efficiency.csv",
                                       eff_csv);
      add_output(man, a.out_dir + "/epoch_efficiency.csv");
    }
    write_manifest(man, a.out_dir, "");
  }
  return 0;
}

struct GradcheckArgs {
  std::size_t embed_dim = 6, hidden = 4, attn = 8, heads = 2;
  std::uint64_t seed = 0;
  double step = 1e-5, tol = 1e-4;
  std::size_t max_coords = 100000;
};

// Builds a tiny random patient and checks analytic gradients of the summed
// weighted losses against central differences. Always runs in double; a
// float-precision check could not distinguish real defects from rounding.
int cmd_gradcheck(const GradcheckArgs& a) {
  model::HanConfig cfg;
  cfg.embed_dim = a.embed_dim;
  cfg.lstm_hidden = a.hidden;
  cfg.attn_size = a.attn;
  cfg.n_heads = a.heads;
  cfg.max_tokens = 8;
  cfg.max_sentences = 8;
  cfg.max_bursts = 8;
  auto params = model::build_model<double>(cfg, a.seed);

  Rng rng(mix_seed(a.seed, 0x636c69676368ULL));
  std::vector<std::string> vocab;
  std::vector<double> matrix;
  for (int w = 0; w < 8; ++w) {
    vocab.push_back("t" + std::to_string(w));
    for (std::size_t dcol = 0; dcol < a.embed_dim; ++dcol)
      matrix.push_back(rng.uniform(-0.5, 0.5));
  }
  embed::EmbeddingTable table(a.embed_dim, vocab, matrix);

  corpus::PatientSequence patient;
  patient.patient_id = "probe";
  for (int b = 0; b < 2; ++b) {
    corpus::NoteBurst burst;
    burst.start_time = 3600 * b;
    corpus::ProcessedNote note;
    note.note_id = "n" + std::to_string(b);
    note.charttime = burst.start_time;
    for (int s = 0; s < 2; ++s) {
      std::vector<std::string> sent;
      for (int t = 0; t < 3; ++t) sent.push_back(vocab[rng.below(8)]);
      note.sentences.push_back(std::move(sent));
    }
    burst.notes.push_back(std::move(note));
    patient.bursts.push_back(std::move(burst));
  }

  std::vector<double> y(a.heads), w(a.heads);
  for (std::size_t k = 0; k < a.heads; ++k) {
    y[k] = static_cast<double>(k % 2);
    w[k] = 1.0 + static_cast<double>(k);
  }
  auto loss = [&]() {
    const auto logits = model::forward(params, patient, table);
    double total = 0;
    for (std::size_t k = 0; k < a.heads; ++k)
      total += nn::bce_with_logit(static_cast<double>(logits[k]), y[k], w[k],
                                  static_cast<double*>(nullptr));
    return total;
  };

  model::ForwardTape<double> tape;
  const auto logits = model::forward(params, patient, table, &tape);
  Tensor<double> dlogits(a.heads);
  for (std::size_t k = 0; k < a.heads; ++k)
    nn::bce_with_logit(logits[k], y[k], w[k], &dlogits[k]);
  auto grads = model::make_zeroed<double>(cfg);
  model::backward(params, tape, dlogits, grads);

  std::vector<Tensor<double>*> pts;
  std::vector<const Tensor<double>*> gts;
  params.for_each_tensor(
      [&](const std::string&, Tensor<double>& t) { pts.push_back(&t); });
  grads.for_each_tensor(
      [&](const std::string&, const Tensor<double>& t) { gts.push_back(&t); });
  const auto report =
      nn::grad_check(loss, pts, gts, a.step, a.max_coords, a.seed);
  std::printf("checked %zu coordinates, max relative error %.3g\n",
              report.coords_checked, report.max_rel_err);
  if (report.max_rel_err > a.tol) {
    std::fprintf(stderr, "gradient check failed: %.3g exceeds %.3g\n",
                 report.max_rel_err, a.tol);
    return 1;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"hierarchical-attention phenotype toolkit"};
  app.require_subcommand(1);
  // Values resolve flags > config file > built-in defaults; the file uses
  // TOML-style key=value lines under one [section] per subcommand.
  app.set_config("--config", "",
                 "read option defaults from a TOML-style file");
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads for linear algebra (0 keeps the default)")
      ->capture_default_str();

  SynthArgs synth_args;
  auto* c_synth = app.add_subcommand(
      "synth", "generate a labeled synthetic note corpus");
  c_synth->add_option("--out-dir", synth_args.out_dir)->required();
  c_synth->add_option("--patients", synth_args.spec.n_patients)
      ->capture_default_str();
  c_synth->add_option("--vocab", synth_args.spec.vocab_size)
      ->capture_default_str();
  c_synth->add_option("--high", synth_args.spec.n_high,
                      "number of high-prevalence tasks")
      ->capture_default_str();
  c_synth->add_option("--prevalence", synth_args.spec.high_prevalence)
      ->capture_default_str();
  c_synth->add_option("--signal", synth_args.spec.signal)
      ->capture_default_str();
  c_synth->add_option("--noise", synth_args.spec.noise)->capture_default_str();
  c_synth->add_option("--error-rate", synth_args.spec.error_rate)
      ->capture_default_str();
  c_synth->add_option("--embed-dim", synth_args.spec.embed_dim)
      ->capture_default_str();
  c_synth->add_option("--seed", synth_args.spec.seed)->capture_default_str();
  c_synth->add_option("--low", synth_args.low_specs,
                      "low-prevalence task name:icd9:n_pos[:signal[:c0,..]]");
  c_synth->add_option("--stamp", synth_args.stamp,
                      "fixed timestamp for reproducible artifacts");

  CohortArgs cohort_args;
  auto* c_cohort = app.add_subcommand(
      "cohort", "summarize labels, weights and prevalence tiers");
  add_data_flags(c_cohort, cohort_args.data, false);
  c_cohort->add_option("--tasks", cohort_args.tasks_file, "task CSV")
      ->required();
  c_cohort->add_option("--out-dir", cohort_args.out_dir);
  c_cohort->add_flag("--tiers", cohort_args.tiers,
                     "bucket codes by prevalence per organ system");
  c_cohort->add_option("--tier-low", cohort_args.tier_low)
      ->capture_default_str();
  c_cohort->add_option("--tier-high", cohort_args.tier_high)
      ->capture_default_str();
  c_cohort->add_option("--top-k", cohort_args.top_k)->capture_default_str();

  PretrainArgs pre_args;
  auto* c_pre = app.add_subcommand(
      "pretrain", "train encoder(s) on high-prevalence tasks");
  add_data_flags(c_pre, pre_args.data, true);
  add_split_flags(c_pre, pre_args.split);
  add_model_flags(c_pre, pre_args.model);
  add_train_flags(c_pre, pre_args.train);
  c_pre->add_option("--tasks", pre_args.tasks_file, "task CSV")->required();
  c_pre->add_option("--task", pre_args.task_codes,
                    "restrict to these codes (repeatable)");
  c_pre->add_option("--out-dir", pre_args.out_dir)->required();
  c_pre->add_option("--stamp", pre_args.stamp,
                    "fixed timestamp for reproducible artifacts");
  auto* mtl = c_pre->add_flag("--mtl", "one model with a head per task");
  c_pre->add_flag("--stl", pre_args.stl, "one single-head model per task")
      ->excludes(mtl);

  FinetuneArgs ft_args;
  auto* c_ft = app.add_subcommand(
      "finetune", "fine-tune a pre-trained model on one target task");
  add_data_flags(c_ft, ft_args.data, true);
  add_split_flags(c_ft, ft_args.split);
  add_train_flags(c_ft, ft_args.train);
  c_ft->add_option("--checkpoint", ft_args.checkpoint)->required();
  c_ft->add_option("--target", ft_args.target, "target diagnosis code")
      ->required();
  c_ft->add_option("--pos-weight", ft_args.pos_weight,
                   "positive-class weight (default: derived from cohort)");
  c_ft->add_option("--out-dir", ft_args.out_dir)->required();
  c_ft->add_option("--stamp", ft_args.stamp,
                   "fixed timestamp for reproducible artifacts");

  TrainTargetArgs tt_args;
  auto* c_tt = app.add_subcommand(
      "train-target", "train a single-task model from scratch");
  add_data_flags(c_tt, tt_args.data, true);
  add_split_flags(c_tt, tt_args.split);
  add_model_flags(c_tt, tt_args.model);
  add_train_flags(c_tt, tt_args.train);
  c_tt->add_option("--target", tt_args.target, "target diagnosis code")
      ->required();
  c_tt->add_option("--pos-weight", tt_args.pos_weight,
                   "positive-class weight (default: derived from cohort)");
  c_tt->add_option("--out-dir", tt_args.out_dir)->required();
  c_tt->add_option("--stamp", tt_args.stamp,
                   "fixed timestamp for reproducible artifacts");

  EvalArgs eval_args;
  auto* c_eval = app.add_subcommand(
      "eval", "score a checkpoint on a held-out subset");
  add_data_flags(c_eval, eval_args.data, true);
  add_split_flags(c_eval, eval_args.split);
  c_eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  c_eval->add_option("--split", eval_args.subset, "train, val or test")
      ->capture_default_str();
  c_eval->add_option("--out-dir", eval_args.out_dir);
  auto* eval_seed = c_eval->add_option(
      "--seed", eval_args.seed, "split seed (default: the checkpoint's)");

  AnalyzeArgs an_args;
  auto* c_an = app.add_subcommand(
      "analyze", "comparison tables and plot data from metric tables");
  c_an->add_option("--auc-table", an_args.auc_table)->required();
  c_an->add_option("--mse-table", an_args.mse_table);
  c_an->add_option("--curves", an_args.curves,
                   "method,epoch,val_loss CSV for epoch efficiency");
  c_an->add_option("--threshold", an_args.threshold,
                   "tolerable fraction of the row maximum")
      ->capture_default_str();
  c_an->add_option("--out-dir", an_args.out_dir);

  GradcheckArgs gc_args;
  auto* c_gc = app.add_subcommand(
      "gradcheck", "compare analytic gradients with central differences");
  c_gc->add_option("--embed-dim", gc_args.embed_dim)->capture_default_str();
  c_gc->add_option("--hidden", gc_args.hidden)->capture_default_str();
  c_gc->add_option("--attn-size", gc_args.attn)->capture_default_str();
  c_gc->add_option("--heads", gc_args.heads)->capture_default_str();
  c_gc->add_option("--seed", gc_args.seed)->capture_default_str();
  c_gc->add_option("--step", gc_args.step)->capture_default_str();
  c_gc->add_option("--tol", gc_args.tol)->capture_default_str();
  c_gc->add_option("--max-coords", gc_args.max_coords)->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("hanphen");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) kernels::set_threads(threads);
    eval_args.seed_given = eval_seed->count() > 0;
    if (app.got_subcommand(c_synth)) return cmd_synth(synth_args);
    if (app.got_subcommand(c_cohort)) return cmd_cohort(cohort_args);
    if (app.got_subcommand(c_pre))
      return dispatch_precision(
          [&](auto* tag) { return cmd_pretrain<std::remove_pointer_t<decltype(tag)>>(pre_args); });
    if (app.got_subcommand(c_ft))
      return dispatch_precision(
          [&](auto* tag) { return cmd_finetune<std::remove_pointer_t<decltype(tag)>>(ft_args); });
    if (app.got_subcommand(c_tt))
      return dispatch_precision(
          [&](auto* tag) { return cmd_train_target<std::remove_pointer_t<decltype(tag)>>(tt_args); });
    if (app.got_subcommand(c_eval))
      return dispatch_precision(
          [&](auto* tag) { return cmd_eval<std::remove_pointer_t<decltype(tag)>>(eval_args); });
    if (app.got_subcommand(c_an)) return cmd_analyze(an_args);
    if (app.got_subcommand(c_gc)) return cmd_gradcheck(gc_args);
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace han::cli
