// Training-loop tests on a tiny in-memory cohort with a planted signal
// token, plus in-process command-line entry point checks.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "han/cli.hpp"
#include "han/cohort.hpp"
#include "han/corpus.hpp"
#include "han/csv.hpp"
#include "han/embed.hpp"
#include "han/kernels.hpp"
#include "han/model.hpp"
#include "han/nn.hpp"
#include "han/rng.hpp"
#include "han/sha256.hpp"
#include "han/trainer.hpp"
#include <nlohmann/json.hpp>
#include "testutil.hpp"

using namespace han;

namespace {

// 36 patients; even indices carry the token "sick" in every sentence and are
// positive for task 111.1; indices divisible by 3 are positive for 222.2
// (which has no textual signal). Splits are fixed so both classes appear in
// every subset.
struct World {
  std::vector<corpus::PatientSequence> patients;
  embed::EmbeddingTable table;
  cohort::LabelMatrix labels;
  cohort::CohortSplit split;
  model::HanConfig config;
};

World make_world() {
  const std::vector<std::string> background = {"alpha", "beta",  "gamma",
                                               "delta", "omega", "kappa",
                                               "sigma", "theta"};
  std::vector<std::string> vocab = background;
  vocab.push_back("sick");

  World w;
  w.config.embed_dim = 6;
  w.config.lstm_hidden = 5;
  w.config.attn_size = 5;
  w.config.n_heads = 1;

  Rng table_rng(424242);
  std::vector<double> matrix(vocab.size() * w.config.embed_dim);
  for (double& v : matrix) v = 2.0 * table_rng.uniform01() - 1.0;
  w.table = embed::EmbeddingTable(w.config.embed_dim, vocab, matrix);

  Rng rng(777);
  w.labels.tasks = {"111.1", "222.2"};
  for (int i = 0; i < 36; ++i) {
    const std::string id = "p" + std::to_string(i);
    const bool sick = i % 2 == 0;
    corpus::PatientSequence seq;
    seq.patient_id = id;
    const int n_bursts = 1 + static_cast<int>(rng.below(2));
    for (int b = 0; b < n_bursts; ++b) {
      corpus::ProcessedNote note;
      note.note_id = id + "n" + std::to_string(b);
      note.charttime = b * 100000;
      for (int s = 0; s < 2; ++s) {
        std::vector<std::string> sent;
        const int len = 3 + static_cast<int>(rng.below(3));
        for (int t = 0; t < len; ++t) {
          sent.push_back(background[rng.below(background.size())]);
        }
        if (sick) sent.push_back("sick");
        note.sentences.push_back(std::move(sent));
      }
      corpus::NoteBurst burst;
      burst.start_time = note.charttime;
      burst.notes.push_back(std::move(note));
      seq.bursts.push_back(std::move(burst));
    }
    w.patients.push_back(std::move(seq));
    w.labels.patients.push_back(id);
    w.labels.y.push_back(sick ? 1 : 0);
    w.labels.y.push_back(i % 3 == 0 ? 1 : 0);

    if (i < 24) {
      w.split.train.push_back(id);
    } else if (i < 30) {
      w.split.val.push_back(id);
    } else {
      w.split.test.push_back(id);
    }
  }
  return w;
}

trainer::TrainConfig quick_config(std::uint64_t seed) {
  trainer::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.lr = 0.02;
  cfg.max_epochs = 8;
  cfg.patience = 3;
  cfg.seed = seed;
  return cfg;
}

bool same_params(const model::ModelParams<double>& a,
                 const model::ModelParams<double>& b) {
  std::vector<const Tensor<double>*> ta, tb;
  a.for_each_tensor(
      [&](const std::string&, const Tensor<double>& t) { ta.push_back(&t); });
  b.for_each_tensor(
      [&](const std::string&, const Tensor<double>& t) { tb.push_back(&t); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->shape() != tb[i]->shape()) return false;
    if (std::memcmp(ta[i]->data(), tb[i]->data(),
                    ta[i]->size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

bool same_history(const trainer::TrainHistory& a,
                  const trainer::TrainHistory& b) {
  if (a.epochs.size() != b.epochs.size() || a.best_epoch != b.best_epoch ||
      a.stopped_epoch != b.stopped_epoch) {
    return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    if (a.epochs[i].train_loss != b.epochs[i].train_loss) return false;
    if (a.epochs[i].val_loss != b.epochs[i].val_loss) return false;
    if (a.epochs[i].val_auc != b.epochs[i].val_auc) return false;
  }
  return true;
}

// Mean summed-over-tasks validation loss, recomputed outside the trainer.
double val_loss_of(const model::ModelParams<double>& params, const World& w,
                   const std::vector<trainer::TaskSpec>& tasks) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < w.patients.size(); ++i) {
    index[w.patients[i].patient_id] = i;
  }
  std::vector<std::size_t> cols;
  for (const auto& t : tasks) {
    for (std::size_t c = 0; c < w.labels.tasks.size(); ++c) {
      if (w.labels.tasks[c] == t.name) cols.push_back(c);
    }
  }
  double sum = 0;
  for (const auto& id : w.split.val) {
    const std::size_t p = index.at(id);
    const Tensor<double> logits = model::forward(params, w.patients[p], w.table);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const double y = w.labels.at(p, cols[k]);
      sum += nn::bce_with_logit(logits[k], y, tasks[k].weight, static_cast<double*>(nullptr));
    }
  }
  return sum / static_cast<double>(w.split.val.size());
}

}  // namespace

// --------------------------------------------------------------- early stop

TEST_CASE("trainer: early_stop_decision counts epochs since a strict min") {
  using trainer::early_stop_decision;
  CHECK(early_stop_decision({1.0, 0.9, 0.95, 0.96, 0.97}, 3) ==
        std::pair<bool, int>{true, 2});
  CHECK(early_stop_decision({1.0, 0.9, 0.95, 0.96}, 3) ==
        std::pair<bool, int>{false, 2});
  // A late new minimum resets the counter entirely.
  CHECK(early_stop_decision({1.0, 1.1, 1.05, 0.8}, 3) ==
        std::pair<bool, int>{false, 4});
  CHECK(early_stop_decision({2.0, 1.0, 1.5, 0.9, 1.2, 1.3, 1.4}, 3) ==
        std::pair<bool, int>{true, 4});
  CHECK(early_stop_decision({2.0, 1.0, 1.5, 0.9, 1.2, 1.3}, 3) ==
        std::pair<bool, int>{false, 4});
  // Ties are not improvements, and the first achiever keeps the title.
  CHECK(early_stop_decision({0.5, 0.5}, 1) == std::pair<bool, int>{true, 1});
  CHECK(early_stop_decision({1.0, 1.0, 1.0}, 2) ==
        std::pair<bool, int>{true, 1});
  CHECK(early_stop_decision({0.5}, 1) == std::pair<bool, int>{false, 1});
  CHECK(early_stop_decision({}, 3) == std::pair<bool, int>{false, 0});
  CHECK_THROWS_AS(early_stop_decision({1.0}, 0), ConfigError);
}

TEST_CASE("trainer: history CSV round-trips at full precision") {
  testutil::TempDir tmp("hist");
  trainer::TrainHistory h;
  for (int e = 0; e < 3; ++e) {
    trainer::EpochStats s;
    s.train_loss = 0.1 + 0.2 + e;        // 0.30000000000000004...
    s.val_loss = 1.0 / (e + 3);
    s.val_auc = {0.5 + 0.1 * e, 1e-300};
    h.epochs.push_back(s);
  }
  h.best_epoch = 3;
  h.stopped_epoch = 3;
  const std::string path = tmp.str() + "/history.csv";
  trainer::write_history_csv(h, path);

  const std::string text = testutil::read_text(path);
  CHECK(text.rfind("epoch,train_loss,val_loss,val_auc_head0,val_auc_head1\n",
                   0) == 0);

  const auto back = trainer::read_history_csv(path);
  REQUIRE(back.epochs.size() == 3);
  CHECK(back.best_epoch == 3);  // argmin of the decreasing val losses
  CHECK(back.stopped_epoch == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(back.epochs[e].train_loss == h.epochs[e].train_loss);
    CHECK(back.epochs[e].val_loss == h.epochs[e].val_loss);
    CHECK(back.epochs[e].val_auc == h.epochs[e].val_auc);
  }

  testutil::write_text(tmp.str() + "/bad.csv", "foo,bar\n1,2\n");
  CHECK_THROWS_AS(trainer::read_history_csv(tmp.str() + "/bad.csv"),
                  ParseError);
  testutil::write_text(tmp.str() + "/ragged.csv",
                   "epoch,train_loss,val_loss\n1,0.5\n");
  CHECK_THROWS_AS(trainer::read_history_csv(tmp.str() + "/ragged.csv"),
                  ParseError);
}

// ----------------------------------------------------------------- training

TEST_CASE("trainer: deterministic for a seed, sensitive to it, and learns") {
  const World w = make_world();
  const std::vector<trainer::TaskSpec> task = {{"111.1", 1.0}};

  const auto r1 = trainer::train(model::build_model<double>(w.config, 5),
                                 w.patients, w.table, w.labels, task, w.split,
                                 quick_config(5));
  const auto r2 = trainer::train(model::build_model<double>(w.config, 5),
                                 w.patients, w.table, w.labels, task, w.split,
                                 quick_config(5));
  CHECK(same_history(r1.history, r2.history));
  CHECK(same_params(r1.checkpoint.params, r2.checkpoint.params));

  const auto r3 = trainer::train(model::build_model<double>(w.config, 6),
                                 w.patients, w.table, w.labels, task, w.split,
                                 quick_config(6));
  CHECK_FALSE(same_history(r1.history, r3.history));

  // The planted token is linearly separable; validation AUC must get there.
  double best_auc = 0;
  for (const auto& e : r1.history.epochs) {
    best_auc = std::max(best_auc, e.val_auc.at(0));
  }
  CHECK(best_auc >= 0.9);
  CHECK(r1.history.epochs.back().train_loss <
        r1.history.epochs.front().train_loss);

  // Checkpoint metadata and parameters belong to the best epoch.
  CHECK(r1.checkpoint.meta.seed == 5);
  CHECK(r1.checkpoint.meta.tasks == std::vector<std::string>{"111.1"});
  CHECK(r1.checkpoint.meta.epoch == r1.history.best_epoch);
  REQUIRE(r1.history.best_epoch >= 1);
  const double best_val =
      r1.history.epochs[static_cast<std::size_t>(r1.history.best_epoch - 1)]
          .val_loss;
  for (const auto& e : r1.history.epochs) CHECK(e.val_loss >= best_val);
  CHECK(val_loss_of(r1.checkpoint.params, w, task) ==
        doctest::Approx(best_val).epsilon(1e-10));
}

TEST_CASE("trainer: results are identical at any thread count") {
  const World w = make_world();
  const std::vector<trainer::TaskSpec> task = {{"111.1", 1.0}};
  trainer::TrainConfig cfg = quick_config(3);
  cfg.max_epochs = 3;

  const int saved = kernels::max_threads();
  kernels::set_threads(1);
  const auto serial = trainer::train(model::build_model<double>(w.config, 3),
                                     w.patients, w.table, w.labels, task,
                                     w.split, cfg);
  kernels::set_threads(4);
  const auto threaded = trainer::train(model::build_model<double>(w.config, 3),
                                       w.patients, w.table, w.labels, task,
                                       w.split, cfg);
  kernels::set_threads(saved);
  CHECK(same_history(serial.history, threaded.history));
  CHECK(same_params(serial.checkpoint.params, threaded.checkpoint.params));
}

TEST_CASE("trainer: concurrent independent runs equal serial execution") {
  const World w = make_world();
  const std::vector<trainer::TaskSpec> t1 = {{"111.1", 1.0}};
  const std::vector<trainer::TaskSpec> t2 = {{"222.2", 3.0}};
  trainer::TrainConfig cfg = quick_config(7);
  cfg.max_epochs = 3;

  const auto run1 = [&] {
    return trainer::train(model::build_model<double>(w.config, 7), w.patients,
                          w.table, w.labels, t1, w.split, cfg);
  };
  const auto run2 = [&] {
    return trainer::train(model::build_model<double>(w.config, 8), w.patients,
                          w.table, w.labels, t2, w.split, cfg);
  };

  const auto serial1 = run1();
  const auto serial2 = run2();

  trainer::TrainResult<double> conc1, conc2;
  std::thread a([&] { conc1 = run1(); });
  std::thread b([&] { conc2 = run2(); });
  a.join();
  b.join();

  CHECK(same_history(serial1.history, conc1.history));
  CHECK(same_params(serial1.checkpoint.params, conc1.checkpoint.params));
  CHECK(same_history(serial2.history, conc2.history));
  CHECK(same_params(serial2.checkpoint.params, conc2.checkpoint.params));
}

TEST_CASE("trainer: multi-task run over one task equals the single-task run") {
  const World w = make_world();
  const auto mtl = trainer::pretrain<double>(w.config, w.patients, w.table,
                                             w.labels, {"111.1"}, w.split,
                                             quick_config(11));
  const auto stl = trainer::train_target<double>(
      w.config, w.patients, w.table, w.labels, {"111.1", 1.0}, w.split,
      quick_config(11));
  CHECK(same_history(mtl.history, stl.history));
  CHECK(same_params(mtl.checkpoint.params, stl.checkpoint.params));
  CHECK(mtl.checkpoint.meta.tasks == stl.checkpoint.meta.tasks);
}

TEST_CASE("trainer: fine-tuning an untrained checkpoint equals from-scratch") {
  // Per-tensor seeding makes this exact: the fresh 2-head model shares its
  // encoder streams with the 1-head model, and replace_head draws the new
  // head from the same stream build_model would use.
  const World w = make_world();
  model::HanConfig c2 = w.config;
  c2.n_heads = 2;
  model::Checkpoint<double> ckpt;
  ckpt.params = model::build_model<double>(c2, 9);
  ckpt.meta.seed = 9;
  ckpt.meta.tasks = {"111.1", "222.2"};

  const trainer::TaskSpec target{"111.1", 2.0};
  const auto ft = trainer::finetune(ckpt, w.patients, w.table, w.labels,
                                    target, w.split, quick_config(9));
  const auto scratch = trainer::train_target<double>(
      w.config, w.patients, w.table, w.labels, target, w.split,
      quick_config(9));
  CHECK(same_history(ft.history, scratch.history));
  CHECK(same_params(ft.checkpoint.params, scratch.checkpoint.params));
}

TEST_CASE("trainer: the positive-class weight changes the optimization") {
  const World w = make_world();
  trainer::TrainConfig cfg = quick_config(4);
  cfg.max_epochs = 2;
  const auto w1 = trainer::train_target<double>(
      w.config, w.patients, w.table, w.labels, {"111.1", 1.0}, w.split, cfg);
  const auto w4 = trainer::train_target<double>(
      w.config, w.patients, w.table, w.labels, {"111.1", 4.0}, w.split, cfg);
  CHECK_FALSE(same_history(w1.history, w4.history));
}

TEST_CASE("trainer: the embedding table is never modified") {
  const World w = make_world();
  const std::string before = w.table.checksum();
  trainer::TrainConfig cfg = quick_config(2);
  cfg.max_epochs = 2;
  trainer::train_target<double>(w.config, w.patients, w.table, w.labels,
                                {"111.1", 1.0}, w.split, cfg);
  CHECK(w.table.checksum() == before);
}

TEST_CASE("trainer: configuration and cohort validation") {
  const World w = make_world();
  const std::vector<trainer::TaskSpec> task = {{"111.1", 1.0}};
  auto near = [&](auto mutate) {
    trainer::TrainConfig cfg = quick_config(1);
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(
      trainer::train(model::build_model<double>(w.config, 1), w.patients,
                     w.table, w.labels, task, w.split,
                     near([](auto& c) { c.max_epochs = 0; })),
      ConfigError);
  CHECK_THROWS_AS(
      trainer::train(model::build_model<double>(w.config, 1), w.patients,
                     w.table, w.labels, task, w.split,
                     near([](auto& c) { c.batch_size = 0; })),
      ConfigError);
  CHECK_THROWS_AS(
      trainer::train(model::build_model<double>(w.config, 1), w.patients,
                     w.table, w.labels, task, w.split,
                     near([](auto& c) { c.patience = 0; })),
      ConfigError);
  CHECK_THROWS_AS(
      trainer::train(model::build_model<double>(w.config, 1), w.patients,
                     w.table, w.labels, {}, w.split, quick_config(1)),
      ConfigError);
  // Two tasks against a 1-head model.
  CHECK_THROWS_AS(
      trainer::train(model::build_model<double>(w.config, 1), w.patients,
                     w.table, w.labels,
                     {{"111.1", 1.0}, {"222.2", 1.0}}, w.split,
                     quick_config(1)),
      ConfigError);
  // Unknown task code.
  CHECK_THROWS_AS(
      trainer::train(model::build_model<double>(w.config, 1), w.patients,
                     w.table, w.labels, {{"999.9", 1.0}}, w.split,
                     quick_config(1)),
      ConfigError);
}

TEST_CASE("trainer: index_cohort rejects broken splits and one-class tasks") {
  const World w = make_world();
  const std::vector<trainer::TaskSpec> task = {{"111.1", 1.0}};

  cohort::CohortSplit ghost = w.split;
  ghost.train.push_back("nobody");
  CHECK_THROWS_AS(
      trainer::detail::index_cohort(w.patients, w.labels, task, ghost),
      ConfigError);

  cohort::CohortSplit empty_val = w.split;
  empty_val.val.clear();
  CHECK_THROWS_AS(
      trainer::detail::index_cohort(w.patients, w.labels, task, empty_val),
      ConfigError);

  // Labels that only cover train ids: every val patient defaults to
  // negative, which the class-presence check must reject.
  cohort::LabelMatrix partial;
  partial.tasks = {"111.1"};
  for (int i = 0; i < 24; ++i) {
    partial.patients.push_back("p" + std::to_string(i));
    partial.y.push_back(i % 2 == 0 ? 1 : 0);
  }
  CHECK_THROWS_WITH_AS(
      trainer::detail::index_cohort(w.patients, partial, task, w.split),
      "task '111.1' has no positives in val", ConfigError);

  // All-positive task in train.
  cohort::LabelMatrix allpos = w.labels;
  for (std::size_t p = 0; p < allpos.patients.size(); ++p) {
    allpos.y[p * 2] = 1;
  }
  CHECK_THROWS_WITH_AS(
      trainer::detail::index_cohort(w.patients, allpos, task, w.split),
      "task '111.1' has no negatives in train", ConfigError);

  // The happy path indexes everything.
  const auto idx =
      trainer::detail::index_cohort(w.patients, w.labels, task, w.split);
  CHECK(idx.train.size() == 24);
  CHECK(idx.val.size() == 6);
  CHECK(idx.labels[0].size() == w.patients.size());
}

// ------------------------------------------------------- command-line entry

TEST_CASE("cli: exit codes distinguish usage errors from runtime errors") {
  CHECK(cli::run({}) == 2);                       // no subcommand
  CHECK(cli::run({"--help"}) == 0);
  CHECK(cli::run({"no-such-command"}) == 2);
  CHECK(cli::run({"synth"}) == 2);                // missing --out-dir
  CHECK(cli::run({"synth", "--out-dir", "/tmp/x", "--bogus-flag"}) == 2);
  testutil::TempDir tmp("clierr");
  CHECK(cli::run({"cohort", "--corpus", tmp.str() + "/absent.jsonl",
                  "--diagnoses", tmp.str() + "/absent.csv", "--tasks",
                  tmp.str() + "/absent2.csv"}) == 1);
}

TEST_CASE("cli: synth writes a reproducible corpus and an honest manifest") {
  testutil::TempDir tmp("clisynth");
  const std::string d1 = tmp.str() + "/a";
  const std::string d2 = tmp.str() + "/b";
  const std::vector<std::string> base = {
      "synth",      "--patients", "30",    "--vocab", "25",
      "--high",     "2",          "--seed", "3",      "--stamp",
      "2009-01-01T00:00:00Z"};
  auto with_dir = [&](const std::string& dir) {
    auto v = base;
    v.push_back("--out-dir");
    v.push_back(dir);
    return v;
  };
  REQUIRE(cli::run(with_dir(d1)) == 0);
  REQUIRE(cli::run(with_dir(d2)) == 0);

  for (const char* name :
       {"corpus.jsonl", "diagnoses.csv", "tasks.csv", "embeddings.txt",
        "run_manifest.json"}) {
    CAPTURE(name);
    CHECK(testutil::read_text(d1 + "/" + name) == testutil::read_text(d2 + "/" + name));
  }

  std::ifstream mf(d1 + "/run_manifest.json");
  nlohmann::json man;
  mf >> man;
  CHECK(man.at("command") == "synth");
  CHECK(man.at("seed") == 3);
  CHECK(man.at("started_at") == "2009-01-01T00:00:00Z");
  const auto& outputs = man.at("outputs");
  REQUIRE(outputs.contains("corpus.jsonl"));
  CHECK(outputs.at("corpus.jsonl").get<std::string>() ==
        sha256_file(d1 + "/corpus.jsonl"));
}

TEST_CASE("cli: cohort summary matches the label-derived weights") {
  testutil::TempDir tmp("clicohort");
  const std::string data = tmp.str() + "/data";
  REQUIRE(cli::run({"synth", "--out-dir", data, "--patients", "40", "--vocab",
                    "25", "--high", "2", "--seed", "4"}) == 0);
  const std::string out = tmp.str() + "/cohort";
  REQUIRE(cli::run({"cohort", "--corpus", data + "/corpus.jsonl",
                    "--diagnoses", data + "/diagnoses.csv", "--tasks",
                    data + "/tasks.csv", "--out-dir", out}) == 0);

  const auto rows = csv::read_file(out + "/cohort_summary.csv");
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == std::vector<std::string>{"name", "icd9", "organ_system",
                                            "n_pos", "total", "pos_weight"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto n_pos = std::stoll(rows[i][3]);
    const auto total = std::stoll(rows[i][4]);
    REQUIRE(n_pos > 0);
    CHECK(std::stoll(rows[i][5]) == cohort::pos_weight(n_pos, total));
  }

  // The manifest records the three inputs with their digests.
  std::ifstream mf(out + "/run_manifest.json");
  nlohmann::json man;
  mf >> man;
  CHECK(man.at("command") == "cohort");
  CHECK(man.at("inputs").size() == 3);
  CHECK(man.at("inputs").at(data + "/tasks.csv").get<std::string>() ==
        sha256_file(data + "/tasks.csv"));
}

TEST_CASE("cli: config file fills in values but explicit flags win") {
  testutil::TempDir tmp("clicfg");
  testutil::write_text(tmp.file("run.toml"), "[synth]\npatients=33\nseed=5\n");

  const std::string d1 = tmp.str() + "/flag";
  REQUIRE(cli::run({"--config", tmp.file("run.toml"), "synth", "--out-dir", d1,
                    "--seed", "7"}) == 0);
  std::ifstream f1(d1 + "/run_manifest.json");
  nlohmann::json m1;
  f1 >> m1;
  CHECK(m1.at("seed") == 7);                          // flag beats file
  CHECK(m1.at("config").at("n_patients") == 33);      // file beats default

  const std::string d2 = tmp.str() + "/file";
  REQUIRE(cli::run({"--config", tmp.file("run.toml"), "synth", "--out-dir",
                    d2}) == 0);
  std::ifstream f2(d2 + "/run_manifest.json");
  nlohmann::json m2;
  f2 >> m2;
  CHECK(m2.at("seed") == 5);
}

TEST_CASE("cli: HAN_PRECISION selects the checkpoint element type") {
  testutil::TempDir tmp("cliprec");
  const std::string data = tmp.str() + "/data";
  REQUIRE(cli::run({"synth", "--out-dir", data, "--patients", "60", "--vocab",
                    "20", "--high", "1", "--prevalence", "0.4", "--embed-dim",
                    "8", "--seed", "4"}) == 0);
  const std::vector<std::string> train = {
      "pretrain",      "--corpus",     data + "/corpus.jsonl",
      "--diagnoses",   data + "/diagnoses.csv",
      "--embeddings",  data + "/embeddings.txt",
      "--tasks",       data + "/tasks.csv",
      "--hidden",      "4",
      "--attn-size",   "4",
      "--batch-size",  "8",
      "--max-epochs",  "1",
      "--seed",        "1"};

  const auto run_with_env = [&](const char* value, const std::string& out) {
    if (value) {
      setenv("HAN_PRECISION", value, 1);
    } else {
      unsetenv("HAN_PRECISION");
    }
    auto args = train;
    args.push_back("--out-dir");
    args.push_back(out);
    const int rc = cli::run(args);
    unsetenv("HAN_PRECISION");
    return rc;
  };

  REQUIRE(run_with_env("f32", tmp.str() + "/p32") == 0);
  REQUIRE(run_with_env(nullptr, tmp.str() + "/p64") == 0);
  CHECK(run_with_env("f16", tmp.str() + "/bad") == 1);

  const auto dtype_of = [](const std::string& dir) {
    std::ifstream in(dir + "/checkpoint/manifest.json");
    nlohmann::json j;
    in >> j;
    return j.at("dtype").get<std::string>();
  };
  CHECK(dtype_of(tmp.str() + "/p32") == "f32");
  CHECK(dtype_of(tmp.str() + "/p64") == "f64");
}
