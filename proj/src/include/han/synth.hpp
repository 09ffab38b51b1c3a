#pragma once

// Synthetic clinical-note benchmark generator. Labels drive the text: a
// patient positive for a task emits that task's marker tokens in a known
// fraction of sentences, so a trivial keyword count separates the classes
// and an encoder has a learnable planted signal. Low-prevalence tasks can be
// correlated with high-prevalence ones to create transfer structure.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "han/cohort.hpp"
#include "han/corpus.hpp"

namespace han::synth {

struct LowTaskSpec {
  std::string name;
  std::string icd9;
  int n_pos = 50;           // exact positive count
  double signal = -1;       // marker rate in positives' sentences; <0 uses
                            // SynthSpec.signal
  std::vector<double> corr; // share of positives drawn from each high task's
                            // positives; empty means uncorrelated
};

struct SynthSpec {
  int n_patients = 2000;
  int vocab_size = 200;  // background tokens
  int n_high = 5;
  double high_prevalence = 0.3;
  double signal = 0.6;       // per-sentence marker probability in positives
  double noise = 0.01;       // per-sentence stray-marker probability
  double error_rate = 0.05;  // chance a non-leading note is a chart error
  int embed_dim = 50;
  std::uint64_t seed = 0;
  std::string system_name = "synth";
  std::vector<LowTaskSpec> low_tasks;
};

struct SynthOutput {
  std::vector<corpus::RawPatient> patients;
  std::vector<std::pair<std::string, std::string>> diagnoses;
  std::vector<cohort::PhenotypeTask> tasks;  // high tasks first, then low
  std::vector<std::string> vocab;
  std::vector<double> embeddings;  // vocab x embed_dim
  std::size_t embed_dim = 0;
  // task code -> marker tokens / positive patient ids (generation ground
  // truth, handy for oracles).
  std::map<std::string, std::vector<std::string>> markers;
  std::map<std::string, std::vector<std::string>> positives;
};

// Deterministic for a fixed spec (same seed => byte-identical files).
// Throws ValidationError on infeasible prevalences or correlations.
SynthOutput generate(const SynthSpec& spec);

// Writes corpus.jsonl, diagnoses.csv, tasks.csv, embeddings.txt into dir.
void write_output(const SynthOutput& out, const std::string& dir);

}  // namespace han::synth
