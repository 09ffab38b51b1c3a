#include "han/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "han/embed.hpp"
#include "han/error.hpp"
#include "han/rng.hpp"

namespace han::synth {
namespace {

constexpr std::uint64_t kSynthTag = 0x73796e7468ULL;  // stream domain tag

// 2009-01-01T00:00:00Z; arbitrary but fixed so timestamps are reproducible.
constexpr std::int64_t kBaseTime = 1230768000;

std::string fmt_index(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
  return buf;
}

void validate(const SynthSpec& s) {
  if (s.n_patients < 1) throw ValidationError("n_patients must be positive");
  if (s.vocab_size < 10) throw ValidationError("vocab_size must be at least 10");
  if (s.n_high < 0) throw ValidationError("n_high must be non-negative");
  if (s.embed_dim < 1) throw ValidationError("embed_dim must be positive");
  if (!(s.high_prevalence > 0.0 && s.high_prevalence < 1.0))
    throw ValidationError("high_prevalence must lie in (0, 1)");
  for (double v : {s.signal, s.noise, s.error_rate})
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError("signal, noise and error_rate must lie in [0, 1]");
  std::set<std::string> codes;
  for (const auto& t : s.low_tasks) {
    if (t.name.empty() || t.icd9.empty())
      throw ValidationError("low task name and icd9 must be non-empty");
    if (!codes.insert(t.icd9).second)
      throw ValidationError("duplicate low-task code " + t.icd9);
    if (t.n_pos < 1 || t.n_pos > s.n_patients)
      throw ValidationError("low task " + t.name + ": n_pos out of range");
    if (!t.corr.empty() && static_cast<int>(t.corr.size()) != s.n_high)
      throw ValidationError("low task " + t.name +
                            ": corr must have one entry per high task");
    double sum = 0.0;
    for (double c : t.corr) {
      if (c < 0.0) throw ValidationError("corr entries must be non-negative");
      sum += c;
    }
    if (sum > 1.0 + 1e-9)
      throw ValidationError("low task " + t.name + ": corr sums past 1");
    if (t.signal > 1.0)
      throw ValidationError("low task " + t.name + ": signal exceeds 1");
  }
}

// Draws `want` distinct elements from `pool` minus `taken`, in shuffled
// order. Returns how many it could actually supply.
int draw_into(std::vector<int>& dst, std::vector<int> pool,
              const std::unordered_set<int>& taken, int want, Rng& rng) {
  rng.shuffle(pool);
  int got = 0;
  for (int p : pool) {
    if (got == want) break;
    if (taken.count(p)) continue;
    dst.push_back(p);
    ++got;
  }
  return got;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec) {
  validate(spec);
  SynthOutput out;
  const int n_tasks = spec.n_high + static_cast<int>(spec.low_tasks.size());

  // --- tasks and their marker tokens -------------------------------------
  std::vector<std::array<std::string, 2>> markers;
  markers.reserve(n_tasks);
  for (int k = 0; k < spec.n_high; ++k) {
    cohort::PhenotypeTask t;
    t.name = fmt_index("high_", k, 1);
    t.icd9 = fmt_index("900.", k, 1);
    t.organ_system = spec.system_name;
    out.tasks.push_back(t);
    markers.push_back({fmt_index("hmk", k, 1) + "a", fmt_index("hmk", k, 1) + "b"});
  }
  for (std::size_t j = 0; j < spec.low_tasks.size(); ++j) {
    cohort::PhenotypeTask t;
    t.name = spec.low_tasks[j].name;
    t.icd9 = spec.low_tasks[j].icd9;
    t.organ_system = spec.system_name;
    for (const auto& prev : out.tasks)
      if (prev.icd9 == t.icd9)
        throw ValidationError("low-task code collides with a high task: " +
                              t.icd9);
    out.tasks.push_back(t);
    markers.push_back({fmt_index("lmk", static_cast<int>(j), 1) + "a",
                       fmt_index("lmk", static_cast<int>(j), 1) + "b"});
  }

  // --- vocabulary and frozen embeddings -----------------------------------
  for (int w = 0; w < spec.vocab_size; ++w)
    out.vocab.push_back(fmt_index("w", w, 3));
  for (const auto& m : markers) {
    out.vocab.push_back(m[0]);
    out.vocab.push_back(m[1]);
  }
  out.embed_dim = static_cast<std::size_t>(spec.embed_dim);
  Rng embed_rng(mix_seed(spec.seed, kSynthTag, 1));
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.embed_dim));
  out.embeddings.resize(out.vocab.size() * out.embed_dim);
  for (double& v : out.embeddings)
    v = embed_rng.uniform(-scale, scale);

  // --- label assignment (exact positive counts) ---------------------------
  // positive_sets[k] = patient indices positive for task k.
  std::vector<std::vector<int>> positive_sets(n_tasks);
  std::vector<int> everyone(spec.n_patients);
  for (int i = 0; i < spec.n_patients; ++i) everyone[i] = i;

  const int n_high_pos = static_cast<int>(
      std::lround(spec.high_prevalence * spec.n_patients));
  for (int k = 0; k < spec.n_high; ++k) {
    Rng rng(mix_seed(spec.seed, kSynthTag, 2, static_cast<std::uint64_t>(k)));
    std::vector<int> pool = everyone;
    rng.shuffle(pool);
    positive_sets[k].assign(pool.begin(), pool.begin() + n_high_pos);
  }
  for (std::size_t j = 0; j < spec.low_tasks.size(); ++j) {
    const auto& lt = spec.low_tasks[j];
    const int k = spec.n_high + static_cast<int>(j);
    Rng rng(mix_seed(spec.seed, kSynthTag, 3, static_cast<std::uint64_t>(j)));
    std::unordered_set<int> taken;
    auto& dst = positive_sets[k];
    // Correlated share first: draw from each high task's positives.
    for (int h = 0; h < static_cast<int>(lt.corr.size()); ++h) {
      const int want = static_cast<int>(std::floor(lt.corr[h] * lt.n_pos));
      if (want == 0) continue;
      const int got = draw_into(dst, positive_sets[h], taken, want, rng);
      if (got < want)
        throw ValidationError("low task " + lt.name +
                              ": not enough positives in high task " +
                              std::to_string(h) + " to satisfy corr");
      for (auto it = dst.end() - got; it != dst.end(); ++it) taken.insert(*it);
    }
    const int rest = lt.n_pos - static_cast<int>(dst.size());
    if (draw_into(dst, everyone, taken, rest, rng) < rest)
      throw ValidationError("low task " + lt.name +
                            ": population too small for n_pos");
  }

  // Per-patient task membership, and ground-truth bookkeeping.
  std::vector<std::vector<int>> tasks_of(spec.n_patients);
  const int id_width =
      static_cast<int>(std::to_string(spec.n_patients - 1).size());
  auto patient_id = [&](int i) { return fmt_index("p", i, id_width); };
  for (int k = 0; k < n_tasks; ++k) {
    std::sort(positive_sets[k].begin(), positive_sets[k].end());
    auto& truth = out.positives[out.tasks[k].icd9];
    for (int p : positive_sets[k]) {
      tasks_of[p].push_back(k);
      truth.push_back(patient_id(p));
    }
    out.markers[out.tasks[k].icd9] = {markers[k][0], markers[k][1]};
  }
  for (int k = 0; k < n_tasks; ++k)
    for (int p : positive_sets[k])
      out.diagnoses.emplace_back(patient_id(p), out.tasks[k].icd9);
  std::sort(out.diagnoses.begin(), out.diagnoses.end());

  // --- note text -----------------------------------------------------------
  auto marker_rate = [&](int k) {
    if (k < spec.n_high) return spec.signal;
    const double s = spec.low_tasks[static_cast<std::size_t>(k - spec.n_high)].signal;
    return s < 0.0 ? spec.signal : s;
  };

  out.patients.reserve(static_cast<std::size_t>(spec.n_patients));
  for (int i = 0; i < spec.n_patients; ++i) {
    Rng rng(mix_seed(spec.seed, kSynthTag, 4, static_cast<std::uint64_t>(i)));
    corpus::RawPatient pat;
    pat.patient_id = patient_id(i);
    pat.age = 18 + static_cast<int>(rng.below(72));

    auto sentence = [&](bool garbage) {
      const int n_bg = 4 + static_cast<int>(rng.below(5));
      std::vector<std::string> toks;
      for (int t = 0; t < n_bg; ++t)
        toks.push_back(out.vocab[rng.below(static_cast<std::uint64_t>(
            spec.vocab_size))]);
      if (!garbage) {
        for (int k : tasks_of[i])
          if (rng.uniform01() < marker_rate(k))
            toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(
                            rng.below(toks.size() + 1)),
                        markers[static_cast<std::size_t>(k)][rng.below(2)]);
      }
      if (n_tasks > 0 && rng.uniform01() < spec.noise)
        toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(
                        rng.below(toks.size() + 1)),
                    markers[rng.below(static_cast<std::uint64_t>(n_tasks))]
                           [rng.below(2)]);
      std::string s;
      for (std::size_t t = 0; t < toks.size(); ++t) {
        if (t) s += ' ';
        s += toks[t];
      }
      return s;
    };

    const int n_bursts = 1 + static_cast<int>(rng.below(3));
    int note_no = 0;
    for (int b = 0; b < n_bursts; ++b) {
      // Anchors two hours apart with jitter; extras at most 50 minutes after
      // their anchor, so a one-hour merge interval reassembles the bursts.
      const std::int64_t anchor =
          kBaseTime + 7200LL * b + static_cast<std::int64_t>(rng.below(1800));
      const int n_notes = 1 + static_cast<int>(rng.below(2));
      for (int n = 0; n < n_notes; ++n) {
        corpus::RawNote note;
        note.note_id = pat.patient_id + "-n" + std::to_string(note_no++);
        note.charttime =
            n == 0 ? anchor
                   : anchor + 60LL * (1 + static_cast<std::int64_t>(rng.below(50)));
        note.is_error =
            !pat.notes.empty() && rng.uniform01() < spec.error_rate;
        const int n_sent = 2 + static_cast<int>(rng.below(4));
        std::string text;
        for (int sidx = 0; sidx < n_sent; ++sidx) {
          if (sidx) text += '\n';
          text += sentence(note.is_error);
        }
        note.text = std::move(text);
        pat.notes.push_back(std::move(note));
      }
    }
    rng.shuffle(pat.notes);  // loaders must not rely on chronological input
    out.patients.push_back(std::move(pat));
  }
  return out;
}

void write_output(const SynthOutput& out, const std::string& dir) {
  corpus::write_corpus(out.patients, dir + "/corpus.jsonl");
  cohort::write_diagnoses(out.diagnoses, dir + "/diagnoses.csv");
  cohort::write_tasks(out.tasks, dir + "/tasks.csv");
  embed::write_embeddings(out.vocab, out.embeddings, out.embed_dim,
                          dir + "/embeddings.txt");
}

}  // namespace han::synth
