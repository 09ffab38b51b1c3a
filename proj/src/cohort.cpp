#include "han/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "han/csv.hpp"
#include "han/error.hpp"
#include "han/rng.hpp"

namespace han::cohort {

namespace {

constexpr std::uint64_t kSplitTag = 0x73706c6974ULL;  // stream tag for splits

void expect_header(const csv::Row& row, const std::vector<std::string>& want,
                   const std::string& path) {
  if (row != want) {
    std::string w;
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (i) w += ',';
      w += want[i];
    }
    throw ParseError("bad header in " + path + " (want '" + w + "')");
  }
}

}  // namespace

std::size_t DiagnosisTable::count(const std::string& code) const {
  std::size_t n = 0;
  for (const auto& [patient, codes] : by_patient) n += codes.count(code);
  return n;
}

std::map<std::string, std::size_t> DiagnosisTable::counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [patient, codes] : by_patient) {
    for (const auto& c : codes) ++out[c];
  }
  return out;
}

DiagnosisTable load_diagnoses(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError("empty diagnosis file: " + path);
  expect_header(rows[0], {"patient_id", "icd9"}, path);
  DiagnosisTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) {
      throw ParseError("expected 2 fields at " + path + " row " +
                       std::to_string(i + 1));
    }
    if (rows[i][0].empty() || rows[i][1].empty()) {
      throw ParseError("empty field at " + path + " row " +
                       std::to_string(i + 1));
    }
    table.by_patient[rows[i][0]].insert(rows[i][1]);
  }
  return table;
}

void write_diagnoses(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write diagnosis file: " + path);
  out << "patient_id,icd9\n";
  for (const auto& [p, c] : pairs) {
    out << csv::join({p, c}) << '\n';
  }
  if (!out) throw Error("failed writing diagnosis file: " + path);
}

std::vector<PhenotypeTask> load_tasks(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError("empty task file: " + path);
  expect_header(rows[0], {"name", "icd9", "organ_system"}, path);
  std::vector<PhenotypeTask> tasks;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) {
      throw ParseError("expected 3 fields at " + path + " row " +
                       std::to_string(i + 1));
    }
    if (!seen.insert(rows[i][1]).second) {
      throw ValidationError("duplicate task code '" + rows[i][1] + "' in " +
                            path);
    }
    tasks.push_back({rows[i][0], rows[i][1], rows[i][2]});
  }
  return tasks;
}

void write_tasks(const std::vector<PhenotypeTask>& tasks,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write task file: " + path);
  out << "name,icd9,organ_system\n";
  for (const auto& t : tasks) {
    out << csv::join({t.name, t.icd9, t.organ_system}) << '\n';
  }
  if (!out) throw Error("failed writing task file: " + path);
}

std::size_t LabelMatrix::positives(std::size_t t) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < patients.size(); ++p) n += at(p, t);
  return n;
}

LabelMatrix derive_labels(const DiagnosisTable& diag,
                          const std::vector<std::string>& patient_order,
                          const std::vector<std::string>& task_codes) {
  LabelMatrix m;
  m.patients = patient_order;
  m.tasks = task_codes;
  m.y.assign(patient_order.size() * task_codes.size(), 0);
  for (std::size_t p = 0; p < patient_order.size(); ++p) {
    const auto it = diag.by_patient.find(patient_order[p]);
    if (it == diag.by_patient.end()) continue;
    for (std::size_t t = 0; t < task_codes.size(); ++t) {
      if (it->second.count(task_codes[t])) m.y[p * task_codes.size() + t] = 1;
    }
  }
  return m;
}

std::int64_t pos_weight(std::int64_t n_pos, std::int64_t total) {
  if (n_pos <= 0) throw ValidationError("pos_weight: n_pos must be positive");
  if (total < n_pos) {
    throw ValidationError("pos_weight: total smaller than n_pos");
  }
  // round-half-away-from-zero(total / n_pos / 2) for positive operands
  return (total + n_pos) / (2 * n_pos);
}

std::map<std::string, SystemTiers> prevalence_tiers(
    const DiagnosisTable& diag,
    const std::map<std::string, std::string>& code_to_system, std::size_t low,
    std::size_t high, std::size_t top_k) {
  if (low > high) throw ValidationError("prevalence tiers: low > high");
  const auto counts = diag.counts();

  struct Entry {
    std::string code;
    std::size_t count;
  };
  std::map<std::string, std::vector<Entry>> by_system;
  for (const auto& [code, system] : code_to_system) {
    const auto it = counts.find(code);
    if (it == counts.end() || it->second == 0) continue;
    by_system[system].push_back({code, it->second});
  }

  std::map<std::string, SystemTiers> out;
  for (auto& [system, entries] : by_system) {
    if (entries.size() < top_k) {
      throw ValidationError("organ system '" + system + "' has only " +
                            std::to_string(entries.size()) +
                            " represented codes; need at least " +
                            std::to_string(top_k));
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.code < b.code;
    });
    SystemTiers tiers;
    for (std::size_t i = 0; i < top_k; ++i) tiers.high.push_back(entries[i].code);
    for (std::size_t i = top_k; i < entries.size(); ++i) {
      if (entries[i].count >= low && entries[i].count <= high) {
        tiers.low.push_back(entries[i].code);
      }
    }
    out[system] = std::move(tiers);
  }
  return out;
}

CohortSplit split(const std::vector<std::string>& patient_ids, double r_train,
                  double r_val, double r_test, std::uint64_t seed) {
  if (patient_ids.empty()) throw ValidationError("split: no patients");
  const double ratios[3] = {r_train, r_val, r_test};
  double sum = 0;
  for (const double r : ratios) {
    if (r < 0) throw ValidationError("split: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split: ratios must sum to 1");
  }

  std::vector<std::string> ids = patient_ids;
  Rng rng(mix_seed(seed, kSplitTag));
  rng.shuffle(ids);

  // Largest-remainder apportionment; earlier subsets win remainder ties.
  const std::size_t n = ids.size();
  std::size_t sizes[3];
  double fracs[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(exact);
    fracs[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::size_t leftover = n - assigned;
  while (leftover > 0) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (fracs[i] > fracs[best]) best = i;
    }
    sizes[best] += 1;
    fracs[best] = -1;
    --leftover;
  }

  CohortSplit out;
  out.seed = seed;
  auto it = ids.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.val.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, it + sizes[2]);
  return out;
}

}  // namespace han::cohort
