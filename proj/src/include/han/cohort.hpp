#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace han::cohort {

// patient_id -> set of diagnosis codes (exact strings; "584.9" and "584.90"
// are distinct phenotypes).
struct DiagnosisTable {
  std::unordered_map<std::string, std::unordered_set<std::string>> by_patient;

  bool has(const std::string& patient, const std::string& code) const {
    const auto it = by_patient.find(patient);
    return it != by_patient.end() && it->second.count(code) != 0;
  }

  // Number of patients carrying `code`.
  std::size_t count(const std::string& code) const;

  // code -> number of patients, over all codes present.
  std::map<std::string, std::size_t> counts() const;
};

// CSV with header "patient_id,icd9"; duplicate pairs collapse.
DiagnosisTable load_diagnoses(const std::string& path);
void write_diagnoses(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& path);

struct PhenotypeTask {
  std::string name;
  std::string icd9;
  std::string organ_system;
};

// CSV with header "name,icd9,organ_system".
std::vector<PhenotypeTask> load_tasks(const std::string& path);
void write_tasks(const std::vector<PhenotypeTask>& tasks,
                 const std::string& path);

// Binary labels for patients (rows, in the given order) x tasks (columns).
struct LabelMatrix {
  std::vector<std::string> patients;
  std::vector<std::string> tasks;  // diagnosis codes
  std::vector<std::uint8_t> y;     // patients.size() x tasks.size(), row-major

  std::uint8_t at(std::size_t p, std::size_t t) const {
    return y[p * tasks.size() + t];
  }
  std::size_t positives(std::size_t t) const;
};

// A patient is positive for a task iff the exact code appears among their
// diagnoses; everyone else (including patients absent from the table) is
// negative.
LabelMatrix derive_labels(const DiagnosisTable& diag,
                          const std::vector<std::string>& patient_order,
                          const std::vector<std::string>& task_codes);

// Positive-class weight: total / n_pos / 2, rounded half away from zero,
// computed exactly in integer arithmetic.
std::int64_t pos_weight(std::int64_t n_pos, std::int64_t total);

struct SystemTiers {
  std::vector<std::string> high;  // top_k codes by count desc, code asc
  std::vector<std::string> low;   // counts within [low, high], same order
};

// Buckets each organ system's codes by prevalence. `code_to_system` scopes
// which codes participate; codes with zero patients are ignored. Throws
// ValidationError when a system has fewer than top_k represented codes.
std::map<std::string, SystemTiers> prevalence_tiers(
    const DiagnosisTable& diag,
    const std::map<std::string, std::string>& code_to_system,
    std::size_t low = 50, std::size_t high = 550, std::size_t top_k = 5);

struct CohortSplit {
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;
};

// Seeded uniform shuffle then contiguous slices. Subset sizes follow the
// largest-remainder rule, so each is within 1 of its exact proportion and
// they always sum to the input size.
CohortSplit split(const std::vector<std::string>& patient_ids, double r_train,
                  double r_val, double r_test, std::uint64_t seed);

}  // namespace han::cohort
