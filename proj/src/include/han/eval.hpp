#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace han::eval {

// Probability that a random positive outranks a random negative, ties
// counted half (Mann-Whitney, computed via average ranks). Throws
// ValidationError on empty input, size mismatch, or a single-class label
// vector.
double auc(const std::vector<double>& scores,
           const std::vector<std::uint8_t>& labels);

// Mean squared error between probabilities and binary labels.
double mse(const std::vector<double>& probs,
           const std::vector<std::uint8_t>& labels);

// ------------------------------------------------------- method tables ---

inline constexpr std::array<const char*, 4> kMethodNames = {
    "mtl", "stl_highest", "stl_related", "target"};

// One row of a per-phenotype metric table (AUC in the shipped benchmark
// fixture; the same shape carries MSE tables). A missing stl_related cell
// means the phenotype's most-related task already was the system's highest
// one, so the stl_highest model doubles as the related model.
struct MetricRow {
  std::string phenotype;
  std::string icd9;
  std::string system;
  std::array<std::optional<double>, 4> values;  // indexed like kMethodNames
  bool stl_related_filled = false;
};

struct MetricTable {
  std::vector<MetricRow> rows;
};

// CSV with header "phenotype,icd9,system,mtl,stl_highest,stl_related,target";
// empty cells are missing values.
MetricTable load_metric_table(const std::string& path);
void write_metric_table(const MetricTable& table, const std::string& path);

// Fills each missing stl_related cell from the row's stl_highest value and
// marks it. After this every cell is present. Missing values in any other
// column throw ValidationError.
void resolve_missing(MetricTable& table);

// ---------------------------------------------------------- comparisons --

struct WinCount {
  int first = 0;   // rows where the first method is strictly higher
  int second = 0;  // rows where the second is strictly higher
  int ties = 0;
};

// MTL versus each baseline, overall and per organ system. Requires a
// resolved table. Pair order matches kMethodNames[1..3].
struct CompareResult {
  std::array<WinCount, 3> total;
  std::map<std::string, std::array<WinCount, 3>> per_system;
};
CompareResult compare_methods(const MetricTable& table);

// Best/tolerable bookkeeping per method. A method is best on a row when its
// cell equals the row maximum and is not a filled copy (a filled cell is the
// same model as stl_highest, which already takes the credit). Every method
// tied at the maximum counts. A non-best method is tolerable when its value
// reaches `threshold` times the row maximum (inclusive).
struct TolerableResult {
  std::array<int, 4> best{};
  std::array<int, 4> tolerable{};
  std::map<std::string, std::array<int, 4>> best_per_system;
  std::map<std::string, std::array<int, 4>> tolerable_per_system;
  int n_rows = 0;
};
TolerableResult tolerable_analysis(const MetricTable& table,
                                   double threshold = 0.90);

// Per-system unweighted mean of each method's column (used for MSE tables).
std::map<std::string, std::array<double, 4>> average_by_system(
    const MetricTable& table);

// ------------------------------------------------------------- epochs ----

// method -> 1-based index of the first minimum of its validation-loss
// curve.
std::map<std::string, int> epoch_efficiency(
    const std::map<std::string, std::vector<double>>& val_losses);

// ---------------------------------------------------------- plot data ----

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear-interpolation quantile on sorted data (the common "type 7" rule:
// position p*(n-1)).
double quantile_sorted(const std::vector<double>& sorted, double p);
FiveNumber five_number(std::vector<double> values);

// Box-plot summary CSV: system,method,min,q1,median,q3,max per system x
// method (plus an "all" system row group). Requires a resolved table.
void write_boxplot_csv(const MetricTable& table, const std::string& path);

// Raw per-epoch curves: method,epoch,val_loss.
void write_curves_csv(const std::map<std::string, std::vector<double>>& curves,
                      const std::string& path);

}  // namespace han::eval
