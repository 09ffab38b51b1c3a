#include "han/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "han/csv.hpp"
#include "han/error.hpp"

namespace han::eval {

double auc(const std::vector<double>& scores,
           const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("auc: scores/labels size mismatch");
  }
  if (scores.empty()) throw ValidationError("auc: empty input");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const auto y : labels) n_pos += (y != 0);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("auc: need at least one positive and one negative");
  }
  for (const double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("auc: non-finite score");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average ranks over tie groups, accumulate positive ranks.
  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j, each tied element gets the mean rank.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double mse(const std::vector<double>& probs,
           const std::vector<std::uint8_t>& labels) {
  if (probs.size() != labels.size()) {
    throw ValidationError("mse: probs/labels size mismatch");
  }
  if (probs.empty()) throw ValidationError("mse: empty input");
  double sum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i])) throw ValidationError("mse: non-finite value");
    const double d = probs[i] - static_cast<double>(labels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(probs.size());
}

// ---------------------------------------------------------------- tables --

namespace {

constexpr std::array<const char*, 7> kTableHeader = {
    "phenotype", "icd9", "system", "mtl", "stl_highest", "stl_related",
    "target"};

std::optional<double> parse_cell(const std::string& s,
                                 const std::string& where) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad numeric cell '" + s + "' at " + where);
  }
}

std::string format_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

}  // namespace

MetricTable load_metric_table(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw ParseError("empty metric table: " + path);
  const csv::Row want(kTableHeader.begin(), kTableHeader.end());
  if (rows[0] != want) {
    throw ParseError("bad metric table header in " + path);
  }
  MetricTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = path + " row " + std::to_string(i + 1);
    if (rows[i].size() != 7) {
      throw ParseError("expected 7 fields at " + where);
    }
    MetricRow r;
    r.phenotype = rows[i][0];
    r.icd9 = rows[i][1];
    r.system = rows[i][2];
    for (int m = 0; m < 4; ++m) {
      r.values[m] = parse_cell(rows[i][3 + m], where);
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_metric_table(const MetricTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write metric table: " + path);
  out << "phenotype,icd9,system,mtl,stl_highest,stl_related,target\n";
  for (const auto& r : table.rows) {
    out << csv::join({r.phenotype, r.icd9, r.system, format_cell(r.values[0]),
                      format_cell(r.values[1]), format_cell(r.values[2]),
                      format_cell(r.values[3])})
        << '\n';
  }
  if (!out) throw Error("failed writing metric table: " + path);
}

void resolve_missing(MetricTable& table) {
  for (auto& r : table.rows) {
    if (!r.values[2]) {
      if (!r.values[1]) {
        throw ValidationError("row '" + r.icd9 +
                              "': cannot fill stl_related without stl_highest");
      }
      r.values[2] = r.values[1];
      r.stl_related_filled = true;
    }
    for (int m = 0; m < 4; ++m) {
      if (!r.values[m]) {
        throw ValidationError("row '" + r.icd9 + "': missing value for " +
                              kMethodNames[m]);
      }
    }
  }
}

namespace {

void require_resolved(const MetricTable& table, const char* op) {
  for (const auto& r : table.rows) {
    for (int m = 0; m < 4; ++m) {
      if (!r.values[m]) {
        throw ValidationError(std::string(op) +
                              ": table has missing cells; call "
                              "resolve_missing first (row '" +
                              r.icd9 + "')");
      }
    }
  }
}

}  // namespace

CompareResult compare_methods(const MetricTable& table) {
  require_resolved(table, "compare_methods");
  CompareResult out;
  for (const auto& r : table.rows) {
    auto& sys = out.per_system[r.system];
    const double mtl = *r.values[0];
    for (int m = 1; m < 4; ++m) {
      const double other = *r.values[m];
      WinCount& total = out.total[m - 1];
      WinCount& local = sys[m - 1];
      if (mtl > other) {
        ++total.first;
        ++local.first;
      } else if (other > mtl) {
        ++total.second;
        ++local.second;
      } else {
        ++total.ties;
        ++local.ties;
      }
    }
  }
  return out;
}

TolerableResult tolerable_analysis(const MetricTable& table,
                                   double threshold) {
  require_resolved(table, "tolerable_analysis");
  if (threshold < 0 || threshold > 1) {
    throw ValidationError("tolerable_analysis: threshold must be in [0,1]");
  }
  TolerableResult out;
  out.n_rows = static_cast<int>(table.rows.size());
  for (const auto& r : table.rows) {
    double best_val = *r.values[0];
    for (int m = 1; m < 4; ++m) best_val = std::max(best_val, *r.values[m]);
    auto& sys_best = out.best_per_system[r.system];
    auto& sys_tol = out.tolerable_per_system[r.system];
    for (int m = 0; m < 4; ++m) {
      const bool filled_copy = (m == 2) && r.stl_related_filled;
      const bool is_best = (*r.values[m] == best_val) && !filled_copy;
      if (is_best) {
        ++out.best[m];
        ++sys_best[m];
      } else if (*r.values[m] >= threshold * best_val) {
        ++out.tolerable[m];
        ++sys_tol[m];
      }
    }
  }
  return out;
}

std::map<std::string, std::array<double, 4>> average_by_system(
    const MetricTable& table) {
  require_resolved(table, "average_by_system");
  std::map<std::string, std::array<double, 4>> sums;
  std::map<std::string, int> counts;
  for (const auto& r : table.rows) {
    auto& s = sums[r.system];
    for (int m = 0; m < 4; ++m) s[m] += *r.values[m];
    ++counts[r.system];
  }
  for (auto& [system, s] : sums) {
    for (int m = 0; m < 4; ++m) s[m] /= counts[system];
  }
  return sums;
}

std::map<std::string, int> epoch_efficiency(
    const std::map<std::string, std::vector<double>>& val_losses) {
  std::map<std::string, int> out;
  for (const auto& [method, losses] : val_losses) {
    if (losses.empty()) {
      throw ValidationError("epoch_efficiency: empty curve for " + method);
    }
    int best = 1;
    for (std::size_t i = 1; i < losses.size(); ++i) {
      if (losses[i] < losses[best - 1]) best = static_cast<int>(i) + 1;
    }
    out[method] = best;
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of empty data");
  if (p <= 0) return sorted.front();
  if (p >= 1) return sorted.back();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

FiveNumber five_number(std::vector<double> values) {
  if (values.empty()) throw ValidationError("five_number of empty data");
  std::sort(values.begin(), values.end());
  FiveNumber f;
  f.min = values.front();
  f.q1 = quantile_sorted(values, 0.25);
  f.median = quantile_sorted(values, 0.5);
  f.q3 = quantile_sorted(values, 0.75);
  f.max = values.back();
  return f;
}

void write_boxplot_csv(const MetricTable& table, const std::string& path) {
  require_resolved(table, "write_boxplot_csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write box-plot data: " + path);
  out << "system,method,min,q1,median,q3,max\n";
  std::map<std::string, std::array<std::vector<double>, 4>> groups;
  for (const auto& r : table.rows) {
    for (int m = 0; m < 4; ++m) {
      groups[r.system][m].push_back(*r.values[m]);
      groups["all"][m].push_back(*r.values[m]);
    }
  }
  char buf[160];
  for (const auto& [system, cols] : groups) {
    for (int m = 0; m < 4; ++m) {
      const FiveNumber f = five_number(cols[m]);
      std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                    system.c_str(), kMethodNames[m], f.min, f.q1, f.median,
                    f.q3, f.max);
      out << buf;
    }
  }
  if (!out) throw Error("failed writing box-plot data: " + path);
}

void write_curves_csv(const std::map<std::string, std::vector<double>>& curves,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write curve data: " + path);
  out << "method,epoch,val_loss\n";
  char buf[96];
  for (const auto& [method, losses] : curves) {
    for (std::size_t i = 0; i < losses.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%.17g\n", method.c_str(), i + 1,
                    losses[i]);
      out << buf;
    }
  }
  if (!out) throw Error("failed writing curve data: " + path);
}

}  // namespace han::eval
