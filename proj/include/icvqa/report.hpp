#pragma once

// Aggregation of a result set into CSV tables:
//
//   summary.csv    five-number summary of final metrics per group
//   quartiles.csv  25/50/75 % curves of per-evaluation metrics per group
//   modal.csv      fraction of runs whose final state has an optimum as mode
//
// Iterations are evaluation indices starting at 1. A trace shorter than the
// longest in its group is padded with its best record.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "icvqa/harness.hpp"
#include "icvqa/sweep.hpp"

namespace icvqa {

inline const std::vector<std::string>& default_group_by() {
  static const std::vector<std::string> fields = {"problem_class", "algorithm", "method", "n_vars", "qaoa_depth"};
  return fields;
}

inline const std::vector<std::string>& groupable_fields() {
  static const std::vector<std::string> fields = {
      "problem_class", "algorithm", "method",  "n_vars", "qaoa_depth",          "twolocal_reps", "pic_bound",
      "penalty_lambda", "max_evals", "shots", "partition_objective", "qaoa_phase", "rho_begin", "rho_end"};
  return fields;
}

// Linear interpolation between order statistics (the "type 7" definition).
// NaN inputs are ignored; returns NaN when nothing is left.
inline double quantile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct FiveNumber {
  std::size_t count = 0;  // non-NaN values
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline FiveNumber five_number(const std::vector<double>& values) {
  FiveNumber f;
  f.count = static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return !std::isnan(v); }));
  f.min = quantile(values, 0.0);
  f.q1 = quantile(values, 0.25);
  f.median = quantile(values, 0.5);
  f.q3 = quantile(values, 0.75);
  f.max = quantile(values, 1.0);
  return f;
}

struct LoadedRun {
  RunResult result;
  std::vector<EvaluationRecord> records;
};

// A group key is the rendered value of each group-by field. Fields that do
// not apply to a spec (qaoa_depth for VQE runs) render as "-".
using GroupKey = std::vector<std::string>;

inline GroupKey group_key(const RunSpec& spec, const std::vector<std::string>& fields) {
  const nlohmann::json j = spec;
  GroupKey key;
  for (const auto& f : fields) {
    if (!j.contains(f)) {
      key.emplace_back("-");
    } else if (j.at(f).is_string()) {
      key.push_back(j.at(f).get<std::string>());
    } else {
      key.push_back(j.at(f).dump());
    }
  }
  return key;
}

struct ReportGroup {
  std::vector<LoadedRun> runs;
  std::size_t failed = 0;  // manifest entries without a usable result
};

namespace detail {

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : nlohmann::json(v).dump(); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += csv_field(cells[i]);
  }
  return line + '\n';
}

inline double metric_of(const EvaluationRecord& r, const std::string& metric) {
  if (metric == "approximation_ratio") return r.approximation_ratio;
  if (metric == "optimal_mass_fraction") return r.optimal_mass_fraction;
  if (metric == "in_constraint_probability") return r.in_constraint_probability;
  if (metric == "in_constraint_energy") return r.in_constraint_energy;
  if (metric == "energy") return r.energy;
  throw ParameterError("unknown metric " + metric);
}

}  // namespace detail

inline const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> m = {"approximation_ratio", "in_constraint_probability",
                                             "optimal_mass_fraction", "in_constraint_energy"};
  return m;
}

inline const std::vector<std::string>& curve_metrics() {
  static const std::vector<std::string> m = {"approximation_ratio", "optimal_mass_fraction",
                                             "in_constraint_probability"};
  return m;
}

// Groups the runs listed in the manifest. Specs are read from the manifest
// so that failed runs still produce a (warning) group.
inline std::map<GroupKey, ReportGroup> load_groups(const fs::path& result_set,
                                                   const std::vector<std::string>& group_by) {
  for (const auto& f : group_by) {
    if (std::find(groupable_fields().begin(), groupable_fields().end(), f) == groupable_fields().end()) {
      throw ParameterError("cannot group by '" + f + "'");
    }
  }
  const auto manifest_path = result_set / "manifest.json";
  if (!fs::exists(manifest_path)) throw std::runtime_error("no manifest.json in " + result_set.string());
  const auto specs = parse_spec_list(nlohmann::json::parse(read_file(manifest_path)));

  std::map<GroupKey, ReportGroup> groups;
  for (const auto& spec : specs) {
    auto& g = groups[group_key(spec, group_by)];
    const auto paths = run_paths(result_set, spec.content_hash());
    try {
      LoadedRun run;
      run.result = nlohmann::json::parse(read_file(paths.result)).get<RunResult>();
      std::ifstream in(paths.trace);
      if (!in) throw std::runtime_error("missing trace");
      run.records = parse_trace_jsonl(in);
      g.runs.push_back(std::move(run));
    } catch (const std::exception&) {
      ++g.failed;
    }
  }
  return groups;
}

struct ReportFiles {
  fs::path summary;
  fs::path quartiles;
  fs::path modal;
  std::size_t groups = 0;
  std::size_t empty_groups = 0;
};

inline ReportFiles report(const fs::path& result_set, const std::vector<std::string>& group_by = default_group_by(),
                          const fs::path& out_dir = {}) {
  const auto groups = load_groups(result_set, group_by);
  const fs::path dest = out_dir.empty() ? result_set : out_dir;

  std::string summary, quartiles, modal;
  {
    auto header = group_by;
    for (const char* c : {"metric", "runs", "min", "q1", "median", "q3", "max", "warning"}) header.emplace_back(c);
    summary = detail::csv_row(header);
  }
  {
    auto header = group_by;
    for (const char* c : {"metric", "iteration", "q25", "q50", "q75"}) header.emplace_back(c);
    quartiles = detail::csv_row(header);
  }
  {
    auto header = group_by;
    for (const char* c : {"runs", "failed", "modal_fraction", "bound_violation_fraction", "warning"}) {
      header.emplace_back(c);
    }
    modal = detail::csv_row(header);
  }

  ReportFiles files;
  for (const auto& [key, g] : groups) {
    ++files.groups;
    if (g.runs.empty()) {
      ++files.empty_groups;
      auto row = key;
      row.insert(row.end(), {"", "0", "", "", "", "", "", "no completed runs"});
      summary += detail::csv_row(row);
      row = key;
      row.insert(row.end(), {"0", std::to_string(g.failed), "", "", "no completed runs"});
      modal += detail::csv_row(row);
      continue;
    }

    for (const auto& metric : summary_metrics()) {
      std::vector<double> finals;
      for (const auto& run : g.runs) finals.push_back(detail::metric_of(run.result.final, metric));
      const auto f = five_number(finals);
      auto row = key;
      row.insert(row.end(), {metric, std::to_string(f.count), detail::csv_number(f.min), detail::csv_number(f.q1),
                             detail::csv_number(f.median), detail::csv_number(f.q3), detail::csv_number(f.max),
                             ""});
      summary += detail::csv_row(row);
    }

    std::size_t length = 0;
    for (const auto& run : g.runs) length = std::max(length, run.records.size());
    for (const auto& metric : curve_metrics()) {
      for (std::size_t it = 0; it < length; ++it) {
        std::vector<double> values;
        for (const auto& run : g.runs) {
          const auto& rec = it < run.records.size() ? run.records[it]
                            : run.result.trace.best_iteration < run.records.size()
                                ? run.records[run.result.trace.best_iteration]
                                : run.result.final;
          values.push_back(detail::metric_of(rec, metric));
        }
        auto row = key;
        row.insert(row.end(), {metric, std::to_string(it + 1), detail::csv_number(quantile(values, 0.25)),
                               detail::csv_number(quantile(values, 0.5)), detail::csv_number(quantile(values, 0.75))});
        quartiles += detail::csv_row(row);
      }
    }

    std::size_t modal_count = 0, violated = 0;
    for (const auto& run : g.runs) {
      modal_count += run.result.final.optimum_modal ? 1 : 0;
      violated += run.result.trace.bound_violated ? 1 : 0;
    }
    const double total = static_cast<double>(g.runs.size());
    auto row = key;
    row.insert(row.end(), {std::to_string(g.runs.size()), std::to_string(g.failed),
                           detail::csv_number(modal_count / total), detail::csv_number(violated / total), ""});
    modal += detail::csv_row(row);
  }

  files.summary = dest / "summary.csv";
  files.quartiles = dest / "quartiles.csv";
  files.modal = dest / "modal.csv";
  write_file_atomic(files.summary, summary);
  write_file_atomic(files.quartiles, quartiles);
  write_file_atomic(files.modal, modal);
  return files;
}

}  // namespace icvqa
