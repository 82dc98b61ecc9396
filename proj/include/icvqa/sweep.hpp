#pragma once

// Batches of runs written to a result-set directory:
//
//   <out>/manifest.json            specs in input order with their status
//   <out>/runs/<hash>.json         RunResult (written last, marks completion)
//   <out>/runs/<hash>.trace.jsonl  one EvaluationRecord per line
//   <out>/runs/<hash>.error.json   present when the run threw
//
// A run whose result file already parses is skipped on the next sweep.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "icvqa/harness.hpp"

namespace icvqa {

namespace fs = std::filesystem;

// Writes through a sibling temporary file and a rename, so readers never see
// a partial file.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path());
  std::ostringstream tag;
  tag << std::this_thread::get_id();
  const fs::path tmp = path.string() + ".tmp." + tag.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunPaths {
  fs::path result;
  fs::path trace;
  fs::path error;
};

inline RunPaths run_paths(const fs::path& out_dir, const std::string& hash) {
  const fs::path runs = out_dir / "runs";
  return {runs / (hash + ".json"), runs / (hash + ".trace.jsonl"), runs / (hash + ".error.json")};
}

inline bool run_completed(const RunPaths& paths) {
  if (!fs::exists(paths.result) || !fs::exists(paths.trace)) return false;
  try {
    (void)nlohmann::json::parse(read_file(paths.result)).get<RunResult>();
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline void write_run(const fs::path& out_dir, const RunResult& r) {
  const auto paths = run_paths(out_dir, r.spec.content_hash());
  write_file_atomic(paths.trace, trace_jsonl(r.trace.records));
  write_file_atomic(paths.result, nlohmann::json(r).dump(1));
  std::error_code ec;
  fs::remove(paths.error, ec);
}

enum class RunStatus { completed, skipped, failed };

struct SweepEntry {
  std::string hash;
  RunSpec spec;
  RunStatus status = RunStatus::failed;
  std::string error;
};

struct SweepSummary {
  fs::path out_dir;
  std::vector<SweepEntry> entries;  // input order, duplicates removed

  std::size_t count(RunStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [s](const SweepEntry& e) { return e.status == s; }));
  }
  bool any_failed() const { return count(RunStatus::failed) > 0; }
};

// Manifest content depends only on the specs and their outcome, never on
// timings or on whether a run was computed now or earlier.
inline nlohmann::json manifest_json(const SweepSummary& s) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& e : s.entries) {
    nlohmann::json row = {{"hash", e.hash},
                          {"spec", e.spec},
                          {"status", e.status == RunStatus::failed ? "failed" : "completed"}};
    if (e.status == RunStatus::failed) row["error"] = e.error;
    runs.push_back(std::move(row));
  }
  return {{"format", "icvqa-result-set"}, {"version", 1}, {"runs", std::move(runs)}};
}

struct SweepOptions {
  fs::path out_dir = "out";
  unsigned parallelism = 1;
  // Called after each run finishes; calls are serialized.
  std::function<void(const SweepEntry&, std::size_t done, std::size_t total)> progress;
};

inline SweepSummary sweep(const std::vector<RunSpec>& specs, const SweepOptions& options) {
  SweepSummary summary;
  summary.out_dir = options.out_dir;
  std::set<std::string> seen;
  for (const auto& spec : specs) {
    auto hash = spec.content_hash();
    if (seen.insert(hash).second) summary.entries.push_back({std::move(hash), spec, RunStatus::failed, {}});
  }
  fs::create_directories(options.out_dir / "runs");

  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < summary.entries.size();) {
      auto& e = summary.entries[i];
      const auto paths = run_paths(options.out_dir, e.hash);
      if (run_completed(paths)) {
        e.status = RunStatus::skipped;
      } else {
        try {
          e.spec.validate();
          write_run(options.out_dir, run_single(e.spec));
          e.status = RunStatus::completed;
        } catch (const std::exception& ex) {
          e.status = RunStatus::failed;
          e.error = ex.what();
          try {
            write_file_atomic(paths.error, nlohmann::json{{"spec", e.spec}, {"error", e.error}}.dump(1));
          } catch (const std::exception&) {
          }
        }
      }
      std::lock_guard lock(progress_mutex);
      ++done;
      if (options.progress) options.progress(e, done, summary.entries.size());
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(options.parallelism, static_cast<unsigned>(summary.entries.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  write_file_atomic(options.out_dir / "manifest.json", manifest_json(summary).dump(1));
  return summary;
}

// ---- profiles ----------------------------------------------------------------

struct ProfileShape {
  std::vector<int> sizes;
  int vqe_instances = 0;
  int qaoa_instances = 0;
  std::vector<int> qaoa_depths;
  std::vector<Method> methods;
};

inline ProfileShape profile_shape(const std::string& name) {
  const std::vector<Method> methods = {Method::penalty_energy, Method::ic_energy, Method::ic_energy_bounded};
  if (name == "desk") return {{6, 8, 10}, 10, 5, {1, 3}, methods};
  if (name == "paper") return {{6, 8, 10, 12, 14, 16}, 20, 10, {1, 2, 3, 4, 5}, methods};
  throw ParameterError("unknown profile '" + name + "' (expected desk or paper)");
}

// Instance k of (class, n) gets the same instance and parameter seeds for
// every method and ansatz, so the methods are compared on identical inputs.
inline std::vector<RunSpec> profile_specs(const std::string& name, std::uint64_t seed) {
  const auto shape = profile_shape(name);
  std::vector<RunSpec> specs;
  for (ProblemClass cls : kAllProblemClasses) {
    for (int n : shape.sizes) {
      auto seeds_for = [&](int k) {
        const std::string tag = to_string(cls) + "/" + std::to_string(n) + "/" + std::to_string(k);
        return std::pair{derive_seed(seed, "instance/" + tag), derive_seed(seed, "params/" + tag)};
      };
      for (Method m : shape.methods) {
        for (int k = 0; k < shape.vqe_instances; ++k) {
          RunSpec s;
          s.problem_class = cls;
          s.n_vars = n;
          s.algorithm = Algorithm::vqe;
          s.method = m;
          std::tie(s.instance_seed, s.param_seed) = seeds_for(k);
          specs.push_back(s);
        }
        for (int depth : shape.qaoa_depths) {
          for (int k = 0; k < shape.qaoa_instances; ++k) {
            RunSpec s;
            s.problem_class = cls;
            s.n_vars = n;
            s.algorithm = Algorithm::qaoa;
            s.qaoa_depth = depth;
            s.method = m;
            std::tie(s.instance_seed, s.param_seed) = seeds_for(k);
            specs.push_back(s);
          }
        }
      }
    }
  }
  return specs;
}

// A spec-list file is a JSON array of RunSpec objects, or {"runs": [...]}
// as found in a manifest.
inline std::vector<RunSpec> parse_spec_list(const nlohmann::json& j) {
  const auto& arr = j.is_object() ? j.at("runs") : j;
  std::vector<RunSpec> specs;
  for (const auto& item : arr) {
    specs.push_back((item.contains("spec") ? item.at("spec") : item).get<RunSpec>());
  }
  return specs;
}

}  // namespace icvqa
