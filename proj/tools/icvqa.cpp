// Command-line front end: generate, run, grid, sweep, report.

#include <cstdint>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icvqa.hpp"

namespace fs = std::filesystem;
using namespace icvqa;

namespace {

template <class E>
std::map<std::string, E> enum_map(std::initializer_list<E> values) {
  std::map<std::string, E> m;
  for (E v : values) m[nlohmann::json(v).get<std::string>()] = v;
  return m;
}

// Accepts the JSON names of an enum and lists only those in --help.
template <class E>
CLI::Validator choice(std::initializer_list<E> values) {
  const auto m = enum_map(values);
  std::string names;
  for (const auto& [name, v] : m) names += (names.empty() ? "" : "|") + name;
  return CLI::CheckedTransformer(m).description(names);
}

// Flags that mirror RunSpec fields. Values given on the command line override
// a --spec file; the rest of the spec comes from the file or the defaults.
struct SpecFlags {
  RunSpec spec;
  std::string spec_file;
  std::string lambda = "auto";
  std::string shots = "exact";
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--spec", spec_file, "RunSpec JSON file")->check(CLI::ExistingFile);
    app->add_option("--problem", spec.problem_class, "problem class")
        ->transform(choice({ProblemClass::max_clique, ProblemClass::min_vertex_cover, ProblemClass::max_bisection,
                      ProblemClass::graph_partition, ProblemClass::portfolio}));
    app->add_option("-n,--n-vars", spec.n_vars, "number of binary variables (qubits)");
    app->add_option("--algorithm", spec.algorithm, "vqe or qaoa")
        ->transform(choice({Algorithm::vqe, Algorithm::qaoa}));
    app->add_option("--depth", spec.qaoa_depth, "QAOA depth p");
    app->add_option("--reps", spec.twolocal_reps, "TwoLocal entangling repetitions");
    app->add_option("--method", spec.method, "optimizer objective")
        ->transform(choice({Method::penalty_energy, Method::ic_energy, Method::ic_energy_bounded}));
    app->add_option("--pic-bound", spec.pic_bound, "lower bound on the in-constraint probability");
    app->add_option("--lambda", lambda, "penalty coefficient or 'auto'");
    app->add_option("--max-evals", spec.max_evals, "objective evaluation budget");
    app->add_option("--seed", seed, "default for both --instance-seed and --param-seed");
    app->add_option("--instance-seed", spec.instance_seed);
    app->add_option("--param-seed", spec.param_seed);
    app->add_option("--shots", shots, "shot count or 'exact'");
    app->add_option("--partition-objective", spec.partition_objective, "cut or same_side")
        ->transform(choice({PartitionObjective::cut, PartitionObjective::same_side}));
    app->add_option("--qaoa-phase", spec.qaoa_phase, "diagonal used by the phase separator")
        ->transform(choice({QaoaPhase::penalized, QaoaPhase::plain}));
    app->add_option("--rho-begin", spec.rho_begin);
    app->add_option("--rho-end", spec.rho_end);
  }

  RunSpec resolve(const CLI::App* app) const {
    auto given = [&](const char* name) { return spec_file.empty() || app->count(name) > 0; };
    RunSpec s = spec_file.empty() ? spec : nlohmann::json::parse(read_file(spec_file)).get<RunSpec>();
    if (given("--problem")) s.problem_class = spec.problem_class;
    if (given("--n-vars")) s.n_vars = spec.n_vars;
    if (given("--algorithm")) s.algorithm = spec.algorithm;
    if (given("--depth")) s.qaoa_depth = spec.qaoa_depth;
    if (given("--reps")) s.twolocal_reps = spec.twolocal_reps;
    if (given("--method")) s.method = spec.method;
    if (given("--pic-bound")) s.pic_bound = spec.pic_bound;
    if (given("--max-evals")) s.max_evals = spec.max_evals;
    if (seed) s.instance_seed = s.param_seed = *seed;
    if (app->count("--instance-seed")) s.instance_seed = spec.instance_seed;
    if (app->count("--param-seed")) s.param_seed = spec.param_seed;
    if (given("--partition-objective")) s.partition_objective = spec.partition_objective;
    if (given("--qaoa-phase")) s.qaoa_phase = spec.qaoa_phase;
    if (given("--rho-begin")) s.rho_begin = spec.rho_begin;
    if (given("--rho-end")) s.rho_end = spec.rho_end;
    if (given("--lambda")) s.penalty_lambda = lambda == "auto" ? std::nullopt : std::optional(std::stod(lambda));
    if (given("--shots")) {
      s.shots = shots == "exact" ? std::nullopt : std::optional<std::uint64_t>(std::stoull(shots));
    }
    s.validate();
    return s;
  }
};

std::string fmt(double v) { return std::isnan(v) ? std::string("nan") : nlohmann::json(v).dump(); }

int cmd_generate(ProblemClass cls, int n, std::uint64_t seed, int count, const fs::path& out) {
  for (int k = 0; k < count; ++k) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
    const auto inst = make_instance(cls, n, s);
    const auto problem = to_problem(inst, cls);
    const auto oracle = brute_force(problem);
    const fs::path path = out / (to_string(cls) + "_n" + std::to_string(n) + "_s" + std::to_string(s) + ".json");
    write_file_atomic(path, nlohmann::json{{"problem_class", cls},
                                           {"instance", inst},
                                           {"problem", problem},
                                           {"default_penalty", default_penalty(problem)},
                                           {"oracle", oracle}}
                                .dump(1));
    std::cout << path.string() << "\n";
  }
  return 0;
}

int cmd_run(const RunSpec& spec, const std::string& out, bool verbose) {
  RecordMonitor monitor;
  if (verbose) {
    monitor = [](const EvaluationRecord& r) {
      std::cerr << "eval " << r.iteration + 1 << " objective=" << fmt(r.objective)
                << " rho=" << fmt(r.approximation_ratio) << " p_ic=" << fmt(r.in_constraint_probability) << "\n";
    };
  }
  const auto result = run_single(spec, monitor);
  if (!out.empty()) {
    write_run(out, result);
    std::cerr << "wrote " << run_paths(out, spec.content_hash()).result.string() << "\n";
  }
  std::cout << nlohmann::json{{"hash", spec.content_hash()},
                              {"evaluations", result.trace.records.size()},
                              {"termination", opt::to_string(result.trace.termination)},
                              {"bound_violated", result.trace.bound_violated},
                              {"lambda_used", result.lambda_used},
                              {"final", result.final}}
                   .dump(1)
            << "\n";
  return 0;
}

int cmd_grid(RunSpec spec, int grid_gamma, int grid_beta, const std::string& out, bool with_run) {
  spec.algorithm = Algorithm::qaoa;
  spec.qaoa_depth = 1;
  const auto points = grid_search_qaoa_p1(spec, grid_gamma, grid_beta);
  std::string csv = "gamma,beta,in_constraint_probability,approximation_ratio\n";
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    csv += fmt(p.gamma) + "," + fmt(p.beta) + "," + fmt(p.in_constraint_probability) + "," +
           (std::isnan(p.approximation_ratio) ? std::string() : fmt(p.approximation_ratio)) + "\n";
    if (!std::isnan(p.approximation_ratio)) best = std::max(best, p.approximation_ratio);
  }
  const auto ctx = RunContext::build(spec);
  nlohmann::json meta = {{"spec", spec},
                         {"grid_gamma", grid_gamma},
                         {"grid_beta", grid_beta},
                         {"gamma_range", {0.0, "2pi"}},
                         {"beta_range", {0.0, "pi"}},
                         {"lambda_used", ctx.landscape.penalty_lambda},
                         {"baseline_approximation_ratio", points.front().approximation_ratio},
                         {"max_approximation_ratio", best}};
  if (with_run) {
    const auto r = run_single(spec);
    meta["optimizer_final"] = r.final;
    meta["optimizer_evaluations"] = r.trace.records.size();
    if (!out.empty()) write_run(out, r);
  }
  if (out.empty()) {
    std::cout << csv;
    std::cerr << meta.dump(1) << "\n";
  } else {
    write_file_atomic(fs::path(out) / "grid.csv", csv);
    write_file_atomic(fs::path(out) / "grid.json", meta.dump(1));
    std::cout << meta.dump(1) << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& profile, const std::string& specs_file, std::uint64_t seed, unsigned jobs,
              const fs::path& out, bool quiet) {
  const auto specs = specs_file.empty() ? profile_specs(profile, seed)
                                        : parse_spec_list(nlohmann::json::parse(read_file(specs_file)));
  SweepOptions opts;
  opts.out_dir = out;
  opts.parallelism = jobs;
  if (!quiet) {
    opts.progress = [](const SweepEntry& e, std::size_t done, std::size_t total) {
      const char* status = e.status == RunStatus::completed ? "done" : e.status == RunStatus::skipped ? "skip" : "FAIL";
      std::cerr << "[" << done << "/" << total << "] " << status << " " << e.hash;
      if (!e.error.empty()) std::cerr << ": " << e.error;
      std::cerr << "\n";
    };
  }
  const auto summary = sweep(specs, opts);
  std::cout << "runs=" << summary.entries.size() << " completed=" << summary.count(RunStatus::completed)
            << " skipped=" << summary.count(RunStatus::skipped) << " failed=" << summary.count(RunStatus::failed)
            << " out=" << out.string() << "\n";
  return summary.any_failed() ? 2 : 0;
}

int cmd_report(const fs::path& in, std::vector<std::string> group_by, const std::string& out) {
  if (group_by.empty()) group_by = default_group_by();
  const auto files = report(in, group_by, out);
  std::cout << files.summary.string() << "\n" << files.quartiles.string() << "\n" << files.modal.string() << "\n";
  if (files.empty_groups > 0) std::cerr << "warning: " << files.empty_groups << " group(s) without completed runs\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-constraint energy VQA experiments on a statevector simulator"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write instance files");
  ProblemClass gen_cls = ProblemClass::portfolio;
  int gen_n = 6, gen_count = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "instances";
  gen->add_option("--problem", gen_cls)
      ->required()
      ->transform(choice({ProblemClass::max_clique, ProblemClass::min_vertex_cover, ProblemClass::max_bisection,
                    ProblemClass::graph_partition, ProblemClass::portfolio}));
  gen->add_option("-n,--n-vars", gen_n);
  gen->add_option("--seed", gen_seed, "seed of the first instance");
  gen->add_option("--count", gen_count, "instances with consecutive seeds");
  gen->add_option("--out", gen_out);

  auto* run = app.add_subcommand("run", "run one spec");
  SpecFlags run_flags;
  run_flags.attach(run);
  std::string run_out;
  bool run_verbose = false;
  run->add_option("--out", run_out, "result-set directory to write into");
  run->add_flag("-v,--verbose", run_verbose, "print every evaluation to stderr");

  auto* grid = app.add_subcommand("grid", "p = 1 QAOA grid search");
  SpecFlags grid_flags;
  grid_flags.spec.algorithm = Algorithm::qaoa;
  grid_flags.spec.method = Method::penalty_energy;
  grid_flags.attach(grid);
  int grid_gamma = 32, grid_beta = 32;
  std::string grid_out;
  bool grid_run = false;
  grid->add_option("--grid-gamma", grid_gamma);
  grid->add_option("--grid-beta", grid_beta);
  grid->add_option("--out", grid_out);
  grid->add_flag("--with-run", grid_run, "also run the optimizer from the spec");

  auto* sw = app.add_subcommand("sweep", "run a profile or a spec list");
  std::string sw_profile = "desk", sw_specs, sw_out = "out";
  std::uint64_t sw_seed = 0;
  unsigned sw_jobs = std::max(1u, std::thread::hardware_concurrency());
  bool sw_quiet = false;
  sw->add_option("--profile", sw_profile)->check(CLI::IsMember({"desk", "paper"}));
  sw->add_option("--specs", sw_specs, "JSON list of RunSpec objects")->check(CLI::ExistingFile);
  sw->add_option("--seed", sw_seed, "master seed of the profile");
  sw->add_option("-j,--jobs", sw_jobs, "concurrent runs");
  sw->add_option("--out", sw_out);
  sw->add_flag("-q,--quiet", sw_quiet);

  auto* rep = app.add_subcommand("report", "aggregate a result set into CSV tables");
  std::string rep_in = "out", rep_out;
  std::vector<std::string> rep_group;
  rep->add_option("--in", rep_in, "result-set directory")->check(CLI::ExistingDirectory);
  rep->add_option("--group-by", rep_group, "spec fields to group on")->delimiter(',');
  rep->add_option("--out", rep_out, "directory for the CSV files (default: the result set)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_cls, gen_n, gen_seed, gen_count, gen_out);
    if (*run) return cmd_run(run_flags.resolve(run), run_out, run_verbose);
    if (*grid) return cmd_grid(grid_flags.resolve(grid), grid_gamma, grid_beta, grid_out, grid_run);
    if (*sw) return cmd_sweep(sw_profile, sw_specs, sw_seed, sw_jobs, sw_out, sw_quiet);
    if (*rep) return cmd_report(rep_in, rep_group, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
