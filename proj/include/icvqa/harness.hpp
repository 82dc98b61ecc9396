#pragma once

// Single experiment runs: instance -> problem -> landscape -> ansatz ->
// optimizer, logging every evaluation; plus the p = 1 QAOA grid search.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icvqa/ansatz.hpp"
#include "icvqa/cobyla.hpp"
#include "icvqa/errors.hpp"
#include "icvqa/instances.hpp"
#include "icvqa/metrics.hpp"
#include "icvqa/problem.hpp"
#include "icvqa/rng.hpp"

namespace icvqa {

enum class Algorithm { vqe, qaoa };

// penalty_energy: minimize <H_penalized>.
// ic_energy: minimize the in-constraint energy.
// ic_energy_bounded: as ic_energy, subject to P_IC >= pic_bound.
enum class Method { penalty_energy, ic_energy, ic_energy_bounded };

// Diagonal used in the QAOA phase separator.
enum class QaoaPhase { penalized, plain };

NLOHMANN_JSON_SERIALIZE_ENUM(Algorithm, {{Algorithm::vqe, "vqe"}, {Algorithm::qaoa, "qaoa"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Method, {{Method::penalty_energy, "penalty_energy"},
                                      {Method::ic_energy, "ic_energy"},
                                      {Method::ic_energy_bounded, "ic_energy_bounded"}})
NLOHMANN_JSON_SERIALIZE_ENUM(QaoaPhase, {{QaoaPhase::penalized, "penalized"}, {QaoaPhase::plain, "plain"}})

inline std::string to_string(Algorithm a) { return nlohmann::json(a).get<std::string>(); }
inline std::string to_string(Method m) { return nlohmann::json(m).get<std::string>(); }

struct RunSpec {
  ProblemClass problem_class = ProblemClass::portfolio;
  int n_vars = 6;
  Algorithm algorithm = Algorithm::vqe;
  int qaoa_depth = 1;
  int twolocal_reps = 1;
  Method method = Method::ic_energy_bounded;
  double pic_bound = 0.05;
  std::optional<double> penalty_lambda;  // empty: default_penalty
  std::size_t max_evals = 300;
  std::uint64_t instance_seed = 0;
  std::uint64_t param_seed = 0;
  std::optional<std::uint64_t> shots;  // empty: exact probabilities
  PartitionObjective partition_objective = PartitionObjective::cut;
  QaoaPhase qaoa_phase = QaoaPhase::penalized;
  double rho_begin = 0.5;
  double rho_end = 1e-4;

  void validate() const {
    if (n_vars < 2 || n_vars > kMaxQubits) throw ParameterError("n_vars must be in [2, 24]");
    if (algorithm == Algorithm::qaoa && qaoa_depth < 1) throw ParameterError("qaoa_depth must be >= 1");
    if (algorithm == Algorithm::vqe && twolocal_reps < 0) throw ParameterError("twolocal_reps must be >= 0");
    if (method == Method::ic_energy_bounded && !(pic_bound > 0.0 && pic_bound < 1.0)) {
      throw ParameterError("pic_bound must lie in (0, 1)");
    }
    if (penalty_lambda && !(*penalty_lambda >= 0.0)) throw ParameterError("penalty_lambda must be >= 0");
    if (shots && *shots == 0) throw ParameterError("shots must be positive");
  }

  // Stable identifier: FNV-1a of the canonical (key-sorted) JSON form.
  std::string content_hash() const;
};

inline void to_json(nlohmann::json& j, const RunSpec& s) {
  j = nlohmann::json{{"problem_class", s.problem_class},
                     {"n_vars", s.n_vars},
                     {"algorithm", s.algorithm},
                     {"method", s.method},
                     {"pic_bound", s.pic_bound},
                     {"penalty_lambda", s.penalty_lambda ? nlohmann::json(*s.penalty_lambda) : nlohmann::json("auto")},
                     {"max_evals", s.max_evals},
                     {"instance_seed", s.instance_seed},
                     {"param_seed", s.param_seed},
                     {"shots", s.shots ? nlohmann::json(*s.shots) : nlohmann::json("exact")},
                     {"partition_objective", s.partition_objective},
                     {"rho_begin", s.rho_begin},
                     {"rho_end", s.rho_end}};
  // Ansatz keys that do not apply are left out so they cannot change the hash.
  if (s.algorithm == Algorithm::qaoa) {
    j["qaoa_depth"] = s.qaoa_depth;
    j["qaoa_phase"] = s.qaoa_phase;
  } else {
    j["twolocal_reps"] = s.twolocal_reps;
  }
}

inline void from_json(const nlohmann::json& j, RunSpec& s) {
  s = RunSpec{};
  j.at("problem_class").get_to(s.problem_class);
  j.at("n_vars").get_to(s.n_vars);
  s.algorithm = j.value("algorithm", Algorithm::vqe);
  s.qaoa_depth = j.value("qaoa_depth", 1);
  s.twolocal_reps = j.value("twolocal_reps", 1);
  s.method = j.value("method", Method::ic_energy_bounded);
  s.pic_bound = j.value("pic_bound", 0.05);
  if (j.contains("penalty_lambda") && !j.at("penalty_lambda").is_string()) {
    s.penalty_lambda = j.at("penalty_lambda").get<double>();
  }
  s.max_evals = j.value("max_evals", std::size_t{300});
  s.instance_seed = j.value("instance_seed", std::uint64_t{0});
  s.param_seed = j.value("param_seed", std::uint64_t{0});
  if (j.contains("shots") && !j.at("shots").is_string()) s.shots = j.at("shots").get<std::uint64_t>();
  s.partition_objective = j.value("partition_objective", PartitionObjective::cut);
  s.qaoa_phase = j.value("qaoa_phase", QaoaPhase::penalized);
  s.rho_begin = j.value("rho_begin", 0.5);
  s.rho_end = j.value("rho_end", 1e-4);
  s.validate();
}

inline std::string RunSpec::content_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(nlohmann::json(*this).dump())));
  return buf;
}

// Everything a run needs that is fixed before optimization starts.
struct RunContext {
  RunSpec spec;
  Instance instance;
  ConstrainedProblem problem;
  DiagonalLandscape landscape;
  OracleResult oracle;
  Ansatz ansatz;
  double sentinel = 0.0;  // objective returned when P_IC == 0

  static RunContext build(const RunSpec& spec) {
    spec.validate();
    auto instance = make_instance(spec.problem_class, spec.n_vars, spec.instance_seed);
    auto problem = to_problem(instance, spec.problem_class, spec.partition_objective);
    return assemble(spec, std::move(instance), std::move(problem));
  }

  // For problems that do not come from the generators. spec.problem_class
  // and spec.instance_seed are then only labels.
  static RunContext assemble(const RunSpec& spec, Instance instance, ConstrainedProblem problem) {
    spec.validate();
    if (problem.n_vars != spec.n_vars) throw SizeError("problem size does not match spec.n_vars");
    auto landscape = build_landscape(problem, spec.penalty_lambda);
    auto oracle = brute_force(problem);
    if (!(oracle.canonical_worst() > oracle.canonical_best())) {
      throw DegenerateInstance("instance has a constant objective over the feasible set");
    }
    Ansatz ansatz = spec.algorithm == Algorithm::qaoa
                        ? Ansatz{QaoaAnsatz(spec.n_vars, spec.qaoa_depth,
                                            spec.qaoa_phase == QaoaPhase::penalized ? landscape.penalized_diag
                                                                                    : landscape.objective_diag)}
                        : Ansatz{TwoLocalAnsatz(spec.n_vars, spec.twolocal_reps)};
    double sentinel = -std::numeric_limits<double>::infinity();
    for (double d : landscape.penalized_diag) sentinel = std::max(sentinel, d);
    sentinel += 1.0;
    return RunContext{spec,   std::move(instance), std::move(problem), std::move(landscape),
                      oracle, std::move(ansatz),   sentinel};
  }

  std::vector<double> probabilities(std::span<const double> params) const {
    return prepare_state(ansatz, params).probabilities();
  }

  // Objective value the optimizer sees for a given probability vector.
  double objective(std::span<const double> probs) const {
    if (spec.method == Method::penalty_energy) {
      double mass = 0.0, weighted = 0.0;
      for (std::size_t s = 0; s < probs.size(); ++s) {
        mass += probs[s];
        weighted += probs[s] * landscape.penalized_diag[s];
      }
      return weighted / mass;
    }
    if (in_constraint_probability(probs, landscape.feasible_mask) <= kEmptySupportTolerance) return sentinel;
    return in_constraint_energy(probs, landscape.penalized_diag, landscape.feasible_mask);
  }

  EvaluationRecord evaluate(std::span<const double> params, std::size_t iteration,
                            std::optional<std::uint64_t> sample_seed = std::nullopt) const {
    auto probs = probabilities(params);
    if (spec.shots && sample_seed) probs = sample_frequencies(probs, *spec.shots, *sample_seed);
    auto r = evaluate_metrics(probs, landscape, oracle);
    r.iteration = iteration;
    r.params.assign(params.begin(), params.end());
    r.objective = objective(probs);
    return r;
  }
};

// Starting parameters: i.i.d. uniform on [-pi, pi].
inline std::vector<double> initial_parameters(std::size_t count, std::uint64_t param_seed) {
  Rng rng(derive_seed(param_seed, "initial_parameters"));
  std::vector<double> x(count);
  for (auto& v : x) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return x;
}

struct RunTrace {
  std::vector<EvaluationRecord> records;
  std::vector<double> best_params;
  double best_objective = 0.0;
  std::size_t best_iteration = 0;
  opt::Termination termination = opt::Termination::eval_budget;
  // Set when no evaluation satisfied the optimizer constraint, or when the
  // final state ends below pic_bound.
  bool bound_violated = false;
};

struct RunResult {
  RunSpec spec;
  Instance instance;
  OracleResult oracle;
  RunTrace trace;
  EvaluationRecord final;  // exact re-evaluation at best_params
  double lambda_used = 0.0;
  double wall_time = 0.0;  // seconds
  nlohmann::json metadata = nlohmann::json::object();
};

using RecordMonitor = std::function<void(const EvaluationRecord&)>;

inline RunResult run_context(const RunContext& ctx, const RecordMonitor& monitor = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunSpec& spec = ctx.spec;

  RunResult result;
  result.spec = spec;
  result.instance = ctx.instance;
  result.oracle = ctx.oracle;
  result.lambda_used = ctx.landscape.penalty_lambda;

  std::vector<EvaluationRecord>& records = result.trace.records;
  records.reserve(spec.max_evals);

  // The optimizer evaluates the objective first and then the constraints at
  // the same point, so the record built for the objective serves both. It is
  // committed to the trace once the optimizer has logged the evaluation.
  EvaluationRecord pending;
  opt::Objective objective = [&](std::span<const double> x) {
    const std::size_t it = records.size();
    pending = ctx.evaluate(x, it, derive_seed(spec.param_seed, "shots") + it);
    return pending.objective;
  };
  std::vector<opt::InequalityConstraint> constraints;
  if (spec.method == Method::ic_energy_bounded) {
    constraints.push_back({[&](std::span<const double>) { return pending.in_constraint_probability - spec.pic_bound; },
                           "in_constraint_probability >= bound"});
  }
  opt::Cobyla cobyla;
  cobyla.attach_monitor([&](const opt::Evaluation&) {
    records.push_back(std::move(pending));
    if (monitor) monitor(records.back());
  });

  opt::OptimizerConfig cfg;
  cfg.max_evals = spec.max_evals;
  cfg.rho_begin = spec.rho_begin;
  cfg.rho_end = spec.rho_end;
  cfg.seed = spec.param_seed;

  const auto x0 = initial_parameters(param_count(ctx.ansatz), spec.param_seed);
  const auto opt_result = cobyla.minimize(objective, constraints, x0, cfg);

  const auto& best = opt_result.best();
  auto& trace = result.trace;
  trace.best_params = best.x;
  trace.best_objective = best.objective;
  trace.best_iteration = best.index;
  trace.termination = opt_result.termination;

  result.final = ctx.evaluate(best.x, best.index);
  trace.bound_violated = spec.method == Method::ic_energy_bounded &&
                         (opt_result.violated() ||
                          result.final.in_constraint_probability < spec.pic_bound - cfg.constraint_tolerance);

  result.metadata = {{"initial_parameters", "uniform[-pi,pi]"},
                     {"metrics_mode", spec.shots ? "shots" : "exact"},
                     {"final_metrics_mode", "exact"},
                     {"iterations_meaning", "objective_evaluations"},
                     {"content_hash", spec.content_hash()}};
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline RunResult run_single(const RunSpec& spec, const RecordMonitor& monitor = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto result = run_context(RunContext::build(spec), monitor);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

struct GridPoint {
  double gamma = 0.0;
  double beta = 0.0;
  double in_constraint_probability = 0.0;
  double approximation_ratio = std::numeric_limits<double>::quiet_NaN();
};

// p = 1 QAOA on a grid_gamma x grid_beta lattice over [0, 2 pi) x [0, pi).
inline std::vector<GridPoint> grid_search_qaoa_p1(const RunContext& ctx, int grid_gamma, int grid_beta) {
  if (ctx.spec.algorithm != Algorithm::qaoa || ctx.spec.qaoa_depth != 1) {
    throw ParameterError("grid search needs a depth-1 QAOA spec");
  }
  if (grid_gamma < 1 || grid_beta < 1) throw ParameterError("grid dimensions must be positive");
  std::vector<GridPoint> points;
  points.reserve(static_cast<std::size_t>(grid_gamma) * static_cast<std::size_t>(grid_beta));
  for (int i = 0; i < grid_gamma; ++i) {
    for (int j = 0; j < grid_beta; ++j) {
      GridPoint g;
      g.gamma = 2.0 * std::numbers::pi * i / grid_gamma;
      g.beta = std::numbers::pi * j / grid_beta;
      const double params[2] = {g.gamma, g.beta};
      const auto probs = ctx.probabilities(params);
      g.in_constraint_probability = in_constraint_probability(probs, ctx.landscape.feasible_mask);
      if (g.in_constraint_probability > kEmptySupportTolerance) {
        g.approximation_ratio =
            approximation_ratio(probs, ctx.landscape.objective_diag, ctx.landscape.feasible_mask, ctx.oracle);
      }
      points.push_back(g);
    }
  }
  return points;
}

inline std::vector<GridPoint> grid_search_qaoa_p1(const RunSpec& spec, int grid_gamma, int grid_beta) {
  return grid_search_qaoa_p1(RunContext::build(spec), grid_gamma, grid_beta);
}

// ---- serialization -----------------------------------------------------------

inline void to_json(nlohmann::json& j, const RunTrace& t) {
  j = nlohmann::json{{"evaluations", t.records.size()},
                     {"best_params", t.best_params},
                     {"best_objective", t.best_objective},
                     {"best_iteration", t.best_iteration},
                     {"termination", opt::to_string(t.termination)},
                     {"bound_violated", t.bound_violated}};
}

inline opt::Termination termination_from_string(const std::string& s) {
  if (s == "radius_converged") return opt::Termination::radius_converged;
  if (s == "rounding_errors") return opt::Termination::rounding_errors;
  return opt::Termination::eval_budget;
}

// The per-iteration records are stored separately as JSON lines; see
// write_trace_jsonl.
inline void to_json(nlohmann::json& j, const RunResult& r) {
  j = nlohmann::json{{"spec", r.spec},          {"instance", r.instance},   {"oracle", r.oracle},
                     {"trace", r.trace},        {"final", r.final},         {"lambda_used", r.lambda_used},
                     {"wall_time", r.wall_time}, {"metadata", r.metadata}};
}

inline void from_json(const nlohmann::json& j, RunResult& r) {
  j.at("spec").get_to(r.spec);
  j.at("instance").get_to(r.instance);
  j.at("oracle").get_to(r.oracle);
  const auto& t = j.at("trace");
  t.at("best_params").get_to(r.trace.best_params);
  t.at("best_objective").get_to(r.trace.best_objective);
  t.at("best_iteration").get_to(r.trace.best_iteration);
  r.trace.termination = termination_from_string(t.at("termination").get<std::string>());
  t.at("bound_violated").get_to(r.trace.bound_violated);
  j.at("final").get_to(r.final);
  j.at("lambda_used").get_to(r.lambda_used);
  r.wall_time = j.value("wall_time", 0.0);
  r.metadata = j.value("metadata", nlohmann::json::object());
}

inline std::string trace_jsonl(const std::vector<EvaluationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<EvaluationRecord> parse_trace_jsonl(std::istream& in) {
  std::vector<EvaluationRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(nlohmann::json::parse(line).get<EvaluationRecord>());
  }
  return records;
}

}  // namespace icvqa
