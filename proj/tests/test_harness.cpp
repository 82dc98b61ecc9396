#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "icvqa.hpp"
#include "support/generators.hpp"

using namespace icvqa;

namespace {

RunSpec small_spec(Method m = Method::ic_energy_bounded) {
  RunSpec s;
  s.problem_class = ProblemClass::portfolio;
  s.n_vars = 6;
  s.method = m;
  s.instance_seed = 3;
  s.param_seed = 4;
  return s;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("icvqa_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST(RunSpec, Validation) {
  auto s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.pic_bound = 0.0;
  EXPECT_THROW(s.validate(), ParameterError);
  s.method = Method::ic_energy;
  EXPECT_NO_THROW(s.validate());
  s = small_spec();
  s.n_vars = 30;
  EXPECT_THROW(s.validate(), ParameterError);
  s = small_spec();
  s.algorithm = Algorithm::qaoa;
  s.qaoa_depth = 0;
  EXPECT_THROW(s.validate(), ParameterError);
  s = small_spec();
  s.shots = 0;
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(RunSpec, JsonRoundTripAndHash) {
  auto s = small_spec();
  s.penalty_lambda = 2.5;
  s.shots = 1000;
  const nlohmann::json j = s;
  const auto back = j.get<RunSpec>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  EXPECT_EQ(back.content_hash(), s.content_hash());
  EXPECT_EQ(s.content_hash().size(), 16u);

  auto t = small_spec();
  EXPECT_EQ(nlohmann::json(t).at("penalty_lambda"), "auto");
  EXPECT_EQ(nlohmann::json(t).at("shots"), "exact");
  EXPECT_NE(t.content_hash(), s.content_hash());
}

TEST(RunSpec, DepthIgnoredForVqe) {
  auto a = small_spec(), b = small_spec();
  b.qaoa_depth = 4;
  EXPECT_EQ(a.content_hash(), b.content_hash());
  a.algorithm = b.algorithm = Algorithm::qaoa;
  EXPECT_NE(a.content_hash(), b.content_hash());
}

TEST(RunSingle, BothMethodsCompleteWithAllMetrics) {
  for (Method m : {Method::penalty_energy, Method::ic_energy}) {
    const auto r = run_single(small_spec(m));
    EXPECT_LE(r.trace.records.size(), 300u);
    EXPECT_GT(r.trace.records.size(), 0u);
    for (const auto& rec : r.trace.records) {
      ASSERT_TRUE(std::isfinite(rec.energy));
      ASSERT_GE(rec.in_constraint_probability, 0.0);
      ASSERT_LE(rec.in_constraint_probability, 1.0 + 1e-12);
      if (rec.in_constraint_probability > 1e-12) {
        ASSERT_TRUE(std::isfinite(rec.in_constraint_energy));
        ASSERT_TRUE(std::isfinite(rec.approximation_ratio));
        ASSERT_TRUE(std::isfinite(rec.optimal_mass_fraction));
      }
    }
    EXPECT_EQ(r.metadata.at("initial_parameters"), "uniform[-pi,pi]");
    EXPECT_EQ(r.metadata.at("metrics_mode"), "exact");
  }
}

TEST(RunSingle, BoundedRunHonoursBoundOrFlags) {
  const auto r = run_single(small_spec(Method::ic_energy_bounded));
  if (r.final.in_constraint_probability < 0.05 - 1e-6) {
    EXPECT_TRUE(r.trace.bound_violated);
  } else {
    EXPECT_FALSE(r.trace.bound_violated);
  }
  EXPECT_GE(r.final.in_constraint_probability, 0.05 - 1e-6);
}

TEST(RunSingle, ViolationFlagWhenBoundUnreachable) {
  // A tiny budget with a bound close to 1 can not be met from a random start.
  auto s = small_spec(Method::ic_energy_bounded);
  s.pic_bound = 0.999;
  s.max_evals = 14;
  const auto r = run_single(s);
  EXPECT_LT(r.final.in_constraint_probability, s.pic_bound);
  EXPECT_TRUE(r.trace.bound_violated);
}

TEST(RunSingle, FinalIsExactReevaluationOfBest) {
  const auto spec = small_spec(Method::ic_energy_bounded);
  const auto r = run_single(spec);
  const auto& best = r.trace.records.at(r.trace.best_iteration);
  EXPECT_EQ(best.params, r.trace.best_params);
  EXPECT_EQ(r.final.params, r.trace.best_params);
  EXPECT_EQ(r.final.approximation_ratio, best.approximation_ratio);
  EXPECT_EQ(r.final.in_constraint_probability, best.in_constraint_probability);
  EXPECT_EQ(r.trace.best_objective, best.objective);
}

TEST(RunSingle, BestObjectiveFollowsBestRecordRule) {
  const auto spec = small_spec(Method::ic_energy_bounded);
  const auto r = run_single(spec);
  double best_feasible = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.trace.records) {
    if (rec.in_constraint_probability - spec.pic_bound >= -1e-6) best_feasible = std::min(best_feasible, rec.objective);
  }
  ASSERT_TRUE(std::isfinite(best_feasible));
  EXPECT_EQ(r.trace.best_objective, best_feasible);
}

TEST(RunSingle, PenaltyEnergyMatchesIndependentExpectation) {
  auto spec = small_spec(Method::penalty_energy);
  const auto ctx = RunContext::build(spec);
  const auto r = run_single(spec);
  std::mt19937_64 g(40);
  for (int k = 0; k < 10; ++k) {
    const auto& rec = r.trace.records[std::uniform_int_distribution<std::size_t>(0, r.trace.records.size() - 1)(g)];
    const auto psi = TwoLocalAnsatz(spec.n_vars, spec.twolocal_reps).state(rec.params);
    double e = 0.0;
    for (std::size_t s = 0; s < psi.dimension(); ++s) e += std::norm(psi[s]) * ctx.landscape.penalized_diag[s];
    EXPECT_NEAR(rec.energy, e, 1e-9);
    EXPECT_EQ(rec.objective, rec.energy);
  }
}

TEST(RunSingle, IcObjectiveIsPenalizedInConstraintEnergy) {
  auto spec = small_spec(Method::ic_energy);
  const auto ctx = RunContext::build(spec);
  const auto r = run_single(spec);
  for (std::size_t i = 0; i < r.trace.records.size(); i += 29) {
    const auto& rec = r.trace.records[i];
    const auto psi = TwoLocalAnsatz(spec.n_vars, spec.twolocal_reps).state(rec.params);
    EXPECT_NEAR(rec.objective, in_constraint_energy(psi, ctx.landscape.penalized_diag, ctx.landscape.feasible_mask),
                1e-12);
  }
}

TEST(RunSingle, UnconstrainedTracesCoincideAcrossMethods) {
  std::mt19937_64 g(41);
  auto problem = testgen::random_problem(5, g);
  problem.constraints.clear();
  RunResult results[2];
  int k = 0;
  for (Method m : {Method::penalty_energy, Method::ic_energy}) {
    auto spec = small_spec(m);
    spec.n_vars = 5;
    results[k++] = run_context(RunContext::assemble(spec, Instance{}, problem));
  }
  const auto &a = results[0].trace.records, &b = results[1].trace.records;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].objective, b[i].objective) << "eval " << i;
    ASSERT_EQ(a[i].params, b[i].params) << "eval " << i;
  }
}

TEST(RunSingle, SentinelWhenNoFeasibleMass) {
  auto spec = small_spec(Method::ic_energy);
  const auto ctx = RunContext::build(spec);
  // All-zero angles give |000000>, which violates the budget.
  const std::vector<double> zeros(param_count(ctx.ansatz), 0.0);
  const auto rec = ctx.evaluate(zeros, 0);
  EXPECT_EQ(rec.in_constraint_probability, 0.0);
  const double top = *std::max_element(ctx.landscape.penalized_diag.begin(), ctx.landscape.penalized_diag.end());
  EXPECT_EQ(rec.objective, top + 1.0);
  EXPECT_TRUE(std::isnan(rec.approximation_ratio));
}

TEST(RunSingle, Deterministic) {
  auto spec = small_spec(Method::ic_energy_bounded);
  spec.algorithm = Algorithm::qaoa;
  spec.qaoa_depth = 2;
  const auto a = run_single(spec), b = run_single(spec);
  EXPECT_EQ(trace_jsonl(a.trace.records), trace_jsonl(b.trace.records));
  auto ja = nlohmann::json(a), jb = nlohmann::json(b);
  ja.erase("wall_time");
  jb.erase("wall_time");
  EXPECT_EQ(ja.dump(), jb.dump());
}

TEST(RunSingle, InstanceIdenticalAcrossMethods) {
  std::string first;
  for (Method m : {Method::penalty_energy, Method::ic_energy, Method::ic_energy_bounded}) {
    const auto dump = nlohmann::json(run_single(small_spec(m)).instance).dump();
    if (first.empty()) first = dump;
    EXPECT_EQ(dump, first);
  }
}

TEST(RunSingle, ShotModeRecorded) {
  auto spec = small_spec(Method::ic_energy);
  spec.shots = 512;
  spec.max_evals = 30;
  const auto r = run_single(spec);
  EXPECT_EQ(r.metadata.at("metrics_mode"), "shots");
  // Frequencies are multiples of 1/512.
  const double p = r.trace.records.front().in_constraint_probability * 512;
  EXPECT_NEAR(p, std::round(p), 1e-9);
}

TEST(RunSingle, JsonRoundTrip) {
  const auto r = run_single(small_spec());
  // Records live in the trace file, so the result JSON carries only their count.
  auto back = nlohmann::json::parse(nlohmann::json(r).dump()).get<RunResult>();
  back.trace.records = r.trace.records;
  EXPECT_EQ(nlohmann::json(back).dump(), nlohmann::json(r).dump());
  std::istringstream in(trace_jsonl(r.trace.records));
  const auto recs = parse_trace_jsonl(in);
  ASSERT_EQ(recs.size(), r.trace.records.size());
  EXPECT_EQ(trace_jsonl(recs), trace_jsonl(r.trace.records));
}

TEST(Grid, TwoByTwo) {
  auto spec = small_spec(Method::penalty_energy);
  spec.algorithm = Algorithm::qaoa;
  const auto pts = grid_search_qaoa_p1(spec, 2, 2);
  ASSERT_EQ(pts.size(), 4u);
  for (const auto& p : pts) {
    EXPECT_GE(p.in_constraint_probability, 0.0);
    EXPECT_LE(p.in_constraint_probability, 1.0 + 1e-12);
  }
}

TEST(Grid, OriginIsUniformBaseline) {
  auto spec = small_spec(Method::penalty_energy);
  spec.algorithm = Algorithm::qaoa;
  const auto ctx = RunContext::build(spec);
  const auto pts = grid_search_qaoa_p1(ctx, 4, 4);
  EXPECT_EQ(pts[0].gamma, 0.0);
  EXPECT_EQ(pts[0].beta, 0.0);
  EXPECT_NEAR(pts[0].in_constraint_probability, ctx.oracle.feasible_count / 64.0, 1e-12);
  double mean = 0.0;
  for (std::size_t s = 0; s < 64; ++s) {
    if (ctx.landscape.feasible_mask[s]) mean += ctx.landscape.objective_diag[s];
  }
  mean /= static_cast<double>(ctx.oracle.feasible_count);
  const double worst = ctx.oracle.canonical_worst(), best = ctx.oracle.canonical_best();
  EXPECT_NEAR(pts[0].approximation_ratio, (worst - mean) / (worst - best), 1e-12);
}

TEST(Grid, TenVariablePortfolioRisesAboveBaseline) {
  RunSpec spec;
  spec.problem_class = ProblemClass::portfolio;
  spec.n_vars = 10;
  spec.algorithm = Algorithm::qaoa;
  spec.instance_seed = 1;
  const auto pts = grid_search_qaoa_p1(spec, 32, 32);
  ASSERT_EQ(pts.size(), 1024u);
  double best = -1;
  for (const auto& p : pts) {
    if (!std::isnan(p.approximation_ratio)) best = std::max(best, p.approximation_ratio);
  }
  EXPECT_GT(best, pts[0].approximation_ratio);
}

TEST(Grid, RejectsNonQaoaSpec) {
  EXPECT_THROW(grid_search_qaoa_p1(small_spec(), 2, 2), ParameterError);
  auto s = small_spec();
  s.algorithm = Algorithm::qaoa;
  s.qaoa_depth = 2;
  EXPECT_THROW(grid_search_qaoa_p1(s, 2, 2), ParameterError);
  s.qaoa_depth = 1;
  EXPECT_THROW(grid_search_qaoa_p1(s, 0, 2), ParameterError);
}

namespace {

std::vector<RunSpec> thirty_specs() {
  std::vector<RunSpec> specs;
  for (ProblemClass cls : kAllProblemClasses) {
    for (Method m : {Method::penalty_energy, Method::ic_energy_bounded}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        RunSpec s;
        s.problem_class = cls;
        s.n_vars = 4;
        s.method = m;
        s.max_evals = 40;
        s.instance_seed = seed;
        s.param_seed = seed + 100;
        specs.push_back(s);
      }
    }
  }
  return specs;
}

}  // namespace

TEST(Sweep, WritesOneResultPerSpecPlusManifest) {
  const auto dir = fresh_dir("sweep30");
  const auto summary = sweep(thirty_specs(), {dir, 4, {}});
  EXPECT_EQ(summary.count(RunStatus::completed), 30u);
  EXPECT_FALSE(summary.any_failed());
  std::size_t results = 0, traces = 0;
  for (const auto& e : fs::directory_iterator(dir / "runs")) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".trace.jsonl")) {
      ++traces;
    } else if (name.ends_with(".json")) {
      ++results;
    }
  }
  EXPECT_EQ(results, 30u);
  EXPECT_EQ(traces, 30u);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Sweep, ResumesWithoutRecomputing) {
  const auto dir = fresh_dir("resume");
  auto specs = thirty_specs();
  specs.resize(6);
  (void)sweep(std::vector<RunSpec>(specs.begin(), specs.begin() + 3), {dir, 2, {}});
  const auto manifest_partial = read_file(dir / "manifest.json");
  const auto stamp = fs::last_write_time(run_paths(dir, specs[0].content_hash()).result);
  const auto summary = sweep(specs, {dir, 2, {}});
  EXPECT_EQ(summary.count(RunStatus::skipped), 3u);
  EXPECT_EQ(summary.count(RunStatus::completed), 3u);
  EXPECT_EQ(fs::last_write_time(run_paths(dir, specs[0].content_hash()).result), stamp);
  EXPECT_NE(read_file(dir / "manifest.json"), manifest_partial);
  fs::remove_all(dir);
}

TEST(Sweep, ManifestAndTracesStableAcrossReruns) {
  const auto a = fresh_dir("stable_a"), b = fresh_dir("stable_b");
  auto specs = thirty_specs();
  specs.resize(8);
  (void)sweep(specs, {a, 1, {}});
  (void)sweep(specs, {b, 3, {}});
  EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
  for (const auto& s : specs) {
    EXPECT_EQ(read_file(run_paths(a, s.content_hash()).trace), read_file(run_paths(b, s.content_hash()).trace));
  }
  // Resuming rewrites the manifest byte for byte.
  const auto before = read_file(a / "manifest.json");
  (void)sweep(specs, {a, 2, {}});
  EXPECT_EQ(read_file(a / "manifest.json"), before);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Sweep, FailuresAreRecordedNotFatal) {
  const auto dir = fresh_dir("fail");
  auto specs = thirty_specs();
  specs.resize(2);
  RunSpec bad = specs[0];
  bad.problem_class = ProblemClass::max_bisection;
  bad.n_vars = 5;  // odd: no bisection exists
  specs.push_back(bad);
  const auto summary = sweep(specs, {dir, 2, {}});
  EXPECT_EQ(summary.count(RunStatus::failed), 1u);
  EXPECT_EQ(summary.count(RunStatus::completed), 2u);
  EXPECT_TRUE(fs::exists(run_paths(dir, bad.content_hash()).error));
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("runs").at(2).at("status"), "failed");
  fs::remove_all(dir);
}

TEST(Profiles, ShapeAndSeedSharing) {
  const auto desk = profile_specs("desk", 0);
  // 5 classes x 3 sizes x 3 methods x (10 VQE + 2 depths x 5 QAOA).
  EXPECT_EQ(desk.size(), 5u * 3u * 3u * 20u);
  const auto paper = profile_specs("paper", 0);
  EXPECT_EQ(paper.size(), 5u * 6u * 3u * (20u + 5u * 10u));
  EXPECT_THROW(profile_specs("huge", 0), ParameterError);
  // Methods share instance and parameter seeds.
  EXPECT_EQ(desk[0].instance_seed, desk[20].instance_seed);
  EXPECT_EQ(desk[0].param_seed, desk[20].param_seed);
  EXPECT_NE(desk[0].method, desk[20].method);
  EXPECT_NE(profile_specs("desk", 1)[0].instance_seed, desk[0].instance_seed);
}

TEST(Report, SummaryQuartilesModal) {
  const auto dir = fresh_dir("report");
  std::vector<RunSpec> specs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RunSpec s = small_spec(Method::ic_energy_bounded);
    s.n_vars = 4;
    s.instance_seed = seed;
    s.param_seed = seed;
    specs.push_back(s);
  }
  RunSpec lone = specs[0];
  lone.method = Method::penalty_energy;
  specs.push_back(lone);
  (void)sweep(specs, {dir, 2, {}});
  const auto files = report(dir);
  EXPECT_EQ(files.groups, 2u);
  EXPECT_EQ(files.empty_groups, 0u);

  const auto summary = read_lines(files.summary);
  bool saw_single = false;
  for (const auto& line : summary) {
    if (line.find("penalty_energy") == std::string::npos || line.find("approximation_ratio") == std::string::npos) {
      continue;
    }
    // ...,metric,runs,min,q1,median,q3,max,warning
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const std::size_t m = 5;
    EXPECT_EQ(cells[m + 1], "1");
    EXPECT_EQ(cells[m + 2], cells[m + 4]);
    EXPECT_EQ(cells[m + 4], cells[m + 6]);
    saw_single = true;
  }
  EXPECT_TRUE(saw_single);

  // Quartile curves run to the longest trace in the group.
  std::size_t longest = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    std::ifstream in(run_paths(dir, specs[i].content_hash()).trace);
    longest = std::max(longest, parse_trace_jsonl(in).size());
  }
  std::size_t rows = 0;
  for (const auto& line : read_lines(files.quartiles)) {
    if (line.find("ic_energy_bounded") != std::string::npos && line.find(",in_constraint_probability,") != std::string::npos) {
      ++rows;
    }
  }
  EXPECT_EQ(rows, longest);

  for (const auto& line : read_lines(files.modal)) {
    if (line.starts_with("problem_class")) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const double frac = std::stod(cells[7]);
    EXPECT_GE(frac, 0.0);
    EXPECT_LE(frac, 1.0);
  }
  fs::remove_all(dir);
}

TEST(Report, PaddingCarriesBestRecordForward) {
  // Two runs of different length in one group: the shorter one contributes
  // its best record at every later iteration.
  const auto dir = fresh_dir("padding");
  RunSpec a = small_spec(Method::ic_energy);
  a.n_vars = 4;
  a.max_evals = 20;
  RunSpec b = a;
  b.max_evals = 60;
  std::vector<RunSpec> specs{a, b};
  (void)sweep(specs, {dir, 1, {}});
  const auto files = report(dir, {"problem_class", "method"});
  const auto ra = nlohmann::json::parse(read_file(run_paths(dir, a.content_hash()).result)).get<RunResult>();
  std::ifstream tb(run_paths(dir, b.content_hash()).trace);
  const auto rb = parse_trace_jsonl(tb);
  ASSERT_EQ(rb.size(), 60u);
  for (const auto& line : read_lines(files.quartiles)) {
    if (line.find(",in_constraint_probability,45,") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const double median = std::stod(cells[5]);
    EXPECT_NEAR(median, 0.5 * (ra.final.in_constraint_probability + rb[44].in_constraint_probability), 1e-12);
  }
  fs::remove_all(dir);
}

TEST(Report, EmptyGroupGetsWarningRow) {
  const auto dir = fresh_dir("empty");
  RunSpec bad = small_spec();
  bad.problem_class = ProblemClass::graph_partition;
  bad.n_vars = 5;
  RunSpec good = small_spec();
  good.n_vars = 4;
  std::vector<RunSpec> specs{good, bad};
  (void)sweep(specs, {dir, 1, {}});
  const auto files = report(dir);
  EXPECT_EQ(files.empty_groups, 1u);
  bool warned = false;
  for (const auto& line : read_lines(files.summary)) warned |= line.find("no completed runs") != std::string::npos;
  EXPECT_TRUE(warned);
  EXPECT_THROW(report(dir, {"no_such_field"}), ParameterError);
  fs::remove_all(dir);
}

TEST(Report, QuantileDefinition) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.75), 5.0);
  EXPECT_DOUBLE_EQ(quantile({std::nan(""), 1, 3}, 0.5), 2.0);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}
