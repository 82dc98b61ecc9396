// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "icvqa.hpp"
#include "support/dense_oracle.hpp"
#include "support/generators.hpp"

using namespace icvqa;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

int even_size(std::mt19937_64& g, int lo, int hi) { return 2 * std::uniform_int_distribution<int>(lo / 2, hi / 2)(g); }

// ---- 1 ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  std::mt19937_64 g(1001);
  double worst = 0.0;
  int checked = 0;
  for (ProblemClass cls : kAllProblemClasses) {
    for (int k = 0; k < 50; ++k) {
      const bool needs_even = cls != ProblemClass::max_clique && cls != ProblemClass::min_vertex_cover;
      const int n = needs_even ? even_size(g, 4, 10) : std::uniform_int_distribution<int>(3, 10)(g);
      const auto seed = g();
      const auto problem = to_problem(make_instance(cls, n, seed), cls);
      const auto L = build_landscape(problem);
      const auto oracle = brute_force(problem);
      const auto psi = testgen::random_state(n, g);
      const auto probs = psi.probabilities();

      // Independent sums in the stated sense.
      double mass = 0.0, weighted = 0.0, fmax = -INFINITY, fmin = INFINITY;
      std::vector<double> f(probs.size());
      std::vector<bool> ok(probs.size());
      for (std::uint64_t s = 0; s < probs.size(); ++s) {
        const auto bits = testgen::bits_of(s, n);
        ok[s] = testgen::feasible_oracle(problem, bits);
        f[s] = testgen::stated_objective_oracle(problem, bits);
        if (!ok[s]) continue;
        mass += probs[s];
        weighted += probs[s] * f[s];
        fmax = std::max(fmax, f[s]);
        fmin = std::min(fmin, f[s]);
      }
      if (fmax == fmin) continue;
      const bool maximize = problem.sense == Sense::maximize;
      const double e_stated = weighted / mass;
      const double rho = maximize ? (e_stated - fmin) / (fmax - fmin) : (fmax - e_stated) / (fmax - fmin);
      const double target = maximize ? fmax : fmin;
      double opt = 0.0;
      for (std::uint64_t s = 0; s < probs.size(); ++s) {
        if (ok[s] && std::abs(f[s] - target) <= 1e-9 * (1 + std::abs(target))) opt += probs[s];
      }
      const double e_canonical = maximize ? -e_stated : e_stated;

      const double d = std::max({std::abs(in_constraint_probability(psi, L.feasible_mask) - mass),
                                 std::abs(in_constraint_energy(psi, L.objective_diag, L.feasible_mask) - e_canonical),
                                 std::abs(approximation_ratio(psi, L.objective_diag, L.feasible_mask, oracle) - rho),
                                 std::abs(optimal_mass_fraction(psi, L.feasible_mask, oracle.optimal_states) - opt / mass)});
      worst = std::max(worst, d);
      ++checked;
    }
  }
  std::ostringstream os;
  os << checked << " instances, max deviation " << worst;
  return {worst <= 1e-9 && checked >= 240, os.str()};
}

// ---- 2 ------------------------------------------------------------------------

Outcome exact_penalty() {
  std::size_t instances = 0, states = 0, bad = 0;
  for (ProblemClass cls : kAllProblemClasses) {
    for (int n = 2; n <= 12; ++n) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        ConstrainedProblem p;
        try {
          p = to_problem(make_instance(cls, n, seed), cls);
        } catch (const ParameterError&) {
          continue;  // size not supported by this class
        }
        const auto L = build_landscape(p);
        ++instances;
        for (std::size_t s = 0; s < L.dimension(); ++s) {
          ++states;
          if ((L.penalized_diag[s] == L.objective_diag[s]) != (L.feasible_mask[s] == 1)) ++bad;
        }
      }
    }
  }
  std::ostringstream os;
  os << instances << " instances, " << states << " basis states, " << bad << " mismatches";
  return {bad == 0 && instances > 0, os.str()};
}

// ---- 3 ------------------------------------------------------------------------

Outcome simulator_correctness() {
  std::mt19937_64 g(3003);
  double worst = 0.0;
  int points = 0, qaoa_points = 0, twolocal_points = 0;
  for (int n = 1; n <= 3; ++n) {
    for (int p = 1; p <= 2; ++p) {
      for (int k = 0; k < 25; ++k) {
        const auto diag = testgen::random_diag(n, g);
        const auto params = testgen::random_params(static_cast<std::size_t>(2 * p), g);
        const auto psi = QaoaAnsatz(n, p, diag).state(params);
        worst = std::max(worst, dense::max_abs_diff(psi, dense::qaoa(n, diag, params)));
        ++points;
        ++qaoa_points;
      }
    }
    for (int reps = 0; reps <= 2; ++reps) {
      for (int k = 0; k < 25; ++k) {
        const auto params = testgen::random_params(static_cast<std::size_t>(n * (reps + 1)), g);
        const auto psi = TwoLocalAnsatz(n, reps).state(params);
        worst = std::max(worst, dense::max_abs_diff(psi, dense::twolocal(n, reps, params)));
        ++points;
        ++twolocal_points;
      }
    }
  }
  std::ostringstream os;
  os << qaoa_points << " QAOA + " << twolocal_points << " TwoLocal points, max |diff| " << worst;
  return {worst <= 1e-9, os.str()};
}

// ---- 4 ------------------------------------------------------------------------

std::vector<double> start_point(std::size_t dim, std::uint64_t seed, double half_width) {
  Rng rng(derive_seed(seed, "acceptance-start"));
  std::vector<double> x(dim);
  for (auto& v : x) v = rng.uniform(-half_width, half_width);
  return x;
}

Outcome optimizer_correctness() {
  int bound_ok = 0, disk_ok = 0, rosen_ok = 0;
  double rosen_best = INFINITY, rosen_worst = 0.0;
  auto rosen = [](std::span<const double> x) {
    return 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1 - x[0]) * (1 - x[0]);
  };
  const double c = -1.0 / std::sqrt(2.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    opt::OptimizerConfig cfg;
    cfg.seed = seed;

    cfg.max_evals = 100;
    auto r1 = opt::minimize([](std::span<const double> x) { return (x[0] - 1) * (x[0] - 1); },
                            {{[](std::span<const double> x) { return x[0] - 2.0; }, "x >= 2"}},
                            seed == 0 ? std::vector<double>{0.0} : start_point(1, seed, 3.0), cfg);
    bound_ok += std::abs(r1.best().x[0] - 2.0) <= 1e-4;

    cfg.max_evals = 300;
    auto r2 = opt::minimize([](std::span<const double> x) { return x[0] + x[1]; },
                            {{[](std::span<const double> x) { return 1 - x[0] * x[0] - x[1] * x[1]; }, "disk"}},
                            seed == 0 ? std::vector<double>{0.0, 0.0} : start_point(2, seed, 0.9), cfg);
    disk_ok += std::abs(r2.best().x[0] - c) <= 1e-3 && std::abs(r2.best().x[1] - c) <= 1e-3 &&
               std::abs(r2.best().objective + std::sqrt(2.0)) <= 1e-3;

    cfg.max_evals = 2000;
    cfg.rho_end = 1e-8;
    auto r3 = opt::minimize(rosen, {}, seed == 0 ? std::vector<double>{-1.2, 1.0} : start_point(2, seed, 2.0), cfg);
    rosen_ok += r3.best().objective <= 1e-4;
    rosen_best = std::min(rosen_best, r3.best().objective);
    rosen_worst = std::max(rosen_worst, r3.best().objective);
  }
  std::ostringstream os;
  os << "bound " << bound_ok << "/10, disk " << disk_ok << "/10, rosenbrock " << rosen_ok
     << "/10 (best objective range " << rosen_best << " .. " << rosen_worst << ")";
  return {bound_ok == 10 && disk_ok == 10 && rosen_ok == 10, os.str()};
}

// ---- 5 and 6 --------------------------------------------------------------------

struct HeadlineRuns {
  // [class][size][method] -> final rho per instance
  std::map<std::tuple<ProblemClass, int, Method>, std::vector<double>> rho;
  std::vector<RunResult> bounded;
};

HeadlineRuns headline_runs() {
  std::vector<RunSpec> specs;
  for (ProblemClass cls : {ProblemClass::portfolio, ProblemClass::graph_partition}) {
    for (int n : {6, 8}) {
      for (Method m : {Method::penalty_energy, Method::ic_energy_bounded}) {
        for (int k = 0; k < 10; ++k) {
          RunSpec s;
          s.problem_class = cls;
          s.n_vars = n;
          s.algorithm = Algorithm::vqe;
          s.twolocal_reps = 1;
          s.method = m;
          s.instance_seed = derive_seed(2024, "i" + std::to_string(k));
          s.param_seed = derive_seed(2024, "p" + std::to_string(k));
          specs.push_back(s);
        }
      }
    }
  }
  std::vector<RunResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < specs.size();) results[i] = run_single(specs[i]);
      });
    }
  }
  HeadlineRuns h;
  for (const auto& r : results) {
    h.rho[{r.spec.problem_class, r.spec.n_vars, r.spec.method}].push_back(r.final.approximation_ratio);
    if (r.spec.method == Method::ic_energy_bounded) h.bounded.push_back(r);
  }
  return h;
}

Outcome headline(const HeadlineRuns& h) {
  bool pass = true;
  std::ostringstream os;
  os.precision(4);
  for (ProblemClass cls : {ProblemClass::portfolio, ProblemClass::graph_partition}) {
    for (int n : {6, 8}) {
      const double pen = median(h.rho.at({cls, n, Method::penalty_energy}));
      const double ic = median(h.rho.at({cls, n, Method::ic_energy_bounded}));
      pass &= ic - pen >= 0.05;
      if (cls == ProblemClass::portfolio && n == 6) pass &= ic >= 0.9;
      os << to_string(cls) << "/" << n << " median rho penalty " << pen << " vs bounded " << ic << "; ";
    }
  }
  auto d = os.str();
  d.resize(d.size() - 2);
  return {pass, d};
}

Outcome bound_behavior(const HeadlineRuns& h) {
  std::size_t above = 0, below = 0, unflagged = 0;
  for (const auto& r : h.bounded) {
    if (r.final.in_constraint_probability >= r.spec.pic_bound - 1e-6) {
      ++above;
    } else {
      ++below;
      unflagged += r.trace.bound_violated ? 0 : 1;
    }
  }
  const double frac = static_cast<double>(above) / static_cast<double>(h.bounded.size());
  std::ostringstream os;
  os << above << "/" << h.bounded.size() << " runs end with P_IC >= bound, " << below << " below, " << unflagged
     << " below without the violation flag";
  return {frac >= 0.8 && unflagged == 0, os.str()};
}

// ---- 7 ------------------------------------------------------------------------

Outcome grid_structure() {
  RunSpec s;
  s.problem_class = ProblemClass::portfolio;
  s.n_vars = 8;
  s.algorithm = Algorithm::qaoa;
  s.qaoa_depth = 1;
  s.method = Method::penalty_energy;
  s.instance_seed = 7;
  s.param_seed = 7;
  const auto ctx = RunContext::build(s);
  const auto grid = grid_search_qaoa_p1(ctx, 32, 32);
  const double baseline = grid.front().approximation_ratio;
  double best = -INFINITY;
  for (const auto& p : grid) {
    if (!std::isnan(p.approximation_ratio)) best = std::max(best, p.approximation_ratio);
  }
  const auto run = run_context(ctx);
  std::ostringstream os;
  os << "baseline rho " << baseline << ", grid max " << best << ", penalty COBYLA final " << run.final.approximation_ratio;
  return {best >= baseline + 0.1 && run.final.approximation_ratio <= best, os.str()};
}

// ---- 8 ------------------------------------------------------------------------

Outcome determinism() {
  std::vector<RunSpec> specs;
  const auto desk = profile_specs("desk", 0);
  for (std::size_t i = 0; i < desk.size(); ++i) {
    if (desk[i].n_vars == 6 && i % 10 == 0) specs.push_back(desk[i]);
  }
  const auto root = fs::temp_directory_path() / ("icvqa_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const unsigned threads = std::max(2u, std::thread::hardware_concurrency());
  (void)sweep(specs, {root / "a", threads, {}});
  (void)sweep(specs, {root / "b", threads / 2, {}});
  std::size_t identical = 0;
  for (const auto& spec : specs) {
    const auto pa = run_paths(root / "a", spec.content_hash());
    const auto pb = run_paths(root / "b", spec.content_hash());
    auto ra = nlohmann::json::parse(read_file(pa.result));
    auto rb = nlohmann::json::parse(read_file(pb.result));
    ra.erase("wall_time");
    rb.erase("wall_time");
    identical += read_file(pa.trace) == read_file(pb.trace) && ra == rb;
  }
  const bool manifests = read_file(root / "a" / "manifest.json") == read_file(root / "b" / "manifest.json");
  fs::remove_all(root);
  std::ostringstream os;
  os << identical << "/" << specs.size() << " runs byte-identical, manifests " << (manifests ? "identical" : "differ");
  return {identical == specs.size() && manifests, os.str()};
}

}  // namespace

int main() {
  int failures = 0;
  auto report_line = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report_line(1, "oracle equivalence", oracle_equivalence);
  report_line(2, "exact penalty", exact_penalty);
  report_line(3, "simulator vs dense oracle", simulator_correctness);
  report_line(4, "optimizer test problems", optimizer_correctness);
  HeadlineRuns h;
  report_line(5, "in-constraint vs penalty", [&] {
    h = headline_runs();
    return headline(h);
  });
  report_line(6, "bound behavior", [&] { return bound_behavior(h); });
  report_line(7, "grid structure", grid_structure);
  report_line(8, "determinism", determinism);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
