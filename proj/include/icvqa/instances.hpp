#pragma once

// Seeded instance generators for the five benchmark classes and the
// exhaustive oracle that supplies f_min, f_max and the optimal set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <type_traits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "icvqa/errors.hpp"
#include "icvqa/problem.hpp"
#include "icvqa/rng.hpp"

namespace icvqa {

enum class ProblemClass { max_clique, min_vertex_cover, max_bisection, graph_partition, portfolio };

NLOHMANN_JSON_SERIALIZE_ENUM(ProblemClass, {{ProblemClass::max_clique, "max_clique"},
                                            {ProblemClass::min_vertex_cover, "min_vertex_cover"},
                                            {ProblemClass::max_bisection, "max_bisection"},
                                            {ProblemClass::graph_partition, "graph_partition"},
                                            {ProblemClass::portfolio, "portfolio"}})

inline constexpr ProblemClass kAllProblemClasses[] = {
    ProblemClass::max_clique, ProblemClass::min_vertex_cover, ProblemClass::max_bisection,
    ProblemClass::graph_partition, ProblemClass::portfolio};

inline std::string to_string(ProblemClass c) { return nlohmann::json(c).get<std::string>(); }

// Which quantity the bisection/partition objectives weigh: edges cut by the
// partition, or edges with both endpoints on the x = 1 side.
enum class PartitionObjective { cut, same_side };

NLOHMANN_JSON_SERIALIZE_ENUM(PartitionObjective,
                             {{PartitionObjective::cut, "cut"}, {PartitionObjective::same_side, "same_side"}})

struct Edge {
  int u = 0;
  int v = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

struct GraphInstance {
  int n_vertices = 0;
  std::vector<Edge> edges;  // u < v, sorted, unique
  std::vector<double> vertex_weights;
  std::vector<double> edge_weights;  // aligned with edges

  bool has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges.begin(), edges.end(), Edge{a, b});
  }

  std::vector<int> degrees() const {
    std::vector<int> d(static_cast<std::size_t>(n_vertices), 0);
    for (const auto& e : edges) {
      ++d[static_cast<std::size_t>(e.u)];
      ++d[static_cast<std::size_t>(e.v)];
    }
    return d;
  }

  bool operator==(const GraphInstance&) const = default;
};

struct PortfolioInstance {
  int n_assets = 0;
  std::vector<double> mu;
  std::vector<std::vector<double>> sigma;
  double q = 0.5;
  int budget = 0;

  bool operator==(const PortfolioInstance&) const = default;
};

// i.i.d. Normal(1, 1e-4) weights.
inline std::vector<double> sample_weights(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(count);
  for (auto& x : w) x = rng.normal(1.0, 1e-4);
  return w;
}

// Round half to even; n(n-1)/4 is always a multiple of 1/4.
inline int gnm_edge_count(int n) {
  const double exact = n * (n - 1) / 4.0;
  return static_cast<int>(std::nearbyint(exact));
}

namespace detail {

inline void attach_weights(GraphInstance& g, std::uint64_t seed) {
  std::sort(g.edges.begin(), g.edges.end());
  g.vertex_weights = sample_weights(static_cast<std::size_t>(g.n_vertices), derive_seed(seed, "vertex_weights"));
  g.edge_weights = sample_weights(g.edges.size(), derive_seed(seed, "edge_weights"));
}

}  // namespace detail

// G(n, m) with m = round(n(n-1)/4): half of all pairs, sampled without replacement.
inline GraphInstance gen_gnm(int n, std::uint64_t seed) {
  if (n < 2) throw ParameterError("G(n, m) needs n >= 2");
  std::vector<Edge> pairs;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) pairs.push_back({u, v});
  }
  Rng rng(derive_seed(seed, "edges"));
  const auto m = static_cast<std::size_t>(gnm_edge_count(n));
  // Partial Fisher-Yates: the first m slots become a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + rng.below(pairs.size() - i);
    std::swap(pairs[i], pairs[j]);
  }
  GraphInstance g;
  g.n_vertices = n;
  g.edges.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(m));
  detail::attach_weights(g, seed);
  return g;
}

// Random d-regular graph from the configuration model, rejecting pairings
// with self-loops or repeated edges.
inline GraphInstance gen_regular(int n, int degree, std::uint64_t seed) {
  if (degree < 1 || degree >= n) throw ParameterError("regular graph needs 1 <= degree < n");
  if ((n * degree) % 2 != 0) throw ParameterError("n * degree must be even");
  Rng rng(derive_seed(seed, "edges"));
  std::vector<int> stubs;
  for (int v = 0; v < n; ++v) {
    for (int k = 0; k < degree; ++k) stubs.push_back(v);
  }
  constexpr int kMaxAttempts = 100000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    rng.shuffle(stubs.begin(), stubs.end());
    std::set<Edge> seen;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      int a = stubs[i], b = stubs[i + 1];
      if (a == b) { ok = false; break; }
      if (a > b) std::swap(a, b);
      if (!seen.insert({a, b}).second) { ok = false; break; }
    }
    if (!ok) continue;
    GraphInstance g;
    g.n_vertices = n;
    g.edges.assign(seen.begin(), seen.end());
    detail::attach_weights(g, seed);
    return g;
  }
  throw ParameterError("configuration model failed to produce a simple regular graph");
}

// Two cliques on {0..n/2-1} and {n/2..n-1}; each cross pair joins with probability 2/n.
inline GraphInstance gen_planted_partition(int n, std::uint64_t seed) {
  if (n < 4 || n % 2 != 0) throw ParameterError("planted partition needs even n >= 4");
  const int half = n / 2;
  const double p_out = 2.0 / n;
  Rng rng(derive_seed(seed, "edges"));
  GraphInstance g;
  g.n_vertices = n;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const bool same = (u < half) == (v < half);
      // Draw for every pair so the stream does not depend on group layout.
      const double r = rng.uniform();
      if (same || r < p_out) g.edges.push_back({u, v});
    }
  }
  detail::attach_weights(g, seed);
  return g;
}

struct PortfolioConfig {
  int steps = 252;
  double q = 0.5;
  // Multiplies mu and sigma. 1 keeps per-step moments; setting it to steps
  // gives per-horizon moments.
  double moment_scale = 1.0;
};

// Mock market: n price series driven by one common factor plus
// idiosyncratic noise. mu and sigma are the (scaled) mean and sample
// covariance of the per-step returns of those series.
inline PortfolioInstance gen_portfolio(int n, std::uint64_t seed, const PortfolioConfig& cfg = {}) {
  if (n < 2 || n % 2 != 0) throw ParameterError("portfolio needs even n >= 2");
  if (cfg.steps < 2) throw ParameterError("portfolio needs at least two return steps");
  Rng rng(derive_seed(seed, "market"));
  constexpr double kMarketVol = 0.01;
  std::vector<double> beta(n), drift(n), vol(n), price(n);
  for (int i = 0; i < n; ++i) {
    beta[i] = rng.uniform(0.5, 1.5);
    drift[i] = rng.normal(5e-4, 5e-4);
    vol[i] = rng.uniform(0.01, 0.02);
    price[i] = rng.uniform(10.0, 100.0);
  }
  const auto T = static_cast<std::size_t>(cfg.steps);
  std::vector<std::vector<double>> ret(static_cast<std::size_t>(n), std::vector<double>(T));
  for (std::size_t t = 0; t < T; ++t) {
    const double market = rng.normal(0.0, kMarketVol);
    for (int i = 0; i < n; ++i) {
      const double r = drift[i] + beta[i] * market + vol[i] * rng.normal();
      const double next = price[i] * (1.0 + r);
      ret[i][t] = next / price[i] - 1.0;
      price[i] = next;
    }
  }
  PortfolioInstance P;
  P.n_assets = n;
  P.q = cfg.q;
  P.budget = n / 2;
  P.mu.assign(n, 0.0);
  P.sigma.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (double r : ret[i]) s += r;
    P.mu[i] = s / static_cast<double>(T);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += (ret[i][t] - P.mu[i]) * (ret[j][t] - P.mu[j]);
      const double c = cfg.moment_scale * s / static_cast<double>(T - 1);
      P.sigma[i][j] = c;
      P.sigma[j][i] = c;
    }
  }
  for (auto& m : P.mu) m *= cfg.moment_scale;
  return P;
}

// Generator name, parameters, seed and realized data, serialized together.
struct Instance {
  std::string generator;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::variant<GraphInstance, PortfolioInstance> data;

  bool operator==(const Instance&) const = default;
};

// The generator each benchmark class uses: G(n, n(n-1)/4) for clique and
// vertex cover, 3-regular for bisection, planted 2-partition for graph
// partition, mock market data for portfolio.
inline Instance make_instance(ProblemClass cls, int n, std::uint64_t seed, const PortfolioConfig& pcfg = {}) {
  Instance inst;
  inst.seed = seed;
  switch (cls) {
    case ProblemClass::max_clique:
    case ProblemClass::min_vertex_cover:
      inst.generator = "gnm";
      inst.params = {{"n", n}, {"m", gnm_edge_count(n)}, {"m_exact", n * (n - 1) / 4.0},
                     {"m_rounding", "half_to_even"}};
      inst.data = gen_gnm(n, seed);
      break;
    case ProblemClass::max_bisection:
      inst.generator = "regular";
      inst.params = {{"n", n}, {"degree", 3}};
      inst.data = gen_regular(n, 3, seed);
      break;
    case ProblemClass::graph_partition:
      inst.generator = "planted_partition";
      inst.params = {{"n", n}, {"p_in", 1.0}, {"p_out", 2.0 / n}};
      inst.data = gen_planted_partition(n, seed);
      break;
    case ProblemClass::portfolio:
      inst.generator = "portfolio";
      inst.params = {{"n", n}, {"steps", pcfg.steps}, {"q", pcfg.q}, {"moment_scale", pcfg.moment_scale}};
      inst.data = gen_portfolio(n, seed, pcfg);
      break;
  }
  return inst;
}

inline ConstrainedProblem to_problem(const GraphInstance& g, ProblemClass cls,
                                     PartitionObjective objective = PartitionObjective::cut) {
  const int n = g.n_vertices;
  if (g.vertex_weights.size() != static_cast<std::size_t>(n) || g.edge_weights.size() != g.edges.size()) {
    throw SizeError("graph weight arrays do not match vertex/edge counts");
  }
  switch (cls) {
    case ProblemClass::max_clique: {
      auto p = ConstrainedProblem::with_vars(n, Sense::maximize, "max_clique");
      p.linear = g.vertex_weights;
      for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
          if (!g.has_edge(u, v)) p.constraints.push_back(ConstraintSpec::at_most_one(u, v));
        }
      }
      return p;
    }
    case ProblemClass::min_vertex_cover: {
      auto p = ConstrainedProblem::with_vars(n, Sense::minimize, "min_vertex_cover");
      p.linear = g.vertex_weights;
      for (const auto& e : g.edges) p.constraints.push_back(ConstraintSpec::at_least_one(e.u, e.v));
      return p;
    }
    case ProblemClass::max_bisection:
    case ProblemClass::graph_partition: {
      if (n % 2 != 0) throw ParameterError("bisection and partition need an even vertex count");
      const bool maximize = cls == ProblemClass::max_bisection;
      auto p = ConstrainedProblem::with_vars(n, maximize ? Sense::maximize : Sense::minimize,
                                             maximize ? "max_bisection" : "graph_partition");
      for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto [u, v] = g.edges[k];
        const double w = g.edge_weights[k];
        if (objective == PartitionObjective::cut) {
          // w (x_u + x_v - 2 x_u x_v) is w when the edge is cut, 0 otherwise.
          p.linear[static_cast<std::size_t>(u)] += w;
          p.linear[static_cast<std::size_t>(v)] += w;
          p.add_quadratic(u, v, -2.0 * w);
        } else {
          p.add_quadratic(u, v, w);
        }
      }
      std::vector<int> all(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      p.constraints.push_back(ConstraintSpec::cardinality(std::move(all), n / 2));
      return p;
    }
    case ProblemClass::portfolio:
      break;
  }
  throw ParameterError("class " + to_string(cls) + " does not take a graph instance");
}

// minimize q x^T Sigma x - mu^T x  subject to  1^T x = B.
inline ConstrainedProblem to_problem(const PortfolioInstance& P, ProblemClass cls) {
  if (cls != ProblemClass::portfolio) {
    throw ParameterError("class " + to_string(cls) + " does not take a portfolio instance");
  }
  const int n = P.n_assets;
  auto p = ConstrainedProblem::with_vars(n, Sense::minimize, "portfolio");
  for (int i = 0; i < n; ++i) {
    p.linear[static_cast<std::size_t>(i)] = -P.mu[static_cast<std::size_t>(i)];
    p.add_quadratic(i, i, P.q * P.sigma[i][i]);
    for (int j = i + 1; j < n; ++j) p.add_quadratic(i, j, 2.0 * P.q * P.sigma[i][j]);
  }
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  p.constraints.push_back(ConstraintSpec::cardinality(std::move(all), P.budget));
  return p;
}

inline ConstrainedProblem to_problem(const Instance& inst, ProblemClass cls,
                                     PartitionObjective objective = PartitionObjective::cut) {
  return std::visit(
      [&](const auto& d) -> ConstrainedProblem {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, GraphInstance>) {
          return to_problem(d, cls, objective);
        } else {
          return to_problem(d, cls);
        }
      },
      inst.data);
}

struct OracleResult {
  double f_max = 0.0;  // over feasible states, stated sense
  double f_min = 0.0;
  std::vector<BasisIndex> optimal_states;
  std::size_t feasible_count = 0;
  Sense sense = Sense::minimize;

  // Best and worst feasible values in the canonical minimization sense.
  double canonical_best() const { return sense == Sense::maximize ? -f_max : f_min; }
  double canonical_worst() const { return sense == Sense::maximize ? -f_min : f_max; }

  bool operator==(const OracleResult&) const = default;
};

// States within this relative distance of the optimum count as optimal.
// It absorbs summation-order rounding (e.g. between a cut and its
// complement) and is far below the 1e-4 weight perturbation scale.
inline constexpr double kOptimalTolerance = 1e-9;

inline OracleResult brute_force(const ConstrainedProblem& p) {
  p.validate();
  if (p.n_vars > kMaxQubits) throw SizeError("brute force limited to 24 variables");
  const std::size_t dim = std::size_t{1} << p.n_vars;
  OracleResult r;
  r.sense = p.sense;
  std::vector<std::pair<BasisIndex, double>> feasible;
  for (BasisIndex s = 0; s < dim; ++s) {
    if (!p.feasible(s)) continue;
    const double f = p.stated_objective(s);
    if (feasible.empty()) {
      r.f_min = r.f_max = f;
    } else {
      r.f_min = std::min(r.f_min, f);
      r.f_max = std::max(r.f_max, f);
    }
    feasible.emplace_back(s, f);
  }
  if (feasible.empty()) throw InfeasibleInstance("problem '" + p.label + "' has no feasible state");
  r.feasible_count = feasible.size();
  const double target = p.sense == Sense::maximize ? r.f_max : r.f_min;
  const double tol = kOptimalTolerance * (1.0 + std::abs(target));
  for (const auto& [s, f] : feasible) {
    if (std::abs(f - target) <= tol) r.optimal_states.push_back(s);
  }
  return r;
}

// ---- JSON ------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Edge& e) { j = nlohmann::json::array({e.u, e.v}); }
inline void from_json(const nlohmann::json& j, Edge& e) {
  e.u = j.at(0).get<int>();
  e.v = j.at(1).get<int>();
}

inline void to_json(nlohmann::json& j, const GraphInstance& g) {
  j = nlohmann::json{{"n_vertices", g.n_vertices},
                     {"edges", g.edges},
                     {"vertex_weights", g.vertex_weights},
                     {"edge_weights", g.edge_weights}};
}
inline void from_json(const nlohmann::json& j, GraphInstance& g) {
  j.at("n_vertices").get_to(g.n_vertices);
  j.at("edges").get_to(g.edges);
  j.at("vertex_weights").get_to(g.vertex_weights);
  j.at("edge_weights").get_to(g.edge_weights);
}

inline void to_json(nlohmann::json& j, const PortfolioInstance& P) {
  j = nlohmann::json{{"n_assets", P.n_assets}, {"mu", P.mu}, {"sigma", P.sigma}, {"q", P.q}, {"budget", P.budget}};
}
inline void from_json(const nlohmann::json& j, PortfolioInstance& P) {
  j.at("n_assets").get_to(P.n_assets);
  j.at("mu").get_to(P.mu);
  j.at("sigma").get_to(P.sigma);
  j.at("q").get_to(P.q);
  j.at("budget").get_to(P.budget);
}

inline void to_json(nlohmann::json& j, const Instance& inst) {
  j = nlohmann::json{{"generator", inst.generator}, {"params", inst.params}, {"seed", inst.seed}};
  std::visit([&](const auto& d) { j["data"] = d; }, inst.data);
}
inline void from_json(const nlohmann::json& j, Instance& inst) {
  j.at("generator").get_to(inst.generator);
  inst.params = j.value("params", nlohmann::json::object());
  j.at("seed").get_to(inst.seed);
  if (inst.generator == "portfolio") {
    inst.data = j.at("data").get<PortfolioInstance>();
  } else {
    inst.data = j.at("data").get<GraphInstance>();
  }
}

inline void to_json(nlohmann::json& j, const OracleResult& r) {
  j = nlohmann::json{{"f_max", r.f_max},
                     {"f_min", r.f_min},
                     {"optimal_states", r.optimal_states},
                     {"feasible_count", r.feasible_count},
                     {"sense", r.sense}};
}
inline void from_json(const nlohmann::json& j, OracleResult& r) {
  j.at("f_max").get_to(r.f_max);
  j.at("f_min").get_to(r.f_min);
  j.at("optimal_states").get_to(r.optimal_states);
  j.at("feasible_count").get_to(r.feasible_count);
  j.at("sense").get_to(r.sense);
}

}  // namespace icvqa
