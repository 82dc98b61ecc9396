#pragma once

// Constrained binary quadratic programs and their diagonal landscapes.
//
// A problem is stored in its stated sense; every diagonal handed to the
// simulator is canonicalized to minimization (maximize problems are negated).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icvqa/errors.hpp"
#include "icvqa/statevector.hpp"

namespace icvqa {

using BasisIndex = std::uint64_t;

enum class Sense { minimize, maximize };

enum class ConstraintKind { pair_at_most_one, pair_at_least_one, cardinality_eq };

NLOHMANN_JSON_SERIALIZE_ENUM(Sense, {{Sense::minimize, "minimize"}, {Sense::maximize, "maximize"}})

NLOHMANN_JSON_SERIALIZE_ENUM(ConstraintKind,
                             {{ConstraintKind::pair_at_most_one, "pair_at_most_one"},
                              {ConstraintKind::pair_at_least_one, "pair_at_least_one"},
                              {ConstraintKind::cardinality_eq, "cardinality_eq"}})

struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::cardinality_eq;
  std::vector<int> vars;
  int bound = 0;

  static ConstraintSpec at_most_one(int i, int j) {
    return {ConstraintKind::pair_at_most_one, {i, j}, 1};
  }
  static ConstraintSpec at_least_one(int i, int j) {
    return {ConstraintKind::pair_at_least_one, {i, j}, 1};
  }
  static ConstraintSpec cardinality(std::vector<int> vars, int bound) {
    return {ConstraintKind::cardinality_eq, std::move(vars), bound};
  }

  int popcount_on(BasisIndex s) const {
    int count = 0;
    for (int v : vars) count += static_cast<int>((s >> v) & 1U);
    return count;
  }

  bool satisfied(BasisIndex s) const {
    const int k = popcount_on(s);
    switch (kind) {
      case ConstraintKind::pair_at_most_one: return k <= 1;
      case ConstraintKind::pair_at_least_one: return k >= 1;
      case ConstraintKind::cardinality_eq: return k == bound;
    }
    return false;
  }

  // Exact quadratic penalty: zero iff satisfied, a positive integer otherwise.
  double violation(BasisIndex s) const {
    const int k = popcount_on(s);
    switch (kind) {
      case ConstraintKind::pair_at_most_one: return k == 2 ? 1.0 : 0.0;  // x_i x_j
      case ConstraintKind::pair_at_least_one: return k == 0 ? 1.0 : 0.0;  // (1-x_i)(1-x_j)
      case ConstraintKind::cardinality_eq: {
        const double d = k - bound;
        return d * d;
      }
    }
    return 0.0;
  }

  bool operator==(const ConstraintSpec&) const = default;
};

struct ConstrainedProblem {
  int n_vars = 0;
  std::vector<double> linear;
  // Upper-triangular coefficients keyed (i, j) with i <= j.
  std::map<std::pair<int, int>, double> quadratic;
  double offset = 0.0;
  Sense sense = Sense::minimize;
  std::vector<ConstraintSpec> constraints;
  std::string label;

  static ConstrainedProblem with_vars(int n, Sense sense = Sense::minimize, std::string label = {}) {
    ConstrainedProblem p;
    p.n_vars = n;
    p.linear.assign(static_cast<std::size_t>(n), 0.0);
    p.sense = sense;
    p.label = std::move(label);
    return p;
  }

  // Accumulates coef * x_i * x_j; the pair is stored in (min, max) order.
  void add_quadratic(int i, int j, double coef) {
    if (i > j) std::swap(i, j);
    quadratic[{i, j}] += coef;
  }

  void validate() const {
    if (n_vars < 1 || n_vars > 63) throw SizeError("n_vars must be in [1, 63]");
    if (linear.size() != static_cast<std::size_t>(n_vars)) {
      throw SizeError("linear coefficient count does not match n_vars");
    }
    for (const auto& [ij, c] : quadratic) {
      if (ij.first < 0 || ij.first > ij.second || ij.second >= n_vars) {
        throw IndexError("quadratic term (" + std::to_string(ij.first) + ", " +
                         std::to_string(ij.second) + ") out of range");
      }
    }
    for (const auto& c : constraints) {
      for (int v : c.vars) {
        if (v < 0 || v >= n_vars) throw IndexError("constraint variable out of range");
      }
      if (c.kind == ConstraintKind::cardinality_eq) {
        if (c.bound < 0 || c.bound > static_cast<int>(c.vars.size())) {
          throw ParameterError("cardinality bound outside [0, |vars|]");
        }
      } else if (c.vars.size() != 2 || c.vars[0] == c.vars[1]) {
        throw ParameterError("pair constraint needs two distinct variables");
      }
    }
  }

  // Objective in the stated sense, evaluated at a basis index.
  double stated_objective(BasisIndex s) const {
    double acc = offset;
    for (int i = 0; i < n_vars; ++i) {
      if ((s >> i) & 1U) acc += linear[static_cast<std::size_t>(i)];
    }
    for (const auto& [ij, c] : quadratic) {
      if (((s >> ij.first) & 1U) && ((s >> ij.second) & 1U)) acc += c;
    }
    return acc;
  }

  // Canonical (minimization-sense) objective.
  double canonical_objective(BasisIndex s) const {
    const double v = stated_objective(s);
    return sense == Sense::maximize ? -v : v;
  }

  bool feasible(BasisIndex s) const {
    for (const auto& c : constraints) {
      if (!c.satisfied(s)) return false;
    }
    return true;
  }

  double violation(BasisIndex s) const {
    double acc = 0.0;
    for (const auto& c : constraints) acc += c.violation(s);
    return acc;
  }

  bool operator==(const ConstrainedProblem&) const = default;
};

namespace detail {

inline BasisIndex bits_to_index(const ConstrainedProblem& p, std::span<const std::uint8_t> bits) {
  if (bits.size() != static_cast<std::size_t>(p.n_vars)) {
    throw SizeError("bitstring of length " + std::to_string(bits.size()) + " for " +
                    std::to_string(p.n_vars) + " variables");
  }
  BasisIndex s = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) s |= BasisIndex{1} << i;
  }
  return s;
}

}  // namespace detail

// bits[i] is the value of x_i. Returns the canonical (minimization) value.
inline double evaluate_objective(const ConstrainedProblem& p, std::span<const std::uint8_t> bits) {
  return p.canonical_objective(detail::bits_to_index(p, bits));
}

inline bool is_feasible(const ConstrainedProblem& p, std::span<const std::uint8_t> bits) {
  return p.feasible(detail::bits_to_index(p, bits));
}

// lambda = 1 + sum |linear| + sum |quadratic|. One unit of violation then
// outweighs the full objective range, so the penalized ground state is feasible.
inline double default_penalty(const ConstrainedProblem& p) {
  double acc = 1.0;
  for (double c : p.linear) acc += std::abs(c);
  for (const auto& [ij, c] : p.quadratic) acc += std::abs(c);
  return acc;
}

struct DiagonalLandscape {
  int n_vars = 0;
  std::vector<double> objective_diag;
  std::vector<double> penalized_diag;
  std::vector<std::uint8_t> feasible_mask;
  double penalty_lambda = 0.0;

  std::size_t dimension() const noexcept { return objective_diag.size(); }

  std::size_t feasible_count() const noexcept {
    std::size_t k = 0;
    for (auto m : feasible_mask) k += m;
    return k;
  }
};

// Enumerates all 2^n basis states. An empty lambda selects default_penalty.
inline DiagonalLandscape build_landscape(const ConstrainedProblem& p,
                                         std::optional<double> lambda = std::nullopt) {
  p.validate();
  check_qubit_count(p.n_vars);
  const double lam = lambda.value_or(default_penalty(p));
  if (!(lam >= 0.0) || !std::isfinite(lam)) throw ParameterError("penalty lambda must be finite and >= 0");

  DiagonalLandscape L;
  L.n_vars = p.n_vars;
  L.penalty_lambda = lam;
  const std::size_t dim = std::size_t{1} << p.n_vars;
  L.objective_diag.resize(dim);
  L.penalized_diag.resize(dim);
  L.feasible_mask.resize(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    const double f = p.canonical_objective(s);
    const double v = p.violation(s);
    L.objective_diag[s] = f;
    L.feasible_mask[s] = p.feasible(s) ? 1 : 0;
    // Feasible states keep the exact objective value, not f + lam * 0.
    L.penalized_diag[s] = v == 0.0 ? f : f + lam * v;
  }
  return L;
}

// JSON: {n_vars, sense, linear, quadratic: [[i, j, coef], ...], offset,
//        constraints: [{kind, vars, bound}, ...], label}

inline void to_json(nlohmann::json& j, const ConstraintSpec& c) {
  j = nlohmann::json{{"kind", c.kind}, {"vars", c.vars}, {"bound", c.bound}};
}

inline void from_json(const nlohmann::json& j, ConstraintSpec& c) {
  j.at("kind").get_to(c.kind);
  j.at("vars").get_to(c.vars);
  c.bound = j.value("bound", 1);
}

inline void to_json(nlohmann::json& j, const ConstrainedProblem& p) {
  auto quad = nlohmann::json::array();
  for (const auto& [ij, c] : p.quadratic) quad.push_back({ij.first, ij.second, c});
  j = nlohmann::json{{"n_vars", p.n_vars},     {"sense", p.sense},
                     {"linear", p.linear},     {"quadratic", quad},
                     {"offset", p.offset},     {"constraints", p.constraints},
                     {"label", p.label}};
}

inline void from_json(const nlohmann::json& j, ConstrainedProblem& p) {
  p = ConstrainedProblem{};
  j.at("n_vars").get_to(p.n_vars);
  j.at("sense").get_to(p.sense);
  j.at("linear").get_to(p.linear);
  for (const auto& t : j.at("quadratic")) {
    p.add_quadratic(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
  }
  p.offset = j.value("offset", 0.0);
  if (j.contains("constraints")) j.at("constraints").get_to(p.constraints);
  p.label = j.value("label", std::string{});
  p.validate();
}

}  // namespace icvqa
