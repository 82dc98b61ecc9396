#pragma once

// Solution-quality metrics evaluated exactly from a probability vector.
// Passing empirical frequencies instead of |c_s|^2 gives the finite-shot
// estimates; every formula is the same in both cases.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icvqa/errors.hpp"
#include "icvqa/instances.hpp"
#include "icvqa/problem.hpp"
#include "icvqa/rng.hpp"
#include "icvqa/statevector.hpp"

namespace icvqa {

// Feasible mass at or below this is treated as zero.
inline constexpr double kEmptySupportTolerance = 1e-12;

namespace detail {

inline void check_sizes(std::size_t probs, std::size_t other, const char* what) {
  if (probs != other) {
    throw SizeError(std::string(what) + " length " + std::to_string(other) + " does not match " +
                    std::to_string(probs) + " basis states");
  }
}

inline double require_support(double p_ic) {
  if (p_ic <= kEmptySupportTolerance) {
    throw EmptyFeasibleSupport("state has no probability mass on feasible basis states");
  }
  return p_ic;
}

}  // namespace detail

inline double in_constraint_probability(std::span<const double> probs, std::span<const std::uint8_t> mask) {
  detail::check_sizes(probs.size(), mask.size(), "mask");
  double acc = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    if (mask[s]) acc += probs[s];
  }
  return acc;
}

// <Psi_IC|H|Psi_IC>: the expectation over the feasible part of the state,
// renormalized by its mass.
inline double in_constraint_energy(std::span<const double> probs, std::span<const double> diag,
                                   std::span<const std::uint8_t> mask) {
  detail::check_sizes(probs.size(), mask.size(), "mask");
  detail::check_sizes(probs.size(), diag.size(), "diagonal");
  double mass = 0.0;
  double weighted = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    if (mask[s]) {
      mass += probs[s];
      weighted += probs[s] * diag[s];
    }
  }
  return weighted / detail::require_support(mass);
}

// (worst - E_IC) / (worst - best) in minimization sense; 1 at the optimum,
// 0 at the worst feasible solution.
inline double approximation_ratio(std::span<const double> probs, std::span<const double> objective_diag,
                                  std::span<const std::uint8_t> mask, const OracleResult& oracle) {
  const double best = oracle.canonical_best();
  const double worst = oracle.canonical_worst();
  if (!(worst > best)) throw DegenerateInstance("f_max == f_min over the feasible set");
  const double e_ic = in_constraint_energy(probs, objective_diag, mask);
  return (worst - e_ic) / (worst - best);
}

inline double optimal_mass_fraction(std::span<const double> probs, std::span<const std::uint8_t> mask,
                                    std::span<const BasisIndex> optimal_states) {
  const double p_ic = detail::require_support(in_constraint_probability(probs, mask));
  double acc = 0.0;
  for (auto s : optimal_states) acc += probs[static_cast<std::size_t>(s)];
  return acc / p_ic;
}

// True when an optimal state is (one of) the most probable feasible states.
inline bool is_optimum_modal(std::span<const double> probs, std::span<const std::uint8_t> mask,
                             std::span<const BasisIndex> optimal_states) {
  detail::require_support(in_constraint_probability(probs, mask));
  double top = -1.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    if (mask[s]) top = std::max(top, probs[s]);
  }
  const double slack = 1e-12 * top;
  return std::any_of(optimal_states.begin(), optimal_states.end(), [&](BasisIndex s) {
    return probs[static_cast<std::size_t>(s)] >= top - slack;
  });
}

// StateVector conveniences.
inline double in_constraint_probability(const StateVector& psi, std::span<const std::uint8_t> mask) {
  return in_constraint_probability(psi.probabilities(), mask);
}
inline double in_constraint_energy(const StateVector& psi, std::span<const double> diag,
                                   std::span<const std::uint8_t> mask) {
  return in_constraint_energy(psi.probabilities(), diag, mask);
}
inline double approximation_ratio(const StateVector& psi, std::span<const double> objective_diag,
                                  std::span<const std::uint8_t> mask, const OracleResult& oracle) {
  return approximation_ratio(psi.probabilities(), objective_diag, mask, oracle);
}
inline double optimal_mass_fraction(const StateVector& psi, std::span<const std::uint8_t> mask,
                                    std::span<const BasisIndex> optimal_states) {
  return optimal_mass_fraction(psi.probabilities(), mask, optimal_states);
}
inline bool is_optimum_modal(const StateVector& psi, std::span<const std::uint8_t> mask,
                             std::span<const BasisIndex> optimal_states) {
  return is_optimum_modal(psi.probabilities(), mask, optimal_states);
}

// Empirical frequencies of `shots` independent basis-state samples.
inline std::vector<double> sample_frequencies(std::span<const double> probs, std::uint64_t shots,
                                              std::uint64_t seed) {
  if (shots == 0) throw ParameterError("shot count must be positive");
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    acc += probs[s];
    cdf[s] = acc;
  }
  Rng rng(seed);
  std::vector<double> freq(probs.size(), 0.0);
  for (std::uint64_t k = 0; k < shots; ++k) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    freq[static_cast<std::size_t>(it - cdf.begin())] += 1.0;
  }
  for (auto& f : freq) f /= static_cast<double>(shots);
  return freq;
}

// One logged evaluation. Quantities that need feasible mass are NaN when
// in_constraint_probability is zero; they serialize as null.
struct EvaluationRecord {
  std::size_t iteration = 0;
  std::vector<double> params;
  double objective = 0.0;  // the value the optimizer saw
  double energy = 0.0;
  double in_constraint_energy = std::numeric_limits<double>::quiet_NaN();
  double in_constraint_probability = 0.0;
  double approximation_ratio = std::numeric_limits<double>::quiet_NaN();
  double optimal_mass_fraction = std::numeric_limits<double>::quiet_NaN();
  bool optimum_modal = false;
};

// Evaluates every metric of `probs` against a landscape and its oracle.
inline EvaluationRecord evaluate_metrics(std::span<const double> probs, const DiagonalLandscape& L,
                                         const OracleResult& oracle) {
  EvaluationRecord r;
  // <H> / <psi|psi>, accumulated exactly like in_constraint_energy so that an
  // all-feasible mask reproduces the energy bit for bit.
  double mass = 0.0;
  double weighted = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    mass += probs[s];
    weighted += probs[s] * L.penalized_diag[s];
  }
  r.energy = weighted / mass;
  r.in_constraint_probability = in_constraint_probability(probs, L.feasible_mask);
  if (r.in_constraint_probability > kEmptySupportTolerance) {
    r.in_constraint_energy = in_constraint_energy(probs, L.objective_diag, L.feasible_mask);
    r.approximation_ratio = approximation_ratio(probs, L.objective_diag, L.feasible_mask, oracle);
    r.optimal_mass_fraction = optimal_mass_fraction(probs, L.feasible_mask, oracle.optimal_states);
    r.optimum_modal = is_optimum_modal(probs, L.feasible_mask, oracle.optimal_states);
  }
  return r;
}

namespace detail {

inline nlohmann::json nullable(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const EvaluationRecord& r) {
  j = nlohmann::json{{"iteration", r.iteration},
                     {"params", r.params},
                     {"objective", detail::nullable(r.objective)},
                     {"energy", r.energy},
                     {"in_constraint_energy", detail::nullable(r.in_constraint_energy)},
                     {"in_constraint_probability", r.in_constraint_probability},
                     {"approximation_ratio", detail::nullable(r.approximation_ratio)},
                     {"optimal_mass_fraction", detail::nullable(r.optimal_mass_fraction)},
                     {"optimum_modal", r.optimum_modal}};
}

inline void from_json(const nlohmann::json& j, EvaluationRecord& r) {
  j.at("iteration").get_to(r.iteration);
  j.at("params").get_to(r.params);
  r.objective = detail::from_nullable(j.at("objective"));
  j.at("energy").get_to(r.energy);
  r.in_constraint_energy = detail::from_nullable(j.at("in_constraint_energy"));
  j.at("in_constraint_probability").get_to(r.in_constraint_probability);
  r.approximation_ratio = detail::from_nullable(j.at("approximation_ratio"));
  r.optimal_mass_fraction = detail::from_nullable(j.at("optimal_mass_fraction"));
  r.optimum_modal = j.value("optimum_modal", false);
}

}  // namespace icvqa
