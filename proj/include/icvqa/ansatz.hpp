#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "icvqa/errors.hpp"
#include "icvqa/statevector.hpp"

namespace icvqa {

// prod_j exp(-i beta_j B) exp(-i gamma_j C) |+>^n with C = diag(phase_diag),
// B = sum_j X_j. Parameters are laid out (gamma_1..gamma_p, beta_1..beta_p).
class QaoaAnsatz {
 public:
  QaoaAnsatz(int n_qubits, int depth, std::vector<double> phase_diag)
      : n_qubits_(n_qubits), depth_(depth), phase_diag_(std::move(phase_diag)) {
    check_qubit_count(n_qubits);
    if (depth < 1) throw ParameterError("QAOA depth must be >= 1");
    if (phase_diag_.size() != (std::size_t{1} << n_qubits)) {
      throw SizeError("QAOA phase diagonal does not match qubit count");
    }
  }

  int n_qubits() const noexcept { return n_qubits_; }
  int depth() const noexcept { return depth_; }
  std::size_t param_count() const noexcept { return 2 * static_cast<std::size_t>(depth_); }
  std::span<const double> phase_diag() const noexcept { return phase_diag_; }

  StateVector state(std::span<const double> params) const {
    if (params.size() != param_count()) {
      throw ParameterError("QAOA expects " + std::to_string(param_count()) + " parameters, got " +
                           std::to_string(params.size()));
    }
    auto psi = StateVector::plus(n_qubits_);
    const auto p = static_cast<std::size_t>(depth_);
    for (std::size_t layer = 0; layer < p; ++layer) {
      psi.apply_diagonal_phase(phase_diag_, params[layer]);
      psi.apply_mixer(params[p + layer]);
    }
    return psi;
  }

 private:
  int n_qubits_;
  int depth_;
  std::vector<double> phase_diag_;
};

// Hardware-efficient circuit: an Ry layer, then per repetition a linear CZ
// chain CZ(0,1)..CZ(n-2,n-1) followed by another Ry layer. Parameters are
// consumed layer by layer, qubit 0 first.
class TwoLocalAnsatz {
 public:
  TwoLocalAnsatz(int n_qubits, int reps) : n_qubits_(n_qubits), reps_(reps) {
    check_qubit_count(n_qubits);
    if (reps < 0) throw ParameterError("Two-Local reps must be >= 0");
  }

  int n_qubits() const noexcept { return n_qubits_; }
  int reps() const noexcept { return reps_; }
  std::size_t param_count() const noexcept {
    return static_cast<std::size_t>(n_qubits_) * static_cast<std::size_t>(reps_ + 1);
  }

  StateVector state(std::span<const double> params) const {
    if (params.size() != param_count()) {
      throw ParameterError("Two-Local expects " + std::to_string(param_count()) + " parameters, got " +
                           std::to_string(params.size()));
    }
    auto psi = StateVector::zero(n_qubits_);
    std::size_t k = 0;
    for (int q = 0; q < n_qubits_; ++q) psi.apply_ry(q, params[k++]);
    for (int r = 0; r < reps_; ++r) {
      for (int q = 0; q + 1 < n_qubits_; ++q) psi.apply_cz(q, q + 1);
      for (int q = 0; q < n_qubits_; ++q) psi.apply_ry(q, params[k++]);
    }
    return psi;
  }

 private:
  int n_qubits_;
  int reps_;
};

using Ansatz = std::variant<QaoaAnsatz, TwoLocalAnsatz>;

inline std::size_t param_count(const Ansatz& a) {
  return std::visit([](const auto& x) { return x.param_count(); }, a);
}

inline StateVector prepare_state(const Ansatz& a, std::span<const double> params) {
  return std::visit([&](const auto& x) { return x.state(params); }, a);
}

}  // namespace icvqa
