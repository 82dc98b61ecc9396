#pragma once

// Dense statevector for the closed gate set {Ry, CZ, diagonal phase,
// global X-mixer}. Basis index bit i holds qubit (and binary variable) i,
// so variable 0 is the least significant bit.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icvqa/errors.hpp"

namespace icvqa {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 24;
inline constexpr double kNormTolerance = 1e-10;

inline void check_qubit_count(int n) {
  if (n < 1 || n > kMaxQubits) {
    throw SizeError("qubit count " + std::to_string(n) + " outside [1, " +
                    std::to_string(kMaxQubits) + "]");
  }
}

class StateVector {
 public:
  // |0...0>
  static StateVector zero(int n_qubits) {
    check_qubit_count(n_qubits);
    StateVector s(n_qubits);
    s.amps_[0] = 1.0;
    return s;
  }

  // |+>^n
  static StateVector plus(int n_qubits) {
    check_qubit_count(n_qubits);
    StateVector s(n_qubits);
    const double a = std::pow(2.0, -0.5 * n_qubits);
    for (auto& c : s.amps_) c = a;
    return s;
  }

  // Wraps caller-supplied amplitudes; they must already be normalized.
  static StateVector from_amplitudes(std::vector<Complex> amps) {
    const std::size_t dim = amps.size();
    if (dim < 2 || (dim & (dim - 1)) != 0) {
      throw SizeError("amplitude count " + std::to_string(dim) + " is not a power of two >= 2");
    }
    int n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    check_qubit_count(n);
    StateVector s(n);
    s.amps_ = std::move(amps);
    if (std::abs(s.norm_squared() - 1.0) > kNormTolerance) {
      throw ParameterError("amplitudes are not normalized");
    }
    return s;
  }

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return amps_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amps_; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }

  double norm_squared() const noexcept {
    double acc = 0.0;
    for (const auto& c : amps_) acc += std::norm(c);
    return acc;
  }

  // Ry(angle) = [[cos a/2, -sin a/2], [sin a/2, cos a/2]] on one qubit.
  StateVector& apply_ry(int qubit, double angle) {
    check_qubit(qubit);
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    const std::size_t stride = std::size_t{1} << qubit;
    for (std::size_t base = 0; base < amps_.size(); base += 2 * stride) {
      for (std::size_t i = base; i < base + stride; ++i) {
        const Complex a0 = amps_[i];
        const Complex a1 = amps_[i + stride];
        amps_[i] = c * a0 - s * a1;
        amps_[i + stride] = s * a0 + c * a1;
      }
    }
    return *this;
  }

  StateVector& apply_cz(int qubit_a, int qubit_b) {
    check_qubit(qubit_a);
    check_qubit(qubit_b);
    if (qubit_a == qubit_b) throw IndexError("CZ needs two distinct qubits");
    const std::size_t mask = (std::size_t{1} << qubit_a) | (std::size_t{1} << qubit_b);
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      if ((i & mask) == mask) amps_[i] = -amps_[i];
    }
    return *this;
  }

  // c_s <- exp(-i gamma diag[s]) c_s
  StateVector& apply_diagonal_phase(std::span<const double> diag, double gamma) {
    check_length(diag.size());
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      amps_[i] *= std::polar(1.0, -gamma * diag[i]);
    }
    return *this;
  }

  // exp(-i beta sum_j X_j), applied as Rx(2 beta) on every qubit.
  StateVector& apply_mixer(double beta) {
    const double c = std::cos(beta);
    const Complex ms(0.0, -std::sin(beta));
    for (int q = 0; q < n_qubits_; ++q) {
      const std::size_t stride = std::size_t{1} << q;
      for (std::size_t base = 0; base < amps_.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
          const Complex a0 = amps_[i];
          const Complex a1 = amps_[i + stride];
          amps_[i] = c * a0 + ms * a1;
          amps_[i + stride] = ms * a0 + c * a1;
        }
      }
    }
    return *this;
  }

  // sum_s |c_s|^2 diag[s], summed in index order.
  double expectation_diagonal(std::span<const double> diag) const {
    check_length(diag.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) acc += std::norm(amps_[i]) * diag[i];
    return acc;
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(amps_.size());
    for (std::size_t i = 0; i < amps_.size(); ++i) p[i] = std::norm(amps_[i]);
    return p;
  }

 private:
  explicit StateVector(int n) : n_qubits_(n), amps_(std::size_t{1} << n, Complex{}) {}

  void check_qubit(int q) const {
    if (q < 0 || q >= n_qubits_) {
      throw IndexError("qubit " + std::to_string(q) + " outside register of " +
                       std::to_string(n_qubits_));
    }
  }

  void check_length(std::size_t len) const {
    if (len != amps_.size()) {
      throw SizeError("diagonal of length " + std::to_string(len) + " for a state of dimension " +
                      std::to_string(amps_.size()));
    }
  }

  int n_qubits_;
  std::vector<Complex> amps_;
};

inline StateVector init_zero(int n) { return StateVector::zero(n); }
inline StateVector init_plus(int n) { return StateVector::plus(n); }

}  // namespace icvqa
