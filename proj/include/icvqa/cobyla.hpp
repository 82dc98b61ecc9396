#pragma once

// Derivative-free minimization under inequality constraints c_k(x) >= 0 by
// linear approximation (Powell's COBYLA scheme).
//
// The method keeps n+1 interpolation points (a simplex) and fits linear
// models of the objective and of every constraint through them. Each step
// solves the linearized problem inside a trust region of radius rho: first
// the greatest predicted constraint violation is minimized, then any
// remaining freedom reduces the linear objective without increasing that
// violation. Trial points are accepted through the merit function
//
//     phi(x) = f(x) + mu * max(0, max_k -c_k(x)).
//
// mu starts at zero. Whenever a step predicts a reduction p of the maximum
// violation together with a change s of the objective, mu is raised to
// 2 * s / p if it is below 1.5 * s / p, so that every accepted step is
// predicted to reduce phi. When rho is halved, mu is lowered again to the
// spread of objective values over the simplex divided by the smallest
// spread of a constraint that is still violated somewhere on the simplex
// (mu = 0 if none is). rho falls from rho_begin to rho_end.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icvqa/errors.hpp"

namespace icvqa::opt {

struct OptimizerConfig {
  std::size_t max_evals = 300;  // objective evaluations, not major iterations
  double rho_begin = 0.5;
  double rho_end = 1e-4;
  std::uint64_t seed = 0;  // used by callers to draw starting points
  // A point satisfies the constraints when its worst violation is at most
  // this. Iterates approaching an active constraint sit a rounding-level
  // distance outside it. sqrt(machine epsilon), as in PRIMA.
  double constraint_tolerance = 1.4901161193847656e-08;

  void validate(std::size_t dimension) const {
    if (!(rho_end > 0.0) || !(rho_end <= rho_begin)) {
      throw ParameterError("optimizer needs 0 < rho_end <= rho_begin");
    }
    if (!(constraint_tolerance >= 0.0)) throw ParameterError("constraint_tolerance must be >= 0");
    if (max_evals < dimension + 2) {
      throw ParameterError("optimizer budget " + std::to_string(max_evals) + " below dimension + 2 = " +
                           std::to_string(dimension + 2));
    }
  }
};

using Objective = std::function<double(std::span<const double>)>;

// Satisfied when evaluate(x) >= 0.
struct InequalityConstraint {
  std::function<double(std::span<const double>)> evaluate;
  std::string label;
};

struct Evaluation {
  std::size_t index = 0;  // 0-based evaluation count
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> constraints;
  double max_violation = 0.0;  // max(0, max_k -c_k)
  bool satisfied = true;       // max_violation <= constraint_tolerance

  bool feasible() const noexcept { return satisfied; }
};

enum class Termination { eval_budget, radius_converged, rounding_errors };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::eval_budget: return "eval_budget";
    case Termination::radius_converged: return "radius_converged";
    case Termination::rounding_errors: return "rounding_errors";
  }
  return "unknown";
}

struct OptimizationResult {
  std::vector<Evaluation> evaluations;
  std::size_t best_index = 0;
  Termination termination = Termination::eval_budget;

  const Evaluation& best() const { return evaluations.at(best_index); }
  // True when no evaluated point satisfied every constraint.
  bool violated() const { return !best().feasible(); }
};

namespace detail {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Rounding test used throughout: a quantity is treated as zero when adding
// a tenth of it to the sum of the magnitudes of its terms changes nothing.
inline bool negligible(double value, double magnitude) {
  const double a = magnitude + 0.1 * std::abs(value);
  const double b = magnitude + 0.2 * std::abs(value);
  return magnitude >= a || a >= b;
}

// Solves the linearized trust-region subproblem.
//
// Constraint k (k < m) reads A(:,k) . dx >= b[k]; column m of A holds minus
// the objective gradient. Stage one finds the shortest dx that minimizes
// the greatest violation subject to |dx| <= rho. Stage two treats the
// objective as an extra constraint and reduces it without increasing that
// violation. Returns true when dx reaches the trust-region boundary.
class TrustRegionStep {
 public:
  TrustRegionStep(std::size_t n, std::size_t m)
      : n_(n), m_(m), z_(n, n), zdota_(n, 0.0), vmultc_(m + 1, 0.0), vmultd_(m + 1, 0.0),
        sdirn_(n, 0.0), dxnew_(n, 0.0), iact_(m + 1, 0) {}

  bool solve(const Matrix& a, std::span<const double> b, double rho, std::vector<double>& dx) {
    a_ = &a;
    b_ = b;
    rho_ = rho;
    dx_ = &dx;

    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) z_(i, j) = 0.0;
      z_(i, i) = 1.0;
      dx[i] = 0.0;
    }
    mcon_ = m_;
    nact_ = 0;
    resmax_ = 0.0;
    icon_ = npos;
    for (std::size_t k = 0; k < m_; ++k) {
      if (b[k] > resmax_) {
        resmax_ = b[k];
        icon_ = k;
      }
    }
    for (std::size_t k = 0; k < m_; ++k) {
      iact_[k] = k;
      vmultc_[k] = resmax_ - b[k];
    }

    if (resmax_ > 0.0) {
      std::fill(sdirn_.begin(), sdirn_.end(), 0.0);
      if (run_stage() == Exit::full_step) return true;
    }
    begin_stage_two();
    return run_stage() == Exit::full_step;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  enum class Exit { next_stage, full_step, short_step };

  double col_dot_z(std::size_t zcol, std::size_t acol) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += z_(i, zcol) * (*a_)(i, acol);
    return s;
  }

  // Givens rotation of Z columns k and k+1 that moves active constraint
  // iact[k+1] into position k (used when shuffling the active list).
  void rotate_down(std::size_t k) {
    const std::size_t kp = k + 1;
    const std::size_t kw = iact_[kp];
    const double sp = col_dot_z(k, kw);
    const double temp = std::sqrt(sp * sp + zdota_[kp] * zdota_[kp]);
    const double alpha = zdota_[kp] / temp;
    const double beta = sp / temp;
    zdota_[kp] = alpha * zdota_[k];
    zdota_[k] = temp;
    for (std::size_t i = 0; i < n_; ++i) {
      const double t = alpha * z_(i, kp) + beta * z_(i, k);
      z_(i, kp) = alpha * z_(i, k) - beta * z_(i, kp);
      z_(i, k) = t;
    }
    iact_[k] = kw;
    vmultc_[k] = vmultc_[kp];
  }

  // Moves active position `pos` to the end of the active list.
  void cycle_to_end(std::size_t pos) {
    if (pos + 1 >= nact_) return;
    const std::size_t isave = iact_[pos];
    const double vsave = vmultc_[pos];
    std::size_t k = pos;
    while (k + 1 < nact_) {
      rotate_down(k);
      ++k;
    }
    iact_[k] = isave;
    vmultc_[k] = vsave;
  }

  void begin_stage_two() {
    mcon_ = m_ + 1;
    icon_ = m_;
    iact_[m_] = m_;
    vmultc_[m_] = 0.0;
  }

  Exit stalled() const { return mcon_ == m_ ? Exit::next_stage : Exit::short_step; }

  // Adds constraint iact[icon_] to the active set, dropping one if its
  // gradient is dependent on the active ones. Returns false on failure.
  bool add_constraint(std::size_t& kk) {
    kk = iact_[icon_];
    for (std::size_t i = 0; i < n_; ++i) dxnew_[i] = (*a_)(i, kk);

    // Rotate the trailing columns of Z to be orthogonal to the new gradient.
    double tot = 0.0;
    for (std::size_t k = n_; k-- > nact_;) {
      double sp = 0.0, spabs = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double t = z_(i, k) * dxnew_[i];
        sp += t;
        spabs += std::abs(t);
      }
      if (negligible(sp, spabs)) sp = 0.0;
      if (tot == 0.0) {
        tot = sp;
      } else {
        const std::size_t kp = k + 1;
        const double temp = std::sqrt(sp * sp + tot * tot);
        const double alpha = sp / temp;
        const double beta = tot / temp;
        tot = temp;
        for (std::size_t i = 0; i < n_; ++i) {
          const double t = alpha * z_(i, k) + beta * z_(i, kp);
          z_(i, kp) = alpha * z_(i, kp) - beta * z_(i, k);
          z_(i, k) = t;
        }
      }
    }

    if (tot != 0.0) {
      zdota_[nact_] = tot;
      vmultc_[icon_] = vmultc_[nact_];
      vmultc_[nact_] = 0.0;
      ++nact_;
      return true;
    }

    // The new gradient is a combination of the active ones: express it in
    // their terms and drop the active constraint whose multiplier reaches
    // zero first.
    double ratio = -1.0;
    std::size_t iout = npos;
    for (std::size_t k = nact_; k-- > 0;) {
      double zdotv = 0.0, zdvabs = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double t = z_(i, k) * dxnew_[i];
        zdotv += t;
        zdvabs += std::abs(t);
      }
      if (!negligible(zdotv, zdvabs)) {
        const double temp = zdotv / zdota_[k];
        if (temp > 0.0 && iact_[k] < m_) {
          const double tempa = vmultc_[k] / temp;
          if (ratio < 0.0 || tempa < ratio) {
            ratio = tempa;
            iout = k;
          }
        }
        if (k >= 1) {
          const std::size_t kw = iact_[k];
          for (std::size_t i = 0; i < n_; ++i) dxnew_[i] -= temp * (*a_)(i, kw);
        }
        vmultd_[k] = temp;
      } else {
        vmultd_[k] = 0.0;
      }
    }
    if (ratio < 0.0) return false;

    for (std::size_t k = 0; k < nact_; ++k) vmultc_[k] = std::max(0.0, vmultc_[k] - ratio * vmultd_[k]);
    cycle_to_end(iout);
    const double temp = col_dot_z(nact_ - 1, kk);
    if (temp == 0.0) return false;
    zdota_[nact_ - 1] = temp;
    vmultc_[icon_] = 0.0;
    vmultc_[nact_ - 1] = ratio;
    return true;
  }

  Exit run_stage() {
    double optold = 0.0;
    int icount = 0;
    for (;;) {
      // End the stage after three iterations that neither improve the
      // stage objective nor grow the active set.
      double optnew;
      if (mcon_ == m_) {
        optnew = resmax_;
      } else {
        optnew = 0.0;
        for (std::size_t i = 0; i < n_; ++i) optnew -= (*dx_)[i] * (*a_)(i, mcon_ - 1);
      }
      std::size_t nactx = 0;
      if (icount == 0 || optnew < optold) {
        optold = optnew;
        nactx = nact_;
        icount = 3;
      } else if (nact_ > nactx) {
        nactx = nact_;
        icount = 3;
      } else {
        --icount;
        if (icount == 0) return stalled();
      }

      if (icon_ >= nact_) {
        std::size_t kk = 0;
        if (!add_constraint(kk)) return stalled();
        // Keep the objective as the last active constraint in stage two.
        iact_[icon_] = iact_[nact_ - 1];
        iact_[nact_ - 1] = kk;
        if (mcon_ > m_ && kk != mcon_ - 1) {
          const std::size_t k = nact_ - 2;
          const std::size_t last = nact_ - 1;
          const double sp = col_dot_z(k, kk);
          const double temp = std::sqrt(sp * sp + zdota_[last] * zdota_[last]);
          const double alpha = zdota_[last] / temp;
          const double beta = sp / temp;
          zdota_[last] = alpha * zdota_[k];
          zdota_[k] = temp;
          for (std::size_t i = 0; i < n_; ++i) {
            const double t = alpha * z_(i, last) + beta * z_(i, k);
            z_(i, last) = alpha * z_(i, k) - beta * z_(i, last);
            z_(i, k) = t;
          }
          iact_[last] = iact_[k];
          iact_[k] = kk;
          std::swap(vmultc_[k], vmultc_[last]);
        }
        if (mcon_ == m_) {
          const std::size_t last = nact_ - 1;
          const std::size_t kl = iact_[last];
          double temp = 0.0;
          for (std::size_t i = 0; i < n_; ++i) temp += sdirn_[i] * (*a_)(i, kl);
          temp = (temp - 1.0) / zdota_[last];
          for (std::size_t i = 0; i < n_; ++i) sdirn_[i] -= temp * z_(i, last);
        }
      } else {
        // Drop active constraint at position icon_.
        cycle_to_end(icon_);
        --nact_;
        if (mcon_ == m_) {
          double temp = 0.0;
          for (std::size_t i = 0; i < n_; ++i) temp += sdirn_[i] * z_(i, nact_);
          for (std::size_t i = 0; i < n_; ++i) sdirn_[i] -= temp * z_(i, nact_);
        }
      }
      if (mcon_ > m_) {
        const double temp = 1.0 / zdota_[nact_ - 1];
        for (std::size_t i = 0; i < n_; ++i) sdirn_[i] = temp * z_(i, nact_ - 1);
      }

      // Step to the trust-region boundary, or (stage one) the step that
      // brings the greatest violation to zero.
      auto& dx = *dx_;
      double dd = rho_ * rho_, sd = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (std::abs(dx[i]) >= 1e-6 * rho_) dd -= dx[i] * dx[i];
        sd += dx[i] * sdirn_[i];
        ss += sdirn_[i] * sdirn_[i];
      }
      if (dd <= 0.0) return stalled();
      double temp = std::sqrt(ss * dd);
      if (std::abs(sd) >= 1e-6 * temp) temp = std::sqrt(ss * dd + sd * sd);
      const double stpful = dd / (temp + sd);
      double step = stpful;
      if (mcon_ == m_) {
        if (negligible(resmax_, step)) return Exit::next_stage;
        step = std::min(step, resmax_);
      }

      for (std::size_t i = 0; i < n_; ++i) dxnew_[i] = dx[i] + step * sdirn_[i];
      double resold = 0.0;
      if (mcon_ == m_) {
        resold = resmax_;
        resmax_ = 0.0;
        for (std::size_t k = 0; k < nact_; ++k) {
          const std::size_t kk = iact_[k];
          double t = b_[kk];
          for (std::size_t i = 0; i < n_; ++i) t -= (*a_)(i, kk) * dxnew_[i];
          resmax_ = std::max(resmax_, t);
        }
      }

      // Multipliers that would hold at dxnew, with rounding noise zeroed.
      for (std::size_t k = nact_; k-- > 0;) {
        double zdotw = 0.0, zdwabs = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
          const double t = z_(i, k) * dxnew_[i];
          zdotw += t;
          zdwabs += std::abs(t);
        }
        if (negligible(zdotw, zdwabs)) zdotw = 0.0;
        vmultd_[k] = zdotw / zdota_[k];
        if (k >= 1) {
          const std::size_t kk = iact_[k];
          for (std::size_t i = 0; i < n_; ++i) dxnew_[i] -= vmultd_[k] * (*a_)(i, kk);
        }
      }
      if (mcon_ > m_ && nact_ > 0) vmultd_[nact_ - 1] = std::max(0.0, vmultd_[nact_ - 1]);

      // Residuals of the inactive constraints at dxnew.
      for (std::size_t i = 0; i < n_; ++i) dxnew_[i] = dx[i] + step * sdirn_[i];
      for (std::size_t k = nact_; k < mcon_; ++k) {
        const std::size_t kk = iact_[k];
        double sum = resmax_ - b_[kk];
        double sumabs = resmax_ + std::abs(b_[kk]);
        for (std::size_t i = 0; i < n_; ++i) {
          const double t = (*a_)(i, kk) * dxnew_[i];
          sum += t;
          sumabs += std::abs(t);
        }
        if (negligible(sum, sumabs)) sum = 0.0;
        vmultd_[k] = sum;
      }

      // Fraction of the step that keeps every multiplier and residual >= 0.
      double ratio = 1.0;
      icon_ = npos;
      for (std::size_t k = 0; k < mcon_; ++k) {
        if (vmultd_[k] < 0.0) {
          const double t = vmultc_[k] / (vmultc_[k] - vmultd_[k]);
          if (t < ratio) {
            ratio = t;
            icon_ = k;
          }
        }
      }

      const double keep = 1.0 - ratio;
      for (std::size_t i = 0; i < n_; ++i) dx[i] = keep * dx[i] + ratio * dxnew_[i];
      for (std::size_t k = 0; k < mcon_; ++k) {
        vmultc_[k] = std::max(0.0, keep * vmultc_[k] + ratio * vmultd_[k]);
      }
      if (mcon_ == m_) resmax_ = resold + ratio * (resmax_ - resold);

      if (icon_ != npos) continue;
      if (step == stpful) return Exit::full_step;
      return Exit::next_stage;
    }
  }

  std::size_t n_, m_;
  Matrix z_;
  std::vector<double> zdota_, vmultc_, vmultd_, sdirn_, dxnew_;
  std::vector<std::size_t> iact_;

  const Matrix* a_ = nullptr;
  std::span<const double> b_;
  double rho_ = 0.0;
  std::vector<double>* dx_ = nullptr;
  std::size_t mcon_ = 0, nact_ = 0, icon_ = npos;
  double resmax_ = 0.0;
};

}  // namespace detail

class Cobyla {
 public:
  using Monitor = std::function<void(const Evaluation&)>;

  // Called once per objective evaluation, in evaluation order.
  void attach_monitor(Monitor monitor) { monitor_ = std::move(monitor); }

  OptimizationResult minimize(const Objective& objective, const std::vector<InequalityConstraint>& constraints,
                              std::vector<double> x0, const OptimizerConfig& config) const;

 private:
  Monitor monitor_;
};

namespace detail {

// Evaluations are collected here; the algorithm only sees (f, con, maxcv).
class Evaluator {
 public:
  Evaluator(const Objective& f, const std::vector<InequalityConstraint>& cons, const Cobyla::Monitor& monitor,
            std::size_t max_evals, double tolerance)
      : f_(f), cons_(cons), monitor_(monitor), max_evals_(max_evals), tolerance_(tolerance) {}

  bool budget_left() const { return evals_.size() < max_evals_; }

  const Evaluation& operator()(const std::vector<double>& x) {
    Evaluation e;
    e.index = evals_.size();
    e.x = x;
    e.objective = f_(x);
    if (!std::isfinite(e.objective)) {
      throw EvaluationError("objective returned a non-finite value", x);
    }
    e.constraints.reserve(cons_.size());
    for (const auto& c : cons_) {
      const double v = c.evaluate(x);
      if (!std::isfinite(v)) throw EvaluationError("constraint '" + c.label + "' returned a non-finite value", x);
      e.constraints.push_back(v);
      e.max_violation = std::max(e.max_violation, -v);
    }
    e.satisfied = e.max_violation <= tolerance_;
    evals_.push_back(std::move(e));
    if (monitor_) monitor_(evals_.back());
    return evals_.back();
  }

  std::vector<Evaluation> take() { return std::move(evals_); }

 private:
  const Objective& f_;
  const std::vector<InequalityConstraint>& cons_;
  const Cobyla::Monitor& monitor_;
  std::size_t max_evals_;
  double tolerance_;
  std::vector<Evaluation> evals_;
};

// Best record: lowest objective among constraint-satisfying evaluations,
// or lowest objective overall when none satisfies them.
inline std::size_t select_best(const std::vector<Evaluation>& evals) {
  std::size_t best = 0;
  bool best_feasible = evals.front().feasible();
  for (std::size_t i = 1; i < evals.size(); ++i) {
    const auto& e = evals[i];
    if (e.feasible() && !best_feasible) {
      best = i;
      best_feasible = true;
    } else if (e.feasible() == best_feasible && e.objective < evals[best].objective) {
      best = i;
    }
  }
  return best;
}

}  // namespace detail

inline OptimizationResult Cobyla::minimize(const Objective& objective,
                                           const std::vector<InequalityConstraint>& constraints,
                                           std::vector<double> x, const OptimizerConfig& config) const {
  const std::size_t n = x.size();
  if (n == 0) throw ParameterError("optimizer needs at least one variable");
  for (double v : x) {
    if (!std::isfinite(v)) throw ParameterError("starting point must be finite");
  }
  config.validate(n);

  const std::size_t m = constraints.size();
  const std::size_t mp = m;      // row of the objective in datmat / con
  const std::size_t mpp = m + 1;  // row of the maximum violation
  constexpr double kAlpha = 0.25, kBeta = 2.1, kGamma = 0.5, kDelta = 1.1;

  detail::Evaluator eval(objective, constraints, monitor_, config.max_evals, config.constraint_tolerance);
  OptimizationResult result;

  // sim columns 0..n-1 hold displacements from the pole vertex (column n);
  // simi is the inverse of the displacement block. datmat column j holds
  // (c_0..c_{m-1}, f, maxcv) at vertex j.
  detail::Matrix sim(n, n + 1), simi(n, n), datmat(m + 2, n + 1), a(n, m + 1);
  std::vector<double> con(m + 2, 0.0), vsig(n), veta(n), sigbar(n), dx(n, 0.0), w(n);
  detail::TrustRegionStep subproblem(n, m);

  double rho = config.rho_begin;
  double parmu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sim(i, n) = x[i];
    sim(i, i) = rho;
    simi(i, i) = 1.0 / rho;
  }

  auto evaluate_into_con = [&]() -> bool {
    if (!eval.budget_left()) return false;
    const auto& e = eval(x);
    for (std::size_t k = 0; k < m; ++k) con[k] = e.constraints[k];
    con[mp] = e.objective;
    con[mpp] = e.max_violation;
    return true;
  };

  // Initial simplex: x0 and x0 + rho e_j, keeping the better point as pole.
  bool budget_hit = false;
  {
    std::size_t jdrop = n;
    for (std::size_t step = 0; step <= n; ++step) {
      if (!evaluate_into_con()) {
        budget_hit = true;
        break;
      }
      const double f = con[mp];
      for (std::size_t k = 0; k < mpp + 1; ++k) datmat(k, jdrop) = con[k];
      if (jdrop < n) {
        if (datmat(mp, n) <= f) {
          x[jdrop] = sim(jdrop, n);
        } else {
          sim(jdrop, n) = x[jdrop];
          for (std::size_t k = 0; k < mpp + 1; ++k) {
            datmat(k, jdrop) = datmat(k, n);
            datmat(k, n) = con[k];
          }
          for (std::size_t k = 0; k <= jdrop; ++k) {
            sim(jdrop, k) = -rho;
            double temp = 0.0;
            for (std::size_t i = k; i <= jdrop; ++i) temp -= simi(i, k);
            simi(jdrop, k) = temp;
          }
        }
      }
      if (step < n) {
        jdrop = step;
        x[jdrop] += rho;
      }
    }
  }

  Termination termination = Termination::eval_budget;
  if (!budget_hit) {
    // While set, the next iteration takes a trust-region step even if the
    // simplex shape is poor; cleared when a geometry step is due.
    bool skip_geometry = true;
    bool geometry_ok = true;
    double prerem = 0.0, prerec = 0.0, parsig = 0.0, pareta = 0.0;

    enum class Next { select_pole, reduce_rho, done };
    Next next = Next::select_pole;

    while (next != Next::done) {
      if (next == Next::select_pole) {
        // Pole = vertex with the least merit value.
        std::size_t nbest = n;
        double phimin = datmat(mp, n) + parmu * datmat(mpp, n);
        for (std::size_t j = 0; j < n; ++j) {
          const double temp = datmat(mp, j) + parmu * datmat(mpp, j);
          if (temp < phimin) {
            nbest = j;
            phimin = temp;
          } else if (temp == phimin && parmu == 0.0 && datmat(mpp, j) < datmat(mpp, nbest)) {
            nbest = j;
          }
        }
        if (nbest < n) {
          for (std::size_t i = 0; i < mpp + 1; ++i) std::swap(datmat(i, n), datmat(i, nbest));
          for (std::size_t i = 0; i < n; ++i) {
            const double temp = sim(i, nbest);
            sim(i, nbest) = 0.0;
            sim(i, n) += temp;
            double tempa = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
              sim(i, k) -= temp;
              tempa -= simi(k, i);
            }
            simi(nbest, i) = tempa;
          }
        }

        double error = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            double temp = i == j ? -1.0 : 0.0;
            for (std::size_t k = 0; k < n; ++k) temp += simi(i, k) * sim(k, j);
            error = std::max(error, std::abs(temp));
          }
        }
        if (error > 0.1) {
          termination = Termination::rounding_errors;
          break;
        }

        // Linear models; column m of `a` is minus the objective gradient.
        for (std::size_t k = 0; k <= mp; ++k) {
          con[k] = -datmat(k, n);
          for (std::size_t j = 0; j < n; ++j) w[j] = datmat(k, j) + con[k];
          for (std::size_t i = 0; i < n; ++i) {
            double temp = 0.0;
            for (std::size_t j = 0; j < n; ++j) temp += w[j] * simi(j, i);
            a(i, k) = k == mp ? -temp : temp;
          }
        }

        // Simplex acceptability.
        geometry_ok = true;
        parsig = kAlpha * rho;
        pareta = kBeta * rho;
        for (std::size_t j = 0; j < n; ++j) {
          double wsig = 0.0, weta = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            wsig += simi(j, i) * simi(j, i);
            weta += sim(i, j) * sim(i, j);
          }
          vsig[j] = 1.0 / std::sqrt(wsig);
          veta[j] = std::sqrt(weta);
          if (vsig[j] < parsig || veta[j] > pareta) geometry_ok = false;
        }

        if (!skip_geometry && !geometry_ok) {
          // Replace the worst-shaped vertex by a geometry-improving point.
          std::size_t jdrop = n;
          double temp = pareta;
          for (std::size_t j = 0; j < n; ++j) {
            if (veta[j] > temp) {
              jdrop = j;
              temp = veta[j];
            }
          }
          if (jdrop == n) {
            for (std::size_t j = 0; j < n; ++j) {
              if (vsig[j] < temp) {
                jdrop = j;
                temp = vsig[j];
              }
            }
          }
          const double len = kGamma * rho * vsig[jdrop];
          for (std::size_t i = 0; i < n; ++i) dx[i] = len * simi(jdrop, i);
          double cvmaxp = 0.0, cvmaxm = 0.0, sum = 0.0;
          for (std::size_t k = 0; k <= mp; ++k) {
            sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += a(i, k) * dx[i];
            if (k < mp) {
              const double c0 = datmat(k, n);
              cvmaxp = std::max(cvmaxp, -sum - c0);
              cvmaxm = std::max(cvmaxm, sum - c0);
            }
          }
          const double dxsign = parmu * (cvmaxp - cvmaxm) > sum + sum ? -1.0 : 1.0;

          double denom = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            dx[i] *= dxsign;
            sim(i, jdrop) = dx[i];
            denom += simi(jdrop, i) * dx[i];
          }
          for (std::size_t i = 0; i < n; ++i) simi(jdrop, i) /= denom;
          for (std::size_t j = 0; j < n; ++j) {
            if (j != jdrop) {
              double t = 0.0;
              for (std::size_t i = 0; i < n; ++i) t += simi(j, i) * dx[i];
              for (std::size_t i = 0; i < n; ++i) simi(j, i) -= t * simi(jdrop, i);
            }
            x[j] = sim(j, n) + dx[j];
          }
          if (!evaluate_into_con()) break;
          for (std::size_t k = 0; k < mpp + 1; ++k) datmat(k, jdrop) = con[k];
          skip_geometry = true;
          continue;
        }

        // Trust-region trial step.
        const bool full = subproblem.solve(a, std::span<const double>(con.data(), m + 1), rho, dx);
        if (!full) {
          double len2 = 0.0;
          for (double d : dx) len2 += d * d;
          if (len2 < 0.25 * rho * rho) {
            skip_geometry = true;
            next = Next::reduce_rho;
            continue;
          }
        }

        // Predicted maximum violation and objective change at x0 + dx.
        double resnew = 0.0;
        con[mp] = 0.0;
        double sum = 0.0;
        for (std::size_t k = 0; k <= mp; ++k) {
          sum = con[k];
          for (std::size_t i = 0; i < n; ++i) sum -= a(i, k) * dx[i];
          if (k < mp) resnew = std::max(resnew, sum);
        }

        double barmu = 0.0;
        prerec = datmat(mpp, n) - resnew;
        if (prerec > 0.0) barmu = sum / prerec;
        if (parmu < 1.5 * barmu) {
          parmu = 2.0 * barmu;
          const double phi = datmat(mp, n) + parmu * datmat(mpp, n);
          bool pole_changed = false;
          for (std::size_t j = 0; j < n; ++j) {
            const double temp = datmat(mp, j) + parmu * datmat(mpp, j);
            if (temp < phi || (temp == phi && parmu == 0.0 && datmat(mpp, j) < datmat(mpp, n))) {
              pole_changed = true;
              break;
            }
          }
          if (pole_changed) continue;
        }
        prerem = parmu * prerec - sum;

        for (std::size_t i = 0; i < n; ++i) x[i] = sim(i, n) + dx[i];
        skip_geometry = true;
        if (!evaluate_into_con()) break;

        const double f = con[mp];
        const double resmax = con[mpp];
        const double vmold = datmat(mp, n) + parmu * datmat(mpp, n);
        const double vmnew = f + parmu * resmax;
        double trured = vmold - vmnew;
        if (parmu == 0.0 && f == datmat(mp, n)) {
          prerem = prerec;
          trured = datmat(mpp, n) - resmax;
        }

        // Choose the vertex that the trial point replaces; mandatory when
        // the merit function decreased.
        double ratio = trured <= 0.0 ? 1.0 : 0.0;
        std::size_t jdrop = n;
        for (std::size_t j = 0; j < n; ++j) {
          double temp = 0.0;
          for (std::size_t i = 0; i < n; ++i) temp += simi(j, i) * dx[i];
          temp = std::abs(temp);
          if (temp > ratio) {
            jdrop = j;
            ratio = temp;
          }
          sigbar[j] = temp * vsig[j];
        }
        double edgmax = kDelta * rho;
        std::size_t l = n;
        for (std::size_t j = 0; j < n; ++j) {
          if (sigbar[j] >= parsig || sigbar[j] >= vsig[j]) {
            double temp = veta[j];
            if (trured > 0.0) {
              temp = 0.0;
              for (std::size_t i = 0; i < n; ++i) temp += (dx[i] - sim(i, j)) * (dx[i] - sim(i, j));
              temp = std::sqrt(temp);
            }
            if (temp > edgmax) {
              l = j;
              edgmax = temp;
            }
          }
        }
        if (l < n) jdrop = l;
        if (jdrop == n) {
          next = Next::reduce_rho;
          continue;
        }

        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          sim(i, jdrop) = dx[i];
          denom += simi(jdrop, i) * dx[i];
        }
        for (std::size_t i = 0; i < n; ++i) simi(jdrop, i) /= denom;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == jdrop) continue;
          double t = 0.0;
          for (std::size_t i = 0; i < n; ++i) t += simi(j, i) * dx[i];
          for (std::size_t i = 0; i < n; ++i) simi(j, i) -= t * simi(jdrop, i);
        }
        for (std::size_t k = 0; k < mpp + 1; ++k) datmat(k, jdrop) = con[k];

        if (trured > 0.0 && trured >= 0.1 * prerem) continue;
        next = Next::reduce_rho;
        continue;
      }

      // next == reduce_rho
      next = Next::select_pole;
      if (!geometry_ok) {
        skip_geometry = false;
        continue;
      }
      if (rho > config.rho_end) {
        rho *= 0.5;
        if (rho <= 1.5 * config.rho_end) rho = config.rho_end;
        if (parmu > 0.0) {
          double denom = 0.0, cmin = 0.0, cmax = 0.0;
          for (std::size_t k = 0; k <= mp; ++k) {
            cmin = cmax = datmat(k, n);
            for (std::size_t i = 0; i < n; ++i) {
              cmin = std::min(cmin, datmat(k, i));
              cmax = std::max(cmax, datmat(k, i));
            }
            if (k < m && cmin < 0.5 * cmax) {
              const double temp = std::max(cmax, 0.0) - cmin;
              denom = denom <= 0.0 ? temp : std::min(denom, temp);
            }
          }
          // cmin and cmax now hold the objective's spread over the simplex.
          if (denom == 0.0) {
            parmu = 0.0;
          } else if (cmax - cmin < parmu * denom) {
            parmu = (cmax - cmin) / denom;
          }
        }
        continue;
      }
      termination = Termination::radius_converged;
      next = Next::done;
    }
  }

  result.evaluations = eval.take();
  result.termination = termination;
  result.best_index = detail::select_best(result.evaluations);
  return result;
}

inline OptimizationResult minimize(const Objective& objective, const std::vector<InequalityConstraint>& constraints,
                                   std::vector<double> x0, const OptimizerConfig& config) {
  return Cobyla{}.minimize(objective, constraints, std::move(x0), config);
}

}  // namespace icvqa::opt
