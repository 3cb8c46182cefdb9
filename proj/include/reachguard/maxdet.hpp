#pragma once

#include "reachguard/lmi.hpp"

#include <optional>
#include <string>

namespace reachguard {

enum class SolveStatus { Optimal, Infeasible, NumericalTrouble };

const char* to_string(SolveStatus s);

struct SolverCapabilities {
  bool psd_cone = true;
  bool native_logdet = false;
};

struct SolverOptions {
  double gap_tol = 1e-9;       // stop when the barrier duality-gap bound drops below this
  double accept_gap = 1e-4;    // relative: a run stopped by rounding is Optimal if gap <= this * max(1, |obj|)
  double t_growth = 8.0;       // barrier parameter multiplier per outer iteration
  double phase1_margin = 1e-6;  // phase I stops once the slack is below -margin
  int max_newton = 100;        // per centering step
  double newton_tol = 1e-9;    // half the squared Newton decrement
  int max_outer = 200;
  std::optional<Vector> initial;  // warm start for phase I (coordinates)
};

struct SolveReport {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Vector x;                 // decision coordinates (empty unless Optimal)
  double objective = 0.0;   // log det or trace of the objective block
  double gap = 0.0;         // final duality-gap bound
  double phase1_slack = 0.0;  // phase-I optimum estimate (negative = strictly feasible)
  int newton_iterations = 0;
  int outer_iterations = 0;
  bool stalled = false;
  std::string message;
};

class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual SolverCapabilities capabilities() const = 0;
  virtual std::string name() const = 0;
  virtual SolveReport solve(const LmiProblem& problem) const = 0;
};

/// Primal log-barrier path following for
///   maximize log det G(x)  (or trace G(x))  s.t.  F_j(x) >= 0.
/// Phase I minimizes s with F_j(x) + s I >= 0; both phases use damped
/// Newton steps on self-concordant barriers.
class BarrierSolver final : public ConicSolver {
 public:
  explicit BarrierSolver(SolverOptions opts = {}) : opts_(std::move(opts)) {}

  SolverCapabilities capabilities() const override { return {true, true}; }
  std::string name() const override { return "reachguard-barrier"; }
  SolveReport solve(const LmiProblem& problem) const override;

  const SolverOptions& options() const { return opts_; }

 private:
  SolverOptions opts_;
};

}  // namespace reachguard
