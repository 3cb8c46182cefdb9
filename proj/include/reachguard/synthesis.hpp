#pragma once

#include "reachguard/lmi.hpp"
#include "reachguard/maxdet.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace reachguard {

/// `count` logarithmically spaced points in [lo, hi] (lo, hi > 0).
std::vector<double> log_grid(double lo, double hi, int count);

/// "lo:hi:count" (log-spaced) or a comma-separated list "10,30,100".
std::vector<double> parse_alpha_grid(const std::string& spec);

/// Default sweep: 20 log-spaced values in [1e-2, 1e3].
std::vector<double> default_alpha_grid();

class SynthesisError : public std::runtime_error {
 public:
  enum class Kind { AllInfeasible, Infeasible, NumericalTrouble };
  SynthesisError(Kind kind, std::string stage, const std::string& msg)
      : std::runtime_error(stage + ": " + msg), kind_(kind), stage_(std::move(stage)) {}
  Kind kind() const { return kind_; }
  const std::string& stage() const { return stage_; }

 private:
  Kind kind_;
  std::string stage_;
};

struct Op1Result {
  SolveStatus status = SolveStatus::NumericalTrouble;
  double alpha = 0.0;
  Matrix Q;
  double beta = 0.0, lambda = 0.0;
  double logdet = 0.0;  // log det Q (or trace Q in trace mode)
  std::vector<ConstraintMargin> margins;
  bool cap_active = false;
  SolveReport report;
};

struct Op2Result {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Matrix R;
  double gamma = 0.0, tau = 0.0;
  double logdet = 0.0;
  std::vector<ConstraintMargin> margins;
  bool cap_active = false;
  SolveReport report;
};

struct SweepEntry {
  double alpha = 0.0;
  SolveStatus status = SolveStatus::NumericalTrouble;
  double objective = 0.0;
  std::string message;
};

struct SweepResult {
  Op1Result best;
  std::vector<SweepEntry> profile;  // in grid order
};

struct SynthesisOptions {
  LmiOptions lmi;
  SolverOptions solver;
  unsigned threads = 0;  // 0: one per hardware thread
};

Op1Result solve_op1(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                    double alpha, const ConicSolver& solver, const LmiOptions& opts = {});

/// Throws SynthesisError(AllInfeasible) if no grid point is Optimal.
SweepResult sweep_alpha(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                        const std::vector<double>& grid, const ConicSolver& solver,
                        const LmiOptions& opts = {}, unsigned threads = 0);

Op2Result solve_op2(const ClosedLoop& cl, const Ellipsoid& stealth, const Matrix& q,
                    const ConicSolver& solver, const LmiOptions& opts = {});

struct SynthesisResult {
  Matrix Q, R;
  double alpha_used = 0.0;
  double beta = 0.0, lambda = 0.0, gamma = 0.0, tau = 0.0;
  double logdet_Q = 0.0, logdet_R = 0.0;
  std::vector<ConstraintMargin> margins;  // OP1 then OP2 constraints
  std::vector<SweepEntry> profile;
  ObjectiveMode objective = ObjectiveMode::LogDet;
  bool cap_active_Q = false, cap_active_R = false;
  std::string solver;
  std::string model_hash;
  SolveReport op1_report, op2_report;

  double min_margin() const;
};

/// Sweep over `alpha_grid`, then the input bound for the winning Q.
/// Failures throw SynthesisError tagged with stage "op1" or "op2".
SynthesisResult run_algorithm1(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                               const std::vector<double>& alpha_grid, const ConicSolver& solver,
                               const SynthesisOptions& opts = {});

nlohmann::json to_json(const SynthesisResult& r);
SynthesisResult synthesis_from_json(const nlohmann::json& j);

}  // namespace reachguard
