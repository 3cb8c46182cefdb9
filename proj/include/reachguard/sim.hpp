#pragma once

#include "reachguard/benchmark.hpp"
#include "reachguard/monitor.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace reachguard {

enum class GeneratorKind { Zero, ConstantResidual, SinusoidResidual, Custom };

const char* to_string(GeneratorKind kind);

/// Attack signal for one episode. Residual-space generators pick a target
/// residual r* and inject dy = Gamma^+ (r* - C_p e), which keeps r = r* whenever
/// Gamma Gamma^+ = I.
struct Generator {
  GeneratorKind kind = GeneratorKind::Zero;
  Vector direction;          // unit length under the Pi-norm
  double magnitude = 0.0;    // fraction of the stealthy boundary, <= 1
  double frequency_hz = 0.0;
  std::vector<std::pair<double, Vector>> table;  // Custom: (t, dy), held until the next entry

  /// Target residual `t` seconds into the episode (residual-space kinds only).
  Vector target(double t) const;
};

Generator zero_generator();
/// `direction` is rescaled to unit Pi-norm.
Generator constant_residual(const Vector& direction, double magnitude, const Matrix& pi);
Generator sinusoid_residual(const Vector& direction, double magnitude, double frequency_hz,
                            const Matrix& pi);
Generator custom_injection(std::vector<std::pair<double, Vector>> table);

struct Episode {
  double t_start = 0.0, t_end = 0.0;  // active on [t_start, t_end)
  Generator generator;
};

class AttackScenario {
 public:
  AttackScenario() = default;
  /// Throws std::invalid_argument on overlapping or empty episodes, or magnitude > 1.
  explicit AttackScenario(std::vector<Episode> episodes);

  const std::vector<Episode>& episodes() const { return episodes_; }
  const Episode* active(double t) const;

 private:
  std::vector<Episode> episodes_;
};

struct SimInit {
  Vector x_p, x_c, x_hat;
  static SimInit zero(const SystemModel& model);
};

struct SimOptions {
  double dt = 0.01;
  double t_end = 500.0;
  std::optional<Ellipsoid> monitor_bound;  // E(R); no detection flags if absent
  int debounce = 1;
  double monitor_tol = 1e-9;
  double blowup = 1e12;
};

struct SimTrace {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<Vector> x_p, x_c, x_hat, e, u, y, y_tilde, dy, r;
  std::vector<bool> safety_ok, stealthy_ok, detect_alarm;
  bool aborted = false;
  std::string abort_reason;

  std::size_t size() const { return t.size(); }
};

/// Fixed-step RK4 on the physical loop (plant, controller, estimator) with the
/// injection held constant over each step. Blow-up ends the run with a partial trace.
SimTrace simulate(const SystemModel& model, const AttackScenario& scenario, const SimInit& init,
                  const SimOptions& opts = {});

struct EquivalenceReport {
  bool ok = false;
  double max_dev_zeta = 0.0;
  double max_dev_u = 0.0;
  std::size_t worst_index = 0;
};

/// Re-integrates zeta' = A zeta + B r, u = E zeta + F r from the trace's initial
/// state. Within a step r(t) = C_p e(t) + Gamma dy_k, the same signal the
/// physical loop sees, so agreement is limited only by rounding.
EquivalenceReport equivalence_check(const SimTrace& trace, const ClosedLoop& cl,
                                    const SystemModel& model, double tol);

/// Unit-Pi-norm residual maximizing the steady-state input ||(-E A^{-1} B + F) r||.
Vector worst_case_direction(const ClosedLoop& cl, const Matrix& pi);

/// Unit-Pi-norm residual direction whose sinusoid at `frequency_hz` drives u
/// furthest out in the R-norm: top eigenvector of Re(G(jw)^H R G(jw)) relative to Pi,
/// with G(s) = E (sI - A)^{-1} B + F.
Vector resonant_direction(const ClosedLoop& cl, const Matrix& r, const Matrix& pi,
                          double frequency_hz);

inline constexpr double kPaperlikeFrequencyHz = 0.12;

/// Three sinusoidal residual episodes (10-110, 175-275, 340-440 s) along
/// `direction`: strong 0.99, medium 0.9, weak 0.2 of the stealthy boundary.
/// At 0.12 Hz each episode spans whole periods, so the target residual ends at zero.
AttackScenario scenario_paperlike(const Vector& direction, const Matrix& pi,
                                  double frequency_hz = kPaperlikeFrequencyHz);

/// CSV with `#` metadata line, header and %.8e values.
void write_csv(std::ostream& out, const SimTrace& trace, const std::string& metadata = "");

}  // namespace reachguard
