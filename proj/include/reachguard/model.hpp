#pragma once

#include "reachguard/numerics.hpp"

#include <stdexcept>
#include <string>

namespace reachguard {

// Continuous-time LTI blocks of the attacked loop:
//   plant       x_p' = A x_p + B u,        y  = C x_p + D u
//   controller  x_c' = A x_c + B y~,       u  = C x_c + D y~
//   estimator   x^'  = A_p x^ + B_p u + L (y~ - y^)
//   attack      y~   = y + Gamma dy

struct PlantModel {
  Matrix A, B, C, D;
  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

struct ControllerModel {
  Matrix A, B, C, D;
  Eigen::Index states() const { return A.rows(); }
};

struct DetectorModel {
  Matrix L;   // observer gain, n_p x l
  Matrix Pi;  // stealthy set shape, l x l, symmetric PD
};

class AttackModel {
 public:
  /// Gamma must be a 0/1 column-selection matrix (l x s, at most one 1 per column).
  explicit AttackModel(Matrix gamma);

  const Matrix& gamma() const { return gamma_; }
  const Matrix& gamma_pinv() const { return gamma_pinv_; }
  /// Gamma * Gamma^+ (identity on attacked channels).
  Matrix selector() const { return gamma_ * gamma_pinv_; }
  bool full_row_rank() const;

 private:
  Matrix gamma_;
  Matrix gamma_pinv_;
};

/// Safe set on plant states, (x_p - psi)^T Psi_p (x_p - psi) <= 1.
struct SafeSet {
  Matrix Psi_p;
  Vector psi_bar_p;

  /// Zero-padded to the extended state [x_p; x_c; e].
  Matrix extended_shape(Eigen::Index n) const;
  Vector extended_center(Eigen::Index n) const;
  bool contains(const Vector& x_p) const;
};

SafeSet make_safe_set(const Matrix& psi_p, const Vector& psi_bar_p);

struct ClosedLoopDims {
  Eigen::Index n_p = 0, n_c = 0, n = 0, m = 0, l = 0, s = 0;
};

/// Extended loop on zeta = [x_p; x_c; e]:  zeta' = A zeta + B r,  u = E zeta + F r.
struct ClosedLoop {
  Matrix A, B, E, F;
  Matrix Lambda;  // (I_l - D_p D_c)^{-1}
  ClosedLoopDims dims;
  double wellposed_condition = 1.0;
  double spectral_abscissa = 0.0;
};

class ModelError : public std::runtime_error {
 public:
  enum class Kind { Dimension, NotWellPosed, NotStable, NotObservable, InvalidAttack };
  ModelError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(ModelError::Kind kind);

/// Above this condition number I - D_p D_c is treated as singular.
inline constexpr double kWellPosedConditionLimit = 1e12;

/// Throws ModelError(Dimension) naming the offending field (e.g. "plant.A").
void check_dimensions(const PlantModel& plant, const ControllerModel& controller,
                      const DetectorModel& detector, const AttackModel& attack);

ClosedLoop assemble_closed_loop(const PlantModel& plant, const ControllerModel& controller,
                                const DetectorModel& detector, const AttackModel& attack);

struct AssumptionReport {
  struct Item {
    bool pass = false;
    double value = 0.0;  // condition number, abscissa or rank
    std::string detail;
  };
  Item well_posed;
  Item closed_loop_stable;
  Item observable;
  Item observer_stable;

  bool all_pass() const {
    return well_posed.pass && closed_loop_stable.pass && observable.pass && observer_stable.pass;
  }
};

/// Never throws on failing checks; each item carries its own verdict.
AssumptionReport validate_assumptions(const PlantModel& plant, const ControllerModel& controller,
                                      const DetectorModel& detector);

/// dy = Gamma^+ (r - C_p e)
Vector attack_from_residual(const AttackModel& attack, const Vector& r, const Vector& e,
                            const Matrix& c_p);

}  // namespace reachguard
