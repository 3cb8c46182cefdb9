#include "reachguard/model.hpp"

#include <cmath>
#include <sstream>

namespace reachguard {

namespace {

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << name << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    throw ModelError(ModelError::Kind::Dimension, msg.str());
  }
  if (!m.allFinite()) {
    throw ModelError(ModelError::Kind::Dimension, std::string(name) + ": entries must be finite");
  }
}

void expect_square(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) {
    std::ostringstream msg;
    msg << name << ": must be square, got " << m.rows() << "x" << m.cols();
    throw ModelError(ModelError::Kind::Dimension, msg.str());
  }
}

// Nominal plant/controller interconnection (upper-left block of the extended A).
Matrix nominal_loop(const PlantModel& p, const ControllerModel& c, const Matrix& lambda) {
  const Eigen::Index np = p.states();
  const Eigen::Index nc = c.states();
  Matrix a(np + nc, np + nc);
  a.topLeftCorner(np, np) = p.A + p.B * c.D * lambda * p.C;
  a.topRightCorner(np, nc) = p.B * c.C + p.B * c.D * lambda * p.D * c.C;
  a.bottomLeftCorner(nc, np) = c.B * lambda * p.C;
  a.bottomRightCorner(nc, nc) = c.A + c.B * lambda * p.D * c.C;
  return a;
}

struct WellPosedness {
  Matrix lambda;
  double condition = 1.0;
  bool ok = false;
};

WellPosedness well_posedness(const PlantModel& p, const ControllerModel& c) {
  const Eigen::Index l = p.outputs();
  const Matrix m = Matrix::Identity(l, l) - p.D * c.D;
  WellPosedness out;
  out.condition = condition_number(m);
  out.ok = std::isfinite(out.condition) && out.condition <= kWellPosedConditionLimit;
  if (out.ok) out.lambda = m.partialPivLu().inverse();
  return out;
}

}  // namespace

const char* to_string(ModelError::Kind kind) {
  switch (kind) {
    case ModelError::Kind::Dimension: return "Dimension";
    case ModelError::Kind::NotWellPosed: return "NotWellPosed";
    case ModelError::Kind::NotStable: return "NotStable";
    case ModelError::Kind::NotObservable: return "NotObservable";
    case ModelError::Kind::InvalidAttack: return "InvalidAttack";
  }
  return "Unknown";
}

AttackModel::AttackModel(Matrix gamma) : gamma_(std::move(gamma)) {
  if (gamma_.rows() == 0 || gamma_.cols() == 0 || gamma_.cols() > gamma_.rows()) {
    throw ModelError(ModelError::Kind::InvalidAttack,
                     "attack.Gamma: must be l x s with 1 <= s <= l");
  }
  for (Eigen::Index j = 0; j < gamma_.cols(); ++j) {
    int ones = 0;
    for (Eigen::Index i = 0; i < gamma_.rows(); ++i) {
      const double v = gamma_(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw ModelError(ModelError::Kind::InvalidAttack,
                         "attack.Gamma: entries must be 0 or 1 (selection matrix)");
      }
    }
    if (ones > 1) {
      throw ModelError(ModelError::Kind::InvalidAttack,
                       "attack.Gamma: at most one 1 per column");
    }
  }
  gamma_pinv_ = pinv(gamma_).value;
}

bool AttackModel::full_row_rank() const { return numerical_rank(gamma_) == gamma_.rows(); }

Matrix SafeSet::extended_shape(Eigen::Index n) const {
  Matrix psi = Matrix::Zero(n, n);
  psi.topLeftCorner(Psi_p.rows(), Psi_p.cols()) = Psi_p;
  return psi;
}

Vector SafeSet::extended_center(Eigen::Index n) const {
  Vector c = Vector::Zero(n);
  c.head(psi_bar_p.size()) = psi_bar_p;
  return c;
}

bool SafeSet::contains(const Vector& x_p) const {
  const Vector d = x_p - psi_bar_p;
  return d.dot(Psi_p * d) <= 1.0;
}

SafeSet make_safe_set(const Matrix& psi_p, const Vector& psi_bar_p) {
  if (psi_p.rows() != psi_p.cols() || psi_p.rows() != psi_bar_p.size()) {
    throw ModelError(ModelError::Kind::Dimension,
                     "safe_set: Psi_p must be square and match psi_bar_p");
  }
  SafeSet s{symmetrize(psi_p), psi_bar_p};
  if (s.Psi_p.size() > 0 && min_eig_sym(s.Psi_p) < -1e-10 * s.Psi_p.cwiseAbs().maxCoeff()) {
    throw ModelError(ModelError::Kind::Dimension, "safe_set.Psi_p: must be positive semidefinite");
  }
  return s;
}

void check_dimensions(const PlantModel& p, const ControllerModel& c, const DetectorModel& d,
                      const AttackModel& a) {
  expect_square(p.A, "plant.A");
  const Eigen::Index np = p.A.rows();
  const Eigen::Index m = p.B.cols();
  const Eigen::Index l = p.C.rows();
  expect_shape(p.A, np, np, "plant.A");
  expect_shape(p.B, np, m, "plant.B");
  expect_shape(p.C, l, np, "plant.C");
  expect_shape(p.D, l, m, "plant.D");
  expect_square(c.A, "controller.A");
  const Eigen::Index nc = c.A.rows();
  expect_shape(c.B, nc, l, "controller.B");
  expect_shape(c.C, m, nc, "controller.C");
  expect_shape(c.D, m, l, "controller.D");
  expect_shape(d.L, np, l, "detector.L");
  expect_shape(d.Pi, l, l, "detector.Pi");
  if (a.gamma().rows() != l) {
    throw ModelError(ModelError::Kind::Dimension, "attack.Gamma: row count must equal outputs l");
  }
}

ClosedLoop assemble_closed_loop(const PlantModel& p, const ControllerModel& c,
                                const DetectorModel& d, const AttackModel& atk) {
  check_dimensions(p, c, d, atk);
  const auto wp = well_posedness(p, c);
  if (!wp.ok) {
    std::ostringstream msg;
    msg << "I - D_p D_c is singular or ill-conditioned (condition " << wp.condition << ")";
    throw ModelError(ModelError::Kind::NotWellPosed, msg.str());
  }
  if (!is_observable(p.A, p.C)) {
    throw ModelError(ModelError::Kind::NotObservable, "(plant.A, plant.C) is not observable");
  }

  ClosedLoop cl;
  auto& dims = cl.dims;
  dims.n_p = p.states();
  dims.n_c = c.states();
  dims.n = 2 * dims.n_p + dims.n_c;
  dims.m = p.inputs();
  dims.l = p.outputs();
  dims.s = atk.gamma().cols();
  cl.Lambda = wp.lambda;
  cl.wellposed_condition = wp.condition;

  const Eigen::Index np = dims.n_p, nc = dims.n_c, n = dims.n, m = dims.m, l = dims.l;
  const Matrix gg = atk.selector();
  const Matrix& lam = cl.Lambda;
  // Lambda absorbs the paired terms: D_c + D_c Lambda D_p D_c = D_c Lambda and
  // I + Lambda D_p D_c = Lambda.
  const Matrix dcl = c.D * lam;  // m x l

  cl.A = Matrix::Zero(n, n);
  cl.A.topLeftCorner(np + nc, np + nc) = nominal_loop(p, c, lam);
  cl.A.block(0, np + nc, np, np) = -p.B * dcl * gg * p.C;
  cl.A.block(np, np + nc, nc, np) = -c.B * lam * gg * p.C;
  cl.A.block(np + nc, np + nc, np, np) = p.A - d.L * p.C + d.L * gg * p.C;

  cl.B = Matrix::Zero(n, l);
  cl.B.topRows(np) = p.B * dcl * gg;
  cl.B.middleRows(np, nc) = c.B * lam * gg;
  cl.B.bottomRows(np) = -d.L * gg;

  cl.E = Matrix::Zero(m, n);
  cl.E.leftCols(np) = dcl * p.C;
  cl.E.middleCols(np, nc) = c.C + dcl * p.D * c.C;
  cl.E.rightCols(np) = -dcl * gg * p.C;

  cl.F = dcl * gg;

  const auto h = is_hurwitz(cl.A);
  cl.spectral_abscissa = h.spectral_abscissa;
  if (!h.hurwitz) {
    std::ostringstream msg;
    msg << "extended closed-loop A is not Hurwitz (spectral abscissa " << h.spectral_abscissa
        << ")";
    throw ModelError(ModelError::Kind::NotStable, msg.str());
  }
  const auto obs = is_hurwitz(p.A - d.L * p.C);
  if (!obs.hurwitz) {
    std::ostringstream msg;
    msg << "observer A_p - L C_p is not Hurwitz (spectral abscissa " << obs.spectral_abscissa
        << ")";
    throw ModelError(ModelError::Kind::NotStable, msg.str());
  }
  return cl;
}

AssumptionReport validate_assumptions(const PlantModel& p, const ControllerModel& c,
                                      const DetectorModel& d) {
  AssumptionReport rep;
  const auto wp = well_posedness(p, c);
  rep.well_posed.pass = wp.ok;
  rep.well_posed.value = wp.condition;
  rep.well_posed.detail = "condition number of I - D_p D_c";

  if (wp.ok) {
    const auto h = is_hurwitz(nominal_loop(p, c, wp.lambda));
    rep.closed_loop_stable.pass = h.hurwitz;
    rep.closed_loop_stable.value = h.spectral_abscissa;
    rep.closed_loop_stable.detail = "spectral abscissa of the nominal plant/controller loop";
  } else {
    rep.closed_loop_stable.detail = "not evaluated: loop is not well posed";
  }

  const Eigen::Index np = p.states();
  Matrix obs(p.C.rows() * np, np);
  Matrix blk = p.C;
  for (Eigen::Index k = 0; k < np; ++k) {
    obs.middleRows(k * p.C.rows(), p.C.rows()) = blk;
    blk = blk * p.A;
  }
  const auto rank = numerical_rank(obs);
  rep.observable.pass = rank == np;
  rep.observable.value = static_cast<double>(rank);
  rep.observable.detail = "rank of the observability matrix (needs " + std::to_string(np) + ")";

  const auto oh = is_hurwitz(p.A - d.L * p.C);
  rep.observer_stable.pass = oh.hurwitz;
  rep.observer_stable.value = oh.spectral_abscissa;
  rep.observer_stable.detail = "spectral abscissa of A_p - L C_p";
  return rep;
}

Vector attack_from_residual(const AttackModel& attack, const Vector& r, const Vector& e,
                            const Matrix& c_p) {
  if (r.size() != attack.gamma().rows() || c_p.rows() != r.size() || c_p.cols() != e.size()) {
    throw DimensionError("attack_from_residual: dimension mismatch");
  }
  return attack.gamma_pinv() * (r - c_p * e);
}

}  // namespace reachguard
