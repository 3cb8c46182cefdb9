#include "reachguard/maxdet.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace reachguard {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "Unknown";
}

namespace {

// One log-det barrier term  -w log det(C0 + sum_k y_k T_k), with dense term list in the
// current (reconditioned) coordinates.
struct BarrierBlock {
  Matrix constant;
  std::vector<Matrix> terms;
  bool scaled_by_t = false;  // objective term, weighted by t instead of 1

  Matrix at(const Vector& y) const {
    Matrix m = constant;
    for (size_t k = 0; k < terms.size(); ++k) {
      if (y(static_cast<Eigen::Index>(k)) != 0.0) m += y(static_cast<Eigen::Index>(k)) * terms[k];
    }
    return m;
  }
};

BarrierBlock to_block(const AffineMatrix& a, Eigen::Index dim) {
  BarrierBlock b;
  b.constant = a.constant();
  b.terms.assign(static_cast<size_t>(dim), Matrix::Zero(a.rows(), a.cols()));
  for (const auto& [k, m] : a.terms()) b.terms[static_cast<size_t>(k)] = m;
  return b;
}

// Congruence D M D with D = diag(1 / sqrt(max(1, row scale))). PSD-ness is
// unchanged and log det shifts by a constant, so the central path is the same,
// but rows with huge coefficients (e.g. a tiny stealthy set) no longer swamp
// the others in floating point.
void equilibrate(BarrierBlock& b) {
  Vector scale = b.constant.diagonal().cwiseAbs();
  for (const auto& m : b.terms) scale = scale.cwiseMax(m.diagonal().cwiseAbs());
  const Vector d = scale.cwiseMax(1.0).cwiseSqrt().cwiseInverse();
  if ((d.array() == 1.0).all()) return;
  b.constant = d.asDiagonal() * b.constant * d.asDiagonal();
  for (auto& m : b.terms) m = d.asDiagonal() * m * d.asDiagonal();
}

bool cholesky(const Matrix& m, Eigen::LLT<Matrix>& llt) {
  llt.compute(m);
  if (llt.info() != Eigen::Success) return false;
  return (llt.matrixLLT().diagonal().array() > 0.0).all();
}

// Barrier  t * lin.x - sum_j w_j log det F_j(x)  tracked in local coordinates
// x = base + P y.  Every Newton step re-expands around the current point and
// whitens the Hessian, so search directions stay accurate even when the
// Hessian in the original coordinates is far too ill-conditioned to factor.
// Squared Newton decrement below which a point counts as approximately central.
constexpr double kApproxCentred = 0.25;

class CentralPath {
 public:
  // `blocks` are affine in the original coordinates; the path starts at `base`.
  CentralPath(std::vector<BarrierBlock> blocks, Vector lin, Vector base)
      : origin_(std::move(blocks)), lin_(std::move(lin)), base_(std::move(base)),
        p_(Matrix::Identity(base_.size(), base_.size())) {
    blocks_ = origin_;
    for (size_t j = 0; j < blocks_.size(); ++j) blocks_[j].constant = origin_[j].at(base_);
  }

  const Vector& point() const { return base_; }

  bool feasible(const Vector& y) const {
    Eigen::LLT<Matrix> llt;
    for (const auto& b : blocks_) {
      if (!cholesky(b.at(y), llt)) return false;
    }
    return true;
  }

  struct Outcome {
    int iterations = 0;
    bool converged = false;  // at least approximately centred
    double decrement2 = std::numeric_limits<double>::infinity();
  };

  Outcome center(double t, int max_iter, double tol) {
    Outcome out;
    const Eigen::Index dim = base_.size();
    double best = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    for (int it = 0; it < max_iter; ++it) {
      out.iterations = it + 1;
      Vector g;
      Matrix h;
      if (!derivatives(t, g, h)) return out;
      Eigen::SelfAdjointEigenSolver<Matrix> es(h);
      if (es.info() != Eigen::Success) return out;
      const Vector lam = es.eigenvalues();
      const double top = lam.cwiseAbs().maxCoeff();
      if (!(top > 0.0) || !std::isfinite(top)) return out;
      const double floor = top * 1e-30;
      Vector inv_sqrt(dim);
      for (Eigen::Index i = 0; i < dim; ++i) inv_sqrt(i) = 1.0 / std::sqrt(std::max(lam(i), floor));
      const Matrix pn = es.eigenvectors() * inv_sqrt.asDiagonal();
      reparametrize(pn);
      // In the whitened coordinates the Hessian is the identity.
      const Vector gw = pn.transpose() * g;
      const double dec2 = gw.squaredNorm();
      if (!std::isfinite(dec2)) return out;
      out.decrement2 = dec2;
      if (0.5 * dec2 < tol) {
        out.converged = true;
        return out;
      }
      // Rounding in nearly singular blocks puts a floor under the decrement. Once it
      // stops shrinking inside the quadratic region the point is approximately central.
      if (dec2 < 0.5 * best) {
        best = dec2;
        stagnant = 0;
      } else if (++stagnant >= 3 && dec2 <= kApproxCentred) {
        out.converged = true;
        return out;
      }
      const Vector dy = -gw;
      const double dec = std::sqrt(dec2);
      double step = dec > 0.25 ? 1.0 / (1.0 + dec) : 1.0;
      while (!feasible(step * dy) || !shift(step * dy)) {
        step *= 0.5;
        if (step < 1e-14) {
          out.converged = dec2 <= kApproxCentred;
          return out;
        }
      }
    }
    return out;
  }

 private:
  // Gradient and Hessian at the current point (y = 0).
  bool derivatives(double t, Vector& g, Matrix& h) const {
    const Eigen::Index dim = base_.size();
    g = t * lin_;
    h = Matrix::Zero(dim, dim);
    std::vector<Matrix> s(static_cast<size_t>(dim));
    Eigen::LLT<Matrix> llt;
    for (const auto& b : blocks_) {
      const double w = b.scaled_by_t ? t : 1.0;
      if (!cholesky(b.constant, llt)) return false;
      const auto lower = llt.matrixL();
      for (Eigen::Index k = 0; k < dim; ++k) {
        const Matrix y = lower.solve(b.terms[static_cast<size_t>(k)]);
        Matrix sk = lower.solve(y.transpose());
        s[static_cast<size_t>(k)] = 0.5 * (sk + sk.transpose());
        g(k) -= w * s[static_cast<size_t>(k)].trace();
      }
      for (Eigen::Index a = 0; a < dim; ++a) {
        for (Eigen::Index c = a; c < dim; ++c) {
          const double v =
              w * s[static_cast<size_t>(a)].cwiseProduct(s[static_cast<size_t>(c)]).sum();
          h(a, c) += v;
          if (a != c) h(c, a) += v;
        }
      }
    }
    return g.allFinite() && h.allFinite();
  }

  void reparametrize(const Matrix& pn) {
    const Eigen::Index dim = base_.size();
    for (auto& b : blocks_) {
      std::vector<Matrix> next(static_cast<size_t>(dim), Matrix::Zero(b.constant.rows(), b.constant.cols()));
      for (Eigen::Index k = 0; k < dim; ++k) {
        for (Eigen::Index j = 0; j < dim; ++j) {
          const double c = pn(j, k);
          if (c != 0.0) next[static_cast<size_t>(k)] += c * b.terms[static_cast<size_t>(j)];
        }
      }
      b.terms = std::move(next);
    }
    lin_ = pn.transpose() * lin_;
    p_ = p_ * pn;
  }

  // Moves to base + P dy, re-evaluating every block exactly in the original
  // coordinates so rounding in the transformed terms cannot accumulate.
  bool shift(const Vector& dy) {
    const Vector next = base_ + p_ * dy;
    std::vector<Matrix> values;
    values.reserve(origin_.size());
    Eigen::LLT<Matrix> llt;
    for (const auto& b : origin_) {
      Matrix m = b.at(next);
      m = 0.5 * (m + m.transpose());
      if (!cholesky(m, llt)) return false;
      values.push_back(std::move(m));
    }
    for (size_t j = 0; j < blocks_.size(); ++j) blocks_[j].constant = std::move(values[j]);
    base_ = next;
    return true;
  }

  std::vector<BarrierBlock> origin_;
  std::vector<BarrierBlock> blocks_;
  Vector lin_;
  Vector base_;
  Matrix p_;
};

double logdet_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt;
  if (!cholesky(m, llt)) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

SolveReport BarrierSolver::solve(const LmiProblem& problem) const {
  SolveReport rep;
  const Eigen::Index k = problem.num_coords();
  const AffineMatrix objective = problem.objective_matrix();

  Vector x0 = Vector::Zero(k);
  if (opts_.initial) {
    if (opts_.initial->size() != k) throw DimensionError("BarrierSolver: warm start has wrong size");
    x0 = *opts_.initial;
  }

  // ---------------- Phase I: minimize s  s.t.  F_j(x) + s I >= 0,  s >= -1 ----------------
  std::vector<BarrierBlock> relaxed;
  double nu = 0.0;
  double worst = 0.0;
  for (const auto& c : problem.constraints) {
    BarrierBlock b = to_block(c.expr, k + 1);
    equilibrate(b);
    Vector z(k + 1);
    z << x0, 0.0;
    worst = std::max(worst, -min_eig_sym(b.at(z), 1e-6));
    b.terms[static_cast<size_t>(k)] = Matrix::Identity(c.expr.rows(), c.expr.cols());
    nu += static_cast<double>(c.expr.rows());
    relaxed.push_back(std::move(b));
  }
  {
    BarrierBlock lower;
    lower.constant = Matrix::Constant(1, 1, 1.0);
    lower.terms.assign(static_cast<size_t>(k + 1), Matrix::Zero(1, 1));
    lower.terms[static_cast<size_t>(k)] = Matrix::Constant(1, 1, 1.0);
    relaxed.push_back(std::move(lower));
  }
  Vector z0(k + 1);
  z0 << x0, worst + 1.0;
  Vector lin1 = Vector::Zero(k + 1);
  lin1(k) = 1.0;
  CentralPath phase1(std::move(relaxed), lin1, z0);
  const double nu1 = nu + 1.0;

  // Stop once comfortably interior; thin feasible sets keep going until the sign of the
  // optimal slack is settled.
  bool feasible = false;
  bool settled = true;
  double t = 1.0;
  for (int outer = 0; outer < opts_.max_outer; ++outer) {
    const auto nr = phase1.center(t, opts_.max_newton, opts_.newton_tol);
    rep.newton_iterations += nr.iterations;
    rep.phase1_slack = phase1.point()(k);
    const double gap = nu1 / t;
    if (rep.phase1_slack < -opts_.phase1_margin) {
      feasible = true;
      break;
    }
    // The lower bound on the optimal slack only holds at (approximately) central points.
    if (nr.converged &&
        rep.phase1_slack - (nu1 + std::sqrt(std::max(nr.decrement2, 0.0) * nu1)) / t > 0.0) {
      break;
    }
    if (gap < 1e-14 || (!nr.converged && gap < 1e-10)) {
      feasible = rep.phase1_slack < 0.0;
      // A stalled centring with positive slack proves nothing either way.
      settled = feasible || nr.converged;
      break;
    }
    t *= opts_.t_growth;
  }
  if (!feasible && !settled) {
    rep.status = SolveStatus::NumericalTrouble;
    std::ostringstream msg;
    msg << "phase I stalled at slack " << rep.phase1_slack << " without a certificate";
    rep.message = msg.str();
    return rep;
  }
  if (!feasible) {
    rep.status = SolveStatus::Infeasible;
    std::ostringstream msg;
    msg << "phase I found no strictly feasible point (slack " << rep.phase1_slack << ")";
    rep.message = msg.str();
    return rep;
  }

  // ---------------- Phase II: central path on the objective ----------------
  const Vector x1 = phase1.point().head(k);
  std::vector<BarrierBlock> blocks;
  for (const auto& c : problem.constraints) {
    blocks.push_back(to_block(c.expr, k));
    equilibrate(blocks.back());
  }
  Vector lin2 = Vector::Zero(k);
  if (problem.objective.mode == ObjectiveMode::LogDet) {
    BarrierBlock ob = to_block(objective, k);
    ob.scaled_by_t = true;
    blocks.push_back(std::move(ob));
  } else {
    for (const auto& [kk, m] : objective.terms()) lin2(kk) -= m.trace();
  }
  CentralPath phase2(std::move(blocks), lin2, x1);

  // For an approximately central point with decrement d the duality gap is at most
  // (nu + sqrt(d nu)) / t. Keep the last such point; stop when centring breaks down.
  t = 1.0;
  Vector best_x;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opts_.max_outer; ++outer) {
    ++rep.outer_iterations;
    const auto nr = phase2.center(t, opts_.max_newton, opts_.newton_tol);
    rep.newton_iterations += nr.iterations;
    if (!nr.converged) {
      rep.stalled = true;
      break;
    }
    best_x = phase2.point();
    best_gap = (nu + std::sqrt(std::max(nr.decrement2, 0.0) * nu)) / t;
    if (best_gap < opts_.gap_tol) break;
    t *= opts_.t_growth;
  }
  rep.gap = best_gap;
  const bool done = best_gap < opts_.gap_tol;
  if (best_x.size() == 0) {
    rep.status = SolveStatus::NumericalTrouble;
    rep.message = "first centring step failed";
    return rep;
  }
  rep.x = best_x;
  const Matrix g = objective.evaluate(rep.x);
  rep.objective = problem.objective.mode == ObjectiveMode::LogDet ? logdet_spd(g) : g.trace();
  if (done || rep.gap <= opts_.accept_gap * std::max(1.0, std::abs(rep.objective))) {
    rep.status = SolveStatus::Optimal;
    if (!done) {
      std::ostringstream msg;
      msg << "precision limit reached at gap " << rep.gap << " (accepted)";
      rep.message = msg.str();
    }
  } else {
    rep.status = SolveStatus::NumericalTrouble;
    std::ostringstream msg;
    msg << "centring stalled at gap " << rep.gap;
    rep.message = msg.str();
    rep.x.resize(0);
  }
  return rep;
}

}  // namespace reachguard
