#include "reachguard/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace reachguard {

namespace {

double rank_tolerance(const Matrix& m, double sigma_max) {
  const double size = static_cast<double>(std::max(m.rows(), m.cols()));
  return size * std::numeric_limits<double>::epsilon() * sigma_max;
}

}  // namespace

PseudoInverse pinv(const Matrix& m) {
  PseudoInverse out;
  out.value = Matrix::Zero(m.cols(), m.rows());
  if (m.size() == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = rank_tolerance(m, s.size() > 0 ? s(0) : 0.0);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol && s(i) > 0.0) {
      out.value += (1.0 / s(i)) * svd.matrixV().col(i) * svd.matrixU().col(i).transpose();
      ++out.rank;
    }
  }
  return out;
}

Eigen::Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double tol = rank_tolerance(m, s(0));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol && s(i) > 0.0) ++r;
  }
  return r;
}

HurwitzCheck is_hurwitz(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("is_hurwitz: matrix must be square");
  if (m.size() == 0) return {true, -std::numeric_limits<double>::infinity()};
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("is_hurwitz: eigenvalue iteration did not converge");
  }
  const double abscissa = es.eigenvalues().real().maxCoeff();
  return {abscissa < 0.0, abscissa};
}

bool is_observable(const Matrix& a, const Matrix& c) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw DimensionError("is_observable: A must be square");
  if (c.cols() != n) throw DimensionError("is_observable: C must have as many columns as A");
  const Eigen::Index l = c.rows();
  Matrix obs(l * n, n);
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * l, l) = block;
    block = block * a;
  }
  return numerical_rank(obs) == n;
}

Matrix symmetrize(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) throw DimensionError("symmetrize: matrix must be square");
  if (m.size() == 0) return m;
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > rel_tol * std::max(scale, 1e-300)) {
    std::ostringstream msg;
    msg << "matrix is not symmetric (max asymmetry " << asym << ", scale " << scale << ")";
    throw DimensionError(msg.str());
  }
  return 0.5 * (m + m.transpose());
}

double min_eig_sym(const Matrix& m, double rel_tol) {
  const Matrix s = symmetrize(m, rel_tol);
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("min_eig_sym: eigensolver failed");
  return es.eigenvalues()(0);
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw DimensionError(what + ": entries must be finite");
}

Ellipsoid::Ellipsoid(Matrix shape, Vector center) : center_(std::move(center)) {
  if (shape.rows() != shape.cols()) throw DimensionError("Ellipsoid: shape must be square");
  if (shape.rows() != center_.size()) {
    throw DimensionError("Ellipsoid: center dimension does not match shape");
  }
  require_finite(shape, "Ellipsoid shape");
  shape_ = symmetrize(shape);
  if (shape_.size() > 0) {
    const double scale = std::max(shape_.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::SelfAdjointEigenSolver<Matrix> es(shape_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10 * scale) {
      throw DimensionError("Ellipsoid: shape must be positive semidefinite");
    }
  }
}

Ellipsoid::Ellipsoid(Matrix shape) : Ellipsoid(shape, Vector::Zero(shape.rows())) {}

double Ellipsoid::quadratic_form(const Vector& x) const {
  if (x.size() != dim()) throw DimensionError("Ellipsoid: point dimension mismatch");
  const Vector d = x - center_;
  return d.dot(shape_ * d);
}

bool ellipsoid_contains(const Ellipsoid& e, const Vector& x, double tol) {
  if (tol < 0.0) throw std::invalid_argument("ellipsoid_contains: tol must be >= 0");
  return e.quadratic_form(x) <= 1.0 + tol;
}

Ellipsoid project_ellipsoid(const Ellipsoid& e, const std::vector<Eigen::Index>& coords) {
  const Eigen::Index n = e.dim();
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (Eigen::Index c : coords) {
    if (c < 0 || c >= n) throw DimensionError("project_ellipsoid: coordinate out of range");
    if (seen[static_cast<size_t>(c)]) throw DimensionError("project_ellipsoid: duplicate coordinate");
    seen[static_cast<size_t>(c)] = true;
  }
  Eigen::LLT<Matrix> llt(e.shape());
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "project_ellipsoid: shape is not positive definite; regularize with S + eps*I first");
  }
  const Matrix inv = llt.solve(Matrix::Identity(n, n));
  const auto k = static_cast<Eigen::Index>(coords.size());
  Matrix sub(k, k);
  Vector center(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    center(i) = e.center()(coords[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < k; ++j) {
      sub(i, j) = inv(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
    }
  }
  sub = 0.5 * (sub + sub.transpose());
  Eigen::LLT<Matrix> sub_llt(sub);
  if (sub_llt.info() != Eigen::Success) {
    throw NumericalError("project_ellipsoid: projected covariance is singular");
  }
  Matrix shape = sub_llt.solve(Matrix::Identity(k, k));
  return Ellipsoid(0.5 * (shape + shape.transpose()), center);
}

Ellipsoid regularize(const Ellipsoid& e, double eps) {
  return Ellipsoid(e.shape() + eps * Matrix::Identity(e.dim(), e.dim()), e.center());
}

std::vector<Eigen::Vector2d> boundary_points_2d(const Ellipsoid& e, int count) {
  if (e.dim() != 2) throw DimensionError("boundary_points_2d: ellipsoid must be 2-D");
  Eigen::LLT<Matrix> llt(e.shape());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("boundary_points_2d: shape is not positive definite");
  }
  // x = c + L^{-T} v with |v| = 1 gives (x-c)^T L L^T (x-c) = 1.
  const Matrix lt = llt.matrixU();
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double th = 2.0 * std::numbers::pi * i / count;
    const Eigen::Vector2d v(std::cos(th), std::sin(th));
    const Eigen::Vector2d d = lt.triangularView<Eigen::Upper>().solve(v);
    pts.emplace_back(e.center() + d);
  }
  return pts;
}

}  // namespace reachguard
