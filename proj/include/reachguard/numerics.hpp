#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace reachguard {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ----------------------------------------------------------------------------
// Dense linear algebra helpers
// ----------------------------------------------------------------------------

struct PseudoInverse {
  Matrix value;
  Eigen::Index rank = 0;
};

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// max(rows, cols) * eps * sigma_max are treated as zero.
PseudoInverse pinv(const Matrix& m);

/// Numerical rank with the same tolerance as pinv.
Eigen::Index numerical_rank(const Matrix& m);

struct HurwitzCheck {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;
};

HurwitzCheck is_hurwitz(const Matrix& m);

/// Rank test on [C; CA; ...; CA^{n-1}].
bool is_observable(const Matrix& a, const Matrix& c);

/// (M + M^T) / 2; throws if the asymmetry exceeds `rel_tol` relative to max|M|.
Matrix symmetrize(const Matrix& m, double rel_tol = 1e-10);

/// Smallest eigenvalue of a (nearly) symmetric matrix.
double min_eig_sym(const Matrix& m, double rel_tol = 1e-10);

/// Condition number in the 2-norm (inf for singular input).
double condition_number(const Matrix& m);

/// Throws DimensionError if any entry is NaN or inf.
void require_finite(const Matrix& m, const std::string& what);

// ----------------------------------------------------------------------------
// Ellipsoids  {x : (x - c)^T S (x - c) <= 1}
// ----------------------------------------------------------------------------

class Ellipsoid {
 public:
  /// Shape must be symmetric PSD; it is symmetrized on construction.
  Ellipsoid(Matrix shape, Vector center);
  explicit Ellipsoid(Matrix shape);

  const Matrix& shape() const { return shape_; }
  const Vector& center() const { return center_; }
  Eigen::Index dim() const { return center_.size(); }

  double quadratic_form(const Vector& x) const;

 private:
  Matrix shape_;
  Vector center_;
};

bool ellipsoid_contains(const Ellipsoid& e, const Vector& x, double tol = 0.0);

/// Image of E under the coordinate selection P: shape (P S^{-1} P^T)^{-1},
/// center P c. Requires a positive definite shape.
Ellipsoid project_ellipsoid(const Ellipsoid& e, const std::vector<Eigen::Index>& coords);

/// Returns E with shape S + eps I (explicit regularization for rank-deficient sets).
Ellipsoid regularize(const Ellipsoid& e, double eps = 1e-9);

/// `count` points on the boundary of a 2-D ellipsoid, evenly spaced in angle.
std::vector<Eigen::Vector2d> boundary_points_2d(const Ellipsoid& e, int count);

}  // namespace reachguard
