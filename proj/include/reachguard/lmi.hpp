#pragma once

#include "reachguard/model.hpp"
#include "reachguard/numerics.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace reachguard {

/// A named block of decision variables: a symmetric dim x dim matrix
/// (dim == 1 is a scalar). Coordinates are the upper triangle, row-major.
struct VariableBlock {
  std::string name;
  Eigen::Index dim = 1;
  Eigen::Index offset = 0;

  Eigen::Index coords() const { return dim * (dim + 1) / 2; }
  bool scalar() const { return dim == 1; }
};

/// M(x) = M0 + sum_k x_k M_k. Only coordinates with a nonzero
/// coefficient are stored.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols);
  explicit AffineMatrix(Matrix constant);

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Matrix& constant() const { return constant_; }
  const std::map<Eigen::Index, Matrix>& terms() const { return terms_; }

  void add_constant(const Matrix& m);
  void add_term(Eigen::Index coord, const Matrix& coeff);
  Matrix evaluate(const Vector& x) const;

  AffineMatrix transposed() const;
  /// Symmetric part of every coefficient (exact symmetry for diagonal blocks).
  AffineMatrix symmetrized() const;

  AffineMatrix& operator+=(const AffineMatrix& other);
  AffineMatrix& operator-=(const AffineMatrix& other);
  AffineMatrix& operator*=(double s);

 private:
  Matrix constant_;
  std::map<Eigen::Index, Matrix> terms_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator*(double s, AffineMatrix a);
AffineMatrix operator-(AffineMatrix a);

/// `f` must be linear; evaluated on each basis element of the symmetric block.
template <typename LinearMap>
AffineMatrix linear_in(const VariableBlock& var, LinearMap&& f) {
  AffineMatrix out;
  Eigen::Index k = var.offset;
  for (Eigen::Index i = 0; i < var.dim; ++i) {
    for (Eigen::Index j = i; j < var.dim; ++j, ++k) {
      Matrix basis = Matrix::Zero(var.dim, var.dim);
      basis(i, j) = 1.0;
      basis(j, i) = 1.0;
      Matrix image = f(basis);
      if (out.rows() == 0 && out.cols() == 0) out = AffineMatrix(image.rows(), image.cols());
      out.add_term(k, image);
    }
  }
  return out;
}

/// The variable block itself as an affine matrix (identity map).
AffineMatrix as_affine(const VariableBlock& var);

/// Scalar variable times a constant matrix.
AffineMatrix scaled(const VariableBlock& scalar_var, const Matrix& m);

/// Symmetric block matrix given by its upper-triangle blocks; absent
/// blocks are zero, the lower triangle is the transpose of the upper one.
class BlockSpec {
 public:
  explicit BlockSpec(std::vector<Eigen::Index> partition);

  void set(int i, int j, AffineMatrix block);
  AffineMatrix assemble() const;

  const std::vector<Eigen::Index>& partition() const { return partition_; }
  const std::map<std::pair<int, int>, AffineMatrix>& blocks() const { return blocks_; }
  Eigen::Index size() const;

 private:
  std::vector<Eigen::Index> partition_;
  std::map<std::pair<int, int>, AffineMatrix> blocks_;
};

enum class ObjectiveMode { LogDet, Trace };

const char* to_string(ObjectiveMode mode);
ObjectiveMode objective_mode_from_string(const std::string& s);

struct LmiConstraint {
  std::string name;
  AffineMatrix expr;  // required: expr(x) >= 0 (PSD)
};

struct LmiObjective {
  ObjectiveMode mode = ObjectiveMode::LogDet;
  std::string variable;  // maximized: log det or trace of this block
};

using Assignment = std::map<std::string, Matrix>;

struct LmiProblem {
  std::string family;  // "lemma1" or "theorem1"
  std::vector<VariableBlock> variables;
  std::vector<LmiConstraint> constraints;
  LmiObjective objective;
  std::map<std::string, double> parameters;
  /// Named building blocks (H, J, K, G_safe or W, Y, Z) for inspection.
  std::map<std::string, BlockSpec> components;

  Eigen::Index num_coords() const;
  const VariableBlock& variable(const std::string& name) const;
  const LmiConstraint& constraint(const std::string& name) const;
  AffineMatrix objective_matrix() const;

  Assignment decode(const Vector& x) const;
  /// Throws std::invalid_argument when a variable is missing or misshaped.
  Vector encode(const Assignment& a) const;
};

struct LmiOptions {
  double eps_pd = 1e-8;  // Q >= eps I stands in for Q > 0
  double cap = 1e12;     // Q <= cap I keeps degenerate directions finite
  ObjectiveMode objective = ObjectiveMode::LogDet;
};

/// Invariant-ellipsoid LMIs for zeta' = A zeta + B r with r in E(Pi) and
/// zeta constrained to E(Phi, phi_bar):
///   -H - alpha J - beta K - lambda G_safe >= 0,  Q >= eps I,  beta, lambda >= 0.
LmiProblem build_lemma1(const ClosedLoop& cl, const Ellipsoid& stealth,
                        const Ellipsoid& constraint_set, double alpha,
                        const LmiOptions& opts = {});

/// Same, with the extended safe set (Psi, psi_bar) as the constraint set.
LmiProblem build_lemma1(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                        double alpha, const LmiOptions& opts = {});

/// Input-bound LMIs given an invariant ellipsoid E(Q):
///   -W - gamma Y - tau Z >= 0,  R >= eps I,  gamma, tau >= 0.
LmiProblem build_theorem1(const ClosedLoop& cl, const Ellipsoid& stealth, const Matrix& q,
                          const LmiOptions& opts = {});

struct ConstraintMargin {
  std::string name;
  double min_eig = 0.0;
};

std::vector<ConstraintMargin> certificate_margin(const LmiProblem& problem,
                                                 const Assignment& assignment);

double margin_of(const std::vector<ConstraintMargin>& margins, const std::string& name);

nlohmann::json to_json(const LmiProblem& problem);

}  // namespace reachguard
