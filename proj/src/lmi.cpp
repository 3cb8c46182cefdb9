#include "reachguard/lmi.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace reachguard {

// ---------------------------------------------------------------------------
// AffineMatrix
// ---------------------------------------------------------------------------

AffineMatrix::AffineMatrix(Eigen::Index rows, Eigen::Index cols)
    : constant_(Matrix::Zero(rows, cols)) {}

AffineMatrix::AffineMatrix(Matrix constant) : constant_(std::move(constant)) {}

void AffineMatrix::add_constant(const Matrix& m) {
  if (m.rows() != rows() || m.cols() != cols()) throw DimensionError("AffineMatrix: shape mismatch");
  constant_ += m;
}

void AffineMatrix::add_term(Eigen::Index coord, const Matrix& coeff) {
  if (coeff.rows() != rows() || coeff.cols() != cols()) {
    throw DimensionError("AffineMatrix: coefficient shape mismatch");
  }
  if (coeff.isZero(0.0)) return;
  auto it = terms_.find(coord);
  if (it == terms_.end()) {
    terms_.emplace(coord, coeff);
  } else {
    it->second += coeff;
  }
}

Matrix AffineMatrix::evaluate(const Vector& x) const {
  Matrix out = constant_;
  for (const auto& [k, m] : terms_) {
    if (k >= x.size()) throw DimensionError("AffineMatrix: assignment too short");
    out += x(k) * m;
  }
  return out;
}

AffineMatrix AffineMatrix::transposed() const {
  AffineMatrix out(constant_.transpose());
  for (const auto& [k, m] : terms_) out.terms_.emplace(k, m.transpose());
  return out;
}

AffineMatrix AffineMatrix::symmetrized() const {
  AffineMatrix out(Matrix(0.5 * (constant_ + constant_.transpose())));
  for (const auto& [k, m] : terms_) out.terms_.emplace(k, 0.5 * (m + m.transpose()));
  return out;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& other) {
  add_constant(other.constant_);
  for (const auto& [k, m] : other.terms_) add_term(k, m);
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& other) {
  add_constant(-other.constant_);
  for (const auto& [k, m] : other.terms_) add_term(k, -m);
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  constant_ *= s;
  for (auto& [k, m] : terms_) m *= s;
  return *this;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }
AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }

AffineMatrix as_affine(const VariableBlock& var) {
  return linear_in(var, [](const Matrix& b) { return b; });
}

AffineMatrix scaled(const VariableBlock& scalar_var, const Matrix& m) {
  if (!scalar_var.scalar()) throw std::invalid_argument("scaled: variable must be scalar");
  AffineMatrix out(m.rows(), m.cols());
  out.add_term(scalar_var.offset, m);
  return out;
}

// ---------------------------------------------------------------------------
// BlockSpec
// ---------------------------------------------------------------------------

BlockSpec::BlockSpec(std::vector<Eigen::Index> partition) : partition_(std::move(partition)) {}

Eigen::Index BlockSpec::size() const {
  Eigen::Index s = 0;
  for (auto p : partition_) s += p;
  return s;
}

void BlockSpec::set(int i, int j, AffineMatrix block) {
  if (i > j) throw std::invalid_argument("BlockSpec: only upper-triangle blocks are stored");
  const auto ni = static_cast<size_t>(i), nj = static_cast<size_t>(j);
  if (ni >= partition_.size() || nj >= partition_.size()) {
    throw std::out_of_range("BlockSpec: block index out of range");
  }
  if (block.rows() != partition_[ni] || block.cols() != partition_[nj]) {
    throw DimensionError("BlockSpec: block shape does not match the partition");
  }
  blocks_.insert_or_assign({i, j}, std::move(block));
}

AffineMatrix BlockSpec::assemble() const {
  const Eigen::Index total = size();
  std::vector<Eigen::Index> start(partition_.size(), 0);
  for (size_t i = 1; i < partition_.size(); ++i) start[i] = start[i - 1] + partition_[i - 1];

  AffineMatrix out(total, total);
  auto place = [&](const AffineMatrix& blk, Eigen::Index r0, Eigen::Index c0) {
    Matrix c = Matrix::Zero(total, total);
    c.block(r0, c0, blk.rows(), blk.cols()) = blk.constant();
    out.add_constant(c);
    for (const auto& [k, m] : blk.terms()) {
      Matrix t = Matrix::Zero(total, total);
      t.block(r0, c0, m.rows(), m.cols()) = m;
      out.add_term(k, t);
    }
  };
  for (const auto& [ij, blk] : blocks_) {
    const auto [i, j] = ij;
    const auto r0 = start[static_cast<size_t>(i)], c0 = start[static_cast<size_t>(j)];
    if (i == j) {
      place(blk.symmetrized(), r0, c0);
    } else {
      place(blk, r0, c0);
      place(blk.transposed(), c0, r0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LmiProblem
// ---------------------------------------------------------------------------

const char* to_string(ObjectiveMode mode) {
  return mode == ObjectiveMode::LogDet ? "logdet" : "trace";
}

ObjectiveMode objective_mode_from_string(const std::string& s) {
  if (s == "logdet") return ObjectiveMode::LogDet;
  if (s == "trace") return ObjectiveMode::Trace;
  throw std::invalid_argument("unknown objective mode '" + s + "' (expected logdet or trace)");
}

Eigen::Index LmiProblem::num_coords() const {
  Eigen::Index n = 0;
  for (const auto& v : variables) n += v.coords();
  return n;
}

const VariableBlock& LmiProblem::variable(const std::string& name) const {
  for (const auto& v : variables) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("LmiProblem: no variable named '" + name + "'");
}

const LmiConstraint& LmiProblem::constraint(const std::string& name) const {
  for (const auto& c : constraints) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("LmiProblem: no constraint named '" + name + "'");
}

AffineMatrix LmiProblem::objective_matrix() const { return as_affine(variable(objective.variable)); }

Assignment LmiProblem::decode(const Vector& x) const {
  if (x.size() != num_coords()) throw DimensionError("LmiProblem::decode: wrong vector length");
  Assignment out;
  for (const auto& v : variables) {
    Matrix m(v.dim, v.dim);
    Eigen::Index k = v.offset;
    for (Eigen::Index i = 0; i < v.dim; ++i) {
      for (Eigen::Index j = i; j < v.dim; ++j, ++k) {
        m(i, j) = x(k);
        m(j, i) = x(k);
      }
    }
    out.emplace(v.name, std::move(m));
  }
  return out;
}

Vector LmiProblem::encode(const Assignment& a) const {
  Vector x(num_coords());
  for (const auto& v : variables) {
    auto it = a.find(v.name);
    if (it == a.end()) {
      throw std::invalid_argument("incomplete assignment: missing variable '" + v.name + "'");
    }
    const Matrix& m = it->second;
    if (m.rows() != v.dim || m.cols() != v.dim) {
      throw std::invalid_argument("assignment for '" + v.name + "' has the wrong shape");
    }
    Eigen::Index k = v.offset;
    for (Eigen::Index i = 0; i < v.dim; ++i) {
      for (Eigen::Index j = i; j < v.dim; ++j, ++k) x(k) = 0.5 * (m(i, j) + m(j, i));
    }
  }
  return x;
}

namespace {

struct Builder {
  LmiProblem problem;
  Eigen::Index next = 0;

  VariableBlock add(const std::string& name, Eigen::Index dim) {
    VariableBlock v{name, dim, next};
    next += v.coords();
    problem.variables.push_back(v);
    return v;
  }

  // var >= eps I and var <= cap I
  void bounds(const VariableBlock& var, const LmiOptions& opts) {
    const Matrix eye = Matrix::Identity(var.dim, var.dim);
    AffineMatrix lower = as_affine(var);
    lower.add_constant(-opts.eps_pd * eye);
    AffineMatrix upper = -as_affine(var);
    upper.add_constant(opts.cap * eye);
    problem.constraints.push_back({var.name + "_lower", std::move(lower)});
    problem.constraints.push_back({var.name + "_cap", std::move(upper)});
  }

  void nonneg(const VariableBlock& scalar) {
    problem.constraints.push_back({scalar.name, as_affine(scalar)});
  }
};

void check_options(const LmiOptions& opts) {
  if (!(opts.eps_pd > 0.0) || !(opts.cap > opts.eps_pd)) {
    throw std::invalid_argument("LMI options: need 0 < eps_pd < cap");
  }
}

}  // namespace

LmiProblem build_lemma1(const ClosedLoop& cl, const Ellipsoid& stealth,
                        const Ellipsoid& constraint_set, double alpha, const LmiOptions& opts) {
  check_options(opts);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("build_lemma1: alpha must be finite and >= 0");
  }
  const Eigen::Index n = cl.A.rows();
  const Eigen::Index l = cl.B.cols();
  if (cl.A.cols() != n || cl.B.rows() != n) throw DimensionError("build_lemma1: A/B mismatch");
  if (stealth.dim() != l) throw DimensionError("build_lemma1: stealthy set must be l-dimensional");
  if (constraint_set.dim() != n) {
    throw DimensionError("build_lemma1: constraint set must live in the extended state space");
  }

  Builder b;
  b.problem.family = "lemma1";
  const auto q = b.add("Q", n);
  const auto beta = b.add("beta", 1);
  const auto lambda = b.add("lambda", 1);
  const Matrix& A = cl.A;
  const Matrix& B = cl.B;
  const Matrix& Pi = stealth.shape();
  const Matrix& Phi = constraint_set.shape();
  const Vector& phi = constraint_set.center();

  const std::vector<Eigen::Index> part{n, 1, l};
  BlockSpec H(part), J(part), K(part), G(part);
  H.set(0, 0, linear_in(q, [&](const Matrix& Q) -> Matrix { return A.transpose() * Q + Q * A; }));
  H.set(0, 2, linear_in(q, [&](const Matrix& Q) -> Matrix { return Q * B; }));

  J.set(0, 0, as_affine(q));
  J.set(1, 1, AffineMatrix(Matrix::Constant(1, 1, -1.0)));

  K.set(1, 1, AffineMatrix(Matrix::Constant(1, 1, 1.0)));
  K.set(2, 2, AffineMatrix(Matrix(-Pi)));

  G.set(0, 0, AffineMatrix(Matrix(-Phi)));
  G.set(0, 1, AffineMatrix(Matrix(Phi * phi)));
  G.set(1, 1, AffineMatrix(Matrix::Constant(1, 1, 1.0 - phi.dot(Phi * phi))));

  AffineMatrix lmi = -H.assemble();
  lmi -= alpha * J.assemble();
  lmi -= scaled(beta, K.assemble().constant());
  lmi -= scaled(lambda, G.assemble().constant());

  b.problem.constraints.push_back({"lemma1", std::move(lmi)});
  b.bounds(q, opts);
  b.nonneg(beta);
  b.nonneg(lambda);
  b.problem.objective = {opts.objective, "Q"};
  b.problem.parameters = {{"alpha", alpha}, {"eps_pd", opts.eps_pd}, {"cap", opts.cap}};
  b.problem.components.emplace("H", std::move(H));
  b.problem.components.emplace("J", std::move(J));
  b.problem.components.emplace("K", std::move(K));
  b.problem.components.emplace("G_safe", std::move(G));
  return b.problem;
}

LmiProblem build_lemma1(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                        double alpha, const LmiOptions& opts) {
  const Eigen::Index n = cl.A.rows();
  if (safe.Psi_p.rows() > n) throw DimensionError("build_lemma1: safe set larger than state");
  return build_lemma1(cl, stealth, Ellipsoid(safe.extended_shape(n), safe.extended_center(n)),
                      alpha, opts);
}

LmiProblem build_theorem1(const ClosedLoop& cl, const Ellipsoid& stealth, const Matrix& q,
                          const LmiOptions& opts) {
  check_options(opts);
  const Eigen::Index n = cl.A.rows();
  const Eigen::Index l = cl.B.cols();
  const Eigen::Index m = cl.E.rows();
  if (q.rows() != n || q.cols() != n) throw DimensionError("build_theorem1: Q must be n x n");
  if (stealth.dim() != l) throw DimensionError("build_theorem1: stealthy set must be l-dimensional");
  const Matrix qs = symmetrize(q);
  Eigen::LLT<Matrix> llt(qs);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("build_theorem1: Q must be positive definite");
  }

  Builder b;
  b.problem.family = "theorem1";
  const auto r = b.add("R", m);
  const auto gamma = b.add("gamma", 1);
  const auto tau = b.add("tau", 1);
  const Matrix& E = cl.E;
  const Matrix& F = cl.F;

  const std::vector<Eigen::Index> part{n, 1, l};
  BlockSpec W(part), Y(part), Z(part);
  W.set(0, 0, linear_in(r, [&](const Matrix& R) -> Matrix { return E.transpose() * R * E; }));
  W.set(0, 2, linear_in(r, [&](const Matrix& R) -> Matrix { return E.transpose() * R * F; }));
  W.set(1, 1, AffineMatrix(Matrix::Constant(1, 1, -1.0)));
  W.set(2, 2, linear_in(r, [&](const Matrix& R) -> Matrix { return F.transpose() * R * F; }));

  Y.set(0, 0, AffineMatrix(Matrix(-qs)));
  Y.set(1, 1, AffineMatrix(Matrix::Constant(1, 1, 1.0)));

  Z.set(1, 1, AffineMatrix(Matrix::Constant(1, 1, 1.0)));
  Z.set(2, 2, AffineMatrix(Matrix(-stealth.shape())));

  AffineMatrix lmi = -W.assemble();
  lmi -= scaled(gamma, Y.assemble().constant());
  lmi -= scaled(tau, Z.assemble().constant());

  b.problem.constraints.push_back({"theorem1", std::move(lmi)});
  b.bounds(r, opts);
  b.nonneg(gamma);
  b.nonneg(tau);
  b.problem.objective = {opts.objective, "R"};
  b.problem.parameters = {{"eps_pd", opts.eps_pd}, {"cap", opts.cap}};
  b.problem.components.emplace("W", std::move(W));
  b.problem.components.emplace("Y", std::move(Y));
  b.problem.components.emplace("Z", std::move(Z));
  return b.problem;
}

std::vector<ConstraintMargin> certificate_margin(const LmiProblem& problem,
                                                 const Assignment& assignment) {
  const Vector x = problem.encode(assignment);
  std::vector<ConstraintMargin> out;
  out.reserve(problem.constraints.size());
  for (const auto& c : problem.constraints) {
    out.push_back({c.name, min_eig_sym(c.expr.evaluate(x))});
  }
  return out;
}

double margin_of(const std::vector<ConstraintMargin>& margins, const std::string& name) {
  for (const auto& m : margins) {
    if (m.name == name) return m.min_eig;
  }
  throw std::out_of_range("no margin named '" + name + "'");
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json affine_json(const AffineMatrix& a) {
  nlohmann::json j;
  j["rows"] = a.rows();
  j["cols"] = a.cols();
  j["constant"] = matrix_json(a.constant());
  auto terms = nlohmann::json::array();
  for (const auto& [k, m] : a.terms()) terms.push_back({{"coord", k}, {"coeff", matrix_json(m)}});
  j["terms"] = std::move(terms);
  return j;
}

}  // namespace

nlohmann::json to_json(const LmiProblem& p) {
  nlohmann::json j;
  j["family"] = p.family;
  j["parameters"] = p.parameters;
  auto vars = nlohmann::json::array();
  for (const auto& v : p.variables) {
    vars.push_back({{"name", v.name}, {"dim", v.dim}, {"offset", v.offset}, {"coords", v.coords()}});
  }
  j["variables"] = std::move(vars);
  j["objective"] = {{"mode", to_string(p.objective.mode)}, {"variable", p.objective.variable}};
  auto cons = nlohmann::json::array();
  for (const auto& c : p.constraints) {
    auto cj = affine_json(c.expr);
    cj["name"] = c.name;
    cons.push_back(std::move(cj));
  }
  j["constraints"] = std::move(cons);
  auto comps = nlohmann::json::object();
  for (const auto& [name, spec] : p.components) {
    nlohmann::json cj;
    cj["partition"] = spec.partition();
    auto blocks = nlohmann::json::array();
    for (const auto& [ij, blk] : spec.blocks()) {
      auto bj = affine_json(blk);
      bj["block"] = {ij.first, ij.second};
      blocks.push_back(std::move(bj));
    }
    cj["blocks"] = std::move(blocks);
    comps[name] = std::move(cj);
  }
  j["components"] = std::move(comps);
  return j;
}

}  // namespace reachguard
