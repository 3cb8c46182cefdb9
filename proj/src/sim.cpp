#include "reachguard/sim.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <complex>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace reachguard {

const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Zero: return "zero";
    case GeneratorKind::ConstantResidual: return "constant_residual";
    case GeneratorKind::SinusoidResidual: return "sinusoid_residual";
    case GeneratorKind::Custom: return "custom";
  }
  return "unknown";
}

namespace {

Vector pi_normalized(const Vector& d, const Matrix& pi) {
  if (d.size() != pi.rows()) throw DimensionError("attack direction does not match Pi");
  const double n2 = d.dot(pi * d);
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw std::invalid_argument("attack direction has zero Pi-norm");
  return d / std::sqrt(n2);
}

void check_magnitude(double magnitude) {
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
    throw std::invalid_argument("residual magnitude must lie in [0, 1]");
  }
}

}  // namespace

Vector Generator::target(double t) const {
  switch (kind) {
    case GeneratorKind::ConstantResidual: return magnitude * direction;
    case GeneratorKind::SinusoidResidual:
      return magnitude * std::sin(2.0 * std::numbers::pi * frequency_hz * t) * direction;  // t since episode start
    default: throw std::logic_error("target() on a non-residual generator");
  }
}

Generator zero_generator() { return {}; }

Generator constant_residual(const Vector& direction, double magnitude, const Matrix& pi) {
  check_magnitude(magnitude);
  Generator g;
  g.kind = GeneratorKind::ConstantResidual;
  g.direction = pi_normalized(direction, pi);
  g.magnitude = magnitude;
  return g;
}

Generator sinusoid_residual(const Vector& direction, double magnitude, double frequency_hz,
                            const Matrix& pi) {
  check_magnitude(magnitude);
  if (!(frequency_hz >= 0.0)) throw std::invalid_argument("frequency must be >= 0");
  Generator g;
  g.kind = GeneratorKind::SinusoidResidual;
  g.direction = pi_normalized(direction, pi);
  g.magnitude = magnitude;
  g.frequency_hz = frequency_hz;
  return g;
}

Generator custom_injection(std::vector<std::pair<double, Vector>> table) {
  if (table.empty()) throw std::invalid_argument("custom injection table is empty");
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i].first < table[i - 1].first) throw std::invalid_argument("custom table times must be sorted");
    if (table[i].second.size() != table[0].second.size()) throw DimensionError("custom table rows differ in size");
  }
  Generator g;
  g.kind = GeneratorKind::Custom;
  g.table = std::move(table);
  return g;
}

AttackScenario::AttackScenario(std::vector<Episode> episodes) : episodes_(std::move(episodes)) {
  std::sort(episodes_.begin(), episodes_.end(),
            [](const Episode& a, const Episode& b) { return a.t_start < b.t_start; });
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const auto& ep = episodes_[i];
    if (!(ep.t_end > ep.t_start)) throw std::invalid_argument("episode must have t_end > t_start");
    if (i > 0 && ep.t_start < episodes_[i - 1].t_end) throw std::invalid_argument("episodes overlap");
    if (ep.generator.kind == GeneratorKind::ConstantResidual ||
        ep.generator.kind == GeneratorKind::SinusoidResidual) {
      check_magnitude(ep.generator.magnitude);
    }
  }
}

const Episode* AttackScenario::active(double t) const {
  for (const auto& ep : episodes_) {
    if (t >= ep.t_start && t < ep.t_end) return &ep;
  }
  return nullptr;
}

SimInit SimInit::zero(const SystemModel& model) {
  return {Vector::Zero(model.plant.states()), Vector::Zero(model.controller.states()),
          Vector::Zero(model.plant.states())};
}

namespace {

struct Loop {
  const SystemModel& m;
  Eigen::Index np, nc;
  Eigen::PartialPivLU<Matrix> feedthrough;  // I - D_c D_p

  explicit Loop(const SystemModel& model)
      : m(model), np(model.plant.states()), nc(model.controller.states()) {
    const Eigen::Index mi = model.plant.inputs();
    feedthrough.compute(Matrix::Identity(mi, mi) - model.controller.D * model.plant.D);
  }

  struct Signals {
    Vector u, y, y_tilde, y_hat;
  };

  Signals signals(const Vector& x, const Vector& dy) const {
    const auto xp = x.segment(0, np);
    const auto xc = x.segment(np, nc);
    const auto xh = x.segment(np + nc, np);
    const Vector inj = m.attack.gamma() * dy;
    Signals s;
    s.u = feedthrough.solve(m.controller.C * xc + m.controller.D * (m.plant.C * xp + inj));
    s.y = m.plant.C * xp + m.plant.D * s.u;
    s.y_tilde = s.y + inj;
    s.y_hat = m.plant.C * xh + m.plant.D * s.u;
    return s;
  }

  Vector deriv(const Vector& x, const Vector& dy) const {
    const Signals s = signals(x, dy);
    Vector d(x.size());
    d.segment(0, np) = m.plant.A * x.segment(0, np) + m.plant.B * s.u;
    d.segment(np, nc) = m.controller.A * x.segment(np, nc) + m.controller.B * s.y_tilde;
    d.segment(np + nc, np) = m.plant.A * x.segment(np + nc, np) + m.plant.B * s.u +
                             m.detector.L * (s.y_tilde - s.y_hat);
    return d;
  }
};

template <class F>
Vector rk4(const F& f, const Vector& x, double h) {
  const Vector k1 = f(x);
  const Vector k2 = f(x + 0.5 * h * k1);
  const Vector k3 = f(x + 0.5 * h * k2);
  const Vector k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector injection(const SystemModel& m, const AttackScenario& sc, double t, const Vector& e) {
  const Eigen::Index s = m.attack.gamma().cols();
  const Episode* ep = sc.active(t);
  if (!ep) return Vector::Zero(s);
  const Generator& g = ep->generator;
  switch (g.kind) {
    case GeneratorKind::Zero: return Vector::Zero(s);
    case GeneratorKind::Custom: {
      auto it = std::upper_bound(g.table.begin(), g.table.end(), t,
                                 [](double v, const auto& row) { return v < row.first; });
      if (it == g.table.begin()) return Vector::Zero(s);
      const Vector& dy = std::prev(it)->second;
      if (dy.size() != s) throw DimensionError("custom injection has wrong dimension");
      return dy;
    }
    default: {
      const Vector target = g.target(t - ep->t_start);
      if (target.size() != m.plant.outputs()) throw DimensionError("residual target has wrong dimension");
      return m.attack.gamma_pinv() * (target - m.plant.C * e);
    }
  }
}

}  // namespace

SimTrace simulate(const SystemModel& model, const AttackScenario& scenario, const SimInit& init,
                  const SimOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.t_end > 0.0)) throw std::invalid_argument("simulate: dt and t_end must be > 0");
  const Eigen::Index np = model.plant.states(), nc = model.controller.states();
  if (init.x_p.size() != np || init.x_hat.size() != np || init.x_c.size() != nc) {
    throw DimensionError("simulate: initial state dimensions do not match the model");
  }
  if (opts.monitor_bound && opts.monitor_bound->dim() != model.plant.inputs()) {
    throw DimensionError("simulate: monitor bound dimension differs from the input dimension");
  }
  const Loop loop(model);
  std::optional<MonitorState> monitor;
  if (opts.monitor_bound) monitor.emplace(*opts.monitor_bound, opts.debounce, opts.monitor_tol);

  Vector x(2 * np + nc);
  x << init.x_p, init.x_c, init.x_hat;
  const auto steps = static_cast<long>(std::llround(opts.t_end / opts.dt));

  SimTrace tr;
  tr.dt = opts.dt;
  auto reserve = [&](auto& v) { v.reserve(static_cast<std::size_t>(steps + 1)); };
  reserve(tr.t), reserve(tr.x_p), reserve(tr.x_c), reserve(tr.x_hat), reserve(tr.e), reserve(tr.u);
  reserve(tr.y), reserve(tr.y_tilde), reserve(tr.dy), reserve(tr.r);

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * opts.dt;
    const Vector xp = x.segment(0, np);
    const Vector xh = x.segment(np + nc, np);
    const Vector e = xp - xh;
    const Vector dy = injection(model, scenario, t, e);
    const auto s = loop.signals(x, dy);
    const Vector r = s.y_tilde - s.y_hat;

    tr.t.push_back(t);
    tr.x_p.push_back(xp);
    tr.x_c.push_back(x.segment(np, nc));
    tr.x_hat.push_back(xh);
    tr.e.push_back(e);
    tr.u.push_back(s.u);
    tr.y.push_back(s.y);
    tr.y_tilde.push_back(s.y_tilde);
    tr.dy.push_back(dy);
    tr.r.push_back(r);
    tr.safety_ok.push_back(model.safe.contains(xp));
    tr.stealthy_ok.push_back(r.dot(model.detector.Pi * r) <= 1.0);
    tr.detect_alarm.push_back(monitor && monitor->check(t, s.u).verdict == Verdict::Alarm);

    if (k == steps) break;
    x = rk4([&](const Vector& z) { return loop.deriv(z, dy); }, x, opts.dt);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > opts.blowup) {
      tr.aborted = true;
      char buf[96];
      std::snprintf(buf, sizeof buf, "state blow-up after t = %.6g s", t);
      tr.abort_reason = buf;
      break;
    }
  }
  return tr;
}

EquivalenceReport equivalence_check(const SimTrace& trace, const ClosedLoop& cl,
                                    const SystemModel& model, double tol) {
  EquivalenceReport rep;
  if (trace.size() == 0) return rep;
  const Eigen::Index np = cl.dims.n_p, nc = cl.dims.n_c;
  const Matrix& cp = model.plant.C;
  const Matrix& gamma = model.attack.gamma();

  Vector zeta(cl.dims.n);
  zeta << trace.x_p[0], trace.x_c[0], trace.e[0];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const Vector inj = gamma * trace.dy[k];
    const Vector r = cp * zeta.segment(np + nc, np) + inj;
    const Vector u = cl.E * zeta + cl.F * r;
    Vector ref(cl.dims.n);
    ref << trace.x_p[k], trace.x_c[k], trace.e[k];
    const double dz = (zeta - ref).cwiseAbs().maxCoeff();
    const double du = (u - trace.u[k]).cwiseAbs().maxCoeff();
    if (std::max(dz, du) > std::max(rep.max_dev_zeta, rep.max_dev_u)) rep.worst_index = k;
    rep.max_dev_zeta = std::max(rep.max_dev_zeta, dz);
    rep.max_dev_u = std::max(rep.max_dev_u, du);
    if (k + 1 == trace.size()) break;
    const auto f = [&](const Vector& z) -> Vector {
      return cl.A * z + cl.B * (cp * z.segment(np + nc, np) + inj);
    };
    zeta = rk4(f, zeta, trace.dt);
  }
  rep.ok = std::isfinite(rep.max_dev_zeta) && std::isfinite(rep.max_dev_u) &&
           rep.max_dev_zeta <= tol && rep.max_dev_u <= tol;
  return rep;
}

Vector worst_case_direction(const ClosedLoop& cl, const Matrix& pi) {
  const Matrix gain = -cl.E * cl.A.partialPivLu().solve(cl.B) + cl.F;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(pi));
  if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("Pi must be positive definite");
  const Matrix pi_inv_sqrt = es.operatorInverseSqrt();
  Eigen::JacobiSVD<Matrix> svd(gain * pi_inv_sqrt, Eigen::ComputeFullV);
  Vector r = pi_inv_sqrt * svd.matrixV().col(0);
  Eigen::Index imax = 0;
  r.cwiseAbs().maxCoeff(&imax);
  if (r(imax) < 0.0) r = -r;
  return r / std::sqrt(r.dot(pi * r));
}

Vector resonant_direction(const ClosedLoop& cl, const Matrix& r, const Matrix& pi,
                          double frequency_hz) {
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const double w = 2.0 * std::numbers::pi * frequency_hz;
  const Eigen::Index n = cl.A.rows();
  const CMatrix resolvent = Complex(0.0, w) * CMatrix::Identity(n, n) - cl.A.cast<Complex>();
  const CMatrix g = cl.E.cast<Complex>() * resolvent.partialPivLu().solve(cl.B.cast<Complex>()) +
                    cl.F.cast<Complex>();
  const Matrix h = (g.adjoint() * r.cast<Complex>() * g).real();

  Eigen::SelfAdjointEigenSolver<Matrix> ps(symmetrize(pi));
  if (ps.eigenvalues().minCoeff() <= 0.0) throw NumericalError("Pi must be positive definite");
  const Matrix pi_inv_sqrt = ps.operatorInverseSqrt();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(pi_inv_sqrt * h * pi_inv_sqrt, 1e-8));
  Vector d = pi_inv_sqrt * es.eigenvectors().col(es.eigenvectors().cols() - 1);
  Eigen::Index imax = 0;
  d.cwiseAbs().maxCoeff(&imax);
  if (d(imax) < 0.0) d = -d;
  return d / std::sqrt(d.dot(pi * d));
}

AttackScenario scenario_paperlike(const Vector& direction, const Matrix& pi, double frequency_hz) {
  return AttackScenario({{10.0, 110.0, sinusoid_residual(direction, 0.99, frequency_hz, pi)},
                         {175.0, 275.0, sinusoid_residual(direction, 0.9, frequency_hz, pi)},
                         {340.0, 440.0, sinusoid_residual(direction, 0.2, frequency_hz, pi)}});
}

void write_csv(std::ostream& out, const SimTrace& tr, const std::string& metadata) {
  if (!metadata.empty()) out << "# " << metadata << "\n";
  auto names = [&](const char* prefix, std::size_t count) {
    for (std::size_t i = 1; i <= count; ++i) out << ',' << prefix << i;
  };
  const std::size_t np = tr.size() ? static_cast<std::size_t>(tr.x_p[0].size()) : 0;
  const std::size_t nc = tr.size() ? static_cast<std::size_t>(tr.x_c[0].size()) : 0;
  const std::size_t m = tr.size() ? static_cast<std::size_t>(tr.u[0].size()) : 0;
  const std::size_t l = tr.size() ? static_cast<std::size_t>(tr.y[0].size()) : 0;
  const std::size_t s = tr.size() ? static_cast<std::size_t>(tr.dy[0].size()) : 0;
  out << 't';
  names("xp", np);
  names("xc", nc);
  names("xhat", np);
  names("e", np);
  names("u", m);
  names("y", l);
  names("dy", s);
  names("r", l);
  out << ",safety_ok,stealthy_ok,detect_alarm\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.8e", v);
    out << buf;
  };
  auto vec = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out << ',';
      put(v(i));
    }
  };
  for (std::size_t k = 0; k < tr.size(); ++k) {
    put(tr.t[k]);
    vec(tr.x_p[k]);
    vec(tr.x_c[k]);
    vec(tr.x_hat[k]);
    vec(tr.e[k]);
    vec(tr.u[k]);
    vec(tr.y[k]);
    vec(tr.dy[k]);
    vec(tr.r[k]);
    out << ',' << int(tr.safety_ok[k]) << ',' << int(tr.stealthy_ok[k]) << ','
        << int(tr.detect_alarm[k]) << '\n';
  }
}

}  // namespace reachguard
