// Acceptance suite: one PASS/FAIL line per criterion on the three-tank benchmark.
#include <CLI11.hpp>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <unistd.h>

#include "reachguard/benchmark.hpp"
#include "reachguard/cli.hpp"
#include "reachguard/io.hpp"
#include "reachguard/lmi.hpp"
#include "reachguard/maxdet.hpp"
#include "reachguard/monitor.hpp"
#include "reachguard/sim.hpp"
#include "reachguard/synthesis.hpp"

namespace fs = std::filesystem;
using namespace reachguard;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Bench {
  SystemModel model = three_tank();
  ClosedLoop cl = assemble_closed_loop(model.plant, model.controller, model.detector, model.attack);
  Ellipsoid stealth{model.detector.Pi};
  BarrierSolver solver;
};

const Bench& bench() {
  static const Bench b;
  return b;
}

// The deployed certificates: default alpha sweep, then the input bound.
struct Certs {
  SynthesisResult result;
  double seconds = 0.0;
};

const Certs& certs() {
  static const Certs c = [] {
    const auto& b = bench();
    Stopwatch sw;
    Certs out;
    out.result = run_algorithm1(b.cl, b.stealth, b.model.safe, default_alpha_grid(), b.solver);
    out.seconds = sw.seconds();
    return out;
  }();
  return c;
}

Matrix error_selector(const ClosedLoop& cl) {
  Matrix s = Matrix::Zero(cl.dims.n_p, cl.dims.n);
  s.rightCols(cl.dims.n_p).setIdentity();
  return s;
}

// Loop matrix with no injection: r = C_p e feeds back through B.
Matrix nominal_matrix(const Bench& b) { return b.cl.A + b.cl.B * b.model.plant.C * error_selector(b.cl); }

Vector zeta_at(const SimTrace& tr, std::size_t k) {
  Vector z(tr.x_p[k].size() * 2 + tr.x_c[k].size());
  z << tr.x_p[k], tr.x_c[k], tr.e[k];
  return z;
}

double semi_axis(const Matrix& q, Eigen::Index coord) {
  return 1.0 / std::sqrt(project_ellipsoid(Ellipsoid(q), {coord}).shape()(0, 0));
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Stopwatch sw;
  const auto& b = bench();
  const Matrix& a = b.cl.A;
  const auto n = b.cl.dims.n, np = b.cl.dims.n_p, nc = b.cl.dims.n_c;
  const bool dims_ok = a.rows() == 9 && a.cols() == 9 && n == np + nc + np;
  const bool block_zero = (a.bottomLeftCorner(np, np + nc).array() == 0.0).all();
  Eigen::EigenSolver<Matrix> es(a, false);
  const double abscissa = es.eigenvalues().real().maxCoeff();
  // Block-triangular structure: spectrum is the nominal loop plus the error block.
  Eigen::EigenSolver<Matrix> top(a.topLeftCorner(np + nc, np + nc), false);
  Eigen::EigenSolver<Matrix> bottom(a.bottomRightCorner(np, np), false);
  const double split = std::max(top.eigenvalues().real().maxCoeff(), bottom.eigenvalues().real().maxCoeff());
  const double t = sw.seconds();
  const bool pass = dims_ok && block_zero && abscissa < 0.0 && std::abs(split - abscissa) <= 1e-12 &&
                    std::abs(b.cl.spectral_abscissa - abscissa) <= 1e-12 && t < 1.0;
  return {pass, fmt("A is %ldx%ld, lower-left %ldx%ld block %s, spectral abscissa %.6e "
                    "(block oracle %.6e), %.3f s",
                    static_cast<long>(a.rows()), static_cast<long>(a.cols()), static_cast<long>(np),
                    static_cast<long>(np + nc), block_zero ? "exactly zero" : "NONZERO", abscissa, split, t)};
}

Outcome criterion2() {
  const auto& b = bench();
  Stopwatch sw;
  const Op1Result r = solve_op1(b.cl, b.stealth, b.model.safe, 30.0, b.solver);
  const double t = sw.seconds();
  const double limit = 1.05 / std::sqrt(10.0);
  std::string detail = fmt("alpha = 30: %s (%s), %.2f s", to_string(r.status), r.report.message.c_str(), t);
  bool pass = false;
  if (r.status == SolveStatus::Optimal) {
    double margin = 1e300;
    for (const auto& m : r.margins) margin = std::min(margin, m.min_eig);
    const double axis = semi_axis(r.Q, 1);
    pass = margin >= -1e-7 && axis <= limit && t < 30.0;
    detail += fmt("; margin %.3e, x_p2 semi-axis %.4g (limit %.4g)", margin, axis, limit);
  } else {
    const auto& c = certs().result;
    detail += fmt("; best feasible alpha %.4g gives x_p2 semi-axis %.4g (limit %.4g)", c.alpha_used,
                  semi_axis(c.Q, 1), limit);
  }
  return {pass, detail};
}

Outcome criterion3() {
  const auto& b = bench();
  const auto& c = certs().result;
  Stopwatch sw;
  const Op2Result op2 = solve_op2(b.cl, b.stealth, c.Q, b.solver);
  const double t = sw.seconds();
  Matrix reference(2, 2);
  reference << 3.99, 4.26, 4.26, 4.55;
  reference *= 1e5;
  const double rel = ((op2.R - reference).array() / reference.array()).abs().maxCoeff();
  double margin = 1e300;
  for (const auto& m : op2.margins) margin = std::min(margin, m.min_eig);
  const bool pass = op2.status == SolveStatus::Optimal && rel <= 0.15 && margin >= -1e-7 && t < 10.0;
  return {pass, fmt("alpha %.4g: R = [[%.4e, %.4e], [%.4e, %.4e]], max relative deviation %.1f%% "
                    "(limit 15%%), margin %.3e, %.2f s",
                    c.alpha_used, op2.R(0, 0), op2.R(0, 1), op2.R(1, 0), op2.R(1, 1), 100.0 * rel, margin, t)};
}

Outcome criterion4() {
  const auto& b = bench();
  const auto& c = certs().result;
  Stopwatch sw;
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::LLT<Matrix> lq(c.Q), lpi(b.model.detector.Pi);
  auto draw = [&](const Eigen::LLT<Matrix>& llt, Eigen::Index n) {
    Vector w(n);
    for (auto& v : w) v = g(rng);
    w *= std::pow(u(rng), 1.0 / static_cast<double>(n)) / w.norm();
    return Vector(llt.matrixU().solve(w));  // x^T S x = |w|^2 <= 1
  };
  const int samples = 100000;
  int violations = 0;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vector z = draw(lq, b.cl.dims.n);
    const Vector r = draw(lpi, b.cl.dims.l);
    const Vector uu = b.cl.E * z + b.cl.F * r;
    const double q = uu.dot(c.R * uu);
    worst = std::max(worst, q);
    violations += q > 1.0 + 1e-6;
  }
  const double t = sw.seconds();
  return {violations == 0 && t < 5.0,
          fmt("%d samples, %d violations, max u^T R u = %.6f, %.2f s", samples, violations, worst, t)};
}

Outcome criterion5() {
  const auto& b = bench();
  const auto& c = certs().result;
  const Matrix& a = b.cl.A;
  const Matrix& bb = b.cl.B;
  const Matrix& q = c.Q;
  const Matrix& pi = b.model.detector.Pi;
  const Matrix pi_inv = pi.inverse();
  const Eigen::LLT<Matrix> lq(q), lpi(pi);
  const auto n = b.cl.dims.n, l = b.cl.dims.l, np = b.cl.dims.n_p;
  Stopwatch sw;
  std::mt19937_64 rng(515);
  std::normal_distribution<double> g(0.0, 1.0);
  auto unit = [&](Eigen::Index k) {
    Vector w(k);
    for (auto& v : w) v = g(rng);
    return Vector(w / w.norm());
  };
  auto safe = [&](const Vector& z) { return b.model.safe.contains(z.head(np)); };

  const int trajectories = 100;
  const double dt = 0.01, horizon = 200.0;
  const auto steps = static_cast<int>(std::lround(horizon / dt));
  double worst = 0.0;
  int truncated = 0;
  long tries = 0, inside_steps = 0;
  for (int k = 0; k < trajectories; ++k) {
    // Boundary start inside the safe set (otherwise the run is truncated at t = 0).
    Vector z;
    do {
      z = lq.matrixU().solve(unit(n));
      ++tries;
    } while (!safe(z));
    // Even runs: adversarial residual maximizing dV/dt on the stealthy boundary.
    // Odd runs: random boundary residuals held for 1 s.
    const bool greedy = k % 2 == 0;
    Vector held = lpi.matrixU().solve(unit(l));
    auto residual = [&](const Vector& s) -> Vector {
      if (!greedy) return held;
      const Vector grad = pi_inv * bb.transpose() * q * s;
      const double norm = std::sqrt(grad.dot(pi * grad));
      return norm > 0.0 ? Vector(grad / norm) : Vector(Vector::Zero(l));
    };
    auto f = [&](const Vector& s) -> Vector { return a * s + bb * residual(s); };
    for (int i = 0; i < steps; ++i) {
      if (!greedy && i % 100 == 0) held = lpi.matrixU().solve(unit(l));
      const Vector k1 = f(z), k2 = f(z + 0.5 * dt * k1), k3 = f(z + 0.5 * dt * k2), k4 = f(z + dt * k3);
      z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!safe(z)) {
        ++truncated;
        break;
      }
      ++inside_steps;
      worst = std::max(worst, z.dot(q * z));
    }
  }
  const double t = sw.seconds();
  return {worst <= 1.0 + 1e-4 && t < 60.0,
          fmt("%d trajectories (%ld boundary draws), %d left the safe set (mean time inside %.3f s), "
              "max zeta^T Q zeta = %.8f, %.2f s",
              trajectories, tries, truncated, dt * static_cast<double>(inside_steps) / trajectories, worst, t)};
}

Outcome criterion6() {
  const auto& b = bench();
  const auto& c = certs().result;
  Stopwatch sw;
  const Matrix phi = (500.0 * nominal_matrix(b)).exp();
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-1e-3, 1e-3);
  const int runs = 10;
  double max_r = 0.0, max_xp = 0.0, max_oracle = 0.0;
  std::size_t alarms = 0;
  SimOptions o;
  o.t_end = 500.0;
  o.monitor_bound = Ellipsoid(c.R);
  for (int k = 0; k < runs; ++k) {
    SimInit init = SimInit::zero(b.model);
    for (Vector* v : {&init.x_p, &init.x_c, &init.x_hat})
      for (auto& x : *v) x = u(rng);
    const SimTrace tr = simulate(b.model, AttackScenario(), init, o);
    const std::size_t last = tr.size() - 1;
    max_r = std::max(max_r, tr.r[last].norm());
    max_xp = std::max(max_xp, tr.x_p[last].norm());
    const Vector z0 = zeta_at(tr, 0);
    max_oracle = std::max(max_oracle, (zeta_at(tr, last) - phi * z0).norm() / z0.norm());
    alarms += std::count(tr.detect_alarm.begin(), tr.detect_alarm.end(), true);
  }
  const double t = sw.seconds();
  return {max_r <= 1e-3 && max_xp <= 1e-3 && alarms == 0 && max_oracle <= 1e-8 && t < 10.0,
          fmt("%d runs from |x| <= 1e-3: max |r(500)| = %.3e, max |x_p(500)| = %.3e, %zu alarm samples, "
              "matrix-exponential oracle deviation %.2e, %.2f s",
              runs, max_r, max_xp, alarms, max_oracle, t)};
}

Outcome criterion7() {
  const auto& b = bench();
  const auto& c = certs().result;
  Stopwatch sw;
  const Matrix& pi = b.model.detector.Pi;
  const AttackScenario sc = scenario_paperlike(resonant_direction(b.cl, c.R, pi, kPaperlikeFrequencyHz), pi);
  SimOptions o;
  o.t_end = 500.0;
  o.monitor_bound = Ellipsoid(c.R);
  const SimTrace tr = simulate(b.model, sc, SimInit::zero(b.model), o);
  const auto& eps = sc.episodes();
  std::size_t stealth_breaks = 0, nominal_alarms = 0;
  std::vector<std::size_t> unsafe(eps.size(), 0), alarms(eps.size(), 0);
  std::vector<double> first_alarm(eps.size(), -1.0), first_unsafe(eps.size(), -1.0);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::optional<std::size_t> ep;
    for (std::size_t j = 0; j < eps.size(); ++j)
      if (tr.t[k] >= eps[j].t_start && tr.t[k] < eps[j].t_end) ep = j;
    if (!ep) {
      nominal_alarms += tr.detect_alarm[k];
      continue;
    }
    stealth_breaks += !tr.stealthy_ok[k];
    if (!tr.safety_ok[k]) {
      if (unsafe[*ep]++ == 0) first_unsafe[*ep] = tr.t[k];
    }
    if (tr.detect_alarm[k]) {
      if (alarms[*ep]++ == 0) first_alarm[*ep] = tr.t[k];
    }
  }
  const double t = sw.seconds();
  const bool pass = !tr.aborted && eps.size() == 3 && stealth_breaks == 0 && unsafe[0] > 0 && unsafe[1] > 0 &&
                    alarms[0] > 0 && alarms[1] > 0 && alarms[2] == 0 && nominal_alarms == 0 && t < 30.0;
  return {pass, fmt("non-stealthy samples in episodes %zu; first unsafe %.2f / %.2f / %s s; "
                    "first alarm %.2f / %.2f / %s s; alarms outside episodes %zu; %.2f s",
                    stealth_breaks, first_unsafe[0], first_unsafe[1],
                    unsafe[2] ? fmt("%.2f", first_unsafe[2]).c_str() : "none", first_alarm[0], first_alarm[1],
                    alarms[2] ? fmt("%.2f", first_alarm[2]).c_str() : "none", nominal_alarms, t)};
}

Outcome criterion8() {
  const auto& b = bench();
  const auto& c = certs().result;
  Stopwatch sw;
  const Matrix& pi = b.model.detector.Pi;
  const AttackScenario sc = scenario_paperlike(resonant_direction(b.cl, c.R, pi, kPaperlikeFrequencyHz), pi);
  SimInit init = SimInit::zero(b.model);
  init.x_p << 1e-3, -2e-3, 5e-4;
  init.x_hat << -1e-3, 1e-3, 0.0;
  SimOptions o;
  o.dt = 0.01;
  o.t_end = 500.0;
  const SimTrace tr = simulate(b.model, sc, init, o);

  // Independent re-integration of the extended system with r = C_p e + Gamma dy_k.
  const Matrix sel = error_selector(b.cl);
  const Matrix cp_sel = b.model.plant.C * sel;
  const Matrix a_nom = b.cl.A + b.cl.B * cp_sel;
  const Matrix& gamma = b.model.attack.gamma();
  Vector z = zeta_at(tr, 0);
  double dev_z = 0.0, dev_u = 0.0;
  for (std::size_t k = 0;; ++k) {
    const Vector inj = gamma * tr.dy[k];
    const Vector r = cp_sel * z + inj;
    dev_z = std::max(dev_z, (z - zeta_at(tr, k)).cwiseAbs().maxCoeff());
    dev_u = std::max(dev_u, (b.cl.E * z + b.cl.F * r - tr.u[k]).cwiseAbs().maxCoeff());
    if (k + 1 == tr.size()) break;
    const Vector drive = b.cl.B * inj;
    auto f = [&](const Vector& s) -> Vector { return a_nom * s + drive; };
    const Vector k1 = f(z), k2 = f(z + 0.5 * o.dt * k1), k3 = f(z + 0.5 * o.dt * k2), k4 = f(z + o.dt * k3);
    z += o.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const EquivalenceReport lib = equivalence_check(tr, b.cl, b.model, 1e-6);
  const double t = sw.seconds();
  const bool pass = !tr.aborted && dev_z <= 1e-6 && dev_u <= 1e-6 && lib.ok && t < 20.0;
  return {pass, fmt("%zu steps: max |dzeta| = %.2e, max |du| = %.2e (library check %.2e / %.2e), %.2f s",
                    tr.size(), dev_z, dev_u, lib.max_dev_zeta, lib.max_dev_u, t)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9(const std::string& model_path) {
  Stopwatch sw;
  const fs::path root = fs::temp_directory_path() / ("reachguard_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> failures;
  for (const char* run : {"run1", "run2"}) {
    const std::string d = (root / run).string();
    fs::create_directories(d);
    std::istringstream in;
    std::ostringstream out, err;
    const std::vector<std::vector<std::string>> steps{
        {"synthesize", "-m", model_path, "-o", d + "/synthesis.json"},
        {"simulate", "-m", model_path, "-a", d + "/synthesis.json", "--seed", "42", "--init-scale", "1e-3",
         "-o", d + "/sim"},
        {"monitor", "-a", d + "/synthesis.json", "-m", model_path, "-i", d + "/sim/trace.csv", "-o",
         d + "/alarms.json"}};
    for (const auto& s : steps) {
      const int code = cli::run(s, in, out, err);
      if (code != cli::kOk && !(s[0] == "monitor" && code == cli::kAlarms))
        failures.push_back(s[0] + " exited " + std::to_string(code) + ": " + err.str());
    }
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "run1")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto other = root / "run2" / fs::relative(entry.path(), root / "run1");
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differing;
  }
  fs::remove_all(root);
  const double t = sw.seconds();
  std::string detail = fmt("%zu files compared, %zu differ, %.2f s", files, differing, t);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty() && files >= 8 && differing == 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reachguard acceptance suite"};
  std::vector<int> selected;
  std::string model_path = REACHGUARD_DATA_DIR "/three_tank.json";
  app.add_option("-c,--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("-m,--model", model_path, "Model file for the pipeline check")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::vector<std::function<Outcome()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8,
      [&] { return criterion9(model_path); }};
  int failed = 0;
  for (int id : selected) {
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(id - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
  }
  if (std::any_of(selected.begin(), selected.end(), [](int id) { return id >= 2 && id <= 8; })) {
    const auto& c = certs();
    std::cout << fmt("(shared certificates: default sweep picked alpha = %.4g in %.2f s, not counted above)",
                     c.result.alpha_used, c.seconds)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
