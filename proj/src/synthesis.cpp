#include "reachguard/synthesis.hpp"

#include "reachguard/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace reachguard {

using nlohmann::json;

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and count >= 1");
  }
  if (count == 1) return {lo};
  std::vector<double> g(static_cast<size_t>(count));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < count; ++i) g[static_cast<size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> default_alpha_grid() { return log_grid(1e-2, 1e3, 20); }

std::vector<double> parse_alpha_grid(const std::string& spec) {
  auto number = [&](const std::string& s) {
    size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("alpha grid: bad number '" + s + "'");
    }
    if (pos != s.size()) throw std::invalid_argument("alpha grid: bad number '" + s + "'");
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw std::invalid_argument("alpha grid: expected lo:hi:count");
    const double n = number(parts[2]);
    if (n < 1 || n != std::floor(n)) throw std::invalid_argument("alpha grid: count must be a positive integer");
    out = log_grid(number(parts[0]), number(parts[1]), static_cast<int>(n));
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw std::invalid_argument("alpha grid: empty");
  for (double a : out) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("alpha grid: values must be finite and >= 0");
  }
  return out;
}

namespace {

// A bound counts as pinned by the cap when its largest eigenvalue is within 1% of it.
bool cap_active(const Matrix& m, double cap) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() >= 0.99 * cap;
}

}  // namespace

Op1Result solve_op1(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                    double alpha, const ConicSolver& solver, const LmiOptions& opts) {
  Op1Result out;
  out.alpha = alpha;
  const LmiProblem problem = build_lemma1(cl, stealth, safe, alpha, opts);
  out.report = solver.solve(problem);
  out.status = out.report.status;
  if (out.status != SolveStatus::Optimal) return out;
  const Assignment a = problem.decode(out.report.x);
  out.Q = a.at("Q");
  out.beta = a.at("beta")(0, 0);
  out.lambda = a.at("lambda")(0, 0);
  out.logdet = out.report.objective;
  out.margins = certificate_margin(problem, a);
  out.cap_active = cap_active(out.Q, opts.cap);
  return out;
}

SweepResult sweep_alpha(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                        const std::vector<double>& grid, const ConicSolver& solver,
                        const LmiOptions& opts, unsigned threads) {
  if (grid.empty()) throw std::invalid_argument("sweep_alpha: empty grid");
  for (double a : grid) {
    if (!(a >= 0.0)) throw std::invalid_argument("sweep_alpha: alpha must be >= 0");
  }

  std::vector<Op1Result> results(grid.size());
  auto run_one = [&](size_t i) {
    try {
      results[i] = solve_op1(cl, stealth, safe, grid[i], solver, opts);
    } catch (const std::exception& e) {
      // Degenerate grid values (e.g. absurdly large alpha) are recorded, not fatal.
      results[i].alpha = grid[i];
      results[i].status = SolveStatus::NumericalTrouble;
      results[i].report.message = e.what();
    }
  };
  unsigned n_threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(grid.size()));
  if (n_threads <= 1) {
    for (size_t i = 0; i < grid.size(); ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < grid.size(); i = next++) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  SweepResult out;
  for (const auto& r : results) {
    out.profile.push_back({r.alpha, r.status, r.status == SolveStatus::Optimal ? r.logdet : 0.0,
                           r.report.message});
  }
  // Largest objective wins; objectives within 1e-6 relative tie and the smaller alpha wins.
  const Op1Result* best = nullptr;
  for (const auto& r : results) {
    if (r.status != SolveStatus::Optimal) continue;
    if (!best || r.logdet > best->logdet) best = &r;
  }
  if (!best) {
    throw SynthesisError(SynthesisError::Kind::AllInfeasible, "op1",
                         "no alpha in the grid admits an invariant ellipsoid");
  }
  const double tol = 1e-6 * std::max(1.0, std::abs(best->logdet));
  for (const auto& r : results) {
    if (r.status == SolveStatus::Optimal && best->logdet - r.logdet <= tol && r.alpha < best->alpha) {
      best = &r;
    }
  }
  out.best = *best;
  return out;
}

Op2Result solve_op2(const ClosedLoop& cl, const Ellipsoid& stealth, const Matrix& q,
                    const ConicSolver& solver, const LmiOptions& opts) {
  Op2Result out;
  const LmiProblem problem = build_theorem1(cl, stealth, q, opts);
  out.report = solver.solve(problem);
  out.status = out.report.status;
  if (out.status != SolveStatus::Optimal) return out;
  const Assignment a = problem.decode(out.report.x);
  out.R = a.at("R");
  out.gamma = a.at("gamma")(0, 0);
  out.tau = a.at("tau")(0, 0);
  out.logdet = out.report.objective;
  out.margins = certificate_margin(problem, a);
  out.cap_active = cap_active(out.R, opts.cap);
  return out;
}

double SynthesisResult::min_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : margins) m = std::min(m, c.min_eig);
  return m;
}

SynthesisResult run_algorithm1(const ClosedLoop& cl, const Ellipsoid& stealth, const SafeSet& safe,
                               const std::vector<double>& alpha_grid, const ConicSolver& solver,
                               const SynthesisOptions& opts) {
  const SweepResult sweep = sweep_alpha(cl, stealth, safe, alpha_grid, solver, opts.lmi, opts.threads);
  const Op2Result op2 = solve_op2(cl, stealth, sweep.best.Q, solver, opts.lmi);
  if (op2.status == SolveStatus::Infeasible) {
    throw SynthesisError(SynthesisError::Kind::Infeasible, "op2", op2.report.message);
  }
  if (op2.status != SolveStatus::Optimal) {
    throw SynthesisError(SynthesisError::Kind::NumericalTrouble, "op2", op2.report.message);
  }

  SynthesisResult r;
  r.Q = sweep.best.Q;
  r.R = op2.R;
  r.alpha_used = sweep.best.alpha;
  r.beta = sweep.best.beta;
  r.lambda = sweep.best.lambda;
  r.gamma = op2.gamma;
  r.tau = op2.tau;
  r.logdet_Q = sweep.best.logdet;
  r.logdet_R = op2.logdet;
  for (auto m : sweep.best.margins) {
    m.name = "op1." + m.name;
    r.margins.push_back(m);
  }
  for (auto m : op2.margins) {
    m.name = "op2." + m.name;
    r.margins.push_back(m);
  }
  r.profile = sweep.profile;
  r.objective = opts.lmi.objective;
  r.cap_active_Q = sweep.best.cap_active;
  r.cap_active_R = op2.cap_active;
  r.solver = solver.name();
  r.op1_report = sweep.best.report;
  r.op2_report = op2.report;
  return r;
}

namespace {

json report_json(const SolveReport& r) {
  return {{"status", to_string(r.status)},
          {"objective", r.objective},
          {"gap", r.gap},
          {"phase1_slack", r.phase1_slack},
          {"newton_iterations", r.newton_iterations},
          {"outer_iterations", r.outer_iterations},
          {"message", r.message}};
}

SolveStatus status_from_string(const std::string& s) {
  if (s == "Optimal") return SolveStatus::Optimal;
  if (s == "Infeasible") return SolveStatus::Infeasible;
  if (s == "NumericalTrouble") return SolveStatus::NumericalTrouble;
  throw FormatError("unknown solve status '" + s + "'");
}

SolveReport report_from_json(const json& j) {
  SolveReport r;
  r.status = status_from_string(j.at("status").get<std::string>());
  r.objective = j.at("objective").get<double>();
  r.gap = j.at("gap").get<double>();
  r.phase1_slack = j.at("phase1_slack").get<double>();
  r.newton_iterations = j.at("newton_iterations").get<int>();
  r.outer_iterations = j.at("outer_iterations").get<int>();
  r.message = j.at("message").get<std::string>();
  return r;
}

}  // namespace

json to_json(const SynthesisResult& r) {
  json j;
  j["Q"] = matrix_to_json(r.Q);
  j["R"] = matrix_to_json(r.R);
  j["alpha_used"] = r.alpha_used;
  j["multipliers"] = {{"beta", r.beta}, {"lambda", r.lambda}, {"gamma", r.gamma}, {"tau", r.tau}};
  j["log_det"] = {{"Q", r.logdet_Q}, {"R", r.logdet_R}};
  json margins = json::array();
  for (const auto& m : r.margins) margins.push_back({{"name", m.name}, {"min_eig", m.min_eig}});
  j["margins"] = margins;
  json profile = json::array();
  for (const auto& p : r.profile) {
    profile.push_back({{"alpha", p.alpha},
                       {"status", to_string(p.status)},
                       {"objective", p.objective},
                       {"message", p.message}});
  }
  j["alpha_profile"] = profile;
  j["objective"] = to_string(r.objective);
  if (r.objective == ObjectiveMode::Trace) j["fidelity"] = "lower (trace surrogate for volume)";
  j["cap_active"] = {{"Q", r.cap_active_Q}, {"R", r.cap_active_R}};
  j["solver"] = {{"name", r.solver}, {"op1", report_json(r.op1_report)}, {"op2", report_json(r.op2_report)}};
  j["model_hash"] = r.model_hash;
  return j;
}

SynthesisResult synthesis_from_json(const json& j) {
  try {
    SynthesisResult r;
    r.Q = matrix_from_json(j.at("Q"), "Q");
    r.R = matrix_from_json(j.at("R"), "R");
    r.alpha_used = j.at("alpha_used").get<double>();
    const auto& mult = j.at("multipliers");
    r.beta = mult.at("beta").get<double>();
    r.lambda = mult.at("lambda").get<double>();
    r.gamma = mult.at("gamma").get<double>();
    r.tau = mult.at("tau").get<double>();
    r.logdet_Q = j.at("log_det").at("Q").get<double>();
    r.logdet_R = j.at("log_det").at("R").get<double>();
    for (const auto& m : j.at("margins")) {
      r.margins.push_back({m.at("name").get<std::string>(), m.at("min_eig").get<double>()});
    }
    for (const auto& p : j.at("alpha_profile")) {
      r.profile.push_back({p.at("alpha").get<double>(), status_from_string(p.at("status").get<std::string>()),
                           p.at("objective").get<double>(), p.at("message").get<std::string>()});
    }
    r.objective = objective_mode_from_string(j.at("objective").get<std::string>());
    r.cap_active_Q = j.at("cap_active").at("Q").get<bool>();
    r.cap_active_R = j.at("cap_active").at("R").get<bool>();
    r.solver = j.at("solver").at("name").get<std::string>();
    r.op1_report = report_from_json(j.at("solver").at("op1"));
    r.op2_report = report_from_json(j.at("solver").at("op2"));
    r.model_hash = j.at("model_hash").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("synthesis artifact: ") + e.what());
  }
}

}  // namespace reachguard
