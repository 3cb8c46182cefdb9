#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reachguard/benchmark.hpp"
#include "reachguard/lmi.hpp"
#include "reachguard/synthesis.hpp"
#include "test_support.hpp"

namespace reachguard {
namespace {

// zeta' = -zeta + r, u = zeta, Pi = p, no safe set. Reducing the Lemma-1 LMI
// by hand: [[q(2 - alpha), -q], [-q, beta p]] >= 0 with beta + lambda <= alpha,
// so the best bound is q* = alpha (2 - alpha) p for 0 < alpha < 2.
ClosedLoop scalar_loop() {
  ClosedLoop cl;
  cl.A = Matrix::Constant(1, 1, -1.0);
  cl.B = Matrix::Constant(1, 1, 1.0);
  cl.E = Matrix::Constant(1, 1, 1.0);
  cl.F = Matrix::Zero(1, 1);
  cl.dims = {1, 0, 1, 1, 1, 1};
  return cl;
}

SafeSet no_safe_set() { return make_safe_set(Matrix::Zero(1, 1), Vector::Zero(1)); }

Ellipsoid scalar_stealth(double p = 1.0) { return Ellipsoid(Matrix::Constant(1, 1, p)); }

const BarrierSolver& solver() {
  static const BarrierSolver s;
  return s;
}

void expect_certificate(const LmiProblem& prob, const Assignment& a) {
  for (const auto& m : certificate_margin(prob, a)) EXPECT_GE(m.min_eig, -1e-6) << m.name;
}

TEST(Grid, LogSpacedEndpointsAndCount) {
  const auto g = default_alpha_grid();
  ASSERT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-2);
  EXPECT_DOUBLE_EQ(g.back(), 1e3);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(std::log(g[i] / g[i - 1]), std::log(1e5) / 19, 1e-12);
  EXPECT_EQ(parse_alpha_grid("1e-2:1e3:20"), g);
  EXPECT_EQ(parse_alpha_grid("10,30,100"), (std::vector<double>{10, 30, 100}));
  EXPECT_EQ(parse_alpha_grid("30"), std::vector<double>{30});
  EXPECT_EQ(log_grid(2, 2, 1), std::vector<double>{2});
}

TEST(Grid, RejectsMalformedSpecs) {
  for (const char* bad : {"", "1:2", "a,b", "1:2:0", "-1,2", "0:1:3", "1,,2", "1:2:x"}) {
    EXPECT_THROW(parse_alpha_grid(bad), std::invalid_argument) << bad;
  }
}

TEST(Op1, ScalarSystemMatchesHandReduction) {
  for (double alpha : {0.5, 1.0, 1.5}) {
    const auto r = solve_op1(scalar_loop(), scalar_stealth(), no_safe_set(), alpha, solver());
    ASSERT_EQ(r.status, SolveStatus::Optimal) << alpha;
    EXPECT_NEAR(r.Q(0, 0), alpha * (2 - alpha), 1e-5) << alpha;
    EXPECT_NEAR(r.logdet, std::log(alpha * (2 - alpha)), 1e-5) << alpha;
    EXPECT_FALSE(r.cap_active);
  }
}

TEST(Op1, ScalarSystemInfeasibleAtZeroAndTwo) {
  // alpha = 0 forces beta = lambda = 0 and then q = 0; alpha = 2 leaves no decay margin.
  for (double alpha : {0.0, 2.0, 3.0}) {
    const auto r = solve_op1(scalar_loop(), scalar_stealth(), no_safe_set(), alpha, solver());
    EXPECT_EQ(r.status, SolveStatus::Infeasible) << alpha;
  }
}

TEST(Op1, ShrinkingStealthySetTightensBound) {
  const auto base = solve_op1(scalar_loop(), scalar_stealth(1.0), no_safe_set(), 1.0, solver());
  const auto tight = solve_op1(scalar_loop(), scalar_stealth(1e12), no_safe_set(), 1.0, solver());
  ASSERT_EQ(base.status, SolveStatus::Optimal);
  ASSERT_EQ(tight.status, SolveStatus::Optimal);
  EXPECT_GT(tight.logdet, base.logdet);
  EXPECT_TRUE(tight.cap_active);  // q* = 1e12 meets the cap exactly
}

TEST(Op1, ThreeTankCertificateReplays) {
  const auto& fx = testing::three_tank_certificates();
  ASSERT_EQ(fx.op1.status, SolveStatus::Optimal);
  EXPECT_NEAR(fx.op1.logdet, -13.9854, 1e-3);
  const auto prob = build_lemma1(fx.cl, fx.stealth, fx.model.safe, 0.01);
  expect_certificate(prob, {{"Q", fx.op1.Q},
                            {"beta", Matrix::Constant(1, 1, fx.op1.beta)},
                            {"lambda", Matrix::Constant(1, 1, fx.op1.lambda)}});
  EXPECT_GE(fx.op1.beta, 0.0);
  EXPECT_GE(fx.op1.lambda, 0.0);
}

TEST(Op1, ThreeTankShrinkingStealthySetTightensBound) {
  const auto& fx = testing::three_tank_certificates();
  const auto tight = solve_op1(fx.cl, Ellipsoid(1e2 * fx.model.detector.Pi), fx.model.safe, 0.01,
                               solver());
  ASSERT_EQ(tight.status, SolveStatus::Optimal);
  EXPECT_GT(tight.logdet, fx.op1.logdet);
}

TEST(Op1, ExtremeStealthScalingIsNotMisreportedAsInfeasible) {
  // Pi = 1e12 I is feasible whenever Pi = I is, but the interior is thinner than
  // double precision resolves; the solver must not claim infeasibility.
  const auto& fx = testing::three_tank_certificates();
  const auto r = solve_op1(fx.cl, Ellipsoid(1e12 * fx.model.detector.Pi), fx.model.safe, 0.1,
                           solver());
  EXPECT_NE(r.status, SolveStatus::Infeasible) << r.report.message;
}

TEST(Op1, ThreeTankInfeasibleAtAlpha30) {
  // -A^T Q - Q A - alpha Q + lambda Psi >= 0 with beta + lambda <= alpha cannot
  // hold for alpha far above twice the slowest closed-loop decay rate.
  const auto& fx = testing::three_tank_certificates();
  const auto r = solve_op1(fx.cl, fx.stealth, fx.model.safe, 30.0, solver());
  EXPECT_EQ(r.status, SolveStatus::Infeasible);
  EXPECT_GT(r.report.phase1_slack, 0.0);
}

TEST(Op1, DeterministicAcrossRuns) {
  const auto& fx = testing::three_tank_certificates();
  const auto again = solve_op1(fx.cl, fx.stealth, fx.model.safe, 0.01, solver());
  EXPECT_NEAR(again.logdet, fx.op1.logdet, 1e-6 * std::abs(fx.op1.logdet));
  EXPECT_EQ((again.Q - fx.op1.Q).norm(), 0.0);
}

TEST(Sweep, BestOfGridEqualsBestIndividualSolve) {
  const std::vector<double> grid{0.5, 1.0, 1.5};
  const auto sweep = sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), grid, solver());
  ASSERT_EQ(sweep.profile.size(), 3u);
  double best = -1e300;
  for (double a : grid) {
    best = std::max(best, solve_op1(scalar_loop(), scalar_stealth(), no_safe_set(), a, solver()).logdet);
  }
  EXPECT_DOUBLE_EQ(sweep.best.alpha, 1.0);
  EXPECT_DOUBLE_EQ(sweep.best.logdet, best);
  for (size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(sweep.profile[i].alpha, grid[i]);
    EXPECT_EQ(sweep.profile[i].status, SolveStatus::Optimal);
  }
}

TEST(Sweep, TieGoesToSmallerAlpha) {
  // q*(0.5) = q*(1.5) = 0.75
  const auto sweep =
      sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), {1.5, 0.5}, solver());
  EXPECT_DOUBLE_EQ(sweep.best.alpha, 0.5);
}

TEST(Sweep, ThreadCountDoesNotChangeResult) {
  const std::vector<double> grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.75};
  const auto one = sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), grid, solver(), {}, 1);
  const auto four = sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), grid, solver(), {}, 4);
  EXPECT_EQ(one.best.alpha, four.best.alpha);
  EXPECT_EQ(one.best.logdet, four.best.logdet);
  for (size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(one.profile[i].objective, four.profile[i].objective);
}

TEST(Sweep, AbsurdAlphaIsRecordedNotFatal) {
  const auto sweep =
      sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), {1.0, 1e30}, solver());
  EXPECT_DOUBLE_EQ(sweep.best.alpha, 1.0);
  ASSERT_EQ(sweep.profile.size(), 2u);
  EXPECT_NE(sweep.profile[1].status, SolveStatus::Optimal);
  EXPECT_FALSE(sweep.profile[1].message.empty());
}

TEST(Sweep, AllInfeasibleThrowsWithStage) {
  try {
    sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), {0.0, 2.0, 1e30}, solver());
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.kind(), SynthesisError::Kind::AllInfeasible);
    EXPECT_EQ(e.stage(), "op1");
  }
  EXPECT_THROW(sweep_alpha(scalar_loop(), scalar_stealth(), no_safe_set(), {}, solver()),
               std::invalid_argument);
}

TEST(Sweep, ThreeTankLargeAlphaGridIsAllInfeasible) {
  const auto& fx = testing::three_tank_certificates();
  try {
    sweep_alpha(fx.cl, fx.stealth, fx.model.safe, {10, 30, 100}, solver());
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.kind(), SynthesisError::Kind::AllInfeasible);
  }
}

TEST(Op2, ScalarSystemClosedForm) {
  // u = zeta with zeta^2 q <= 1: the tightest input bound is R = q.
  const auto op1 = solve_op1(scalar_loop(), scalar_stealth(), no_safe_set(), 1.0, solver());
  ASSERT_EQ(op1.status, SolveStatus::Optimal);
  const auto op2 = solve_op2(scalar_loop(), scalar_stealth(), op1.Q, solver());
  ASSERT_EQ(op2.status, SolveStatus::Optimal);
  EXPECT_NEAR(op2.R(0, 0), op1.Q(0, 0), 1e-5);
}

TEST(Op2, DecoupledInputHitsCap) {
  ClosedLoop cl = scalar_loop();
  cl.E = Matrix::Zero(1, 1);
  const auto op2 = solve_op2(cl, scalar_stealth(), Matrix::Identity(1, 1), solver());
  ASSERT_EQ(op2.status, SolveStatus::Optimal) << op2.report.message;
  EXPECT_TRUE(op2.cap_active);
  EXPECT_GT(op2.R(0, 0), 0.99e12);
  EXPECT_LE(op2.R(0, 0), 1e12 * (1 + 1e-9));
}

TEST(Op2, ThreeTankCertificateReplays) {
  const auto& fx = testing::three_tank_certificates();
  ASSERT_EQ(fx.op2.status, SolveStatus::Optimal);
  EXPECT_NEAR(fx.op2.logdet, 9.66579, 1e-3);
  const auto prob = build_theorem1(fx.cl, fx.stealth, fx.op1.Q);
  expect_certificate(prob, {{"R", fx.op2.R},
                            {"gamma", Matrix::Constant(1, 1, fx.op2.gamma)},
                            {"tau", Matrix::Constant(1, 1, fx.op2.tau)}});
}

TEST(Op2, LargerStateSetGivesLargerInputSet) {
  const auto& fx = testing::three_tank_certificates();
  const auto looser = solve_op2(fx.cl, fx.stealth, fx.op1.Q / 4.0, solver());
  ASSERT_EQ(looser.status, SolveStatus::Optimal);
  EXPECT_LE(looser.logdet, fx.op2.logdet + 1e-6);
}

TEST(Op2, PointwiseContainment) {
  const auto& fx = testing::three_tank_certificates();
  std::mt19937_64 rng(67);
  int violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const Vector z = testing::random_in_ellipsoid(rng, fx.op1.Q);
    const Vector r = testing::random_in_ellipsoid(rng, fx.model.detector.Pi);
    const Vector u = fx.cl.E * z + fx.cl.F * r;
    violations += u.dot(fx.op2.R * u) > 1.0 + 1e-6 ? 1 : 0;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Algorithm1, ThreeTankSingleAlpha) {
  const auto& fx = testing::three_tank_certificates();
  const auto r = run_algorithm1(fx.cl, fx.stealth, fx.model.safe, {0.01}, solver());
  EXPECT_EQ(r.alpha_used, 0.01);
  EXPECT_EQ((r.Q - fx.op1.Q).norm(), 0.0);
  EXPECT_EQ((r.R - fx.op2.R).norm(), 0.0);
  EXPECT_GE(r.min_margin(), -1e-6);
  EXPECT_EQ(r.solver, "reachguard-barrier");
  bool saw1 = false, saw2 = false;
  for (const auto& m : r.margins) {
    saw1 = saw1 || m.name == "op1.lemma1";
    saw2 = saw2 || m.name == "op2.theorem1";
  }
  EXPECT_TRUE(saw1);
  EXPECT_TRUE(saw2);
}

TEST(Algorithm1, NearlyNominalInputShrinksTowardZero) {
  const auto& fx = testing::three_tank_certificates();
  const Ellipsoid tiny(1e4 * fx.model.detector.Pi);
  const auto r = run_algorithm1(fx.cl, tiny, fx.model.safe, {0.01}, solver());
  EXPECT_GT(r.logdet_R, fx.op2.logdet);
}

TEST(Algorithm1, UnconstrainedSafeSetIsAllInfeasible) {
  const auto& fx = testing::three_tank_certificates();
  const auto whole = make_safe_set(Matrix::Zero(3, 3), Vector::Zero(3));
  try {
    run_algorithm1(fx.cl, fx.stealth, whole, default_alpha_grid(), solver());
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.kind(), SynthesisError::Kind::AllInfeasible);
    EXPECT_EQ(e.stage(), "op1");
  }
}

TEST(Artifact, JsonRoundTrip) {
  const auto& fx = testing::three_tank_certificates();
  auto r = run_algorithm1(fx.cl, fx.stealth, fx.model.safe, {0.01, 30.0}, solver());
  r.model_hash = "abc123";
  const auto j = to_json(r);
  for (const char* key : {"Q", "R", "alpha_used", "multipliers", "log_det", "margins",
                          "alpha_profile", "objective", "cap_active", "solver", "model_hash"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_FALSE(j.contains("fidelity"));
  EXPECT_EQ(j.at("alpha_profile").size(), 2u);
  const auto back = synthesis_from_json(j);
  EXPECT_EQ((back.Q - r.Q).norm(), 0.0);
  EXPECT_EQ((back.R - r.R).norm(), 0.0);
  EXPECT_EQ(back.alpha_used, r.alpha_used);
  EXPECT_EQ(back.profile.size(), 2u);
  EXPECT_EQ(back.profile[1].status, SolveStatus::Infeasible);
  EXPECT_EQ(back.model_hash, "abc123");
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Artifact, TraceModeIsMarkedLowerFidelity) {
  SynthesisOptions o;
  o.lmi.objective = ObjectiveMode::Trace;
  const auto r = run_algorithm1(scalar_loop(), scalar_stealth(), no_safe_set(), {1.0}, solver(), o);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("objective"), "trace");
  EXPECT_TRUE(j.contains("fidelity"));
}

TEST(Artifact, MalformedJsonIsRejected) {
  EXPECT_ANY_THROW(synthesis_from_json(nlohmann::json::object()));
  const auto& fx = testing::three_tank_certificates();
  auto j = to_json(run_algorithm1(fx.cl, fx.stealth, fx.model.safe, {0.01}, solver()));
  j["R"] = "not a matrix";
  EXPECT_ANY_THROW(synthesis_from_json(j));
}

}  // namespace
}  // namespace reachguard
