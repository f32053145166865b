#include "dhlab/orbit_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace dhlab;

namespace {

HamiltonianSpec free_spec(int d) {
  HamiltonianSpec s;
  s.d = d;
  return s;
}

HamiltonianSpec pendulum(double eps = 0.1) {
  HamiltonianSpec s;
  s.d = 1;
  s.terms.push_back({{1}, 0, eps, 0.0});
  s.envelope = {4.0, 2.0};
  return s;
}

HamiltonianSpec torus2() {
  HamiltonianSpec s;
  s.d = 2;
  s.terms = {{{1, 0}, 0, 0.1, 0.0}, {{0, 1}, 0, 0.05, 0.0}, {{1, 1}, 0, 0.01, 0.0}, {{1, -1}, 0, 0.01, 0.0}};
  s.envelope = {4.0, 2.0};
  return s;
}

HamiltonianSpec driven() {
  HamiltonianSpec s;
  s.d = 1;
  s.terms = {{{1}, 0, 0.1, 0.0}, {{1}, 1, 0.04, 0.3}, {{2}, -1, 0.02, 1.0}};
  s.envelope = {4.0, 2.0};
  return s;
}

}  // namespace

TEST(IntegrateFlow, FreeMotionIsExact) {
  const auto w = make_walk(64, 2, 7);
  OrbitProblem<2> prob(free_spec(2), w, 0.8);
  PhaseState<2> z0{Vec<2>(0.3, -1.2), Vec<2>(0.7, -0.4)};
  const auto path = integrate_flow(prob, z0);
  for (int i = 0; i <= path.steps; ++i) {
    const double t = path.time(i);
    EXPECT_EQ(path.p[i], z0.p);
    EXPECT_NEAR((path.qbar[i] - z0.q - t * z0.p).norm(), 0.0, 1e-14);
  }
}

TEST(IntegrateFlow, EquilibriumStaysPut) {
  const auto w = make_walk(32, 1, 1);
  OrbitProblem<1> prob(pendulum(), w, 0.0);
  for (double q : {0.0, 0.5}) {
    const auto path = integrate_flow(prob, PhaseState<1>{Vec<1>(q), Vec<1>(0.0)});
    for (int i = 0; i <= path.steps; ++i) {
      EXPECT_NEAR(path.qbar[i][0], q, 1e-15);
      EXPECT_NEAR(path.p[i][0], 0.0, 1e-15);
    }
  }
}

TEST(IntegrateFlow, FourthOrderSelfConvergence) {
  const auto w = make_walk(8, 1, 3);
  const PhaseState<1> z0{Vec<1>(0.2), Vec<1>(0.9)};
  auto end_state = [&](int m) {
    OrbitOptions o;
    o.substeps_per_piece = m;
    OrbitProblem<1> prob(driven(), w, 0.7, o);
    return prob.integrate(z0);
  };
  const auto ref = end_state(1024);
  double prev = 0.0;
  for (int m : {2, 4, 8, 16}) {
    const auto z = end_state(m);
    const double err = std::hypot(z.q[0] - ref.q[0], z.p[0] - ref.p[0]);
    if (prev > 0.0) {
      EXPECT_NEAR(std::log2(prev / err), 4.0, 0.25) << m;
    }
    prev = err;
  }
}

TEST(IntegrateFlow, DivergenceGuard) {
  // |dp/dt| <= c keeps honest orbits inside the guard; a start far outside trips it.
  const auto w = make_walk(4, 1, 1);
  OrbitProblem<1> prob(pendulum(), w, 0.0);
  try {
    prob.integrate(PhaseState<1>{Vec<1>(0.2), Vec<1>(1e6)});
    FAIL() << "expected divergence";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverFailure::Divergence);
  }
}

TEST(ShootResidual, FreeClosedForm) {
  const auto w = make_walk(100, 1, 5);
  const double sigma = 1.1;
  OrbitProblem<1> prob(free_spec(1), w, sigma);
  const double sw1 = sigma * w.eval(1.0, 0);
  ASSERT_NE(sw1, 0.0);
  // p0 = -sigma W(1) closes the twisted loop.
  EXPECT_NEAR(shoot_residual(prob, PhaseState<1>{Vec<1>(0.3), Vec<1>(-sw1)}).norm(), 0.0, 1e-14);
  const auto r = shoot_residual(prob, PhaseState<1>{Vec<1>(0.3), Vec<1>(0.0)});
  EXPECT_NEAR(r[0], sw1, 1e-14);
  EXPECT_EQ(r[1], 0.0);
}

TEST(Newton, FreeCaseTwoSteps) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = make_walk(257, 1, seed);
    const double sigma = 1.5;
    OrbitProblem<1> prob(free_spec(1), w, sigma);
    const double sw1 = sigma * w.eval(1.0, 0);
    const auto o = newton_closed_orbit(prob, PhaseState<1>{Vec<1>(0.4), Vec<1>(-sw1 + 0.05)});
    EXPECT_LE(o.iterations, 2);
    EXPECT_NEAR(o.p0[0], -sw1, 1e-12);
    EXPECT_NEAR(o.action, 0.5 * sw1 * sw1, 1e-10);
    EXPECT_LT(o.newton_residual, 1e-10);
  }
}

TEST(Newton, PendulumEquilibria) {
  const auto w = make_walk(16, 1, 2);
  OrbitProblem<1> prob(pendulum(), w, 0.0);
  const auto top = newton_closed_orbit(prob, PhaseState<1>{Vec<1>(0.03), Vec<1>(0.01)});
  EXPECT_NEAR(top.q0[0], 0.0, 1e-9);
  EXPECT_NEAR(top.p0[0], 0.0, 1e-9);
  EXPECT_NEAR(top.action, -0.1, 1e-9);
  const auto bottom = newton_closed_orbit(prob, PhaseState<1>{Vec<1>(0.46), Vec<1>(-0.02)});
  EXPECT_NEAR(bottom.q0[0], 0.5, 1e-9);
  EXPECT_NEAR(bottom.action, 0.1, 1e-9);
}

TEST(Newton, ZeroScaleReproducesFreeFamily) {
  const auto w = make_walk(64, 1, 9);
  OrbitProblem<1> prob(pendulum(), w, 0.6);
  const auto free_prob = prob.with_scale(0.0);
  const double sw1 = 0.6 * w.eval(1.0, 0);
  for (double q : {0.1, 0.37, 0.8}) {
    const auto o = newton_closed_orbit(free_prob, PhaseState<1>{Vec<1>(q), Vec<1>(0.0)});
    EXPECT_NEAR(o.q0[0], q, 1e-12);
    EXPECT_NEAR(o.p0[0], -sw1, 1e-12);
  }
}

TEST(Newton, QuadraticConvergence) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = make_walk(128, 1, seed);
    OrbitProblem<1> prob(driven(), w, 0.3);
    const auto fam = find_orbit_family(prob);
    for (const auto& orb : fam.orbits) {
      PhaseState<1> guess{orb.q0 + Vec<1>(0.02), orb.p0 - Vec<1>(0.02)};
      const auto o = newton_closed_orbit(prob, guess);
      const auto& h = o.residual_history;
      ASSERT_GE(h.size(), 3u);
      for (std::size_t k = h.size() >= 4 ? h.size() - 4 : 0; k + 1 < h.size(); ++k) {
        if (h[k] < 1e-7) continue;  // below this the forward-difference Jacobian error dominates
        EXPECT_LT(h[k + 1] / (h[k] * h[k]), 1e3) << "seed " << seed << " step " << k;
      }
    }
  }
}

TEST(Action, FreeReferenceValue) {
  const auto w = make_walk(128, 2, 4);
  OrbitProblem<2> prob(free_spec(2), w, 0.9);
  const auto o = newton_closed_orbit(prob, PhaseState<2>{Vec<2>(0.1, 0.2), Vec<2>(0.0, 0.0)});
  EXPECT_NEAR(o.action, 0.5 * prob.sigma_w1().squaredNorm(), 1e-12);
  EXPECT_NEAR(symplectic_action(o), o.action, 0.0);
}

TEST(Action, EquilibriumIsMinusF) {
  const auto w = make_walk(16, 1, 2);
  OrbitProblem<1> prob(pendulum(0.07), w, 0.0);
  const auto o = newton_closed_orbit(prob, PhaseState<1>{Vec<1>(0.5), Vec<1>(0.0)});
  EXPECT_NEAR(o.action, 0.07, 1e-12);
}

TEST(Action, DualFormsAgree) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto w = make_walk(256, 1, seed);
    OrbitProblem<1> prob(driven(), w, 0.3);
    for (const auto& o : find_orbit_family(prob).orbits) EXPECT_NEAR(o.action, o.action_legendre, 1e-8);
  }
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto w = make_walk(128, 2, seed);
    OrbitOptions opt;
    opt.strategy = SeedStrategy::ReducedAction;
    OrbitProblem<2> prob(torus2(), w, 0.3, opt);
    for (const auto& o : find_orbit_family(prob).orbits) EXPECT_NEAR(o.action, o.action_legendre, 1e-8);
  }
}

TEST(Family, PendulumAtZeroDiffusion) {
  const auto w = make_walk(32, 1, 1);
  OrbitProblem<1> prob(pendulum(0.1), w, 0.0);
  const auto fam = find_orbit_family(prob);
  ASSERT_EQ(fam.orbits.size(), 2u);
  EXPECT_FALSE(fam.morse_bott);
  EXPECT_EQ(fam.orbits[0].label, "1-");
  EXPECT_EQ(fam.orbits[1].label, "1+");
  EXPECT_NEAR(fam.orbits[0].q0[0], 0.0, 1e-8);
  EXPECT_NEAR(fam.orbits[1].q0[0], 0.5, 1e-8);
  EXPECT_NEAR(fam.orbits[1].action - fam.orbits[0].action, 0.2, 1e-9);
}

TEST(Family, FreeCaseIsMorseBott) {
  const auto w = make_walk(32, 2, 1);
  OrbitProblem<2> prob(free_spec(2), w, 0.5);
  const auto fam = find_orbit_family(prob);
  EXPECT_TRUE(fam.morse_bott);
  EXPECT_EQ(fam.orbits.size(), 64u);
  for (const auto& o : fam.orbits) EXPECT_NEAR(o.action, 0.5 * prob.sigma_w1().squaredNorm(), 1e-12);
}

TEST(Family, TorusBenchmarkCountMatchesDenseMultistart) {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const auto w = make_walk(32, 2, seed);
    OrbitProblem<2> prob(torus2(), w, 0.3);
    const auto fam = find_orbit_family(prob);
    OrbitOptions dense;
    dense.seeds_per_axis = 32;
    dense.continuation_steps = 8;
    OrbitProblem<2> dprob(torus2(), w, 0.3, dense);
    const auto dfam = find_orbit_family(dprob);
    std::set<long long> a, b;
    for (const auto& o : fam.orbits) a.insert(std::llround(o.action * 1e7));
    for (const auto& o : dfam.orbits) b.insert(std::llround(o.action * 1e7));
    EXPECT_GE(a.size(), 3u);
    EXPECT_EQ(a, b);
  }
}

TEST(Family, ZeroDiffusionTorusActions) {
  const auto w = make_walk(16, 2, 3);
  OrbitProblem<2> prob(torus2(), w, 0.0);
  const auto fam = find_orbit_family(prob);
  ASSERT_EQ(fam.orbits.size(), 4u);
  const double expect[4] = {-0.17, -0.03, 0.07, 0.13};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(fam.orbits[i].action, expect[i], 1e-9);
  EXPECT_EQ(fam.orbits[3].label, "2+");
}

TEST(Family, ReducedActionSeedsAgreeWithGrid) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto w = make_walk(128, 1, rng::sample_seed(5, seed));
    OrbitOptions ro;
    ro.strategy = SeedStrategy::ReducedAction;
    const auto a = find_orbit_family(OrbitProblem<1>(driven(), w, 0.3));
    const auto b = find_orbit_family(OrbitProblem<1>(driven(), w, 0.3, ro));
    ASSERT_EQ(a.orbits.size(), b.orbits.size());
    for (std::size_t i = 0; i < a.orbits.size(); ++i) EXPECT_NEAR(a.orbits[i].action, b.orbits[i].action, 1e-9);
  }
}

TEST(Family, ActionChainAndBounds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = make_walk(256, 1, rng::sample_seed(8, seed));
    OrbitProblem<1> prob(pendulum(), w, 0.3);
    const auto fam = find_orbit_family(prob);
    ASSERT_GE(fam.orbits.size(), 2u);
    EXPECT_GT(fam.orbits[1].action - fam.orbits[0].action, 1e-8);
    for (const auto& o : fam.orbits) {
      EXPECT_LE(o.action, prob.action_bound() + 1e-9);
      EXPECT_LT(o.path.max_abs_p(), prob.cutoff().R);
      EXPECT_LT(o.newton_residual, 1e-10);
      // contractible: qbar closes up with exactly the walk twist
      EXPECT_NEAR(o.path.qbar.back()[0] - o.path.qbar.front()[0], -prob.sigma_w1()[0], 1e-9);
    }
  }
}

TEST(Family, ChooseRSweepOverSolvedOrbits) {
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 16 << (i % 5);
    const double sigma = 2.0 * rng::uniform(9, 1, i);
    const auto w = make_walk(n, 1, rng::sample_seed(9, i));
    OrbitOptions o;
    o.strategy = SeedStrategy::ReducedAction;
    o.use_cutoff = false;
    OrbitProblem<1> prob(driven(), w, sigma, o);
    OrbitFamily<1> fam;
    try {
      fam = find_orbit_family(prob);
    } catch (const SolverError&) {
      continue;
    }
    for (const auto& orb : fam.orbits) {
      if (orb.action > prob.action_bound()) continue;
      EXPECT_LT(orb.path.max_abs_p(), prob.cutoff().R);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1500);
}

TEST(Labels, ActionChainNames) {
  EXPECT_EQ(orbit_label(0, 2), "1-");
  EXPECT_EQ(orbit_label(1, 2), "1+");
  EXPECT_EQ(orbit_label(3, 2), "2+");
  EXPECT_EQ(orbit_label(4, 2), "extra0");
}
