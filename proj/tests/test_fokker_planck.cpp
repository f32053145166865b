#include "dhlab/fokker_planck.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace dhlab;

namespace {

HamiltonianSpec pendulum() {
  HamiltonianSpec s;
  s.d = 1;
  s.terms.push_back({{1}, 0, 0.1, 0.0});
  s.envelope = {4.0, 2.0};
  return s;
}

HamiltonianSpec free_spec() {
  HamiltonianSpec s;
  s.d = 1;
  return s;
}

FPGrid grid(int n, int T = 16) { return FPGrid{1, n, n, 2.0, T}; }

std::vector<double> random_field(std::size_t size, std::uint64_t key, bool positive) {
  std::vector<double> v(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double u = rng::uniform(key, 0, i);
    v[i] = positive ? 0.1 + u : 2.0 * u - 1.0;
  }
  return v;
}

EmpiricalMeasure stationary_measure(const FokkerPlanck& fp, double s) {
  const auto rho = fp.product_density(s);
  return fp.to_measure(std::vector<std::vector<double>>(fp.grid().T + 1, rho));
}

}  // namespace

TEST(FokkerPlanck, RejectsBadGrids) {
  FPGrid g = grid(64);
  g.steps = 64;
  EXPECT_THROW(FokkerPlanck(pendulum(), 0.3, g), InvalidArgument);
  g.steps = 100000 + 7;
  EXPECT_THROW(FokkerPlanck(pendulum(), 0.3, g), InvalidArgument);
  FPGrid two = grid(16);
  two.d = 2;
  EXPECT_THROW(FokkerPlanck(pendulum(), 0.3, two), InvalidArgument);
  EXPECT_THROW(FokkerPlanck(pendulum(), -0.1, grid(16)), InvalidArgument);
  EXPECT_NO_THROW(FokkerPlanck(pendulum(), 0.3, grid(64)));
}

TEST(FokkerPlanck, DefaultStepsRespectBothBounds) {
  const FokkerPlanck fp(pendulum(), 1.5, grid(64));
  const auto& g = fp.grid();
  EXPECT_EQ(g.steps % g.T, 0);
  EXPECT_LE(1.5 * 1.5 * fp.dt() * 64 * 64, 0.5);
}

TEST(FpApply, FreeStationaryProfile) {
  for (double sigma : {0.3, 0.7}) {
    const FokkerPlanck fp(free_spec(), sigma, grid(64));
    const auto rho = fp.product_density(sigma);
    EXPECT_NEAR(fp.mass(rho), 1.0, 1e-12);
    EXPECT_LT(fp.l1(fp_apply(fp, rho, 0.3)), 1e-3);
  }
}

TEST(FpApply, ConservesMass) {
  const FokkerPlanck fp(pendulum(), 0.3, grid(32));
  for (int k = 0; k < 10; ++k) {
    const auto rhs = fp_apply(fp, random_field(fp.cells(), 50 + k, true), 0.1 * k);
    double total = 0.0;
    for (double v : rhs) total += v;
    EXPECT_NEAR(total * fp.cell_volume(), 0.0, 1e-12);
  }
}

TEST(FpApply, AdjointIdentity) {
  const FokkerPlanck fp(pendulum(), 0.4, grid(32));
  for (int k = 0; k < 20; ++k) {
    const double t = 0.05 * k;
    const auto rho = random_field(fp.cells(), 100 + k, true);
    const auto phi = random_field(fp.cells(), 200 + k, false);
    const double lhs = fp.inner(fp_apply(fp, rho, t), phi);
    const double rhs = fp.inner(rho, fp.adjoint(phi, t));
    EXPECT_NEAR(lhs - rhs, 0.0, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(FpApply, ConstantsAreAnnihilatedByAdjoint) {
  const FokkerPlanck fp(pendulum(), 0.4, grid(32));
  const auto out = fp.adjoint(std::vector<double>(fp.cells(), 1.0), 0.2);
  for (double v : out) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Period, PositiveAndMassPreserving) {
  const FokkerPlanck fp(pendulum(), 0.3, grid(32));
  auto rho = random_field(fp.cells(), 9, true);
  const double m0 = fp.mass(rho);
  std::vector<std::vector<double>> slices;
  fp.period(rho, &slices);
  ASSERT_EQ(slices.size(), static_cast<std::size_t>(fp.grid().T + 1));
  for (const auto& s : slices) {
    EXPECT_NEAR(fp.mass(s), m0, 1e-12);
    EXPECT_GE(*std::min_element(s.begin(), s.end()), 0.0);
  }
}

TEST(PeriodicSolve, FreeCaseMatchesAnalyticProfile) {
  const double sigma = 0.3;
  const FokkerPlanck fp(free_spec(), sigma, grid(64, 64));
  PeriodicOptions opt;
  opt.init = fp.product_density(sigma);
  for (std::size_t c = 0; c < opt.init.size(); ++c) opt.init[c] *= 1.0 + 0.8 * std::cos(2.0 * M_PI * (c / 64 + 0.5) / 64);
  const auto sol = periodic_solve(fp, opt);
  EXPECT_GT(sol.iterations, 1);
  EXPECT_LT(sol.defect, 1e-9);
  const auto exact = stationary_measure(fp, sigma);
  EXPECT_LT(measure_distance(sol.measure, exact), 2.0 * exact.grid.bin_width());
}

TEST(PeriodicSolve, TrajectoryIsPeriodicAndNormalised) {
  const FokkerPlanck fp(pendulum(), 0.3, grid(24));
  PeriodicOptions opt;
  opt.tol = 1e-8;
  const auto sol = periodic_solve(fp, opt);
  const auto& m = sol.measure;
  const std::size_t cells = m.grid.slice_cells();
  for (std::size_t k = 0; k < cells; ++k) ASSERT_EQ(m.mass[k], m.mass[m.grid.T * cells + k]);
  for (int j = 0; j <= m.grid.T; ++j) {
    EXPECT_NEAR(m.slice_mass(j), 1.0, 1e-10);
    for (std::size_t k = 0; k < cells; ++k) ASSERT_GE(m.mass[j * cells + k], 0.0);
  }
}

TEST(PeriodicSolve, NonConvergenceReportsDefect) {
  const FokkerPlanck fp(pendulum(), 0.3, grid(16));
  PeriodicOptions opt;
  opt.power_iters = 2;
  opt.tol = 0.0;
  try {
    periodic_solve(fp, opt);
    FAIL() << "expected NonConvergence";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverFailure::NonConvergence);
    EXPECT_GT(e.value(), 0.0);
  }
}

TEST(PeriodicSolve, UniquenessFlag) {
  PeriodicOptions opt;
  opt.check_uniqueness = true;
  opt.tol = 1e-10;
  opt.power_iters = 20000;
  const auto frozen = periodic_solve(FokkerPlanck(free_spec(), 0.0, grid(16)), opt);
  EXPECT_TRUE(frozen.nonunique);
  EXPECT_GT(frozen.init_disagreement, 1e-3);
  opt.tol = 1e-11;
  const auto mixing = periodic_solve(FokkerPlanck(pendulum(), 0.5, grid(16)), opt);
  EXPECT_FALSE(mixing.nonunique);
  EXPECT_LT(mixing.init_disagreement, 1e-6);
}

TEST(TestBank, RejectsEmptyAndIsDistinct) {
  EXPECT_THROW(test_bank(1, 0, 0.5), InvalidArgument);
  const auto bank = test_bank(1, 16, 0.5);
  ASSERT_EQ(bank.size(), 16u);
  const auto m = stationary_measure(FokkerPlanck(free_spec(), 0.3, grid(16)), 0.3);
  EXPECT_THROW(weak_residual(m, free_spec(), 0.3, 0), InvalidArgument);
}

TEST(TestBank, AnalyticDerivatives) {
  const auto bank = test_bank(1, 24, 0.5);
  const double h = 1e-5, t = 0.3;
  const Vec<1> q(0.37), p(0.21);
  for (const auto& f : bank) {
    const auto J = f.eval<1>(t, q, p);
    const auto at = [&](double dt, double dq, double dp) { return f.eval<1>(t + dt, Vec<1>(q[0] + dq), Vec<1>(p[0] + dp)).v; };
    EXPECT_NEAR(J.t, (at(h, 0, 0) - at(-h, 0, 0)) / (2 * h), 1e-6);
    EXPECT_NEAR(J.q[0], (at(0, h, 0) - at(0, -h, 0)) / (2 * h), 1e-6);
    EXPECT_NEAR(J.p[0], (at(0, 0, h) - at(0, 0, -h)) / (2 * h), 1e-6);
    EXPECT_NEAR(J.qq[0], (at(0, h, 0) - 2 * J.v + at(0, -h, 0)) / (h * h), 1e-3 * std::max(1.0, std::abs(J.qq[0])));
  }
}

TEST(WeakResidual, StationaryProfileIsSmall) {
  const double sigma = 0.3;
  const FokkerPlanck fp(free_spec(), sigma, grid(64, 64));
  EXPECT_LT(weak_residual(stationary_measure(fp, sigma), free_spec(), sigma, 16), 1e-3);
}

TEST(WeakResidual, TransportedDiracConvergesAtFirstOrder) {
  // sigma = 0, free motion q = 0.1 + t, p = 1: a closed classical orbit.
  auto residual = [](int n) {
    MeasureGrid g{1, n, n, n, 2.0};
    OrbitSlices o;
    for (int j = 0; j <= n; ++j) {
      o.q.push_back(wrap_unit(0.1 + static_cast<double>(j) / n));
      o.p.push_back(1.0);
    }
    return weak_residual(accumulate({o}, g, {}), free_spec(), 0.0, 16);
  };
  const double coarse = residual(32), fine = residual(128);
  EXPECT_LT(fine, 0.6 * coarse);
  EXPECT_LT(fine, 0.05);
}

TEST(WeakResidual, CorruptionIsDetected) {
  const double sigma = 0.3;
  const FokkerPlanck fp(free_spec(), sigma, grid(64, 64));
  std::vector<OrbitSlices> orbits;
  for (int i = 0; i < 2000; ++i) {
    OrbitSlices o;
    const double q0 = rng::uniform(77, 0, i), p0 = 0.3 * (2.0 * rng::uniform(77, 1, i) - 1.0);
    for (int j = 0; j <= 64; ++j) {
      o.q.push_back(wrap_unit(q0));
      o.p.push_back(p0);
    }
    orbits.push_back(o);
  }
  const MeasureGrid g{1, 64, 64, 64, 2.0};
  const double base = weak_residual(accumulate(corrupted_control(orbits, 64), g, {}), free_spec(), sigma, 16);
  EXPECT_GT(base, 10 * weak_residual(stationary_measure(fp, sigma), free_spec(), sigma, 16));
}

TEST(WeakResidual, PeriodicSolutionIsSmall) {
  const double sigma = 0.3;
  const FokkerPlanck fp(pendulum(), sigma, grid(32, 32));
  const auto sol = periodic_solve(fp);
  EXPECT_LT(weak_residual(sol.measure, pendulum(), sigma, 16), 1e-3);
}
