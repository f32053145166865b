#include "dhlab/torus_phase.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dhlab;

namespace {

HamiltonianSpec single_cosine(double a) {
  HamiltonianSpec s;
  s.d = 1;
  s.terms.push_back({{1}, 0, a, 0.0});
  s.envelope = {4.0, 2.0};
  return s;
}

HamiltonianSpec rich_spec(int d) {
  HamiltonianSpec s;
  s.d = d;
  if (d == 1) {
    s.terms = {{{1}, 0, 0.1, 0.0}, {{2}, 1, -0.05, 0.4}, {{1}, -2, 0.03, 1.1}};
  } else {
    s.terms = {{{1, 0}, 0, 0.1, 0.0}, {{0, 1}, 1, 0.05, 0.3}, {{1, -1}, 0, 0.02, 0.7}, {{2, 1}, -1, 0.01, 2.0}};
  }
  s.envelope = {0.6, 0.8};
  return s;
}

PhasePoint point(std::initializer_list<double> q, std::initializer_list<double> p) {
  PhasePoint z;
  z.q = Eigen::Map<const Eigen::VectorXd>(q.begin(), static_cast<Eigen::Index>(q.size()));
  z.p = Eigen::Map<const Eigen::VectorXd>(p.begin(), static_cast<Eigen::Index>(p.size()));
  return z;
}

PhasePoint random_point(int d, std::uint64_t key, int i, double pmax) {
  PhasePoint z;
  z.q.resize(d);
  z.p.resize(d);
  for (int c = 0; c < d; ++c) {
    z.q[c] = rng::uniform(key, 10 + c, i);
    z.p[c] = pmax * (2.0 * rng::uniform(key, 20 + c, i) - 1.0);
  }
  return z;
}

}  // namespace

TEST(EvalH, PureKinetic) {
  HamiltonianSpec s;
  s.d = 1;
  EXPECT_DOUBLE_EQ(eval_H(s, 0.3, point({0.7}, {3.0})), 4.5);
}

TEST(EvalH, CosinePeak) {
  EXPECT_DOUBLE_EQ(eval_H(single_cosine(0.25), 0.0, point({0.0}, {0.0})), 0.25);
}

TEST(EvalH, PeriodicInTimeAndSpace) {
  for (int d : {1, 2}) {
    const auto s = rich_spec(d);
    for (int i = 0; i < 200; ++i) {
      auto z = random_point(d, 5, i, 2.0);
      const double t = rng::uniform(5, 1, i);
      const double h = eval_H(s, t, z);
      EXPECT_NEAR(h, eval_H(s, t + 1.0, z), 1e-12);
      z.q.array() += 1.0;
      EXPECT_NEAR(h, eval_H(s, t, z), 1e-12);
    }
  }
}

TEST(GradH, FreeCase) {
  HamiltonianSpec s;
  s.d = 2;
  auto [gq, gp] = grad_H(s, 0.1, point({0.2, 0.3}, {1.5, -2.0}));
  EXPECT_EQ(gq.norm(), 0.0);
  EXPECT_EQ(gp[0], 1.5);
  EXPECT_EQ(gp[1], -2.0);
}

TEST(GradH, QuarterPeriodSlope) {
  const double a = 0.3;
  auto [gq, gp] = grad_H(single_cosine(a), 0.0, point({0.25}, {0.0}));
  EXPECT_NEAR(gq[0], -kTwoPi * a, 1e-14);
}

TEST(GradH, MatchesCentralDifferences) {
  const double h = 1e-6;
  for (int d : {1, 2}) {
    const auto s = rich_spec(d);
    for (int i = 0; i < 300; ++i) {
      const auto z = random_point(d, 77, i, 1.8);  // spans plateau, taper and outside
      const double t = rng::uniform(77, 3, i);
      auto [gq, gp] = grad_H(s, t, z);
      for (int c = 0; c < d; ++c) {
        auto zp = z, zm = z;
        zp.q[c] += h;
        zm.q[c] -= h;
        const double fq = (eval_H(s, t, zp) - eval_H(s, t, zm)) / (2 * h);
        zp = z;
        zm = z;
        zp.p[c] += h;
        zm.p[c] -= h;
        const double fp = (eval_H(s, t, zp) - eval_H(s, t, zm)) / (2 * h);
        EXPECT_NEAR(gq[c], fq, 1e-6 * std::max(1.0, std::abs(fq)));
        EXPECT_NEAR(gp[c], fp, 1e-6 * std::max(1.0, std::abs(fp)));
      }
    }
  }
}

TEST(Hamiltonian, HessianMatchesGradientDifferences) {
  const auto s = rich_spec(2);
  Hamiltonian<2> H(s, 1.0, CutoffSpec{0.9});
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const auto z = random_point(2, 99, i, 2.5);
    const Vec<2> q = z.q, p = z.p;
    const double t = rng::uniform(99, 4, i);
    const auto J = H.jet(t, q, p, true);
    for (int c = 0; c < 2; ++c) {
      Vec<2> e = Vec<2>::Zero();
      e[c] = h;
      const auto jp = H.jet(t, q, p + e), jm = H.jet(t, q, p - e);
      const Vec<2> dFp = (jp.Fp - jm.Fp) / (2 * h);
      const Vec<2> dFq = (jp.Fq - jm.Fq) / (2 * h);
      for (int r = 0; r < 2; ++r) {
        EXPECT_NEAR(J.Fpp(r, c), dFp[r], 1e-5);
        EXPECT_NEAR(J.Fqp(r, c), dFq[r], 1e-5);
      }
      const auto kp = H.jet(t, q + e, p), km = H.jet(t, q - e, p);
      const Vec<2> dq = (kp.Fq - km.Fq) / (2 * h);
      for (int r = 0; r < 2; ++r) EXPECT_NEAR(J.Fqq(r, c), dq[r], 1e-5);
    }
  }
}

TEST(KOmega, ZeroSigmaIsH) {
  const auto s = rich_spec(2);
  const auto w = make_walk(64, 2, 3);
  for (int i = 0; i < 50; ++i) {
    const auto z = random_point(2, 8, i, 1.0);
    const double t = rng::uniform(8, 5, i);
    EXPECT_DOUBLE_EQ(eval_K_omega(s, w, 0.0, t, z), eval_H(s, t, z));
  }
}

TEST(KOmega, FreeCaseIgnoresWalk) {
  HamiltonianSpec s;
  s.d = 1;
  const auto w = make_walk(64, 1, 3);
  EXPECT_DOUBLE_EQ(eval_K_omega(s, w, 1.3, 0.4, point({0.1}, {2.0})), 2.0);
}

TEST(KOmega, ComposesShiftModOne) {
  const auto s = rich_spec(1);
  const auto w = make_walk(128, 1, 12);
  for (int i = 0; i < 100; ++i) {
    auto z = random_point(1, 6, i, 1.0);
    const double t = rng::uniform(6, 7, i);
    const double sigma = 1.7;
    auto shifted = z;
    shifted.q[0] = wrap_unit(z.q[0] + sigma * w.eval(t, 0));
    EXPECT_NEAR(eval_K_omega(s, w, sigma, t, z), eval_H(s, t, shifted), 1e-13);
  }
  EXPECT_THROW(eval_K_omega(s, w, 1.0, 1.2, point({0.0}, {0.0})), InvalidArgument);
}

TEST(KOmega, GradientMatchesDifferences) {
  const auto s = rich_spec(2);
  const auto w = make_walk(256, 2, 21);
  const double sigma = 0.5;
  Hamiltonian<2> H(s);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const auto z = random_point(2, 44, i, 1.5);
    const double t = rng::uniform(44, 2, i);
    const Vec<2> q = Vec<2>(z.q) + sigma * w.eval<2>(t);
    auto [gq, gp] = H.grad_H(t, q, Vec<2>(z.p));
    for (int c = 0; c < 2; ++c) {
      auto zp = z, zm = z;
      zp.q[c] += h;
      zm.q[c] -= h;
      const double fq = (eval_K_omega(s, w, sigma, t, zp) - eval_K_omega(s, w, sigma, t, zm)) / (2 * h);
      EXPECT_NEAR(gq[c], fq, 1e-6 * std::max(1.0, std::abs(fq)));
    }
  }
}

TEST(C1Bound, DominatesSampledNorm) {
  for (int d : {1, 2}) {
    const auto s = rich_spec(d);
    const double bound = s.c1_bound();
    double sampled = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const auto z = random_point(d, 123, i, 1.6);
      const double t = rng::uniform(123, 9, i);
      HamiltonianSpec kin;
      kin.d = d;
      const double F = eval_H(s, t, z) - eval_H(kin, t, z);
      auto [gq, gp] = grad_H(s, t, z);
      const Eigen::VectorXd fp = gp - z.p;
      sampled = std::max(sampled, std::abs(F) + std::sqrt(gq.squaredNorm() + fp.squaredNorm()));
    }
    EXPECT_LE(sampled, bound);
    EXPECT_GT(sampled, 0.3 * bound);
  }
}

TEST(C1Bound, PendulumValue) {
  const auto s = single_cosine(0.1);
  EXPECT_NEAR(s.c1_bound(), 0.1 + std::hypot(kTwoPi * 0.1, 0.1), 1e-14);
}

TEST(Cutoff, ProfileShape) {
  CutoffSpec c{3.0};
  EXPECT_EQ(c.at(0.0).value, 1.0);
  EXPECT_EQ(c.at(3.0).value, 1.0);
  EXPECT_EQ(c.at(4.0).value, 0.0);
  double prev = 1.0;
  for (double r = 3.0; r <= 4.0; r += 0.01) {
    const auto v = c.at(r);
    EXPECT_LE(v.value, prev + 1e-15);
    EXPECT_GE(v.value, 0.0);
    EXPECT_LE(std::abs(v.d1), CutoffSpec::kMaxSlope + 1e-12);
    prev = v.value;
  }
  EXPECT_NEAR(std::abs(c.at(3.5).d1), CutoffSpec::kMaxSlope, 1e-12);
}

TEST(Cutoff, AgreesInsideVanishesOutside) {
  const auto s = rich_spec(1);
  const double R = 0.5;
  Hamiltonian<1> plain(s), cut(s, 1.0, CutoffSpec{R});
  for (int i = 0; i < 500; ++i) {
    const auto z = random_point(1, 55, i, 2.0);
    const double t = rng::uniform(55, 1, i);
    const Vec<1> q = z.q, p = z.p;
    if (std::abs(p[0]) <= R) {
      EXPECT_EQ(plain.H(t, q, p), cut.H(t, q, p));
    }
    if (std::abs(p[0]) >= R + 1.0) {
      EXPECT_EQ(cut.F(t, q, p), 0.0);
    }
  }
}

TEST(ChooseR, FreeCaseDefaultAndMonotone) {
  HamiltonianSpec s;
  s.d = 1;
  const auto w = make_walk(16, 1, 1);
  EXPECT_GE(choose_R(w, 0.0, s).R, 1.0);
  const auto spec = single_cosine(0.1);
  WalkPath low(CoinSequence{4, 1, 0, {1, -1, 1, -1}});
  WalkPath high(CoinSequence{4, 1, 0, {1, 1, 1, 1}});
  EXPECT_LT(choose_R(low, 0.5, spec).R, choose_R(high, 0.5, spec).R);
  for (double sig : {0.0, 0.1, 1.0, 2.0}) EXPECT_LE(choose_R(low, sig, spec).R, choose_R(high, sig, spec).R);
}

TEST(Spec, ValidationErrors) {
  HamiltonianSpec s;
  s.d = 2;
  s.terms.push_back({{1}, 0, 0.1, 0.0});
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_THROW(Hamiltonian<1>(rich_spec(2)), InvalidArgument);
  EXPECT_THROW(dispatch_dim(3, []<int D>() { return D; }), InvalidArgument);
}
