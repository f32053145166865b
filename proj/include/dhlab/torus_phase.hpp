#pragma once

// Phase space T*T^d, the Hamiltonian family H_t = |p|^2/2 + F_t, its
// random-walk shifted form K and the momentum cut-off.

#include "dhlab/core.hpp"
#include "dhlab/sample_space.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dhlab {

/// One Fourier mode a * cos(2 pi (k.q + m t) + phase).
struct FourierTerm {
  std::vector<int> k;
  int m = 0;
  double a = 0.0;
  double phase = 0.0;
};

/// Momentum envelope: 1 for |p| <= plateau, 0 beyond plateau + taper.
/// An infinite plateau disables the envelope.
struct Envelope {
  double plateau = std::numeric_limits<double>::infinity();
  double taper = 1.0;

  bool active() const { return std::isfinite(plateau); }
  Radial at(double r) const { return plateau_profile(r, plateau, taper); }
  double max_slope() const { return active() ? SmoothStep::kMaxSlope / taper : 0.0; }
};

/// F_t(q,p) = envelope(|p|) * sum_j a_j cos(2 pi (k_j.q + m_j t) + phase_j).
struct HamiltonianSpec {
  int d = 1;
  std::vector<FourierTerm> terms;
  Envelope envelope;
  double sigma = 0.0;

  void validate() const {
    require(d >= 1, "HamiltonianSpec: d must be positive");
    require(!envelope.active() || (envelope.plateau > 0.0 && envelope.taper > 0.0),
            "HamiltonianSpec: envelope plateau and taper must be positive");
    for (const auto& t : terms) {
      require(static_cast<int>(t.k.size()) == d, "HamiltonianSpec: wavevector length differs from d");
      require(std::isfinite(t.a) && std::isfinite(t.phase), "HamiltonianSpec: non-finite amplitude or phase");
    }
  }

  /// True when F vanishes identically.
  bool is_free() const {
    for (const auto& t : terms)
      if (t.a != 0.0) return false;
    return true;
  }

  /// Analytic bound for sup|F| + sup|grad_{q,p} F| (time derivative not
  /// included): sum|a| + sqrt((2 pi sum|a||k|)^2 + (max|env'| sum|a|)^2).
  double c1_bound() const {
    double amp = 0.0;
    double wave = 0.0;
    for (const auto& t : terms) {
      double kn = 0.0;
      for (int v : t.k) kn += static_cast<double>(v) * v;
      amp += std::abs(t.a);
      wave += std::abs(t.a) * std::sqrt(kn);
    }
    const double gq = kTwoPi * wave;
    const double gp = envelope.max_slope() * amp;
    return amp + std::sqrt(gq * gq + gp * gp);
  }
};

/// Smooth cut-off chi_R(|p|): 1 for |p| <= R, 0 for |p| >= R + 1.
struct CutoffSpec {
  double R = std::numeric_limits<double>::infinity();

  bool active() const { return std::isfinite(R); }
  Radial at(double r) const { return plateau_profile(r, R, 1.0); }
  static constexpr double kMaxSlope = SmoothStep::kMaxSlope;
};

template <int D>
struct PhaseState {
  Vec<D> q = Vec<D>::Zero();
  Vec<D> p = Vec<D>::Zero();
};

/// Runtime-dimension phase point (q stored on the cover or mod 1 as stated by the caller).
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

/// Value, gradient and (optionally) Hessian of F at one point. Fqp(i,j) = d2F/dq_i dp_j.
template <int D>
struct FJet {
  double F = 0.0;
  Vec<D> Fq = Vec<D>::Zero();
  Vec<D> Fp = Vec<D>::Zero();
  Mat<D> Fqq = Mat<D>::Zero();
  Mat<D> Fqp = Mat<D>::Zero();
  Mat<D> Fpp = Mat<D>::Zero();
};

/// Fixed-dimension evaluator of F (and H) for one HamiltonianSpec, with an
/// amplitude scale (used for homotopies) and an optional momentum cut-off.
template <int D>
class Hamiltonian {
 public:
  Hamiltonian() = default;

  explicit Hamiltonian(const HamiltonianSpec& spec, double scale = 1.0, CutoffSpec cutoff = {})
      : envelope_(spec.envelope), cutoff_(cutoff), scale_(scale) {
    spec.validate();
    require(spec.d == D, "Hamiltonian: spec dimension does not match evaluator");
    for (const auto& t : spec.terms) {
      Mode m;
      for (int i = 0; i < D; ++i) m.k[i] = kTwoPi * t.k[i];
      m.omega = kTwoPi * t.m;
      m.a = scale * t.a;
      m.phase = t.phase;
      if (m.a != 0.0) modes_.push_back(m);
    }
  }

  Hamiltonian with_scale(double scale) const {
    Hamiltonian h = *this;
    for (auto& m : h.modes_) m.a *= scale / scale_;
    h.scale_ = scale;
    return h;
  }

  Hamiltonian with_cutoff(CutoffSpec cutoff) const {
    Hamiltonian h = *this;
    h.cutoff_ = cutoff;
    return h;
  }

  bool is_free() const { return modes_.empty(); }
  double scale() const { return scale_; }
  const CutoffSpec& cutoff() const { return cutoff_; }

  /// F and first derivatives; Hessian blocks too when `hessian` is set.
  FJet<D> jet(double t, const Vec<D>& q, const Vec<D>& p, bool hessian = false) const {
    FJet<D> j;
    if (modes_.empty()) return j;
    double S = 0.0;
    Vec<D> Sq = Vec<D>::Zero();
    Mat<D> Sqq = Mat<D>::Zero();
    for (const auto& m : modes_) {
      const double th = m.k.dot(q) + m.omega * t + m.phase;
      const double c = std::cos(th);
      const double s = std::sin(th);
      S += m.a * c;
      Sq.noalias() -= (m.a * s) * m.k;
      if (hessian) Sqq.noalias() -= (m.a * c) * (m.k * m.k.transpose());
    }
    const double r = p.norm();
    Radial rho = radial(r);
    j.F = rho.value * S;
    j.Fq = rho.value * Sq;
    if (rho.d1 != 0.0 || rho.d2 != 0.0) {
      const Vec<D> u = (r > 0.0) ? Vec<D>(p / r) : Vec<D>::Zero();
      const Vec<D> grad_rho = rho.d1 * u;
      j.Fp = S * grad_rho;
      if (hessian) {
        j.Fqp = Sq * grad_rho.transpose();
        Mat<D> hess_rho = rho.d2 * (u * u.transpose());
        if (r > 0.0) hess_rho += (rho.d1 / r) * (Mat<D>::Identity() - u * u.transpose());
        j.Fpp = S * hess_rho;
      }
    }
    if (hessian) j.Fqq = rho.value * Sqq;
    return j;
  }

  double F(double t, const Vec<D>& q, const Vec<D>& p) const { return jet(t, q, p).F; }

  double H(double t, const Vec<D>& q, const Vec<D>& p) const { return 0.5 * p.squaredNorm() + F(t, q, p); }

  /// (dH/dq, dH/dp).
  std::pair<Vec<D>, Vec<D>> grad_H(double t, const Vec<D>& q, const Vec<D>& p) const {
    const FJet<D> j = jet(t, q, p);
    return {j.Fq, p + j.Fp};
  }

 private:
  struct Mode {
    Vec<D> k = Vec<D>::Zero();
    double omega = 0.0;
    double a = 0.0;
    double phase = 0.0;
  };

  Radial radial(double r) const {
    const bool inside_env = !envelope_.active() || r <= envelope_.plateau;
    const bool inside_cut = !cutoff_.active() || r <= cutoff_.R;
    if (inside_env && inside_cut) return {};
    Radial out;
    if (!inside_env) out = envelope_.at(r);
    if (!inside_cut) out = out * cutoff_.at(r);
    return out;
  }

  std::vector<Mode> modes_;
  Envelope envelope_;
  CutoffSpec cutoff_;
  double scale_ = 1.0;
};

/// q-shift sigma * W(t) of the random-walk frame.
template <int D>
Vec<D> walk_shift(const WalkPath& w, double sigma, double t) {
  return sigma * w.eval<D>(t);
}

template <int D>
Vec<D> to_fixed(const Eigen::VectorXd& v) {
  require(v.size() == D, "phase point dimension mismatch");
  return Vec<D>(v);
}

inline double eval_H(const HamiltonianSpec& spec, double t, const PhasePoint& z) {
  return dispatch_dim(spec.d, [&]<int D>() {
    return Hamiltonian<D>(spec).H(t, to_fixed<D>(z.q), to_fixed<D>(z.p));
  });
}

/// (dH/dq, dH/dp) as a runtime-dimension pair.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_H(const HamiltonianSpec& spec, double t, const PhasePoint& z) {
  return dispatch_dim(spec.d, [&]<int D>() {
    auto [gq, gp] = Hamiltonian<D>(spec).grad_H(t, to_fixed<D>(z.q), to_fixed<D>(z.p));
    return std::pair<Eigen::VectorXd, Eigen::VectorXd>(gq, gp);
  });
}

/// K_t(qbar, p) = H_t(qbar + sigma W(t), p), the walk reduced mod 1 on q.
inline double eval_K_omega(const HamiltonianSpec& spec, const WalkPath& w, double sigma, double t,
                           const PhasePoint& zbar) {
  require(t >= 0.0 && t <= 1.0, "eval_K_omega: t outside [0,1]");
  require(w.d() == spec.d, "eval_K_omega: walk dimension differs from spec");
  return dispatch_dim(spec.d, [&]<int D>() {
    Vec<D> q = to_fixed<D>(zbar.q) + walk_shift<D>(w, sigma, t);
    for (int i = 0; i < D; ++i) q[i] = wrap_unit(q[i]);
    return Hamiltonian<D>(spec).H(t, q, to_fixed<D>(zbar.p));
  });
}

/// Cut-off radius R such that every orbit of K with action at most
/// |sigma W(1)|^2 / 2 + 4 c (c = C1 bound of F) keeps |p| < R.
///
/// With A the action, ||p|| the L2 norm over [0,1] and |G|, |dG| <= c:
///   A = int |p|^2/2 + p.G_p - G >= ||p||^2/2 - c ||p|| - c
/// gives ||p|| <= c + sqrt(c^2 + 2A + 2c); and |dp/dt| = |G_q| <= c gives
/// sup|p| <= ||p|| + c. Substituting the action bound and
/// sqrt(x + y) <= sqrt(x) + sqrt(y):
///   sup|p| <= sigma |W(1)| + 2c + sqrt(c^2 + 10c) <= R below.
/// A floor of 1 keeps the cut-off away from p = 0 in the free case.
inline CutoffSpec choose_R(const WalkPath& w, double sigma, const HamiltonianSpec& spec) {
  const double c = spec.c1_bound();
  const double R = std::abs(sigma) * w.sup_norm() + 2.0 * c + std::sqrt(c * c + 10.0 * c);
  return CutoffSpec{std::max(R, 1.0)};
}

}  // namespace dhlab
