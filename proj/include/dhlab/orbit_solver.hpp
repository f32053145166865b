#pragma once

// Closed random-walk Hamiltonian orbits: RK4 flow of K on the cover,
// twisted shooting residual, damped Newton, seeded families and actions.

#include "dhlab/core.hpp"
#include "dhlab/sample_space.hpp"
#include "dhlab/torus_phase.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace dhlab {

enum class SeedStrategy {
  Grid,           // uniform q-grid seeds, epsilon-continuation from F = 0
  ReducedAction,  // critical points of the first-order reduced action, direct Newton
};

struct OrbitOptions {
  int substeps_per_piece = 2;  // RK4 steps per walk piece; even so Simpson fits a piece
  double newton_tol = 1e-10;
  int max_iter = 50;
  double fd_step = 1e-7;
  double cond_limit = 1e12;
  int continuation_steps = 32;
  int seeds_per_axis = 8;
  double dedup_tol = 1e-6;
  bool use_cutoff = true;
  SeedStrategy strategy = SeedStrategy::Grid;
};

/// Trajectory (qbar, p) on the cover at the uniform integration grid, with
/// node derivatives and K values; evaluated between nodes by cubic Hermite.
template <int D>
struct LoopPath {
  int steps = 0;
  std::vector<Vec<D>> qbar;
  std::vector<Vec<D>> p;
  std::vector<Vec<D>> dqbar;
  std::vector<Vec<D>> dp;
  std::vector<double> K;

  double h() const { return 1.0 / steps; }
  double time(int i) const { return static_cast<double>(i) / steps; }

  PhaseState<D> at(double t) const {
    require(t >= 0.0 && t <= 1.0, "LoopPath::at: t outside [0,1]");
    int i = std::min(steps - 1, static_cast<int>(std::floor(t * steps)));
    const double s = t * steps - i;
    const double hh = h();
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    PhaseState<D> z;
    z.q = h00 * qbar[i] + h10 * hh * dqbar[i] + h01 * qbar[i + 1] + h11 * hh * dqbar[i + 1];
    z.p = h00 * p[i] + h10 * hh * dp[i] + h01 * p[i + 1] + h11 * hh * dp[i + 1];
    return z;
  }

  double max_abs_p() const {
    double m = 0.0;
    for (const auto& v : p) m = std::max(m, v.norm());
    return m;
  }
};

/// One sample's shooting problem: the (scaled, cut-off) Hamiltonian, the
/// walk and sigma, and the integration grid.
template <int D>
class OrbitProblem {
 public:
  OrbitProblem(const HamiltonianSpec& spec, const WalkPath& walk, double sigma, const OrbitOptions& opt = {})
      : spec_(spec), walk_(&walk), sigma_(sigma), opt_(opt) {
    require(walk.d() == D, "OrbitProblem: walk dimension differs from D");
    require(opt.substeps_per_piece >= 2 && opt.substeps_per_piece % 2 == 0,
            "OrbitProblem: substeps per piece must be a positive even number");
    c1_ = spec.c1_bound();
    cutoff_ = choose_R(walk, sigma, spec);
    ham_ = Hamiltonian<D>(spec, 1.0, opt.use_cutoff ? cutoff_ : CutoffSpec{});
    guard_ = 10.0 * (cutoff_.R + 1.0);
    w1_ = walk.eval<D>(1.0);
  }

  const HamiltonianSpec& spec() const { return spec_; }
  const Hamiltonian<D>& hamiltonian() const { return ham_; }
  const WalkPath& walk() const { return *walk_; }
  double sigma() const { return sigma_; }
  const OrbitOptions& options() const { return opt_; }
  const CutoffSpec& cutoff() const { return cutoff_; }
  double c1() const { return c1_; }
  int steps() const { return walk_->n() * opt_.substeps_per_piece; }
  Vec<D> sigma_w1() const { return sigma_ * w1_; }

  /// Upper action bound of the cut-off argument: |sigma W(1)|^2/2 + 4 c.
  double action_bound() const { return 0.5 * sigma_w1().squaredNorm() + 4.0 * c1_; }

  OrbitProblem with_scale(double eps) const {
    OrbitProblem o = *this;
    o.ham_ = ham_.with_scale(eps);
    return o;
  }

  /// sigma W at time (piece k, fraction f of the piece).
  Vec<D> shift(int k, double f) const {
    Vec<D> w;
    const double inv = 1.0 / std::sqrt(static_cast<double>(walk_->n()));
    for (int c = 0; c < D; ++c) w[c] = walk_->node(k, c) + f * walk_->coins().sign(c, k) * inv;
    return sigma_ * w;
  }

  struct Deriv {
    Vec<D> dq;
    Vec<D> dp;
    double K;
  };

  Deriv rhs(double t, const Vec<D>& shift, const Vec<D>& qbar, const Vec<D>& p) const {
    const FJet<D> j = ham_.jet(t, qbar + shift, p);
    return {p + j.Fp, -j.Fq, 0.5 * p.squaredNorm() + j.F};
  }

  /// RK4 over [0,1]; fills `path` when given, returns the end state.
  PhaseState<D> integrate(const PhaseState<D>& z0, LoopPath<D>* path = nullptr) const {
    const int m = opt_.substeps_per_piece;
    const int N = steps();
    const double h = 1.0 / N;
    if (path) {
      path->steps = N;
      for (auto* v : {&path->qbar, &path->p, &path->dqbar, &path->dp}) v->assign(N + 1, Vec<D>::Zero());
      path->K.assign(N + 1, 0.0);
    }
    Vec<D> q = z0.q;
    Vec<D> p = z0.p;
    for (int i = 0; i < N; ++i) {
      const int k = i / m;
      const int j = i % m;
      const double t = i * h;
      const Vec<D> sa = shift(k, static_cast<double>(j) / m);
      const Vec<D> sm = shift(k, (j + 0.5) / m);
      const Vec<D> sb = shift(k, static_cast<double>(j + 1) / m);
      const Deriv k1 = rhs(t, sa, q, p);
      if (path) {
        path->qbar[i] = q;
        path->p[i] = p;
        path->dqbar[i] = k1.dq;
        path->dp[i] = k1.dp;
        path->K[i] = k1.K;
      }
      const Deriv k2 = rhs(t + 0.5 * h, sm, q + 0.5 * h * k1.dq, p + 0.5 * h * k1.dp);
      const Deriv k3 = rhs(t + 0.5 * h, sm, q + 0.5 * h * k2.dq, p + 0.5 * h * k2.dp);
      const Deriv k4 = rhs(t + h, sb, q + h * k3.dq, p + h * k3.dp);
      q += (h / 6.0) * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
      p += (h / 6.0) * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
      const double pn = p.norm();
      if (!(pn <= guard_)) {
        throw SolverError(SolverFailure::Divergence,
                          "|p| = " + std::to_string(pn) + " exceeded guard " + std::to_string(guard_), pn);
      }
    }
    if (path) {
      const Deriv end = rhs(1.0, shift(walk_->n() - 1, 1.0), q, p);
      path->qbar[N] = q;
      path->p[N] = p;
      path->dqbar[N] = end.dq;
      path->dp[N] = end.dp;
      path->K[N] = end.K;
    }
    return {q, p};
  }

  /// (qbar(1) - qbar(0) + sigma W(1), p(1) - p(0)).
  Vec<2 * D> residual(const PhaseState<D>& z0) const {
    const PhaseState<D> z1 = integrate(z0);
    Vec<2 * D> r;
    r.template head<D>() = z1.q - z0.q + sigma_w1();
    r.template tail<D>() = z1.p - z0.p;
    return r;
  }

 private:
  HamiltonianSpec spec_;
  const WalkPath* walk_ = nullptr;
  double sigma_ = 0.0;
  OrbitOptions opt_;
  Hamiltonian<D> ham_;
  CutoffSpec cutoff_;
  double c1_ = 0.0;
  double guard_ = 0.0;
  Vec<D> w1_ = Vec<D>::Zero();
};

template <int D>
struct ClosedOrbit {
  std::uint64_t seed = 0;
  int n = 0;
  std::string label;
  Vec<D> q0 = Vec<D>::Zero();
  Vec<D> p0 = Vec<D>::Zero();
  double action = 0.0;           // Simpson of p.K_p - K
  double action_legendre = 0.0;  // Hermite int p dqbar minus Simpson int K
  double newton_residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
  LoopPath<D> path;
};

template <int D>
struct OrbitFamily {
  std::vector<ClosedOrbit<D>> orbits;
  bool morse_bott = false;
};

/// Both action forms on a sampled trajectory.
template <int D>
std::pair<double, double> action_forms(const LoopPath<D>& path) {
  const int N = path.steps;
  require(N >= 2 && N % 2 == 0, "action_forms: need an even number of steps");
  const double h = path.h();
  double form_b = 0.0;
  double int_k = 0.0;
  for (int i = 0; i <= N; ++i) {
    const double w = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    form_b += w * (path.p[i].dot(path.dqbar[i]) - path.K[i]);
    int_k += w * path.K[i];
  }
  form_b *= h / 3.0;
  int_k *= h / 3.0;
  // int p . dqbar with both factors cubic Hermite: degree 5, exact by 3-point Gauss.
  static const double gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  static const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  double pdq = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int g = 0; g < 3; ++g) {
      const double s = gx[g];
      const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
      const double h10 = s * (1 - s) * (1 - s);
      const double h01 = s * s * (3 - 2 * s);
      const double h11 = s * s * (s - 1);
      const double d00 = 6 * s * s - 6 * s;
      const double d10 = 3 * s * s - 4 * s + 1;
      const double d01 = -d00;
      const double d11 = 3 * s * s - 2 * s;
      const Vec<D> pv = h00 * path.p[i] + h10 * h * path.dp[i] + h01 * path.p[i + 1] + h11 * h * path.dp[i + 1];
      const Vec<D> qd = (d00 * path.qbar[i] + d01 * path.qbar[i + 1]) / h + d10 * path.dqbar[i] + d11 * path.dqbar[i + 1];
      pdq += gw[g] * h * pv.dot(qd);
    }
  }
  return {form_b, pdq - int_k};
}

template <int D>
LoopPath<D> integrate_flow(const OrbitProblem<D>& prob, const PhaseState<D>& z0) {
  LoopPath<D> path;
  prob.integrate(z0, &path);
  return path;
}

template <int D>
Vec<2 * D> shoot_residual(const OrbitProblem<D>& prob, const PhaseState<D>& z0) {
  return prob.residual(z0);
}

/// Damped Newton on the shooting residual with a forward-difference
/// Jacobian. Near-singular Jacobians (cond > cond_limit) get a truncated
/// pseudo-inverse step; SingularJacobian is raised only if that step cannot
/// reduce the residual.
template <int D>
ClosedOrbit<D> newton_closed_orbit(const OrbitProblem<D>& prob, const PhaseState<D>& guess) {
  constexpr int M = 2 * D;
  using VecM = Vec<M>;
  using MatM = Mat<M>;
  const OrbitOptions& opt = prob.options();
  auto pack = [](const PhaseState<D>& z) {
    VecM v;
    v << z.q, z.p;
    return v;
  };
  auto unpack = [](const VecM& v) { return PhaseState<D>{v.template head<D>(), v.template tail<D>()}; };

  VecM x = pack(guess);
  VecM r = prob.residual(guess);
  double rn = r.template lpNorm<Eigen::Infinity>();
  ClosedOrbit<D> out;
  out.residual_history.push_back(rn);
  int it = 0;
  for (; rn >= opt.newton_tol; ++it) {
    if (it >= opt.max_iter) {
      throw SolverError(SolverFailure::MaxIterations,
                        "no convergence in " + std::to_string(opt.max_iter) + " Newton steps", rn);
    }
    MatM J;
    for (int c = 0; c < M; ++c) {
      VecM xp = x;
      const double hstep = opt.fd_step * std::max(1.0, std::abs(x[c]));
      xp[c] += hstep;
      J.col(c) = (prob.residual(unpack(xp)) - r) / hstep;
    }
    Eigen::JacobiSVD<MatM> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VecM sv = svd.singularValues();
    const double smax = sv[0];
    const bool singular = !(smax > 0.0) || sv[M - 1] * opt.cond_limit < smax;
    VecM inv_sv;
    for (int k = 0; k < M; ++k) inv_sv[k] = (sv[k] * opt.cond_limit >= smax && sv[k] > 0.0) ? 1.0 / sv[k] : 0.0;
    const VecM dx = -(svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose() * r);

    bool accepted = false;
    for (double lam = 1.0; lam >= 1.0 / 1024.0; lam *= 0.5) {
      const VecM xt = x + lam * dx;
      VecM rt;
      try {
        rt = prob.residual(unpack(xt));
      } catch (const SolverError& e) {
        if (e.kind() != SolverFailure::Divergence) throw;
        continue;
      }
      const double rtn = rt.template lpNorm<Eigen::Infinity>();
      if (rtn < rn) {
        x = xt;
        r = rt;
        rn = rtn;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (singular) {
        throw SolverError(SolverFailure::SingularJacobian,
                          "Jacobian condition number above " + std::to_string(opt.cond_limit), rn);
      }
      throw SolverError(SolverFailure::MaxIterations, "line search stalled", rn);
    }
    out.residual_history.push_back(rn);
  }
  const PhaseState<D> z = unpack(x);
  out.q0 = z.q;
  out.p0 = z.p;
  out.newton_residual = rn;
  out.iterations = it;
  out.n = prob.walk().n();
  out.seed = prob.walk().coins().seed;
  prob.integrate(z, &out.path);
  std::tie(out.action, out.action_legendre) = action_forms(out.path);
  return out;
}

/// Simpson value of int_0^1 p dqbar/dt - K dt along the orbit's trajectory.
template <int D>
double symplectic_action(const ClosedOrbit<D>& orbit) {
  return action_forms(orbit.path).first;
}

/// Orbit label by action rank: 1-, 1+, 2-, 2+, ...; beyond 2d: extra<i>.
inline std::string orbit_label(int rank, int d) {
  if (rank < 2 * d) return std::to_string(rank / 2 + 1) + (rank % 2 ? "+" : "-");
  return "extra" + std::to_string(rank - 2 * d);
}

namespace detail {

template <int D>
Vec<D> integer_offset(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> k;
  for (int i = 0; i < D; ++i) k[i] = std::round(a[i] - b[i]);
  return k;
}

template <int D>
double state_distance(const PhaseState<D>& a, const PhaseState<D>& b) {
  const Vec<D> k = integer_offset<D>(a.q, b.q);
  return std::max((a.q - b.q - k).template lpNorm<Eigen::Infinity>(), (a.p - b.p).template lpNorm<Eigen::Infinity>());
}

/// Sup distance between trajectories on the cover after an integer shift of q.
template <int D>
double orbit_distance(const ClosedOrbit<D>& a, const ClosedOrbit<D>& b) {
  const Vec<D> k = integer_offset<D>(a.q0, b.q0);
  double d = 0.0;
  for (std::size_t i = 0; i < a.path.qbar.size(); ++i) {
    d = std::max(d, (a.path.qbar[i] - b.path.qbar[i] - k).template lpNorm<Eigen::Infinity>());
    d = std::max(d, (a.path.p[i] - b.path.p[i]).template lpNorm<Eigen::Infinity>());
  }
  return d;
}

template <int D>
void merge_states(std::vector<PhaseState<D>>& states, double tol) {
  std::vector<PhaseState<D>> kept;
  for (const auto& s : states) {
    bool dup = false;
    for (const auto& k : kept) dup = dup || state_distance(s, k) < tol;
    if (!dup) kept.push_back(s);
  }
  states = std::move(kept);
}

template <int D>
PhaseState<D> normalize(PhaseState<D> z) {
  for (int i = 0; i < D; ++i) z.q[i] -= std::floor(z.q[i]);
  return z;
}

/// Newton at scale `eps` from z, sub-stepping the homotopy from `eps_prev`
/// when the direct solve fails.
template <int D>
std::optional<PhaseState<D>> continue_branch(const OrbitProblem<D>& base, PhaseState<D> z, double eps_prev,
                                             double eps, int depth = 0) {
  try {
    const ClosedOrbit<D> o = newton_closed_orbit(base.with_scale(eps), z);
    return PhaseState<D>{o.q0, o.p0};
  } catch (const SolverError&) {
    if (depth >= 3) return std::nullopt;
  }
  const int sub = 4;
  for (int s = 1; s <= sub; ++s) {
    const double e0 = eps_prev + (eps - eps_prev) * (s - 1) / sub;
    const double e1 = eps_prev + (eps - eps_prev) * s / sub;
    auto next = continue_branch(base, z, e0, e1, depth + 1);
    if (!next) return std::nullopt;
    z = *next;
  }
  return z;
}

}  // namespace detail

/// Coefficients of the first-order reduced action: along the F = 0 orbit
/// with initial point q0 the F-part of K integrates to
/// Phi(q0) = sum_modes Re(C_mode exp(2 pi i k.q0)), with the bridge
/// B(t) = sigma (W(t) - t W(1)) integrated exactly on each linear piece.
template <int D>
struct ReducedAction {
  std::vector<Vec<D>> k2pi;
  std::vector<std::complex<double>> C;

  double value(const Vec<D>& q) const {
    double v = 0.0;
    for (std::size_t m = 0; m < C.size(); ++m) v += std::real(C[m] * std::polar(1.0, k2pi[m].dot(q)));
    return v;
  }
  Vec<D> grad(const Vec<D>& q) const {
    Vec<D> g = Vec<D>::Zero();
    for (std::size_t m = 0; m < C.size(); ++m) g -= std::imag(C[m] * std::polar(1.0, k2pi[m].dot(q))) * k2pi[m];
    return g;
  }
  Mat<D> hess(const Vec<D>& q) const {
    Mat<D> H = Mat<D>::Zero();
    for (std::size_t m = 0; m < C.size(); ++m)
      H -= std::real(C[m] * std::polar(1.0, k2pi[m].dot(q))) * (k2pi[m] * k2pi[m].transpose());
    return H;
  }
};

template <int D>
ReducedAction<D> reduced_action(const HamiltonianSpec& spec, const WalkPath& w, double sigma) {
  ReducedAction<D> ra;
  const int n = w.n();
  const double h = 1.0 / n;
  const Vec<D> w1 = w.eval<D>(1.0);
  const double env = spec.envelope.at((sigma * w1).norm()).value;
  for (const auto& term : spec.terms) {
    if (term.a == 0.0) continue;
    Vec<D> k;
    for (int i = 0; i < D; ++i) k[i] = term.k[i];
    std::complex<double> I = 0.0;
    for (int j = 0; j < n; ++j) {
      double b0 = 0.0, b1 = 0.0;
      for (int c = 0; c < D; ++c) {
        b0 += k[c] * sigma * (w.node(j, c) - j * h * w1[c]);
        b1 += k[c] * sigma * (w.node(j + 1, c) - (j + 1) * h * w1[c]);
      }
      const double theta = kTwoPi * (b0 + term.m * j * h);
      const double gamma = kTwoPi * ((b1 - b0) / h + term.m);
      const double x = gamma * h;
      std::complex<double> piece;
      if (std::abs(x) < 1e-6) {
        piece = h * std::complex<double>(1.0 - x * x / 6.0, x / 2.0);
      } else {
        piece = (std::polar(1.0, x) - 1.0) / std::complex<double>(0.0, gamma);
      }
      I += std::polar(1.0, theta) * piece;
    }
    ra.k2pi.push_back(kTwoPi * k);
    ra.C.push_back(env * term.a * std::polar(1.0, term.phase) * I);
  }
  return ra;
}

/// Non-degenerate critical points of the reduced action on T^d, found by
/// Newton from a 32^d grid and deduplicated mod 1.
template <int D>
std::vector<Vec<D>> reduced_action_critical_points(const ReducedAction<D>& ra) {
  std::vector<Vec<D>> pts;
  const int G = 32;
  const int total = (D == 1) ? G : G * G;
  double scale = 0.0;
  for (std::size_t m = 0; m < ra.C.size(); ++m) scale += std::abs(ra.C[m]) * ra.k2pi[m].squaredNorm();
  if (!(scale > 0.0)) return pts;
  for (int idx = 0; idx < total; ++idx) {
    Vec<D> q;
    q[0] = (idx % G + 0.5) / G;
    if constexpr (D == 2) q[1] = (idx / G + 0.5) / G;
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      const Vec<D> g = ra.grad(q);
      if (g.norm() < 1e-12 * scale) {
        ok = true;
        break;
      }
      const Mat<D> H = ra.hess(q);
      if (std::abs(H.determinant()) < 1e-14 * std::pow(scale, D)) break;
      Vec<D> dq = -H.inverse() * g;
      const double len = dq.norm();
      if (len > 0.1) dq *= 0.1 / len;
      q += dq;
    }
    if (!ok) continue;
    if (std::abs(ra.hess(q).determinant()) < 1e-8 * std::pow(scale, D)) continue;
    for (int i = 0; i < D; ++i) q[i] -= std::floor(q[i]);
    bool dup = false;
    for (const auto& p : pts) {
      const Vec<D> k = detail::integer_offset<D>(q, p);
      dup = dup || (q - p - k).template lpNorm<Eigen::Infinity>() < 1e-6;
    }
    if (!dup) pts.push_back(q);
  }
  return pts;
}

namespace detail {

template <int D>
std::vector<PhaseState<D>> grid_seeds(const OrbitProblem<D>& prob) {
  const int g = prob.options().seeds_per_axis;
  std::vector<PhaseState<D>> seeds;
  const int total = (D == 1) ? g : g * g;
  for (int idx = 0; idx < total; ++idx) {
    PhaseState<D> z;
    z.q[0] = (idx % g + 0.5) / g;
    if constexpr (D == 2) z.q[1] = (idx / g + 0.5) / g;
    z.p = -prob.sigma_w1();
    seeds.push_back(z);
  }
  return seeds;
}

template <int D>
std::vector<PhaseState<D>> continuation_family(const OrbitProblem<D>& prob, std::vector<PhaseState<D>> branches) {
  const int steps = prob.options().continuation_steps;
  for (int s = 1; s <= steps && !branches.empty(); ++s) {
    const double e0 = static_cast<double>(s - 1) / steps;
    const double e1 = static_cast<double>(s) / steps;
    std::vector<PhaseState<D>> next;
    for (const auto& z : branches) {
      if (auto r = continue_branch(prob, z, e0, e1)) next.push_back(normalize(*r));
    }
    merge_states(next, prob.options().dedup_tol);
    branches = std::move(next);
  }
  return branches;
}

template <int D>
std::vector<ClosedOrbit<D>> polish(const OrbitProblem<D>& prob, const std::vector<PhaseState<D>>& states) {
  std::vector<ClosedOrbit<D>> found;
  for (const auto& z : states) {
    ClosedOrbit<D> o;
    try {
      o = newton_closed_orbit(prob, z);
    } catch (const SolverError&) {
      continue;
    }
    bool dup = false;
    for (const auto& f : found) dup = dup || orbit_distance(o, f) < prob.options().dedup_tol;
    if (!dup) found.push_back(std::move(o));
  }
  return found;
}

}  // namespace detail

/// All distinct closed orbits reached from the seeds, sorted by action and
/// labelled along the action chain. Throws FamilyCollapse (value = count)
/// when fewer than d+1 survive. F = 0 gives the Morse-Bott family: one
/// representative per grid seed.
template <int D>
OrbitFamily<D> find_orbit_family(const OrbitProblem<D>& prob) {
  OrbitFamily<D> fam;
  const auto seeds = detail::grid_seeds(prob);
  if (prob.hamiltonian().is_free()) {
    fam.morse_bott = true;
    int i = 0;
    for (const auto& z : seeds) {
      ClosedOrbit<D> o = newton_closed_orbit(prob, z);
      o.label = "mb" + std::to_string(i++);
      fam.orbits.push_back(std::move(o));
    }
    return fam;
  }

  std::vector<ClosedOrbit<D>> found;
  if (prob.options().strategy == SeedStrategy::ReducedAction) {
    std::vector<PhaseState<D>> starts;
    const auto ra = reduced_action<D>(prob.spec(), prob.walk(), prob.sigma());
    for (const auto& q : reduced_action_critical_points(ra)) starts.push_back(PhaseState<D>{q, -prob.sigma_w1()});
    found = detail::polish(prob, starts);
    if (static_cast<int>(found.size()) < static_cast<int>(starts.size())) {
      found = detail::polish(prob, detail::continuation_family(prob, starts));
    }
  }
  if (static_cast<int>(found.size()) < D + 1) {
    found = detail::polish(prob, detail::continuation_family(prob, seeds));
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.action < b.action; });
  for (std::size_t r = 0; r < found.size(); ++r) found[r].label = orbit_label(static_cast<int>(r), D);
  if (static_cast<int>(found.size()) < D + 1) {
    throw SolverError(SolverFailure::FamilyCollapse,
                      "found " + std::to_string(found.size()) + " distinct orbits, need " + std::to_string(D + 1),
                      static_cast<double>(found.size()));
  }
  fam.orbits = std::move(found);
  return fam;
}

}  // namespace dhlab
