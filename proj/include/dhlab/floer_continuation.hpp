#pragma once

// Discretised Floer cylinders for d = 1: box scheme on [-S,S] x [0,1] with
// the twisted t-boundary imposed exactly, projection boundary conditions at
// s = +-S, one pinned node and a tau-homotopy of the perturbation.

#include "dhlab/core.hpp"
#include "dhlab/orbit_solver.hpp"
#include "dhlab/sample_space.hpp"
#include "dhlab/torus_phase.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace dhlab {

struct FloerOptions {
  double S = 8.0;
  int Ns = 200;  // even, so s = 0 is a node
  int Nt = 65;   // odd, so the t-averaging operator is invertible
  int tau_steps = 8;
  double tol = 1e-8;
  int max_newton = 25;
  double min_tau_fraction = 1.0 / 1024.0;
};

/// phi_tau(s): 0 for tau = 0, 1 on [-tau/2, tau/2], 0 outside [-tau/2-1, tau/2+1].
inline double tau_profile(double tau, double s) {
  return SmoothStep::at(tau).value * SmoothStep::at(s + 0.5 * tau + 1.0).value *
         SmoothStep::at(0.5 * tau + 1.0 - s).value;
}

/// Node values on the (Ns+1) x Nt grid, row-major in s. Column Nt (t = 1)
/// is not stored: it is the twisted image of column 0.
struct FloerCylinder {
  int Ns = 0;
  int Nt = 0;
  double S = 0.0;
  double tau = 0.0;
  double twist = 0.0;  // sigma W(1)
  std::uint64_t seed = 0;
  std::vector<double> q;
  std::vector<double> p;
  int pin_node = 0;
  double pin_value = 0.0;
  double energy = 0.0;
  double residual_norm = 0.0;
  std::string label_minus;
  std::string label_plus;
  double action_minus = 0.0;
  double action_plus = 0.0;
  double asymptote_shift = 0.0;  // integer shift applied to the + orbit

  double hs() const { return 2.0 * S / Ns; }
  double ht() const { return 1.0 / Nt; }
  double s(int i) const { return -S + i * hs(); }
  std::size_t at(int i, int j) const { return static_cast<std::size_t>(i) * Nt + j; }
  /// qbar at node (i, j), j in [0, Nt], with the twist applied at j = Nt.
  double qv(int i, int j) const { return j == Nt ? q[at(i, 0)] - twist : q[at(i, j)]; }
  double pv(int i, int j) const { return j == Nt ? p[at(i, 0)] : p[at(i, j)]; }
  double gap() const { return action_plus - action_minus; }
};

/// Floer equation data for one sample: cut-off Hamiltonian, walk and grid,
/// with the walk's kinks resolved by per-cell Gauss quadrature in t.
class FloerProblem {
 public:
  FloerProblem(const HamiltonianSpec& spec, const WalkPath& walk, double sigma, const FloerOptions& opt)
      : walk_(&walk), sigma_(sigma), opt_(opt) {
    require(spec.d == 1 && walk.d() == 1, "floer: only d = 1 is supported");
    require(opt.Ns >= 4 && opt.Ns % 2 == 0, "floer: Ns must be even and at least 4");
    require(opt.Nt >= 3 && opt.Nt % 2 == 1, "floer: Nt must be odd and at least 3");
    require(opt.S > 0.0, "floer: S must be positive");
    require(opt.tau_steps >= 1, "floer: tau_steps must be positive");
    ham_ = Hamiltonian<1>(spec, 1.0, choose_R(walk, sigma, spec));
    twist_ = sigma * walk.eval(1.0, 0);
    build_quadrature();
  }

  const FloerOptions& options() const { return opt_; }
  double twist() const { return twist_; }
  double sigma() const { return sigma_; }
  const WalkPath& walk() const { return *walk_; }
  const Hamiltonian<1>& hamiltonian() const { return ham_; }

  struct CellForce {
    double gq = 0.0, gp = 0.0;              // cell average of grad(K0 + phi Gbar)
    double hqq = 0.0, hqp = 0.0, hpp = 0.0; // and of its Hessian
  };

  /// Time-averaged gradient over cell j at the cell-mean state (qbar, p).
  CellForce force(int j, double phi, double qbar, double p, bool hessian) const {
    CellForce f;
    for (const auto& g : quad_[j]) {
      const auto jet = ham_.jet(g.t, Vec<1>(qbar + g.shift), Vec<1>(p), hessian);
      f.gq += g.w * jet.Fq[0];
      f.gp += g.w * jet.Fp[0];
      if (hessian) {
        f.hqq += g.w * jet.Fqq(0, 0);
        f.hqp += g.w * jet.Fqp(0, 0);
        f.hpp += g.w * jet.Fpp(0, 0);
      }
    }
    f.gq *= phi;
    f.gp = p + phi * f.gp;
    f.hqq *= phi;
    f.hqp *= phi;
    f.hpp = 1.0 + phi * f.hpp;
    return f;
  }

 private:
  struct GaussPoint {
    double t, w, shift;
  };

  void build_quadrature() {
    const int Nt = opt_.Nt;
    const int n = walk_->n();
    const double g = 0.5 / std::sqrt(3.0);
    quad_.assign(Nt, {});
    for (int j = 0; j < Nt; ++j) {
      const double a = static_cast<double>(j) / Nt;
      const double b = static_cast<double>(j + 1) / Nt;
      std::vector<double> cuts{a};
      for (int k = static_cast<int>(std::floor(a * n)) + 1; k < b * n; ++k) {
        const double tk = static_cast<double>(k) / n;
        if (tk > a && tk < b) cuts.push_back(tk);
      }
      cuts.push_back(b);
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double lo = cuts[c], hi = cuts[c + 1];
        const double mid = 0.5 * (lo + hi), half = hi - lo;
        for (double x : {mid - g * half, mid + g * half}) {
          quad_[j].push_back({x, 0.5 * half / (b - a), sigma_ * walk_->eval(std::clamp(x, 0.0, 1.0), 0)});
        }
      }
    }
  }

  const WalkPath* walk_;
  double sigma_;
  FloerOptions opt_;
  Hamiltonian<1> ham_;
  double twist_ = 0.0;
  std::vector<std::vector<GaussPoint>> quad_;
};

namespace detail {

/// Cell defect (q- and p-equation) of the box scheme at cell (i, j).
inline std::pair<double, double> cell_defect(const FloerProblem& fp, const FloerCylinder& c, double tau, int i, int j,
                                             FloerProblem::CellForce* f_out = nullptr) {
  const double hs = c.hs(), ht = c.ht();
  const double q00 = c.qv(i, j), q01 = c.qv(i, j + 1), q10 = c.qv(i + 1, j), q11 = c.qv(i + 1, j + 1);
  const double p00 = c.pv(i, j), p01 = c.pv(i, j + 1), p10 = c.pv(i + 1, j), p11 = c.pv(i + 1, j + 1);
  const double dsq = (q10 + q11 - q00 - q01) / (2 * hs);
  const double dsp = (p10 + p11 - p00 - p01) / (2 * hs);
  const double dtq = (q01 + q11 - q00 - q10) / (2 * ht);
  const double dtp = (p01 + p11 - p00 - p10) / (2 * ht);
  const double qm = 0.25 * (q00 + q01 + q10 + q11);
  const double pm = 0.25 * (p00 + p01 + p10 + p11);
  const double phi = tau_profile(tau, c.s(i) + 0.5 * hs);
  const auto f = fp.force(j, phi, qm, pm, f_out != nullptr);
  if (f_out) *f_out = f;
  return {dsq + dtp + f.gq, dsp - dtq + f.gp};
}

/// Stationary (s-independent) box-scheme residual of a loop V = (q_j, p_j),
/// i.e. the implicit midpoint rule with the twisted closing condition.
inline Eigen::VectorXd loop_defect(const FloerProblem& fp, const Eigen::VectorXd& V, Eigen::MatrixXd* jac = nullptr) {
  const int Nt = fp.options().Nt;
  const double ht = 1.0 / Nt;
  Eigen::VectorXd r(2 * Nt);
  if (jac) jac->setZero(2 * Nt, 2 * Nt);
  for (int j = 0; j < Nt; ++j) {
    const int jn = (j + 1) % Nt;
    const double q1 = (j + 1 == Nt) ? V[0] - fp.twist() : V[2 * jn];
    const double p1 = V[2 * jn + 1];
    const double q0 = V[2 * j], p0 = V[2 * j + 1];
    const auto f = fp.force(j, 1.0, 0.5 * (q0 + q1), 0.5 * (p0 + p1), jac != nullptr);
    r[2 * j] = (p1 - p0) / ht + f.gq;
    r[2 * j + 1] = -(q1 - q0) / ht + f.gp;
    if (jac) {
      auto& J = *jac;
      J(2 * j, 2 * jn + 1) += 1.0 / ht;
      J(2 * j, 2 * j + 1) -= 1.0 / ht;
      J(2 * j + 1, 2 * jn) -= 1.0 / ht;
      J(2 * j + 1, 2 * j) += 1.0 / ht;
      for (int node : {j, jn}) {
        J(2 * j, 2 * node) += 0.5 * f.hqq;
        J(2 * j, 2 * node + 1) += 0.5 * f.hqp;
        J(2 * j + 1, 2 * node) += 0.5 * f.hqp;
        J(2 * j + 1, 2 * node + 1) += 0.5 * f.hpp;
      }
    }
  }
  return r;
}

}  // namespace detail

/// Discrete closed orbit of the t-discretised system near a solver orbit,
/// as (q_0, p_0, q_1, p_1, ...). The orbit's q-representative is shifted by `shift`.
inline Eigen::VectorXd discrete_orbit(const FloerProblem& fp, const ClosedOrbit<1>& orbit, double shift = 0.0) {
  const int Nt = fp.options().Nt;
  Eigen::VectorXd V(2 * Nt);
  for (int j = 0; j < Nt; ++j) {
    const auto z = orbit.path.at(static_cast<double>(j) / Nt);
    V[2 * j] = z.q[0] + shift;
    V[2 * j + 1] = z.p[0];
  }
  Eigen::MatrixXd J;
  Eigen::VectorXd r = detail::loop_defect(fp, V, &J);
  for (int it = 0; it < 30 && r.lpNorm<Eigen::Infinity>() > 1e-13; ++it) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
    const Eigen::VectorXd dv = cod.solve(r);
    V -= dv;
    r = detail::loop_defect(fp, V, &J);
  }
  if (!(r.lpNorm<Eigen::Infinity>() < 1e-9)) {
    throw SolverError(SolverFailure::NonConvergence, "discrete asymptotic orbit did not converge",
                      r.lpNorm<Eigen::Infinity>());
  }
  return V;
}

/// Rows spanning the left invariant subspace of the s-evolution generator A
/// at loop V for eigenvalues with Re < -delta (stable = true) or Re > delta.
inline Eigen::MatrixXd projection_rows(const FloerProblem& fp, const Eigen::VectorXd& V, bool stable) {
  const int Nt = fp.options().Nt;
  const int N = 2 * Nt;
  Eigen::MatrixXd B;
  detail::loop_defect(fp, V, &B);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  for (int j = 0; j < Nt; ++j) {
    const int jn = (j + 1) % Nt;
    for (int c = 0; c < 2; ++c) {
      M(2 * j + c, 2 * j + c) += 0.5;
      M(2 * j + c, 2 * jn + c) += 0.5;
    }
  }
  // Cell equations read M dV/ds + B V = 0 after swapping to (q-eq, p-eq) order.
  const Eigen::MatrixXd A = -M.partialPivLu().solve(B);
  Eigen::EigenSolver<Eigen::MatrixXd> es(A.transpose());
  const auto lam = es.eigenvalues();
  const auto vec = es.eigenvectors();
  const double delta = 1e-8 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  std::vector<Eigen::VectorXd> rows;
  for (int k = 0; k < N; ++k) {
    const double re = lam[k].real();
    if (stable ? !(re < -delta) : !(re > delta)) continue;
    if (lam[k].imag() < 0.0) continue;
    rows.push_back(vec.col(k).real());
    if (lam[k].imag() > 0.0) rows.push_back(vec.col(k).imag());
  }
  Eigen::MatrixXd P(rows.size(), N);
  for (std::size_t r = 0; r < rows.size(); ++r) P.row(static_cast<Eigen::Index>(r)) = rows[r].transpose() / rows[r].norm();
  return P;
}

namespace detail {

struct CylinderSystem {
  const FloerProblem* fp;
  Eigen::VectorXd v_minus, v_plus;
  Eigen::MatrixXd P_minus, P_plus;
  int pin_index;  // flattened (node, component) index of the pinned value

  int unknown(int flat) const { return flat == pin_index ? -1 : (flat < pin_index ? flat : flat - 1); }

  Eigen::VectorXd residual(const FloerCylinder& c, double tau, Eigen::SparseMatrix<double>* jac) const {
    const int Ns = c.Ns, Nt = c.Nt;
    const int ncell = 2 * Ns * Nt;
    const int rows = ncell + static_cast<int>(P_minus.rows() + P_plus.rows());
    const int cols = 2 * (Ns + 1) * Nt - 1;
    Eigen::VectorXd r(rows);
    std::vector<Eigen::Triplet<double>> trip;
    if (jac) trip.reserve(static_cast<std::size_t>(ncell) * 8 + static_cast<std::size_t>(rows - ncell) * 2 * Nt);
    const double hs = c.hs(), ht = c.ht();
    for (int i = 0; i < Ns; ++i) {
      for (int j = 0; j < Nt; ++j) {
        FloerProblem::CellForce f;
        const auto [rq, rp] = cell_defect(*fp, c, tau, i, j, jac ? &f : nullptr);
        const int row = 2 * (i * Nt + j);
        r[row] = rq;
        r[row + 1] = rp;
        if (!jac) continue;
        const int jn = (j + 1) % Nt;
        // (node i', column j', sign of s-difference, sign of t-difference)
        const int ii[4] = {i, i, i + 1, i + 1};
        const int jj[4] = {j, jn, j, jn};
        const double ss[4] = {-1, -1, 1, 1};
        const double tt[4] = {-1, 1, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int base = 2 * (ii[k] * Nt + jj[k]);
          const int cq = unknown(base), cp = unknown(base + 1);
          const double a = ss[k] / (2 * hs), b = tt[k] / (2 * ht);
          // q-eq: dsq + dtp + gq ; p-eq: dsp - dtq + gp
          if (cq >= 0) {
            trip.emplace_back(row, cq, a + 0.25 * f.hqq);
            trip.emplace_back(row + 1, cq, -b + 0.25 * f.hqp);
          }
          if (cp >= 0) {
            trip.emplace_back(row, cp, b + 0.25 * f.hqp);
            trip.emplace_back(row + 1, cp, a + 0.25 * f.hpp);
          }
        }
      }
    }
    int row = ncell;
    auto boundary = [&](const Eigen::MatrixXd& P, const Eigen::VectorXd& v, int i) {
      Eigen::VectorXd dv(2 * Nt);
      for (int j = 0; j < Nt; ++j) {
        dv[2 * j] = c.q[c.at(i, j)] - v[2 * j];
        dv[2 * j + 1] = c.p[c.at(i, j)] - v[2 * j + 1];
      }
      const Eigen::VectorXd pr = P * dv;
      for (Eigen::Index k = 0; k < P.rows(); ++k, ++row) {
        r[row] = pr[k];
        if (!jac) continue;
        for (int m = 0; m < 2 * Nt; ++m) {
          const int col = unknown(2 * i * Nt + m);
          if (col >= 0 && P(k, m) != 0.0) trip.emplace_back(row, col, P(k, m));
        }
      }
    };
    boundary(P_minus, v_minus, 0);
    boundary(P_plus, v_plus, Ns);
    if (jac) {
      jac->resize(rows, cols);
      jac->setFromTriplets(trip.begin(), trip.end());
    }
    return r;
  }

  void apply_update(FloerCylinder& c, const Eigen::VectorXd& dx) const {
    const int total = 2 * (c.Ns + 1) * c.Nt;
    for (int flat = 0; flat < total; ++flat) {
      const int col = unknown(flat);
      if (col < 0) continue;
      auto& v = (flat % 2 == 0) ? c.q[flat / 2] : c.p[flat / 2];
      v += dx[col];
    }
  }
};

/// Newton with backtracking at fixed tau. Square systems use SparseLU,
/// others the normal equations.
inline bool newton_cylinder(const CylinderSystem& sys, FloerCylinder& c, double tau, double tol, int max_it,
                            double& final_norm) {
  Eigen::SparseMatrix<double> J;
  Eigen::VectorXd r = sys.residual(c, tau, &J);
  double rn = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_it; ++it) {
    if (rn < tol) {
      final_norm = rn;
      return true;
    }
    Eigen::VectorXd dx;
    if (J.rows() == J.cols()) {
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      lu.compute(J);
      if (lu.info() != Eigen::Success) return false;
      dx = lu.solve(-r);
    } else {
      Eigen::SparseMatrix<double> JtJ = J.transpose() * J;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(JtJ);
      if (ldlt.info() != Eigen::Success) return false;
      dx = ldlt.solve(-(J.transpose() * r));
    }
    if (!dx.allFinite()) return false;
    bool accepted = false;
    const double r2 = r.squaredNorm();
    for (double lam = 1.0; lam >= 1.0 / 64.0; lam *= 0.5) {
      FloerCylinder trial = c;
      sys.apply_update(trial, lam * dx);
      Eigen::VectorXd rt = sys.residual(trial, tau, nullptr);
      if (rt.allFinite() && rt.squaredNorm() < r2) {
        c = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    r = sys.residual(c, tau, &J);
    rn = r.lpNorm<Eigen::Infinity>();
  }
  final_norm = rn;
  return rn < tol;
}

}  // namespace detail

/// Trapezoid quadrature of |d_s U|^2 over the grid with central differences
/// in s (one-sided at the ends).
inline double cylinder_energy(const FloerCylinder& c) {
  const double hs = c.hs(), ht = c.ht();
  double e = 0.0;
  for (int i = 0; i <= c.Ns; ++i) {
    const int a = std::max(0, i - 1), b = std::min(c.Ns, i + 1);
    const double w = (i == 0 || i == c.Ns) ? 0.5 : 1.0;
    for (int j = 0; j < c.Nt; ++j) {
      const double dq = (c.q[c.at(b, j)] - c.q[c.at(a, j)]) / ((b - a) * hs);
      const double dp = (c.p[c.at(b, j)] - c.p[c.at(a, j)]) / ((b - a) * hs);
      e += w * (dq * dq + dp * dp);
    }
  }
  return e * hs * ht;
}

/// Per-cell defect field (q-eq, p-eq interleaved, row-major in s) at tau.
inline Eigen::VectorXd floer_residual(const FloerProblem& fp, const FloerCylinder& c, double tau) {
  Eigen::VectorXd r(2 * c.Ns * c.Nt);
  for (int i = 0; i < c.Ns; ++i)
    for (int j = 0; j < c.Nt; ++j) {
      const auto [a, b] = detail::cell_defect(fp, c, tau, i, j);
      r[2 * (i * c.Nt + j)] = a;
      r[2 * (i * c.Nt + j) + 1] = b;
    }
  return r;
}

/// Final tau of the homotopy: phi = 1 on all of [-S, S].
inline double final_tau(const FloerOptions& opt) { return 2.0 * opt.S; }

/// Connecting cylinder from `minus` (s = -S) to `plus` (s = +S). The +
/// orbit is shifted by the integer that brings its qbar(0) nearest to the
/// - orbit; the node (s = 0, t = 0) is pinned to the midpoint of the two
/// qbar(0) values. Tau ramps 0 -> 2S with step halving; a step below
/// min_tau_fraction of the ramp step raises ContinuationStall. A negative
/// tau_end means the final tau.
inline FloerCylinder solve_cylinder(const FloerProblem& fp, const ClosedOrbit<1>& minus, const ClosedOrbit<1>& plus,
                                    const FloerCylinder* warm = nullptr, double tau_start = 0.0,
                                    double tau_end = -1.0) {
  const auto& opt = fp.options();
  FloerCylinder c;
  c.Ns = opt.Ns;
  c.Nt = opt.Nt;
  c.S = opt.S;
  c.twist = fp.twist();
  c.seed = fp.walk().coins().seed;
  c.label_minus = minus.label;
  c.label_plus = plus.label;
  c.action_minus = minus.action;
  c.action_plus = plus.action;
  c.asymptote_shift = std::round(minus.q0[0] - plus.q0[0]);

  detail::CylinderSystem sys;
  sys.fp = &fp;
  sys.v_minus = discrete_orbit(fp, minus);
  sys.v_plus = discrete_orbit(fp, plus, c.asymptote_shift);
  sys.P_minus = projection_rows(fp, sys.v_minus, true);
  sys.P_plus = projection_rows(fp, sys.v_plus, false);
  c.pin_node = opt.Ns / 2;
  sys.pin_index = 2 * (c.pin_node * opt.Nt);
  c.pin_value = 0.5 * (sys.v_minus[0] + sys.v_plus[0]);

  const std::size_t nodes = static_cast<std::size_t>(opt.Ns + 1) * opt.Nt;
  if (warm) {
    require(warm->Ns == opt.Ns && warm->Nt == opt.Nt, "solve_cylinder: warm start grid mismatch");
    c.q = warm->q;
    c.p = warm->p;
  } else {
    c.q.resize(nodes);
    c.p.resize(nodes);
    for (int i = 0; i <= opt.Ns; ++i) {
      const double b = 0.5 * (1.0 + std::tanh(c.s(i)));
      for (int j = 0; j < opt.Nt; ++j) {
        c.q[c.at(i, j)] = (1 - b) * sys.v_minus[2 * j] + b * sys.v_plus[2 * j];
        c.p[c.at(i, j)] = (1 - b) * sys.v_minus[2 * j + 1] + b * sys.v_plus[2 * j + 1];
      }
    }
  }
  c.q[c.at(c.pin_node, 0)] = c.pin_value;

  if (tau_end < 0.0) tau_end = final_tau(opt);
  require(tau_start >= 0.0 && tau_start <= tau_end, "solve_cylinder: need 0 <= tau_start <= tau_end");
  const double step0 = (tau_end - tau_start) / opt.tau_steps;
  double tau = tau_start;
  double step = step0;
  double norm = 0.0;
  bool first = true;
  while (first || tau < tau_end) {
    const double target = first ? tau : std::min(tau_end, tau + step);
    FloerCylinder trial = c;
    if (detail::newton_cylinder(sys, trial, target, opt.tol, opt.max_newton, norm)) {
      c = std::move(trial);
      tau = target;
      first = false;
      step = std::min(step0, 2.0 * step);
      continue;
    }
    if (first || step0 == 0.0 || step * 0.5 < opt.min_tau_fraction * step0) {
      throw SolverError(SolverFailure::ContinuationStall,
                        "Newton failed beyond tau = " + std::to_string(tau) + " (defect " + std::to_string(norm) + ")",
                        tau);
    }
    step *= 0.5;
  }
  c.tau = tau;
  c.residual_norm = norm;
  c.energy = cylinder_energy(c);
  return c;
}

inline void write_cylinder_csv(std::ostream& os, const FloerCylinder& c) {
  os << "s,t,qbar,p\n";
  os.precision(17);
  for (int i = 0; i <= c.Ns; ++i)
    for (int j = 0; j <= c.Nt; ++j) os << c.s(i) << ',' << c.ht() * j << ',' << c.qv(i, j) << ',' << c.pv(i, j) << '\n';
}

}  // namespace dhlab
