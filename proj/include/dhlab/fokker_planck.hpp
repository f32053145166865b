#pragma once

// Finite-volume solver for the Hamiltonian Fokker-Planck equation
//   d_t rho = -d_q(H_p rho) + d_p(H_q rho) + sigma^2/2 d_q^2 rho
// on [0,1)^d x [-P,P]^d: upwind advective fluxes, centred q-diffusion,
// periodic in q, zero flux at |p| = P, forward Euler in t.

#include "dhlab/core.hpp"
#include "dhlab/measure_lab.hpp"
#include "dhlab/torus_phase.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dhlab {

struct FPGrid {
  int d = 1;
  int nq = 64;
  int np = 64;
  double P = 2.0;
  int T = 64;         // output slices per period
  int steps = 0;      // Euler steps per period; 0 selects the smallest CFL-valid multiple of T
  double cfl = 0.9;   // fraction of the positivity bound used when steps = 0

  MeasureGrid measure_grid() const { return MeasureGrid{d, T, nq, np, P}; }
};

class FokkerPlanck {
 public:
  FokkerPlanck(const HamiltonianSpec& spec, double sigma, FPGrid grid) : spec_(spec), sigma_(sigma), g_(grid) {
    spec.validate();
    require(grid.d == spec.d, "FokkerPlanck: grid dimension differs from the spec");
    require(sigma >= 0.0, "FokkerPlanck: sigma must be nonnegative");
    g_.measure_grid().validate();
    require(grid.cfl > 0.0 && grid.cfl <= 1.0, "FokkerPlanck: cfl must lie in (0,1]");
    const double c1 = spec.c1_bound();
    const double dq = 1.0 / g_.nq, dp = 2.0 * g_.P / g_.np;
    // Outflow rate bound of one cell: every face velocity is bounded by
    // |H_p| <= P + c1 and |H_q| <= c1.
    rate_ = g_.d * ((g_.P + c1) / dq + c1 / dp + sigma * sigma / (dq * dq));
    const double diffusive = 2.0 * sigma * sigma / (dq * dq);  // sigma^2 dt / dq^2 <= 1/2
    const int min_steps = static_cast<int>(std::ceil(std::max(rate_ / g_.cfl, diffusive)));
    if (g_.steps == 0) {
      g_.steps = ((std::max(min_steps, 1) + g_.T - 1) / g_.T) * g_.T;
    }
    require(g_.steps % g_.T == 0, "FokkerPlanck: steps must be a multiple of T");
    require(rate_ / g_.steps <= 1.0, "FokkerPlanck: time step violates the positivity CFL bound (rate " +
                                         std::to_string(rate_) + ", steps " + std::to_string(g_.steps) + ")");
    require(sigma * sigma / g_.steps * (g_.nq * g_.nq) <= 0.5, "FokkerPlanck: diffusive CFL bound violated");
    cells_ = g_.measure_grid().slice_cells();
  }

  const FPGrid& grid() const { return g_; }
  double sigma() const { return sigma_; }
  double dt() const { return 1.0 / g_.steps; }
  double cell_volume() const { return std::pow(1.0 / g_.nq, g_.d) * std::pow(2.0 * g_.P / g_.np, g_.d); }
  std::size_t cells() const { return cells_; }

  /// Right-hand side at time t for a cell-average density rho.
  std::vector<double> apply(const std::vector<double>& rho, double t) const {
    require(rho.size() == cells_, "fp_apply: density size mismatch");
    std::vector<double> out(cells_, 0.0);
    const auto& vel = velocities(t);
    accumulate_rhs(rho, vel, out);
    return out;
  }

  /// Transpose of apply with respect to the cell-volume inner product:
  /// the discrete generator acting on test functions.
  std::vector<double> adjoint(const std::vector<double>& phi, double t) const {
    require(phi.size() == cells_, "fp_adjoint: size mismatch");
    std::vector<double> out(cells_, 0.0);
    const auto vel = velocities(t);
    for_each_face(vel, [&](std::size_t L, std::size_t R, double v, double h, double diff) {
      const double vp = std::max(v, 0.0), vm = std::min(v, 0.0);
      const double jump = (phi[R] - phi[L]) / h;
      // flux = vp rho_L + vm rho_R - diff (rho_R - rho_L) / h
      out[L] += (vp + diff / h) * jump;
      out[R] += (vm - diff / h) * jump;
    });
    return out;
  }

  /// One period of Euler steps starting at t = 0; the slice densities at
  /// t_j = j/T are written to `slices` when given (T+1 entries).
  void period(std::vector<double>& rho, std::vector<std::vector<double>>* slices = nullptr) const {
    const int per_slice = g_.steps / g_.T;
    if (slices) slices->assign(1, rho);
    std::vector<double> rhs(cells_);
    for (int k = 0; k < g_.steps; ++k) {
      std::fill(rhs.begin(), rhs.end(), 0.0);
      accumulate_rhs(rho, step_velocities(k), rhs);
      const double h = dt();
      for (std::size_t c = 0; c < cells_; ++c) rho[c] += h * rhs[c];
      if (slices && (k + 1) % per_slice == 0) slices->push_back(rho);
    }
  }

  /// Cell-average density of uniform-in-q times N(0, s^2) truncated to [-P,P]
  /// (per p axis, renormalised); s = 0 gives the uniform density.
  std::vector<double> product_density(double s) const {
    std::vector<double> prof(g_.np);
    const double dp = 2.0 * g_.P / g_.np;
    double total = 0.0;
    for (int k = 0; k < g_.np; ++k) {
      const double a = -g_.P + k * dp, b = a + dp;
      prof[k] = s > 0.0 ? normal_cdf(b, s * s) - normal_cdf(a, s * s) : dp;
      total += prof[k];
    }
    for (auto& v : prof) v /= total * dp;
    std::vector<double> rho(cells_);
    const std::size_t nqc = q_cells(), npc = p_cells();
    for (std::size_t pi = 0; pi < npc; ++pi) {
      double v = 1.0;
      std::size_t r = pi;
      for (int c = 0; c < g_.d; ++c, r /= g_.np) v *= prof[r % g_.np];
      for (std::size_t qi = 0; qi < nqc; ++qi) rho[qi * npc + pi] = v;
    }
    return rho;
  }

  double mass(const std::vector<double>& rho) const {
    double s = 0.0;
    for (double v : rho) s += v;
    return s * cell_volume();
  }

  double l1(const std::vector<double>& f) const {
    double s = 0.0;
    for (double v : f) s += std::abs(v);
    return s * cell_volume();
  }

  double inner(const std::vector<double>& a, const std::vector<double>& b) const {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
    return s * cell_volume();
  }

  /// Densities (cell averages) to slice masses of an EmpiricalMeasure.
  EmpiricalMeasure to_measure(const std::vector<std::vector<double>>& slices) const {
    EmpiricalMeasure m;
    m.grid = g_.measure_grid();
    m.meta.sigma = sigma_;
    m.meta.label = "fp";
    m.mass.reserve(slices.size() * cells_);
    const double vol = cell_volume();
    for (const auto& s : slices)
      for (double v : s) m.mass.push_back(v * vol);
    return m;
  }

  std::vector<double> from_measure_slice(const EmpiricalMeasure& m, int j) const {
    require(m.grid == g_.measure_grid(), "FokkerPlanck: measure grid mismatch");
    std::vector<double> rho(cells_);
    const double vol = cell_volume();
    for (std::size_t c = 0; c < cells_; ++c) rho[c] = m.mass[j * cells_ + c] / vol;
    return rho;
  }

 private:
  // Face velocities: for each q axis, H_p at the upper q-face of every cell;
  // for each p axis, -H_q at the upper p-face (last face unused).
  struct Velocities {
    std::vector<double> q_axis;  // d * cells
    std::vector<double> p_axis;  // d * cells
  };

  std::size_t q_cells() const { return g_.measure_grid().q_cells(); }
  std::size_t p_cells() const { return g_.measure_grid().p_cells(); }

  Velocities velocities(double t) const {
    return dispatch_dim(g_.d, [&]<int D>() { return compute_velocities<D>(t); });
  }

  const Velocities& step_velocities(int k) const {
    if (static_cast<double>(g_.steps) * 2.0 * g_.d * static_cast<double>(cells_) > kCacheLimit) {
      scratch_ = velocities(static_cast<double>(k) / g_.steps);
      return scratch_;
    }
    if (cache_.empty()) {
      cache_.reserve(g_.steps);
      for (int s = 0; s < g_.steps; ++s) cache_.push_back(velocities(static_cast<double>(s) / g_.steps));
    }
    return cache_[k];
  }

  template <int D>
  Velocities compute_velocities(double t) const {
    Hamiltonian<D> H(spec_);
    Velocities v;
    v.q_axis.assign(D * cells_, 0.0);
    v.p_axis.assign(D * cells_, 0.0);
    const double dq = 1.0 / g_.nq, dp = 2.0 * g_.P / g_.np;
    const std::size_t npc = p_cells();
    for (std::size_t cell = 0; cell < cells_; ++cell) {
      const std::size_t qi = cell / npc, pi = cell % npc;
      Vec<D> q, p;
      std::size_t r = qi, rp = pi;
      int iq[D], ip[D];
      for (int c = D - 1; c >= 0; --c, r /= g_.nq, rp /= g_.np) {
        iq[c] = static_cast<int>(r % g_.nq);
        ip[c] = static_cast<int>(rp % g_.np);
        q[c] = (iq[c] + 0.5) * dq;
        p[c] = -g_.P + (ip[c] + 0.5) * dp;
      }
      for (int c = 0; c < D; ++c) {
        Vec<D> qf = q;
        qf[c] = (iq[c] + 1) * dq;
        v.q_axis[c * cells_ + cell] = H.grad_H(t, qf, p).second[c];
        if (ip[c] + 1 < g_.np) {
          Vec<D> pf = p;
          pf[c] = -g_.P + (ip[c] + 1) * dp;
          v.p_axis[c * cells_ + cell] = -H.grad_H(t, q, pf).first[c];
        }
      }
    }
    return v;
  }

  // f(L, R, velocity, spacing, diffusion coefficient) for every interior face.
  template <class Fn>
  void for_each_face(const Velocities& v, Fn&& f) const {
    const int d = g_.d;
    const double dq = 1.0 / g_.nq, dp = 2.0 * g_.P / g_.np;
    const double diff = 0.5 * sigma_ * sigma_;
    const std::size_t npc = p_cells();
    for (int c = 0; c < d; ++c) {
      std::size_t qstride = npc, pstride = 1;
      for (int k = c + 1; k < d; ++k) {
        qstride *= g_.nq;
        pstride *= g_.np;
      }
      for (std::size_t cell = 0; cell < cells_; ++cell) {
        const std::size_t qi = cell / npc, pi = cell % npc;
        const int iq = static_cast<int>((qi * npc / qstride) % g_.nq);
        const std::size_t rq = iq + 1 < g_.nq ? cell + qstride : cell - static_cast<std::size_t>(g_.nq - 1) * qstride;
        f(cell, rq, v.q_axis[c * cells_ + cell], dq, diff);
        const int ip = static_cast<int>((pi / pstride) % g_.np);
        if (ip + 1 < g_.np) f(cell, cell + pstride, v.p_axis[c * cells_ + cell], dp, 0.0);
      }
    }
  }

  void accumulate_rhs(const std::vector<double>& rho, const Velocities& vel, std::vector<double>& out) const {
    for_each_face(vel, [&](std::size_t L, std::size_t R, double v, double h, double diff) {
      const double flux = std::max(v, 0.0) * rho[L] + std::min(v, 0.0) * rho[R] - diff * (rho[R] - rho[L]) / h;
      out[L] -= flux / h;
      out[R] += flux / h;
    });
  }

  HamiltonianSpec spec_;
  double sigma_;
  FPGrid g_;
  double rate_ = 0.0;
  std::size_t cells_ = 0;
  static constexpr double kCacheLimit = 1 << 25;  // doubles kept for one period of velocities
  mutable std::vector<Velocities> cache_;
  mutable Velocities scratch_;
};

inline std::vector<double> fp_apply(const FokkerPlanck& fp, const std::vector<double>& rho, double t) {
  return fp.apply(rho, t);
}

struct PeriodicSolution {
  EmpiricalMeasure measure;  // T+1 slices, slice T is the image of slice 0
  int iterations = 0;
  double defect = 0.0;       // L1 change of the last period map
  bool nonunique = false;
  double init_disagreement = 0.0;
};

struct PeriodicOptions {
  int power_iters = 2000;
  double tol = 1e-9;
  bool check_uniqueness = false;
  double uniqueness_tol = 1e-6;
  std::vector<double> init;  // starting density; empty selects the default
};

namespace detail {

inline std::vector<double> power_iterate(const FokkerPlanck& fp, std::vector<double> rho, const PeriodicOptions& opt,
                                         int& iterations, double& defect) {
  for (iterations = 1; iterations <= opt.power_iters; ++iterations) {
    std::vector<double> prev = rho;
    fp.period(rho);
    for (std::size_t c = 0; c < rho.size(); ++c) prev[c] = rho[c] - prev[c];
    defect = fp.l1(prev);
    if (defect < opt.tol) return rho;
  }
  iterations = opt.power_iters;
  throw SolverError(SolverFailure::NonConvergence,
                    "periodic_solve: period map still moves by " + std::to_string(defect) + " in L1 after " +
                        std::to_string(opt.power_iters) + " periods",
                    defect);
}

}  // namespace detail

/// Fixed point of the period map by power iteration, started from opt.init
/// or else uniform-in-q times the truncated N(0, sigma^2) momentum profile. With
/// check_uniqueness a second run is compared, started from the uniform
/// density (or from N(0, (P/2)^2) when sigma = 0, where the first start is
/// already uniform).
inline PeriodicSolution periodic_solve(const FokkerPlanck& fp, const PeriodicOptions& opt = {}) {
  PeriodicSolution sol;
  require(opt.init.empty() || opt.init.size() == fp.cells(), "periodic_solve: initial density has the wrong size");
  auto rho = detail::power_iterate(fp, opt.init.empty() ? fp.product_density(fp.sigma()) : opt.init, opt,
                                   sol.iterations, sol.defect);
  if (opt.check_uniqueness) {
    int it2 = 0;
    double def2 = 0.0;
    const double alt_width = fp.sigma() > 0.0 ? 0.0 : 0.5 * fp.grid().P;
    const auto alt = detail::power_iterate(fp, fp.product_density(alt_width), opt, it2, def2);
    std::vector<double> diff(rho.size());
    for (std::size_t c = 0; c < rho.size(); ++c) diff[c] = rho[c] - alt[c];
    sol.init_disagreement = fp.l1(diff);
    sol.nonunique = sol.init_disagreement > opt.uniqueness_tol;
  }
  std::vector<std::vector<double>> slices;
  fp.period(rho, &slices);
  slices.back() = slices.front();
  sol.measure = fp.to_measure(slices);
  return sol;
}

/// Smoothing by one pass of [1/4, 1/2, 1/4] along every q axis (periodic)
/// and p axis (reflecting at |p| = P, so mass is conserved), per slice.
inline EmpiricalMeasure smooth_measure(const EmpiricalMeasure& m) {
  EmpiricalMeasure out = m;
  const auto& g = m.grid;
  const std::size_t npc = g.p_cells(), cells = g.slice_cells();
  for (int axis = 0; axis < 2 * g.d; ++axis) {
    const bool is_q = axis < g.d;
    const int c = is_q ? axis : axis - g.d;
    const int bins = is_q ? g.nq : g.np;
    std::size_t stride = is_q ? npc : 1;
    for (int k = c + 1; k < g.d; ++k) stride *= static_cast<std::size_t>(bins);
    const std::size_t wrap = static_cast<std::size_t>(bins - 1) * stride;
    const std::vector<double> src = out.mass;
    for (int j = 0; j < g.slices(); ++j) {
      const std::size_t base = static_cast<std::size_t>(j) * cells;
      double* dst = &out.mass[base];
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const int i = static_cast<int>((cell / stride) % bins);
        const double v = src[base + cell];
        const std::size_t lo = i > 0 ? cell - stride : (is_q ? cell + wrap : cell);
        const std::size_t hi = i + 1 < bins ? cell + stride : (is_q ? cell - wrap : cell);
        dst[cell] -= 0.5 * v;
        dst[lo] += 0.25 * v;
        dst[hi] += 0.25 * v;
      }
    }
  }
  return out;
}

/// Test function e_t(t) e_q(q) h(p): Fourier factors in t and q, a
/// Hermite function of order `hermite` in p with scale `width`.
struct TestFunction {
  int time_mode = 0;  // cos or sin of 2 pi m t; 0 is the constant
  bool time_sin = false;
  int q_mode[kMaxDim] = {0, 0};
  bool q_sin = false;
  int hermite = 0;
  double width = 0.5;

  struct Jet {
    double v = 0.0;                  // phi
    double t = 0.0;                  // d_t phi
    double q[kMaxDim] = {0, 0};      // d_q phi
    double qq[kMaxDim] = {0, 0};     // d_q^2 phi per axis
    double p[kMaxDim] = {0, 0};      // d_p phi
  };

  template <int D>
  Jet eval(double t, const Vec<D>& q, const Vec<D>& p) const {
    const double wt = kTwoPi * time_mode * t;
    const double et = time_mode == 0 ? 1.0 : (time_sin ? std::sin(wt) : std::cos(wt));
    const double et_t = time_mode == 0 ? 0.0 : kTwoPi * time_mode * (time_sin ? std::cos(wt) : -std::sin(wt));
    double arg = 0.0;
    for (int c = 0; c < D; ++c) arg += kTwoPi * q_mode[c] * q[c];
    const double eq = q_sin ? std::sin(arg) : std::cos(arg);
    const double eq_d = q_sin ? std::cos(arg) : -std::sin(arg);  // derivative w.r.t. arg
    double hp = 1.0;
    double hdiff[kMaxDim] = {0, 0};
    double vals[kMaxDim] = {1, 1};
    for (int c = 0; c < D; ++c) {
      const double x = p[c] / width;
      const int order = c == 0 ? hermite : 0;
      double hk = 1.0, hkm1 = 0.0;  // He_k(x), He_{k-1}(x)
      for (int k = 0; k < order; ++k) {
        const double next = x * hk - k * hkm1;
        hkm1 = hk;
        hk = next;
      }
      // d/dx [He_k e^{-x^2/2}] = (k He_{k-1} - x He_k) e^{-x^2/2}
      const double g = std::exp(-0.5 * x * x);
      vals[c] = hk * g;
      hdiff[c] = (order * hkm1 - x * hk) * g / width;
      hp *= vals[c];
    }
    Jet j;
    j.v = et * eq * hp;
    j.t = et_t * eq * hp;
    for (int c = 0; c < D; ++c) {
      const double k = kTwoPi * q_mode[c];
      j.q[c] = et * eq_d * k * hp;
      j.qq[c] = -et * eq * k * k * hp;
      double others = 1.0;
      for (int o = 0; o < D; ++o)
        if (o != c) others *= vals[o];
      j.p[c] = et * eq * hdiff[c] * others;
    }
    return j;
  }
};

/// Bank of test functions ordered by complexity; the first `count` are used.
inline std::vector<TestFunction> test_bank(int d, int count, double width) {
  require(count >= 1, "test_bank: empty test bank");
  std::vector<TestFunction> bank;
  for (int total = 1; static_cast<int>(bank.size()) < count && total < 64; ++total) {
    for (int tm = 0; tm <= total; ++tm)
      for (int qm = 0; qm + tm <= total; ++qm) {
        const int h = total - tm - qm;
        for (int ts = 0; ts < (tm == 0 ? 1 : 2); ++ts)
          for (int qs = 0; qs < (qm == 0 ? 1 : 2); ++qs) {
            TestFunction f;
            f.time_mode = tm;
            f.time_sin = ts == 1;
            f.q_mode[0] = qm;
            if (d == 2) f.q_mode[1] = qm % 2;
            f.q_sin = qs == 1;
            f.hermite = h;
            f.width = width;
            bank.push_back(f);
          }
      }
  }
  bank.resize(count);
  return bank;
}

/// RMS over the bank of | int int rho (d_t phi + H_p phi_q - H_q phi_p
/// + sigma^2/2 phi_qq) | for the smoothed measure, trapezoid in t over
/// slices and bin centres in (q, p).
inline double weak_residual(const EmpiricalMeasure& m, const HamiltonianSpec& spec, double sigma, int bank_size,
                            double width = 0.5) {
  require(spec.d == m.grid.d, "weak_residual: dimension mismatch");
  const auto bank = test_bank(m.grid.d, bank_size, width);
  const EmpiricalMeasure s = smooth_measure(m);
  const auto& g = s.grid;
  return dispatch_dim(g.d, [&]<int D>() {
    Hamiltonian<D> H(spec);
    std::vector<double> acc(bank.size(), 0.0);
    const std::size_t nqc = g.q_cells(), npc = g.p_cells();
    for (int j = 0; j <= g.T; ++j) {
      const double t = g.time(j), wt = (j == 0 || j == g.T) ? 0.5 : 1.0;
      for (std::size_t qi = 0; qi < nqc; ++qi) {
        Vec<D> q;
        std::size_t r = qi;
        for (int c = D - 1; c >= 0; --c, r /= g.nq) q[c] = g.q_center(static_cast<int>(r % g.nq));
        for (std::size_t pi = 0; pi < npc; ++pi) {
          const double w = s.mass[s.index(j, qi, pi)];
          if (w == 0.0) continue;
          Vec<D> p;
          std::size_t rp = pi;
          for (int c = D - 1; c >= 0; --c, rp /= g.np) p[c] = g.p_center(static_cast<int>(rp % g.np));
          const auto [hq, hp] = H.grad_H(t, q, p);
          for (std::size_t b = 0; b < bank.size(); ++b) {
            const auto J = bank[b].eval<D>(t, q, p);
            double v = J.t;
            for (int c = 0; c < D; ++c) v += hp[c] * J.q[c] - hq[c] * J.p[c] + 0.5 * sigma * sigma * J.qq[c];
            acc[b] += wt * w * v;
          }
        }
      }
    }
    double ss = 0.0;
    for (double a : acc) ss += (a / g.T) * (a / g.T);
    return std::sqrt(ss / static_cast<double>(bank.size()));
  });
}

/// Negative control: the slices pushed through the time-dependent,
/// non-Hamiltonian map (q, p) -> (q + 0.25 sin 2 pi t, p (1 + 0.25 cos 2 pi t)).
inline std::vector<OrbitSlices> corrupted_control(std::vector<OrbitSlices> orbits, int T) {
  for (auto& o : orbits) {
    for (int j = 0; j <= T; ++j) {
      const double t = static_cast<double>(j) / T;
      for (int c = 0; c < o.d; ++c) {
        double& q = o.q[j * o.d + c];
        q = wrap_unit(q + 0.25 * std::sin(kTwoPi * t));
        o.p[j * o.d + c] *= 1.0 + 0.25 * std::cos(kTwoPi * t);
      }
    }
  }
  return orbits;
}

}  // namespace dhlab
