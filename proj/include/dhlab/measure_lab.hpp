#pragma once

// Empirical time-periodic measures of orbit ensembles on a (t, q, p) grid,
// sliced 1-Wasserstein distances, the action of a measure and tightness
// statistics.

#include "dhlab/core.hpp"
#include "dhlab/ensemble.hpp"
#include "dhlab/orbit_solver.hpp"
#include "dhlab/sample_space.hpp"
#include "dhlab/torus_phase.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dhlab {

/// Slices t_j = j/T for j = 0..T, nq^d bins on [0,1)^d, np^d bins on [-P,P]^d.
struct MeasureGrid {
  int d = 1;
  int T = 64;
  int nq = 64;
  int np = 64;
  double P = 2.0;

  static constexpr std::size_t kMaxCells = std::size_t{1} << 27;

  void validate() const {
    require(d >= 1 && d <= kMaxDim, "MeasureGrid: d must be 1 or 2");
    require(T >= 1 && nq >= 1 && np >= 1, "MeasureGrid: bin counts must be positive");
    require(P > 0.0, "MeasureGrid: P must be positive");
    require(static_cast<double>(slices()) * static_cast<double>(slice_cells()) <= static_cast<double>(kMaxCells),
            "MeasureGrid: grid exceeds the memory guard");
  }
  int slices() const { return T + 1; }
  std::size_t q_cells() const { return ipow(nq, d); }
  std::size_t p_cells() const { return ipow(np, d); }
  std::size_t slice_cells() const { return q_cells() * p_cells(); }
  double dq() const { return 1.0 / nq; }
  double dp() const { return 2.0 * P / np; }
  double bin_width() const { return std::max(dq(), dp()); }
  double time(int j) const { return static_cast<double>(j) / T; }
  double q_center(int k) const { return (k + 0.5) * dq(); }
  double p_center(int k) const { return -P + (k + 0.5) * dp(); }

  bool operator==(const MeasureGrid& o) const {
    return d == o.d && T == o.T && nq == o.nq && np == o.np && P == o.P;
  }

 private:
  static std::size_t ipow(int b, int e) {
    std::size_t r = 1;
    for (int i = 0; i < e; ++i) r *= static_cast<std::size_t>(b);
    return r;
  }
};

struct MeasureMeta {
  int n = 0;
  std::size_t M = 0;
  std::string label;
  double sigma = 0.0;
  std::uint64_t spec_hash = 0;
};

/// Mass per (slice, q-bin, p-bin), row-major time-q-p, each slice summing to 1.
struct EmpiricalMeasure {
  MeasureGrid grid;
  MeasureMeta meta;
  std::vector<double> mass;

  std::size_t index(int j, std::size_t qi, std::size_t pi) const {
    return (static_cast<std::size_t>(j) * grid.q_cells() + qi) * grid.p_cells() + pi;
  }
  double slice_mass(int j) const {
    double s = 0.0;
    const std::size_t n = grid.slice_cells();
    for (std::size_t k = 0; k < n; ++k) s += mass[j * n + k];
    return s;
  }
  /// 1-D marginal of slice j along axis a (0..d-1: q components, d..2d-1: p).
  std::vector<double> marginal(int j, int axis) const {
    const int d = grid.d;
    const bool is_q = axis < d;
    const int c = is_q ? axis : axis - d;
    const int bins = is_q ? grid.nq : grid.np;
    std::vector<double> out(bins, 0.0);
    const std::size_t nq = grid.q_cells(), np = grid.p_cells();
    const std::size_t base = static_cast<std::size_t>(j) * nq * np;
    for (std::size_t qi = 0; qi < nq; ++qi)
      for (std::size_t pi = 0; pi < np; ++pi) {
        const std::size_t flat = is_q ? qi : pi;
        // component c of a row-major multi-index with `bins` per axis
        std::size_t idx = flat;
        for (int k = d - 1; k > c; --k) idx /= static_cast<std::size_t>(bins);
        out[idx % static_cast<std::size_t>(bins)] += mass[base + qi * np + pi];
      }
    return out;
  }
};

/// u(t_j) = (qbar + sigma W mod 1, p) of one orbit at every slice, d values each.
struct OrbitSlices {
  int d = 1;
  std::vector<double> q;
  std::vector<double> p;
};

template <int D>
OrbitSlices slice_orbit(const LoopPath<D>& path, const WalkPath& walk, double sigma, int T) {
  OrbitSlices s;
  s.d = D;
  s.q.resize(static_cast<std::size_t>(T + 1) * D);
  s.p.resize(static_cast<std::size_t>(T + 1) * D);
  for (int j = 0; j <= T; ++j) {
    const double t = static_cast<double>(j) / T;
    const auto z = path.at(t);
    const Vec<D> w = walk.eval<D>(t);
    for (int c = 0; c < D; ++c) {
      s.q[j * D + c] = wrap_unit(z.q[c] + sigma * w[c]);
      s.p[j * D + c] = z.p[c];
    }
  }
  return s;
}

/// Bins weight 1/M per orbit per slice. Mass outside |p| <= P is an error.
inline EmpiricalMeasure accumulate(const std::vector<OrbitSlices>& orbits, const MeasureGrid& grid, MeasureMeta meta) {
  grid.validate();
  require(!orbits.empty(), "accumulate: empty ensemble");
  EmpiricalMeasure m;
  m.grid = grid;
  meta.M = orbits.size();
  m.meta = meta;
  m.mass.assign(grid.slices() * grid.slice_cells(), 0.0);
  const double w = 1.0 / static_cast<double>(orbits.size());
  const int d = grid.d;
  for (const auto& o : orbits) {
    require(o.d == d && o.q.size() == static_cast<std::size_t>(grid.slices() * d), "accumulate: slice shape mismatch");
    for (int j = 0; j < grid.slices(); ++j) {
      std::size_t qi = 0, pi = 0;
      for (int c = 0; c < d; ++c) {
        const double q = o.q[j * d + c];
        const double p = o.p[j * d + c];
        if (!(std::abs(p) <= grid.P)) {
          throw InvalidArgument("accumulate: momentum " + std::to_string(p) + " outside |p| <= " +
                                std::to_string(grid.P));
        }
        const int bq = std::min(grid.nq - 1, static_cast<int>(q * grid.nq));
        const int bp = std::min(grid.np - 1, static_cast<int>((p + grid.P) / grid.dp()));
        qi = qi * grid.nq + bq;
        pi = pi * grid.np + bp;
      }
      m.mass[m.index(j, qi, pi)] += w;
    }
  }
  return m;
}

/// Slices of the orbits labelled `label` over the ensemble's successful
/// samples. Samples whose family lacks the label are skipped; the count
/// is reported through `skipped`.
inline std::vector<OrbitSlices> ensemble_slices(const OrbitEnsemble& e, const std::string& label, int T,
                                                std::size_t* skipped = nullptr) {
  std::vector<OrbitSlices> slices;
  std::size_t miss = 0;
  for (const auto& s : e.samples) {
    const OrbitRecord* o = s.ok ? s.find(label) : nullptr;
    if (!o) {
      ++miss;
      continue;
    }
    dispatch_dim(e.d(), [&]<int D>() {
      const WalkPath walk = make_walk(e.n, D, s.seed);
      const auto path = reconstruct_path<D>(e, s, *o);
      slices.push_back(slice_orbit<D>(path, walk, e.sigma, T));
      return 0;
    });
  }
  if (skipped) *skipped = miss;
  require(!slices.empty(), "accumulate: no sample carries label " + label);
  return slices;
}

inline EmpiricalMeasure accumulate(const OrbitEnsemble& e, const std::string& label, const MeasureGrid& grid,
                                   std::uint64_t spec_hash = 0, std::size_t* skipped = nullptr) {
  require(grid.d == e.d(), "accumulate: grid dimension differs from the ensemble");
  return accumulate(ensemble_slices(e, label, grid.T, skipped), grid, MeasureMeta{e.n, 0, label, e.sigma, spec_hash});
}

/// Exact 1-D W1 between two histograms on the same bins.
inline double histogram_w1(const std::vector<double>& a, const std::vector<double>& b, double width) {
  require(a.size() == b.size(), "histogram_w1: size mismatch");
  double ca = 0.0, cb = 0.0, s = 0.0;
  for (std::size_t k = 0; k + 1 < a.size(); ++k) {
    ca += a[k];
    cb += b[k];
    s += std::abs(ca - cb);
  }
  return s * width;
}

/// Sliced W1: per slice, the sum over the 2d axis marginals of the exact
/// 1-D W1; averaged over t by the trapezoid rule.
inline double measure_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require(a.grid == b.grid, "measure_distance: grid mismatch");
  const auto& g = a.grid;
  double total = 0.0;
  for (int j = 0; j <= g.T; ++j) {
    double s = 0.0;
    for (int axis = 0; axis < 2 * g.d; ++axis)
      s += histogram_w1(a.marginal(j, axis), b.marginal(j, axis), axis < g.d ? g.dq() : g.dp());
    total += ((j == 0 || j == g.T) ? 0.5 : 1.0) * s;
  }
  return total / g.T;
}

/// Trapezoid in t of sum over bins of mass * (p.H_p - H) at bin centres.
inline double action_of_measure(const EmpiricalMeasure& m, const HamiltonianSpec& spec) {
  require(spec.d == m.grid.d, "action_of_measure: dimension mismatch");
  const auto& g = m.grid;
  return dispatch_dim(g.d, [&]<int D>() {
    Hamiltonian<D> H(spec);
    const std::size_t nq = g.q_cells(), np = g.p_cells();
    double total = 0.0;
    for (int j = 0; j <= g.T; ++j) {
      const double t = g.time(j);
      double s = 0.0;
      for (std::size_t qi = 0; qi < nq; ++qi) {
        Vec<D> q;
        std::size_t r = qi;
        for (int c = D - 1; c >= 0; --c, r /= g.nq) q[c] = g.q_center(static_cast<int>(r % g.nq));
        for (std::size_t pi = 0; pi < np; ++pi) {
          const double w = m.mass[m.index(j, qi, pi)];
          if (w == 0.0) continue;
          Vec<D> p;
          std::size_t rp = pi;
          for (int c = D - 1; c >= 0; --c, rp /= g.np) p[c] = g.p_center(static_cast<int>(rp % g.np));
          const auto [hq, hp] = H.grad_H(t, q, p);
          s += w * (p.dot(hp) - H.H(t, q, p));
        }
      }
      total += ((j == 0 || j == g.T) ? 0.5 : 1.0) * s;
    }
    return total / g.T;
  });
}

/// C0 norm and Hoelder-alpha seminorm of d/dt qbar-bar = (dqbar, dp) on the
/// walk nodes of one orbit.
struct DerivativeNorms {
  double c0 = 0.0;
  double holder = 0.0;
};

template <int D>
DerivativeNorms derivative_norms(const LoopPath<D>& path, int n, double alpha) {
  require(path.steps % n == 0, "derivative_norms: path grid is not a refinement of the walk grid");
  const int m = path.steps / n;
  std::vector<double> v(static_cast<std::size_t>(n + 1) * 2 * D);
  DerivativeNorms out;
  for (int k = 0; k <= n; ++k)
    for (int c = 0; c < D; ++c) {
      const double a = path.dqbar[k * m][c], b = path.dp[k * m][c];
      v[(k * 2 * D) + c] = a;
      v[(k * 2 * D) + D + c] = b;
      out.c0 = std::max({out.c0, std::abs(a), std::abs(b)});
    }
  out.holder = holder_seminorm(v, 2 * D, 1.0 / n, alpha);
  return out;
}

struct QuantileRow {
  int n = 0;
  std::size_t samples = 0;
  double c0_q50 = 0.0, c0_q90 = 0.0, c0_q99 = 0.0;
  double holder_q50 = 0.0, holder_q90 = 0.0, holder_q99 = 0.0;
};

/// Quantiles of the derivative norms over the first `max_samples` orbits
/// labelled `label` (all labels when empty).
inline QuantileRow tightness_report(const OrbitEnsemble& e, const std::string& label, double alpha = 0.25,
                                    std::size_t max_samples = 1000) {
  std::vector<double> c0, hol;
  for (const auto& s : e.samples) {
    if (!s.ok) continue;
    for (const auto& o : s.orbits) {
      if (!label.empty() && o.label != label) continue;
      if (c0.size() >= max_samples) break;
      dispatch_dim(e.d(), [&]<int D>() {
        const auto path = reconstruct_path<D>(e, s, o);
        const auto dn = derivative_norms(path, e.n, alpha);
        c0.push_back(dn.c0);
        hol.push_back(dn.holder);
        return 0;
      });
    }
  }
  require(!c0.empty(), "tightness_report: no orbits selected");
  QuantileRow r;
  r.n = e.n;
  r.samples = c0.size();
  r.c0_q50 = quantile(c0, 0.5);
  r.c0_q90 = quantile(c0, 0.9);
  r.c0_q99 = quantile(c0, 0.99);
  r.holder_q50 = quantile(hol, 0.5);
  r.holder_q90 = quantile(hol, 0.9);
  r.holder_q99 = quantile(hol, 0.99);
  return r;
}

/// Per-label action statistics of an ensemble.
struct LabelStats {
  std::size_t count = 0;
  double mean = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
};

inline std::map<std::string, LabelStats> action_table(const OrbitEnsemble& e) {
  std::map<std::string, std::vector<double>> by;
  for (const auto& s : e.samples)
    if (s.ok)
      for (const auto& o : s.orbits) by[o.label].push_back(o.action);
  std::map<std::string, LabelStats> out;
  for (auto& [label, v] : by) {
    LabelStats st;
    st.count = v.size();
    for (double x : v) st.mean += x;
    st.mean /= static_cast<double>(v.size());
    st.q05 = quantile(v, 0.05);
    st.q50 = quantile(v, 0.5);
    st.q95 = quantile(v, 0.95);
    out[label] = st;
  }
  return out;
}

/// L(hi) - L(lo) for one sample, when both labels are present.
inline std::optional<double> sample_gap(const SampleRecord& s, const std::string& lo, const std::string& hi) {
  const OrbitRecord* a = s.find(lo);
  const OrbitRecord* b = s.find(hi);
  if (!s.ok || !a || !b) return std::nullopt;
  return b->action - a->action;
}

}  // namespace dhlab
