#pragma once

// Per-sample orbit records for an ensemble at one n, and reconstruction of
// trajectories from the stored initial states.

#include "dhlab/core.hpp"
#include "dhlab/orbit_solver.hpp"
#include "dhlab/rng.hpp"
#include "dhlab/sample_space.hpp"
#include "dhlab/torus_phase.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dhlab {

struct OrbitRecord {
  std::string label;
  std::vector<double> q0;
  std::vector<double> p0;
  double action = 0.0;
  double action_legendre = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct SampleRecord {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;  // failure kind and message when !ok
  bool morse_bott = false;
  std::vector<OrbitRecord> orbits;

  const OrbitRecord* find(const std::string& label) const {
    for (const auto& o : orbits)
      if (o.label == label) return &o;
    return nullptr;
  }
};

struct OrbitEnsemble {
  HamiltonianSpec spec;
  double sigma = 0.0;
  int n = 0;
  std::uint64_t base_seed = 0;
  OrbitOptions options;
  std::vector<SampleRecord> samples;

  int d() const { return spec.d; }
};

/// Random-stream id for the base point of Morse-Bott representatives.
inline constexpr std::uint64_t kMorseBottStream = 0x4d42ULL;

template <int D>
OrbitRecord to_record(const ClosedOrbit<D>& o) {
  OrbitRecord r;
  r.label = o.label;
  r.q0.assign(o.q0.data(), o.q0.data() + D);
  r.p0.assign(o.p0.data(), o.p0.data() + D);
  r.action = o.action;
  r.action_legendre = o.action_legendre;
  r.residual = o.newton_residual;
  r.iterations = o.iterations;
  return r;
}

/// Solves sample `index`. A Morse-Bott family is stored as one orbit "mb"
/// through a uniformly drawn base point; otherwise the labelled family.
/// Solver failures are recorded, not thrown.
template <int D>
SampleRecord solve_sample(const HamiltonianSpec& spec, double sigma, int n, std::uint64_t base_seed,
                          std::uint64_t index, const OrbitOptions& opt) {
  SampleRecord rec;
  rec.index = index;
  rec.seed = rng::sample_seed(base_seed, index);
  const WalkPath walk = make_walk(n, D, rec.seed);
  OrbitProblem<D> prob(spec, walk, sigma, opt);
  try {
    if (prob.hamiltonian().is_free()) {
      rec.morse_bott = true;
      PhaseState<D> z;
      for (int c = 0; c < D; ++c) z.q[c] = rng::uniform(rec.seed, kMorseBottStream, c);
      z.p = -prob.sigma_w1();
      auto o = newton_closed_orbit(prob, z);
      o.label = "mb";
      rec.orbits.push_back(to_record(o));
    } else {
      for (const auto& o : find_orbit_family(prob).orbits) rec.orbits.push_back(to_record(o));
    }
  } catch (const SolverError& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

/// Samples [first, first + count) at one n, in index order.
inline OrbitEnsemble build_ensemble(const HamiltonianSpec& spec, double sigma, int n, std::uint64_t base_seed,
                                    std::uint64_t first, std::uint64_t count, const OrbitOptions& opt = {}) {
  spec.validate();
  require(n >= 1, "build_ensemble: n must be positive");
  require(sigma >= 0.0, "build_ensemble: sigma must be nonnegative");
  OrbitEnsemble e;
  e.spec = spec;
  e.sigma = sigma;
  e.n = n;
  e.base_seed = base_seed;
  e.options = opt;
  e.samples.reserve(count);
  dispatch_dim(spec.d, [&]<int D>() {
    for (std::uint64_t i = first; i < first + count; ++i)
      e.samples.push_back(solve_sample<D>(spec, sigma, n, base_seed, i, opt));
    return 0;
  });
  return e;
}

/// Re-integrates a stored orbit of sample `rec`.
template <int D>
LoopPath<D> reconstruct_path(const OrbitEnsemble& e, const SampleRecord& rec, const OrbitRecord& o) {
  const WalkPath walk = make_walk(e.n, D, rec.seed);
  OrbitProblem<D> prob(e.spec, walk, e.sigma, e.options);
  PhaseState<D> z;
  for (int c = 0; c < D; ++c) {
    z.q[c] = o.q0[c];
    z.p[c] = o.p0[c];
  }
  LoopPath<D> path;
  prob.integrate(z, &path);
  return path;
}

}  // namespace dhlab
