#pragma once

// Coin-flip sample space, rescaled random walks and their regularity /
// distributional diagnostics.

#include "dhlab/core.hpp"
#include "dhlab/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace dhlab {

/// One sample of the n*d coin-flip experiment. Entry (c, i) is the i-th coin
/// of coordinate c and lives at signs[c * n + i].
struct CoinSequence {
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  std::vector<std::int8_t> signs;

  int sign(int coord, int step) const { return signs[static_cast<std::size_t>(coord) * n + step]; }
};

namespace detail {
// Stream tag for coin blocks; `period` selects the unit time interval.
inline constexpr std::uint64_t kCoinStream = 0xC0151ULL;

inline std::uint64_t coin_block(std::uint64_t seed, std::uint64_t period, int coord, int block) {
  return rng::hash3(seed, kCoinStream + (period << 20) + static_cast<std::uint64_t>(coord),
                    static_cast<std::uint64_t>(block));
}
}  // namespace detail

/// Draws the coins of sample `seed`. Bit i%64 of block i/64 decides coin i
/// of each coordinate; `period` gives fresh independent coins for the unit
/// interval [period, period+1) of the extended walk.
inline CoinSequence sample_coins(int n, int d, std::uint64_t seed, std::uint64_t period = 0) {
  require(n >= 1, "sample_coins: n must be positive");
  require(d >= 1, "sample_coins: d must be positive");
  CoinSequence c{n, d, seed, std::vector<std::int8_t>(static_cast<std::size_t>(n) * d)};
  for (int coord = 0; coord < d; ++coord) {
    for (int block = 0; block * 64 < n; ++block) {
      const std::uint64_t bits = detail::coin_block(seed, period, coord, block);
      const int hi = std::min(64, n - block * 64);
      for (int b = 0; b < hi; ++b) {
        c.signs[static_cast<std::size_t>(coord) * n + block * 64 + b] = ((bits >> b) & 1U) ? 1 : -1;
      }
    }
  }
  return c;
}

/// Sum of the first m coins of coordinate 0 of sample `seed`, computed from
/// the coin blocks with popcount (no per-coin storage).
inline std::int64_t coin_prefix_sum(std::uint64_t seed, int m, std::uint64_t period = 0) {
  std::int64_t heads = 0;
  int block = 0;
  for (; (block + 1) * 64 <= m; ++block) {
    heads += std::popcount(detail::coin_block(seed, period, 0, block));
  }
  const int rest = m - block * 64;
  if (rest > 0) {
    const std::uint64_t mask = (rest == 64) ? ~0ULL : ((1ULL << rest) - 1ULL);
    heads += std::popcount(detail::coin_block(seed, period, 0, block) & mask);
  }
  return 2 * heads - m;
}

inline int coin_at(std::uint64_t seed, int index, std::uint64_t period = 0) {
  return ((detail::coin_block(seed, period, 0, index / 64) >> (index % 64)) & 1U) ? 1 : -1;
}

/// Piecewise-linear rescaled walk W_n on [0,1]:
///   W(t) = (sum_{i <= floor(nt)} eps_i + (nt - floor(nt)) eps_{floor(nt)+1}) / sqrt(n).
class WalkPath {
 public:
  WalkPath() = default;

  explicit WalkPath(CoinSequence coins) : coins_(std::move(coins)) {
    const int n = coins_.n;
    const int d = coins_.d;
    inv_sqrt_n_ = 1.0 / std::sqrt(static_cast<double>(n));
    values_.assign(static_cast<std::size_t>(n + 1) * d, 0.0);
    for (int c = 0; c < d; ++c) {
      long long s = 0;
      for (int k = 0; k < n; ++k) {
        s += coins_.sign(c, k);
        values_[static_cast<std::size_t>(k + 1) * d + c] = static_cast<double>(s) * inv_sqrt_n_;
      }
    }
  }

  int n() const { return coins_.n; }
  int d() const { return coins_.d; }
  const CoinSequence& coins() const { return coins_; }

  /// W at grid node k/n, coordinate c.
  double node(int k, int c) const { return values_[static_cast<std::size_t>(k) * coins_.d + c]; }

  /// dW/dt on piece [k/n, (k+1)/n], coordinate c.
  double slope(int k, int c) const { return coins_.sign(c, k) * coins_.n * inv_sqrt_n_; }

  double eval(double t, int c) const {
    require(t >= 0.0 && t <= 1.0, "walk_eval: t outside [0,1]");
    const int n = coins_.n;
    const double nt = n * t;
    int k = static_cast<int>(std::floor(nt));
    if (k >= n) return node(n, c);
    return node(k, c) + (nt - k) * coins_.sign(c, k) * inv_sqrt_n_;
  }

  template <int D>
  Vec<D> eval(double t) const {
    Vec<D> w;
    for (int c = 0; c < D; ++c) w[c] = eval(t, c);
    return w;
  }

  Eigen::VectorXd eval_dyn(double t) const {
    Eigen::VectorXd w(coins_.d);
    for (int c = 0; c < coins_.d; ++c) w[c] = eval(t, c);
    return w;
  }

  /// Euclidean sup over the grid (attained at nodes for a piecewise linear path).
  double sup_norm() const {
    double best = 0.0;
    for (int k = 0; k <= coins_.n; ++k) {
      double s = 0.0;
      for (int c = 0; c < coins_.d; ++c) s += node(k, c) * node(k, c);
      best = std::max(best, std::sqrt(s));
    }
    return best;
  }

  std::span<const double> values() const { return values_; }

 private:
  CoinSequence coins_;
  double inv_sqrt_n_ = 1.0;
  std::vector<double> values_;
};

inline WalkPath make_walk(int n, int d, std::uint64_t seed) { return WalkPath(sample_coins(n, d, seed)); }

inline Eigen::VectorXd walk_eval(const WalkPath& w, double t) { return w.eval_dyn(t); }

/// Walk extended to t >= 0 with fresh coin blocks on every unit interval.
inline double extended_walk_eval(std::uint64_t seed, int n, double t) {
  require(t >= 0.0, "extended_walk_eval: t must be nonnegative");
  const auto period = static_cast<std::uint64_t>(std::floor(t));
  const double frac = t - static_cast<double>(period);
  double acc = 0.0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::uint64_t m = 0; m < period; ++m) acc += coin_prefix_sum(seed, n, m) * scale;
  const double nt = n * frac;
  const int k = std::min(n, static_cast<int>(std::floor(nt)));
  acc += coin_prefix_sum(seed, k, period) * scale;
  if (k < n) acc += (nt - k) * coin_at(seed, k, period) * scale;
  return acc;
}

/// Hoelder-alpha seminorm of samples on a uniform grid of spacing dt:
/// max over node pairs of |f(t2)-f(t1)|_inf / |t2-t1|^alpha. `values` is
/// row-major (N x d).
inline double holder_seminorm(std::span<const double> values, int d, double dt, double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, "holder_seminorm: alpha must lie in (0,1]");
  require(d >= 1 && values.size() % static_cast<std::size_t>(d) == 0, "holder_seminorm: shape mismatch");
  const std::size_t N = values.size() / d;
  require(N >= 2, "holder_seminorm: need at least 2 grid points");
  std::vector<double> inv_lag(N);
  for (std::size_t lag = 1; lag < N; ++lag) inv_lag[lag] = std::pow(lag * dt, -alpha);
  double best = 0.0;
  for (int c = 0; c < d; ++c) {
    for (std::size_t i = 0; i + 1 < N; ++i) {
      const double fi = values[i * d + c];
      for (std::size_t j = i + 1; j < N; ++j) {
        best = std::max(best, std::abs(values[j * d + c] - fi) * inv_lag[j - i]);
      }
    }
  }
  return best;
}

inline double holder_seminorm(const WalkPath& w, double alpha) {
  return holder_seminorm(w.values(), w.d(), 1.0 / w.n(), alpha);
}

inline double normal_cdf(double x, double variance = 1.0) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples`
/// (atoms allowed) and N(0, variance). Sorts `samples` in place.
inline double ks_distance_normal(std::vector<double>& samples, double variance) {
  require(!samples.empty(), "ks_distance_normal: no samples");
  std::sort(samples.begin(), samples.end());
  const double m = static_cast<double>(samples.size());
  double best = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    const double phi = normal_cdf(samples[i], variance);
    best = std::max({best, std::abs(static_cast<double>(i) / m - phi), std::abs(static_cast<double>(j) / m - phi)});
    i = j;
  }
  return best;
}

/// KS distance of W_n(., t) over `samples` coin draws (d = 1) to N(0, t).
inline double clt_distance(int n, double t, std::size_t samples, std::uint64_t seed) {
  require(n >= 1, "clt_distance: n must be positive");
  require(t > 0.0 && t <= 1.0, "clt_distance: t must lie in (0,1]");
  require(samples >= 100, "clt_distance: need at least 100 samples");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double nt = n * t;
  const int k = std::min(n, static_cast<int>(std::floor(nt)));
  const double frac = nt - k;
  std::vector<double> w(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::uint64_t sd = rng::sample_seed(seed, s);
    double v = static_cast<double>(coin_prefix_sum(sd, k));
    if (k < n && frac > 0.0) v += frac * coin_at(sd, k);
    w[s] = v * scale;
  }
  return ks_distance_normal(w, t);
}

/// Exact KS distance of the law of W_n(., t) to N(0, t) from the binomial law.
inline double clt_distance_exact(int n, double t) {
  require(n >= 1, "clt_distance_exact: n must be positive");
  require(t > 0.0 && t <= 1.0, "clt_distance_exact: t must lie in (0,1]");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double nt = n * t;
  const int m = std::min(n, static_cast<int>(std::floor(nt)));
  const double frac = (m < n) ? nt - m : 0.0;
  struct Atom {
    double x;
    double p;
  };
  std::vector<Atom> atoms;
  for (int h = 0; h <= m; ++h) {
    const double logp = std::lgamma(m + 1.0) - std::lgamma(h + 1.0) - std::lgamma(m - h + 1.0) - m * std::log(2.0);
    const double p = std::exp(logp);
    const double base = (2.0 * h - m) * scale;
    if (frac > 0.0) {
      atoms.push_back({base + frac * scale, 0.5 * p});
      atoms.push_back({base - frac * scale, 0.5 * p});
    } else {
      atoms.push_back({base, p});
    }
  }
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  double cdf = 0.0;
  double best = 0.0;
  std::size_t i = 0;
  while (i < atoms.size()) {
    const double x = atoms[i].x;
    const double phi = normal_cdf(x, t);
    best = std::max(best, std::abs(cdf - phi));
    while (i < atoms.size() && std::abs(atoms[i].x - x) < 1e-14) cdf += atoms[i++].p;
    best = std::max(best, std::abs(cdf - phi));
  }
  return best;
}

/// Empirical quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile: empty input");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace dhlab
