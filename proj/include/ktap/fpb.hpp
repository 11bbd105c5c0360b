#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <utility>

#include "ktap/core.hpp"

namespace ktap {

/* Deterministic random stream. The raw generator is the standard 64-bit
   Mersenne twister; uniforms are derived from the top 53 bits directly so the
   byte-for-byte reproducibility contract does not depend on library
   distribution internals. */
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /** Unbiased integer in [0, bound). */
  std::uint64_t integer(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::integer: zero bound");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = gen_();
    } while (r >= limit);
    return r % bound;
  }

  bool bernoulli(double p) { return uniform01() < p; }

private:
  std::mt19937_64 gen_;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class Admissibility { resample, skip };

/* Zero-mean bounded noise: uniform on [-a, a] with a = sqrt(3 sigma2), so the
   variance is sigma2 and the support stays controllable. A zero-variance spec
   never touches the random stream. */
struct NoiseSpec {
  double sigma2 = 0.0;
  double half_width() const { return std::sqrt(3.0 * sigma2); }
  double draw(Rng& rng) const {
    if (!(sigma2 > 0.0)) return 0.0;
    const double a = half_width();
    return rng.uniform(-a, a);
  }
};

struct PairRule {
  std::function<double(double)> P;
  std::function<double(double)> Q;
  NoiseSpec noise;
  Interval domain{0.0, 1.0};
  Admissibility policy = Admissibility::resample;
};

struct EnvRule {
  std::function<double(double)> PE;
  std::function<double(double)> P;
  std::function<double(double)> Q;
  NoiseSpec noise;
  Interval domain{0.0, 1.0};
  Admissibility policy = Admissibility::resample;
};

inline constexpr int kResampleCap = 32;

/** Binary interaction v* = v + P(v)(w - v) + Q(v) eta, and symmetrically for
    w with an independent draw. Outputs leaving the domain trigger the
    admissibility policy: fresh noise up to the cap, then the interaction is
    skipped and the inputs returned unchanged. */
inline std::pair<double, double> pair_interact(double v, double w, const PairRule& rule,
                                               Rng& rng) {
  const int attempts = rule.policy == Admissibility::resample ? kResampleCap : 1;
  for (int it = 0; it < attempts; ++it) {
    const double eta = rule.noise.draw(rng);
    const double eta2 = rule.noise.draw(rng);
    const double vs = v + rule.P(v) * (w - v) + rule.Q(v) * eta;
    const double ws = w + rule.P(w) * (v - w) + rule.Q(w) * eta2;
    if (rule.domain.contains(vs) && rule.domain.contains(ws)) return {vs, ws};
  }
  return {v, w};
}

/** Interaction with the outer environment: v* = v + PE(v) z - P(v) v + Q(v) eta. */
inline double env_interact(double v, double z, const EnvRule& rule, Rng& rng) {
  const int attempts = rule.policy == Admissibility::resample ? kResampleCap : 1;
  for (int it = 0; it < attempts; ++it) {
    const double eta = rule.noise.draw(rng);
    const double vs = v + rule.PE(v) * z - rule.P(v) * v + rule.Q(v) * eta;
    if (rule.domain.contains(vs)) return vs;
  }
  return v;
}

struct Ensemble {
  std::vector<double> values;
  std::uint64_t seed = 0;
  double t = 0.0;
};

/** One collision step: a uniform random disjoint pairing of the ensemble, each
    pair interacting independently with probability lambda * dt. Every particle
    interacts at most once per step. */
inline void mc_step(Ensemble& ens, const PairRule& rule, double lambda, double dt, Rng& rng) {
  const std::size_t N = ens.values.size();
  if (N % 2 != 0) throw std::invalid_argument("mc_step: ensemble size must be even");
  if (!(dt > 0.0)) throw std::invalid_argument("mc_step: dt must be positive");
  const double prob = lambda * dt;
  if (prob < 0.0 || prob > 1.0)
    throw std::invalid_argument("mc_step: lambda * dt must lie in [0, 1]");

  static thread_local std::vector<std::uint32_t> perm;
  perm.resize(N);
  for (std::size_t q = 0; q < N; ++q) perm[q] = static_cast<std::uint32_t>(q);
  for (std::size_t q = N - 1; q > 0; --q) {
    const std::size_t r = rng.integer(q + 1);
    std::swap(perm[q], perm[r]);
  }
  for (std::size_t r = 0; r + 1 < N; r += 2) {
    if (prob < 1.0 && !rng.bernoulli(prob)) continue;
    const std::size_t i1 = perm[r], i2 = perm[r + 1];
    const auto [vs, ws] = pair_interact(ens.values[i1], ens.values[i2], rule, rng);
    ens.values[i1] = vs;
    ens.values[i2] = ws;
  }
  ens.t += dt;
}

/** Ensemble average of the observable phi. */
inline double weak_observable(const Ensemble& ens,
                              const std::function<double(double)>& phi) {
  if (ens.values.empty()) throw std::invalid_argument("weak_observable: empty ensemble");
  CompensatedSum acc;
  for (double v : ens.values) acc.add(phi(v));
  return acc.value() / static_cast<double>(ens.values.size());
}

inline double ensemble_mean(const Ensemble& ens) {
  if (ens.values.empty()) throw std::invalid_argument("ensemble_mean: empty ensemble");
  CompensatedSum acc;
  for (double v : ens.values) acc.add(v);
  return acc.value() / static_cast<double>(ens.values.size());
}

/* Population variance (divide by N). */
inline double ensemble_variance(const Ensemble& ens) {
  const double mean = ensemble_mean(ens);
  CompensatedSum acc;
  for (double v : ens.values) {
    const double d = v - mean;
    acc.add(d * d);
  }
  return acc.value() / static_cast<double>(ens.values.size());
}

/** The quasi-invariant rescaling: interaction strength and noise variance are
    scaled down together, P -> eps P and sigma2 -> eps sigma2, with the run
    horizon meant to stretch to t / eps. */
inline PairRule quasi_invariant_scale(const PairRule& rule, double eps) {
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("quasi_invariant_scale: eps must lie in (0, 1]");
  PairRule scaled = rule;
  scaled.P = [inner = rule.P, eps](double v) { return eps * inner(v); };
  scaled.noise.sigma2 = eps * rule.noise.sigma2;
  return scaled;
}

/* Closed-form first and second moment evolution for the constant-coefficient
   rule v* = v + p (w - v) + q eta under interaction rate lambda.

   Inserting phi(v) = v and phi(v) = v^2 into the weak form gives
       d<v>/dt = 0,
       dV/dt   = -2 lambda p (1 - p) V + lambda q^2 sigma2,
   so the mean is constant and the variance relaxes exponentially to
   V_inf = q^2 sigma2 / (2 p (1 - p)), degenerating to linear growth when
   p (1 - p) = 0. */
struct MomentCurves {
  std::function<double(double)> mean;
  std::function<double(double)> variance;
};

inline MomentCurves moment_ode_oracle(double p, double q, double lambda, double sigma2,
                                      double mean0, double var0) {
  const double c = 2.0 * lambda * p * (1.0 - p);
  const double src = lambda * q * q * sigma2;
  MomentCurves curves;
  curves.mean = [mean0](double) { return mean0; };
  if (c == 0.0) {
    curves.variance = [var0, src](double t) { return var0 + src * t; };
  } else {
    const double vinf = src / c;
    curves.variance = [var0, vinf, c](double t) {
      return vinf + (var0 - vinf) * std::exp(-c * t);
    };
  }
  return curves;
}

/** Oracle entry point taking the rule itself; non-constant coefficients are
    rejected by probing across the domain. */
inline MomentCurves moment_ode_oracle(const PairRule& rule, double lambda, double mean0,
                                      double var0) {
  const double lo = rule.domain.lo;
  const double hi = std::isfinite(rule.domain.hi) ? rule.domain.hi : lo + 1.0;
  const double p = rule.P(lo);
  const double q = rule.Q(lo);
  for (int s = 0; s <= 8; ++s) {
    const double v = lo + (hi - lo) * s / 8.0;
    if (std::abs(rule.P(v) - p) > 1e-14 || std::abs(rule.Q(v) - q) > 1e-14)
      throw std::invalid_argument("moment_ode_oracle: rule coefficients are not constant");
  }
  return moment_ode_oracle(p, q, lambda, rule.noise.sigma2, mean0, var0);
}

/** Fixed-width histogram of the ensemble over [lo, hi]; out-of-range values
    land in the edge bins. */
inline std::vector<long> histogram(const Ensemble& ens, int bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  if (!(lo < hi)) throw std::invalid_argument("histogram: empty range");
  std::vector<long> counts(bins, 0);
  for (double v : ens.values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    ++counts[b];
  }
  return counts;
}

}  // namespace ktap
