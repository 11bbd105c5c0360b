#include "doctest.h"

#include "ktap/fpb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

using namespace ktap;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

PairRule constant_rule(double p, double q, double sigma2,
                       Interval domain = {-kInf, kInf}) {
  PairRule rule;
  rule.P = [p](double) { return p; };
  rule.Q = [q](double) { return q; };
  rule.noise.sigma2 = sigma2;
  rule.domain = domain;
  return rule;
}

Ensemble uniform_ensemble(std::size_t n, std::uint64_t seed, double lo = 0.0,
                          double hi = 1.0) {
  Ensemble ens;
  ens.seed = seed;
  ens.values.resize(n);
  Rng rng(seed);
  for (auto& v : ens.values) v = rng.uniform(lo, hi);
  return ens;
}

}  // namespace

TEST_CASE("rng: basic ranges and reproducibility") {
  Rng a(123), b(123);
  for (int k = 0; k < 1000; ++k) {
    const double u = a.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform01());
  }
  Rng c(7);
  for (int k = 0; k < 1000; ++k) {
    const auto r = c.integer(13);
    CHECK(r < 13);
  }
  CHECK_THROWS_AS(c.integer(0), std::invalid_argument);
}

TEST_CASE("noise: zero variance is silent and free") {
  NoiseSpec off;
  off.sigma2 = 0.0;
  Rng a(99), b(99);
  for (int k = 0; k < 5; ++k) CHECK(off.draw(a) == 0.0);
  CHECK(a.uniform01() == b.uniform01());
}

TEST_CASE("noise: sample moments match the requested variance") {
  NoiseSpec spec;
  spec.sigma2 = 0.25;
  const double a = spec.half_width();
  CHECK(a == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));

  Rng rng(2024);
  const int n = 1000000;
  CompensatedSum sum, sumsq;
  for (int k = 0; k < n; ++k) {
    const double x = spec.draw(rng);
    CHECK(std::abs(x) <= a);
    sum.add(x);
    sumsq.add(x * x);
  }
  const double mean = sum.value() / n;
  const double var = sumsq.value() / n - mean * mean;
  const double se_mean = std::sqrt(spec.sigma2 / n);
  const double se_var = 2.0 * a * a / std::sqrt(45.0 * n);
  CHECK(std::abs(mean) < 3.0 * se_mean);
  CHECK(std::abs(var - spec.sigma2) < 3.0 * se_var);
}

TEST_CASE("pair_interact: frozen rule returns inputs exactly") {
  auto rule = constant_rule(0.0, 0.0, 0.0);
  Rng rng(5);
  const auto [vs, ws] = pair_interact(0.3, 0.8, rule, rng);
  CHECK(vs == 0.3);
  CHECK(ws == 0.8);
}

TEST_CASE("pair_interact: p = 1 swaps the pair") {
  auto rule = constant_rule(1.0, 0.0, 0.0);
  Rng rng(5);
  const auto [vs, ws] = pair_interact(0.25, 0.75, rule, rng);
  CHECK(vs == 0.75);
  CHECK(ws == 0.25);
}

TEST_CASE("pair_interact: symmetric exchange conserves the pair sum") {
  auto rule = constant_rule(0.4, 0.0, 0.0);
  Rng rng(17);
  Rng vals(18);
  for (int k = 0; k < 1000; ++k) {
    const double v = vals.uniform01();
    const double w = vals.uniform01();
    const auto [vs, ws] = pair_interact(v, w, rule, rng);
    CHECK(std::abs((vs + ws) - (v + w)) <= 1e-15);
  }
}

TEST_CASE("pair_interact: inadmissible outputs fall back to the inputs") {
  // P = 10 throws both outputs far outside [0, 1] regardless of the noise.
  PairRule rule;
  rule.P = [](double) { return 10.0; };
  rule.Q = [](double) { return 0.0; };
  rule.domain = {0.0, 1.0};

  rule.policy = Admissibility::skip;
  Rng rng(3);
  auto [vs, ws] = pair_interact(0.1, 0.9, rule, rng);
  CHECK(vs == 0.1);
  CHECK(ws == 0.9);

  rule.policy = Admissibility::resample;
  auto [vr, wr] = pair_interact(0.1, 0.9, rule, rng);
  CHECK(vr == 0.1);
  CHECK(wr == 0.9);
}

TEST_CASE("pair_interact: resampling keeps outputs inside the domain") {
  PairRule rule = constant_rule(0.0, 1.0, 0.12, {0.0, 1.0});
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const auto [vs, ws] = pair_interact(0.05, 0.95, rule, rng);
    CHECK(vs >= 0.0);
    CHECK(vs <= 1.0);
    CHECK(ws >= 0.0);
    CHECK(ws <= 1.0);
  }
}

TEST_CASE("env_interact: closed forms") {
  Rng rng(1);

  EnvRule off;
  off.PE = [](double) { return 0.0; };
  off.P = [](double) { return 0.0; };
  off.Q = [](double) { return 0.0; };
  off.domain = {-kInf, kInf};
  CHECK(env_interact(0.3, 0.9, off, rng) == 0.3);

  EnvRule swap = off;
  swap.PE = [](double) { return 1.0; };
  swap.P = [](double) { return 1.0; };
  CHECK(env_interact(0.25, 0.75, swap, rng) == 0.75);

  EnvRule half = off;
  half.PE = [](double) { return 0.5; };
  half.P = [](double) { return 0.5; };
  CHECK(env_interact(0.4, 0.8, half, rng) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("env_interact: inadmissible update is dropped") {
  EnvRule rule;
  rule.PE = [](double) { return 100.0; };
  rule.P = [](double) { return 0.0; };
  rule.Q = [](double) { return 0.0; };
  rule.domain = {0.0, 1.0};
  rule.policy = Admissibility::skip;
  Rng rng(2);
  CHECK(env_interact(0.5, 0.9, rule, rng) == 0.5);
}

TEST_CASE("mc_step: guards") {
  auto rule = constant_rule(0.5, 0.0, 0.0);
  Rng rng(1);

  Ensemble odd;
  odd.values = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(mc_step(odd, rule, 1.0, 0.1, rng), std::invalid_argument);

  Ensemble ens = uniform_ensemble(16, 4);
  CHECK_THROWS_AS(mc_step(ens, rule, 1.0, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(mc_step(ens, rule, 1.0, -0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(mc_step(ens, rule, 1.0, 2.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(mc_step(ens, rule, -1.0, 0.1, rng), std::invalid_argument);
}

TEST_CASE("mc_step: zero rate leaves values alone but advances time") {
  auto rule = constant_rule(0.5, 0.0, 0.0);
  Ensemble ens = uniform_ensemble(64, 10);
  const auto before = ens.values;
  Rng rng(10);
  mc_step(ens, rule, 0.0, 0.25, rng);
  CHECK(ens.values == before);
  CHECK(ens.t == 0.25);
}

TEST_CASE("mc_step: identity rule at unit probability changes nothing") {
  auto rule = constant_rule(0.0, 0.0, 0.0);
  Ensemble ens = uniform_ensemble(64, 11);
  const auto before = ens.values;
  Rng rng(11);
  mc_step(ens, rule, 10.0, 0.1, rng);
  CHECK(ens.values == before);
  CHECK(ens.t == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("mc_step: deterministic exchange conserves the ensemble mean") {
  auto rule = constant_rule(0.3, 0.0, 0.0);
  Ensemble ens = uniform_ensemble(2000, 42);
  const double mean0 = ensemble_mean(ens);
  Rng rng(43);
  for (int k = 0; k < 1000; ++k) mc_step(ens, rule, 1.0, 0.5, rng);
  CHECK(std::abs(ensemble_mean(ens) - mean0) <= 1e-12);
  CHECK(ens.t == doctest::Approx(500.0).epsilon(1e-12));
}

TEST_CASE("mc_step: same seed gives bit-identical trajectories") {
  auto rule = constant_rule(0.25, 1.0, 0.05);
  Ensemble a = uniform_ensemble(500, 77);
  Ensemble b = a;
  Rng ra(500), rb(500);
  for (int k = 0; k < 50; ++k) {
    mc_step(a, rule, 1.0, 0.1, ra);
    mc_step(b, rule, 1.0, 0.1, rb);
  }
  CHECK(a.values == b.values);
}

TEST_CASE("weak_observable: simple functionals") {
  Ensemble ens;
  CHECK_THROWS_AS(weak_observable(ens, [](double) { return 1.0; }),
                  std::invalid_argument);

  ens.values.assign(1000, 0.0);
  Rng rng(8);
  for (auto& v : ens.values) v = rng.uniform01();
  CHECK(weak_observable(ens, [](double) { return 1.0; }) == 1.0);

  Ensemble sym;
  sym.values = {-0.7, 0.7};
  CHECK(weak_observable(sym, [](double v) { return v; }) == 0.0);

  Ensemble three;
  three.values = {0.1, 0.3, 0.5};
  const double expect = (0.1 * 0.1 + 0.3 * 0.3 + 0.5 * 0.5) / 3.0;
  CHECK(weak_observable(three, [](double v) { return v * v; }) ==
        doctest::Approx(expect).epsilon(1e-15));
  CHECK(ensemble_mean(three) == doctest::Approx(0.3).epsilon(1e-15));
  const double var = ((0.2 * 0.2) * 2.0) / 3.0;
  CHECK(ensemble_variance(three) == doctest::Approx(var).epsilon(1e-13));
}

TEST_CASE("quasi_invariant_scale: strength and noise shrink together") {
  auto rule = constant_rule(0.8, 0.7, 0.4);
  CHECK_THROWS_AS(quasi_invariant_scale(rule, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(quasi_invariant_scale(rule, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(quasi_invariant_scale(rule, 1.5), std::invalid_argument);

  const auto same = quasi_invariant_scale(rule, 1.0);
  CHECK(same.P(0.3) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(same.noise.sigma2 == 0.4);

  const auto scaled = quasi_invariant_scale(rule, 0.25);
  CHECK(scaled.P(0.1) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(scaled.P(0.9) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(scaled.Q(0.5) == 0.7);
  CHECK(scaled.noise.sigma2 == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(scaled.domain.lo == rule.domain.lo);
  CHECK(scaled.policy == rule.policy);
}

TEST_CASE("moment_ode_oracle: closed-form regimes") {
  // Frozen rule: both moments constant.
  auto frozen = moment_ode_oracle(0.0, 0.0, 1.0, 0.3, 0.5, 0.2);
  CHECK(frozen.mean(4.0) == 0.5);
  CHECK(frozen.variance(4.0) == 0.2);

  // Pure exchange: exponential relaxation to consensus.
  auto relax = moment_ode_oracle(0.5, 0.0, 1.0, 0.0, 0.5, 0.2);
  CHECK(relax.variance(0.0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(relax.variance(2.0) == doctest::Approx(0.2 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(relax.variance(40.0) < 1e-8);

  // Pure diffusion: linear growth at rate lambda q^2 sigma2.
  auto diffuse = moment_ode_oracle(0.0, 1.0, 2.0, 0.05, 0.0, 0.1);
  CHECK(diffuse.variance(3.0) == doctest::Approx(0.1 + 2.0 * 0.05 * 3.0).epsilon(1e-14));

  // Balance: variance settles at q^2 sigma2 / (2 p (1 - p)).
  auto settled = moment_ode_oracle(0.25, 1.0, 1.0, 0.04, 0.5, 0.3);
  const double vinf = 0.04 / (2.0 * 0.25 * 0.75);
  CHECK(settled.variance(1e6) == doctest::Approx(vinf).epsilon(1e-12));
}

TEST_CASE("moment_ode_oracle: rule probe rejects state-dependent coefficients") {
  auto rule = constant_rule(0.25, 1.0, 0.04, {0.0, 1.0});
  const auto curves = moment_ode_oracle(rule, 1.0, 0.5, 0.1);
  const auto direct = moment_ode_oracle(0.25, 1.0, 1.0, 0.04, 0.5, 0.1);
  CHECK(curves.variance(0.7) == doctest::Approx(direct.variance(0.7)).epsilon(1e-15));

  PairRule varying = rule;
  varying.P = [](double v) { return 0.1 + 0.2 * v; };
  CHECK_THROWS_AS(moment_ode_oracle(varying, 1.0, 0.5, 0.1), std::invalid_argument);

  PairRule varq = rule;
  varq.Q = [](double v) { return v; };
  CHECK_THROWS_AS(moment_ode_oracle(varq, 1.0, 0.5, 0.1), std::invalid_argument);
}

TEST_CASE("monte carlo matches the moment oracle") {
  const double p = 0.25, q = 1.0, sigma2 = 0.04, lambda = 1.0;
  auto rule = constant_rule(p, q, sigma2);
  const std::size_t N = 20000;
  Ensemble ens = uniform_ensemble(N, 314);
  const double mean0 = ensemble_mean(ens);
  const double var0 = ensemble_variance(ens);
  const auto curves = moment_ode_oracle(rule, lambda, mean0, var0);

  const double dt = 0.01;
  Rng rng(315);
  for (int k = 0; k < 200; ++k) mc_step(ens, rule, lambda, dt, rng);

  const double mean_t = ensemble_mean(ens);
  const double var_t = ensemble_variance(ens);
  const double se_mean = std::sqrt(2.0 * ens.t * lambda * q * q * sigma2 / N);
  const double se_var = var_t * std::sqrt(8.0 / N);
  CHECK(std::abs(mean_t - curves.mean(ens.t)) < 5.0 * se_mean);
  CHECK(std::abs(var_t - curves.variance(ens.t)) < 5.0 * se_var);
}

TEST_CASE("wealth-style rule keeps the half line closed") {
  PairRule rule;
  rule.P = [](double) { return 0.1; };
  rule.Q = [](double v) { return 0.3 * v; };
  rule.noise.sigma2 = 1.0 / 12.0;
  rule.domain = {0.0, kInf};

  Ensemble ens = uniform_ensemble(2000, 21, 0.5, 1.5);
  Rng rng(22);
  for (int k = 0; k < 200; ++k) mc_step(ens, rule, 1.0, 0.05, rng);
  const double lowest = *std::min_element(ens.values.begin(), ens.values.end());
  CHECK(lowest >= 0.0);
}

TEST_CASE("histogram: counts, clamping, guards") {
  Ensemble ens;
  ens.values = {-5.0, 0.05, 0.15, 0.15, 0.95, 17.0};
  const auto counts = histogram(ens, 10, 0.0, 1.0);
  REQUIRE(counts.size() == 10);
  CHECK(counts[0] == 2);  // -5.0 clamps into the first bin alongside 0.05
  CHECK(counts[1] == 2);
  CHECK(counts[9] == 2);  // 17.0 clamps into the last bin alongside 0.95
  long total = 0;
  for (long c : counts) total += c;
  CHECK(total == static_cast<long>(ens.values.size()));

  CHECK_THROWS_AS(histogram(ens, 0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(histogram(ens, 4, 1.0, 1.0), std::invalid_argument);
}
