#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ktap {

struct StepDiagnostics {
  double clamped_mass = 0.0;
  long clamp_events = 0;
};

namespace detail {

/* Classical four-stage explicit step on a flat value vector.

   RhsFn: void(const std::vector<double>& f, double t, std::vector<double>& out).
   Negative entries produced by the stage combination are clamped to zero and
   the clamped amount (weighted by mass_weight per entry) is recorded; stage
   values themselves are left unclamped. Non-finite results abort. */
template <typename RhsFn, typename WeightFn>
inline std::vector<double> rk4_step(const std::vector<double>& f, double t, double dt,
                                    RhsFn&& rhs, WeightFn&& mass_weight,
                                    StepDiagnostics* diag, bool clamp = true) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const std::size_t sz = f.size();
  std::vector<double> k1(sz), k2(sz), k3(sz), k4(sz), tmp(sz);

  rhs(f, t, k1);
  for (std::size_t q = 0; q < sz; ++q) tmp[q] = f[q] + 0.5 * dt * k1[q];
  rhs(tmp, t + 0.5 * dt, k2);
  for (std::size_t q = 0; q < sz; ++q) tmp[q] = f[q] + 0.5 * dt * k2[q];
  rhs(tmp, t + 0.5 * dt, k3);
  for (std::size_t q = 0; q < sz; ++q) tmp[q] = f[q] + dt * k3[q];
  rhs(tmp, t + dt, k4);

  std::vector<double> out(sz);
  for (std::size_t q = 0; q < sz; ++q) {
    double v = f[q] + (dt / 6.0) * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    if (!std::isfinite(v))
      throw std::runtime_error("rk4_step: non-finite value at t = " + std::to_string(t) +
                               ", entry " + std::to_string(q));
    if (clamp && v < 0.0) {
      if (diag) {
        diag->clamped_mass += -v * mass_weight(q);
        ++diag->clamp_events;
      }
      v = 0.0;
    }
    out[q] = v;
  }
  return out;
}

}  // namespace detail
}  // namespace ktap
