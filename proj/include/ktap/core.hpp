#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ktap {

/* Neumaier compensated accumulator. Used wherever a long reduction feeds a
   tight tolerance (densities, conservation checks, ensemble moments), so that
   summation error stays at the ulp of the result instead of growing with the
   term count. */
class CompensatedSum {
public:
  void add(double x) {
    const double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

private:
  double s_ = 0.0;
  double c_ = 0.0;
};

struct undefined_moment : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* Quadrature grid over the activity interval [lower, upper]: uniformly spaced
   nodes with composite trapezoid weights. Weights are positive and sum to the
   interval length. */
struct ActivityGrid {
  double lower = 0.0;
  double upper = 1.0;
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const { return static_cast<int>(nodes.size()); }
  double spacing() const { return (upper - lower) / (size() - 1); }

  double integrate(const std::vector<double>& values) const {
    if (values.size() != nodes.size())
      throw std::invalid_argument("ActivityGrid::integrate: length mismatch");
    CompensatedSum s;
    for (std::size_t j = 0; j < nodes.size(); ++j) s.add(weights[j] * values[j]);
    return s.value();
  }
};

inline ActivityGrid make_uniform_grid(double lower, double upper, int m) {
  if (m < 2) throw std::invalid_argument("make_uniform_grid: need at least 2 nodes");
  if (!(lower < upper)) throw std::invalid_argument("make_uniform_grid: lower must be < upper");
  ActivityGrid g;
  g.lower = lower;
  g.upper = upper;
  g.nodes.resize(m);
  g.weights.resize(m);
  const double h = (upper - lower) / (m - 1);
  for (int j = 0; j < m; ++j) g.nodes[j] = lower + h * j;
  g.nodes[m - 1] = upper;
  for (int j = 0; j < m; ++j) g.weights[j] = h;
  g.weights[0] = 0.5 * h;
  g.weights[m - 1] = 0.5 * h;
  return g;
}

struct FunctionalSubsystem {
  int index = 0;
  std::string label;
};

/* Distribution over (subsystem, activity node), stored row-major. Values are
   number densities per unit activity, so the zeroth moment of a subsystem is
   its population size and need not be one. */
struct HomogeneousState {
  double t = 0.0;
  int n = 0;
  int m = 0;
  std::vector<double> f;

  double& operator()(int i, int j) { return f[static_cast<std::size_t>(i) * m + j]; }
  double operator()(int i, int j) const { return f[static_cast<std::size_t>(i) * m + j]; }
};

inline HomogeneousState make_state(int n, const ActivityGrid& grid) {
  if (n < 1) throw std::invalid_argument("make_state: need at least one subsystem");
  HomogeneousState s;
  s.n = n;
  s.m = grid.size();
  s.f.assign(static_cast<std::size_t>(n) * grid.size(), 0.0);
  return s;
}

inline void check_index(const HomogeneousState& s, int i) {
  if (i < 0 || i >= s.n) throw std::out_of_range("subsystem index out of range");
}

/** Zeroth activity moment of subsystem i (its population density). */
inline double density(const HomogeneousState& s, const ActivityGrid& grid, int i) {
  check_index(s, i);
  if (grid.size() != s.m) throw std::invalid_argument("density: grid/state size mismatch");
  CompensatedSum acc;
  for (int j = 0; j < s.m; ++j) acc.add(grid.weights[j] * s(i, j));
  return acc.value();
}

/** Normalized first activity moment of subsystem i. Undefined (and refused)
    when the subsystem is empty. */
inline double activation(const HomogeneousState& s, const ActivityGrid& grid, int i) {
  const double ni = density(s, grid, i);
  if (!(ni > 0.0)) throw undefined_moment("activation: zero density");
  CompensatedSum acc;
  for (int j = 0; j < s.m; ++j) acc.add(grid.weights[j] * grid.nodes[j] * s(i, j));
  double e = acc.value() / ni;
  if (e < grid.lower) e = grid.lower;
  if (e > grid.upper) e = grid.upper;
  return e;
}

/* Per-subsystem densities and activations. E_i carries a 0 sentinel for empty
   subsystems; callers that cannot accept the sentinel should use activation()
   which signals instead. */
struct MomentSet {
  std::vector<double> n;
  std::vector<double> E;
};

inline MomentSet moments(const HomogeneousState& s, const ActivityGrid& grid) {
  MomentSet mom;
  mom.n.resize(s.n);
  mom.E.resize(s.n);
  for (int i = 0; i < s.n; ++i) {
    mom.n[i] = density(s, grid, i);
    if (mom.n[i] > 0.0) {
      CompensatedSum acc;
      for (int j = 0; j < s.m; ++j) acc.add(grid.weights[j] * grid.nodes[j] * s(i, j));
      double e = acc.value() / mom.n[i];
      if (e < grid.lower) e = grid.lower;
      if (e > grid.upper) e = grid.upper;
      mom.E[i] = e;
    } else {
      mom.E[i] = 0.0;
    }
  }
  return mom;
}

}  // namespace ktap
