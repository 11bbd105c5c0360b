#pragma once

#include <functional>
#include <utility>

#include "ktap/core.hpp"
#include "ktap/homogeneous.hpp"
#include "ktap/integrate.hpp"

namespace ktap {

/* Table layouts, all row-major with pair index (FS, state) flattened as
   idx = fs * m + state:
     eta[pq][hk]      encounter rate, candidate (p,q), field (h,k)
     A  [pq][hk][ij]  transition probability into (i,j), sums to 1 over (i,j)
     mu [pq][k]       micro-macro rate against subsystem k
     M  [pq][k][ij]   micro-macro transition probability, sums to 1 over (i,j)
     P  [ij][hk]      expected offspring at the test state (i,j) per encounter
     D  [ij][hk]      destruction rate of the test particle (i,j)
   mu/M, P, D may be empty. */
struct DiscreteTables {
  int n = 0;
  int m = 0;
  std::vector<double> u;
  std::vector<double> eta;
  std::vector<double> A;
  std::vector<double> mu;
  std::vector<double> M;
  std::vector<double> P;
  std::vector<double> D;
};

class DiscreteModel {
public:
  explicit DiscreteModel(DiscreteTables t)
      : n_(t.n), m_(t.m), u_(std::move(t.u)), eta_(std::move(t.eta)), A_(std::move(t.A)),
        mu_(std::move(t.mu)), M_(std::move(t.M)), P_(std::move(t.P)), D_(std::move(t.D)) {
    if (n_ < 1 || m_ < 1) throw std::invalid_argument("DiscreteModel: bad dimensions");
    const std::size_t nm = static_cast<std::size_t>(n_) * m_;
    if (u_.size() != static_cast<std::size_t>(m_))
      throw std::invalid_argument("DiscreteModel: state value list size");
    if (eta_.size() != nm * nm) throw std::invalid_argument("DiscreteModel: eta table size");
    if (A_.size() != nm * nm * nm) throw std::invalid_argument("DiscreteModel: A table size");
    if (!mu_.empty() && mu_.size() != nm * n_)
      throw std::invalid_argument("DiscreteModel: mu table size");
    if (mu_.empty() != M_.empty())
      throw std::invalid_argument("DiscreteModel: mu and M tables must come together");
    if (!M_.empty() && M_.size() != nm * n_ * nm)
      throw std::invalid_argument("DiscreteModel: M table size");
    if (!P_.empty() && P_.size() != nm * nm) throw std::invalid_argument("DiscreteModel: P table size");
    if (!D_.empty() && D_.size() != nm * nm) throw std::invalid_argument("DiscreteModel: D table size");
    validate();
  }

  int n() const { return n_; }
  int m() const { return m_; }
  const std::vector<double>& state_values() const { return u_; }

  bool has_macro() const { return !mu_.empty(); }
  bool has_prolif() const { return !P_.empty(); }
  bool has_destr() const { return !D_.empty(); }

  std::size_t nm() const { return static_cast<std::size_t>(n_) * m_; }

  double eta_at(int p, int q, int h, int k) const { return eta_[pair(p, q) * nm() + pair(h, k)]; }
  double A_at(int p, int q, int h, int k, int i, int j) const {
    return A_[(pair(p, q) * nm() + pair(h, k)) * nm() + pair(i, j)];
  }
  double mu_at(int p, int q, int k) const {
    return mu_.empty() ? 0.0 : mu_[pair(p, q) * n_ + k];
  }
  double M_at(int p, int q, int k, int i, int j) const {
    return M_.empty() ? 0.0 : M_[(pair(p, q) * n_ + k) * nm() + pair(i, j)];
  }
  double P_at(int i, int j, int h, int k) const {
    return P_.empty() ? 0.0 : P_[pair(i, j) * nm() + pair(h, k)];
  }
  double D_at(int i, int j, int h, int k) const {
    return D_.empty() ? 0.0 : D_[pair(i, j) * nm() + pair(h, k)];
  }

  /* The structure leaves the [f]-dependence of the encounter rate abstract;
     this hook scales every eta-driven term by a function of the total mass.
     Unset means constant tables. */
  void set_eta_scale(std::function<double(double)> hook) { eta_scale_ = std::move(hook); }
  double eta_scale(double total_mass) const {
    return eta_scale_ ? eta_scale_(total_mass) : 1.0;
  }
  bool has_eta_scale() const { return static_cast<bool>(eta_scale_); }

  /** True when no micro-micro transition moves mass across subsystems. */
  bool within_subsystem_only() const {
    for (int p = 0; p < n_; ++p)
      for (int q = 0; q < m_; ++q)
        for (int h = 0; h < n_; ++h)
          for (int k = 0; k < m_; ++k)
            for (int i = 0; i < n_; ++i) {
              if (i == p) continue;
              for (int j = 0; j < m_; ++j)
                if (A_at(p, q, h, k, i, j) != 0.0) return false;
            }
    return true;
  }

private:
  std::size_t pair(int fs, int state) const { return static_cast<std::size_t>(fs) * m_ + state; }

  void validate() {
    auto nonneg = [](const std::vector<double>& v, const char* what) {
      for (double x : v)
        if (!(x >= 0.0))
          throw model_error(std::string(what) + " table has a negative or non-finite entry");
    };
    nonneg(eta_, "eta");
    nonneg(A_, "A");
    nonneg(mu_, "mu");
    nonneg(M_, "M");
    nonneg(P_, "P");
    nonneg(D_, "D");

    const std::size_t NM = nm();
    for (std::size_t cand = 0; cand < NM; ++cand)
      for (std::size_t fld = 0; fld < NM; ++fld) {
        double sum = 0.0;
        for (std::size_t out = 0; out < NM; ++out) sum += A_[(cand * NM + fld) * NM + out];
        if (sum == 0.0) {
          if (eta_[cand * NM + fld] != 0.0)
            throw model_error("A vanishes for an encounter pair with positive rate");
          continue;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw model_error("A is not normalized: sums to " + std::to_string(sum));
        for (std::size_t out = 0; out < NM; ++out) A_[(cand * NM + fld) * NM + out] /= sum;
      }
    if (!M_.empty())
      for (std::size_t cand = 0; cand < NM; ++cand)
        for (int k = 0; k < n_; ++k) {
          double sum = 0.0;
          for (std::size_t out = 0; out < NM; ++out) sum += M_[(cand * n_ + k) * NM + out];
          if (sum == 0.0) {
            if (mu_[cand * n_ + k] != 0.0)
              throw model_error("M vanishes for an encounter pair with positive rate");
            continue;
          }
          if (std::abs(sum - 1.0) > 1e-12)
            throw model_error("M is not normalized: sums to " + std::to_string(sum));
          for (std::size_t out = 0; out < NM; ++out) M_[(cand * n_ + k) * NM + out] /= sum;
        }
  }

  int n_, m_;
  std::vector<double> u_;
  std::vector<double> eta_, A_, mu_, M_, P_, D_;
  std::function<double(double)> eta_scale_;
};

struct DiscreteState {
  double t = 0.0;
  int n = 0;
  int m = 0;
  std::vector<double> f;

  double& operator()(int i, int j) { return f[static_cast<std::size_t>(i) * m + j]; }
  double operator()(int i, int j) const { return f[static_cast<std::size_t>(i) * m + j]; }
};

inline DiscreteState make_discrete_state(const DiscreteModel& model) {
  DiscreteState s;
  s.n = model.n();
  s.m = model.m();
  s.f.assign(model.nm(), 0.0);
  return s;
}

inline MomentSet discrete_moments(const DiscreteState& s, const DiscreteModel& model) {
  MomentSet mom;
  mom.n.resize(s.n);
  mom.E.resize(s.n);
  for (int i = 0; i < s.n; ++i) {
    CompensatedSum num, den;
    for (int j = 0; j < s.m; ++j) {
      den.add(s(i, j));
      num.add(model.state_values()[j] * s(i, j));
    }
    mom.n[i] = den.value();
    mom.E[i] = mom.n[i] > 0.0 ? num.value() / mom.n[i] : 0.0;
  }
  return mom;
}

/** All six sums of the discrete-activity structure. */
inline std::vector<double> discrete_rhs(const DiscreteState& s, const DiscreteModel& model) {
  if (s.n != model.n() || s.m != model.m())
    throw std::invalid_argument("discrete_rhs: state dimensions do not match the model");
  const int n = s.n, m = s.m;
  const std::size_t NM = model.nm();
  std::vector<double> out(NM, 0.0);

  double scale = 1.0;
  if (model.has_eta_scale()) {
    CompensatedSum total;
    for (double x : s.f) total.add(x);
    scale = model.eta_scale(total.value());
  }

  // micro-micro gain and loss
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < m; ++q) {
      const double fpq = s(p, q);
      if (fpq == 0.0) continue;
      for (int h = 0; h < n; ++h)
        for (int k = 0; k < m; ++k) {
          const double c = scale * model.eta_at(p, q, h, k) * fpq * s(h, k);
          if (c == 0.0) continue;
          for (std::size_t out_idx = 0; out_idx < NM; ++out_idx) {
            const double a = model.A_at(p, q, h, k, static_cast<int>(out_idx) / m,
                                        static_cast<int>(out_idx) % m);
            if (a != 0.0) out[out_idx] += c * a;
          }
        }
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int h = 0; h < n; ++h)
        for (int k = 0; k < m; ++k) acc += model.eta_at(i, j, h, k) * s(h, k);
      out[static_cast<std::size_t>(i) * m + j] -= scale * s(i, j) * acc;
    }

  // micro-macro gain and loss, weighted by the partner subsystem activation
  if (model.has_macro()) {
    const MomentSet mom = discrete_moments(s, model);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < m; ++q) {
        const double fpq = s(p, q);
        if (fpq == 0.0) continue;
        for (int k = 0; k < n; ++k) {
          const double c = model.mu_at(p, q, k) * fpq * mom.E[k];
          if (c == 0.0) continue;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(i) * m + j] +=
                c * model.M_at(p, q, k, i, j);
        }
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += model.mu_at(i, j, k) * mom.E[k];
        out[static_cast<std::size_t>(i) * m + j] -= s(i, j) * acc;
      }
  }

  // proliferation at the test state, destruction of the test particle
  if (model.has_prolif())
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int h = 0; h < n; ++h)
          for (int k = 0; k < m; ++k)
            acc += model.eta_at(i, j, h, k) * model.P_at(i, j, h, k) * s(h, k);
        out[static_cast<std::size_t>(i) * m + j] += scale * s(i, j) * acc;
      }
  if (model.has_destr())
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int h = 0; h < n; ++h)
          for (int k = 0; k < m; ++k)
            acc += model.eta_at(i, j, h, k) * model.D_at(i, j, h, k) * s(h, k);
        out[static_cast<std::size_t>(i) * m + j] -= scale * s(i, j) * acc;
      }

  return out;
}

/** Restriction to within-subsystem activity exchanges. Misuse (a model that
    moves mass across subsystems, or carries micro-macro, proliferative or
    destructive tables) is signaled rather than silently truncated. */
inline std::vector<double> simple_rhs(const DiscreteState& s, const DiscreteModel& model) {
  if (s.n != model.n() || s.m != model.m())
    throw std::invalid_argument("simple_rhs: state dimensions do not match the model");
  if (model.has_macro() || model.has_prolif() || model.has_destr())
    throw std::logic_error("simple_rhs: model carries terms outside the simple structure");
  if (!model.within_subsystem_only())
    throw std::logic_error("simple_rhs: model moves mass across subsystems");
  const int n = s.n, m = s.m;
  std::vector<double> out(model.nm(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double gain = 0.0, rate = 0.0;
      for (int h = 0; h < n; ++h)
        for (int k = 0; k < m; ++k) {
          for (int q = 0; q < m; ++q)
            gain += model.eta_at(i, q, h, k) * model.A_at(i, q, h, k, i, j) * s(i, q) * s(h, k);
          rate += model.eta_at(i, j, h, k) * s(h, k);
        }
      out[static_cast<std::size_t>(i) * m + j] = gain - s(i, j) * rate;
    }
  return out;
}

inline DiscreteState discrete_step_rk4(const DiscreteState& s, const DiscreteModel& model,
                                       double dt, StepDiagnostics* diag = nullptr,
                                       bool clamp = true) {
  DiscreteState scratch = s;
  auto rhs_fn = [&](const std::vector<double>& f, double t, std::vector<double>& out) {
    scratch.f = f;
    scratch.t = t;
    out = discrete_rhs(scratch, model);
  };
  auto weight = [](std::size_t) { return 1.0; };
  DiscreteState next = s;
  next.f = detail::rk4_step(s.f, s.t, dt, rhs_fn, weight, diag, clamp);
  next.t = s.t + dt;
  return next;
}

inline std::vector<MomentSample> discrete_run_until(DiscreteState& s, const DiscreteModel& model,
                                                    double t_end, double dt, int record_every = 1,
                                                    StepDiagnostics* diag = nullptr) {
  if (!(t_end > s.t)) throw std::invalid_argument("discrete_run_until: t_end must be ahead");
  if (!(dt > 0.0)) throw std::invalid_argument("discrete_run_until: dt must be positive");
  if (record_every < 1) throw std::invalid_argument("discrete_run_until: record_every must be >= 1");
  const double t0 = s.t;
  const long steps = std::lround(std::ceil((t_end - t0) / dt - 1e-9));
  std::vector<MomentSample> out;
  out.push_back({s.t, discrete_moments(s, model)});
  for (long step = 1; step <= steps; ++step) {
    s = discrete_step_rk4(s, model, dt, diag);
    s.t = t0 + static_cast<double>(step) * dt;
    if (step % record_every == 0 || step == steps)
      out.push_back({s.t, discrete_moments(s, model)});
  }
  return out;
}

/** Discrete model induced by a continuous one on its own grid: rates sampled
    at the nodes, transition probabilities as density times destination weight,
    renormalized; node masses f_ij correspond to f_i(u_j) * w_j. Only
    structures the discrete form can carry are accepted: moment-dependent
    micro-macro kernels and proliferation away from the parent state are
    refused. */
inline DiscreteModel induce_discrete(const InteractionModel& c) {
  if (c.has_macro())
    throw std::logic_error(
        "induce_discrete: micro-macro kernels are moment-dependent and have no static table form");
  const int n = c.n(), m = c.m();
  const ActivityGrid& g = c.grid();
  DiscreteTables t;
  t.n = n;
  t.m = m;
  t.u = g.nodes;
  const std::size_t NM = static_cast<std::size_t>(n) * m;
  t.eta.assign(NM * NM, 0.0);
  t.A.assign(NM * NM * NM, 0.0);
  if (c.has_destr()) t.D.assign(NM * NM, 0.0);
  if (c.has_prolif()) t.P.assign(NM * NM, 0.0);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < m; ++q)
      for (int h = 0; h < n; ++h)
        for (int k = 0; k < m; ++k) {
          const std::size_t cand = static_cast<std::size_t>(p) * m + q;
          const std::size_t fld = static_cast<std::size_t>(h) * m + k;
          // the field-side interaction weight folds into the encounter rate
          t.eta[cand * NM + fld] = c.eta_at(p, h, q, k) * c.omega_at(g.nodes[k]);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
              t.A[(cand * NM + fld) * NM + static_cast<std::size_t>(i) * m + j] =
                  g.weights[j] * c.A_at(p, h, i, q, k, j);
          if (c.has_destr()) t.D[cand * NM + fld] = c.D_at(p, h, q, k);
          if (c.has_prolif()) {
            double total = 0.0;
            for (int j = 0; j < m; ++j) total += g.weights[j] * c.P_at(p, h, q, k, j);
            const double at_parent = g.weights[q] * c.P_at(p, h, q, k, q);
            if (std::abs(total - at_parent) > 1e-12 * std::max(1.0, total))
              throw std::logic_error(
                  "induce_discrete: proliferation away from the parent state is not representable");
            t.P[cand * NM + fld] = total;
          }
        }
  return DiscreteModel(std::move(t));
}

/** Convergence study of the induced discrete models against the continuous
    model integrated on a fine reference grid. Returns, per requested
    resolution, the max-over-time infinity-norm discrepancy of the density
    vectors. */
inline std::vector<double> continuum_consistency(const InteractionModel& model,
                                                 const std::vector<int>& m_sequence,
                                                 const std::function<double(int, double)>& f0,
                                                 double t_end, double dt, int m_ref,
                                                 int record_every = 10) {
  if (m_sequence.empty()) return {};
  const double lo = model.grid().lower, hi = model.grid().upper;

  InteractionModel ref = model.rebuild(make_uniform_grid(lo, hi, m_ref));
  HomogeneousState rs = make_state(ref.n(), ref.grid());
  for (int i = 0; i < ref.n(); ++i)
    for (int j = 0; j < ref.grid().size(); ++j) rs(i, j) = f0(i, ref.grid().nodes[j]);
  const std::vector<MomentSample> ref_traj = run_until(rs, ref, t_end, dt, record_every);

  std::vector<double> errors;
  errors.reserve(m_sequence.size());
  for (int m : m_sequence) {
    InteractionModel cm = model.rebuild(make_uniform_grid(lo, hi, m));
    DiscreteModel dm = induce_discrete(cm);
    DiscreteState ds = make_discrete_state(dm);
    for (int i = 0; i < dm.n(); ++i)
      for (int j = 0; j < m; ++j)
        ds(i, j) = f0(i, cm.grid().nodes[j]) * cm.grid().weights[j];
    const std::vector<MomentSample> traj = discrete_run_until(ds, dm, t_end, dt, record_every);
    if (traj.size() != ref_traj.size())
      throw std::logic_error("continuum_consistency: trajectory sampling mismatch");
    double err = 0.0;
    for (std::size_t s = 0; s < traj.size(); ++s)
      for (int i = 0; i < dm.n(); ++i)
        err = std::max(err, std::abs(traj[s].mom.n[i] - ref_traj[s].mom.n[i]));
    errors.push_back(err);
  }
  return errors;
}

inline std::vector<double> continuum_consistency(const InteractionModel& model,
                                                 const std::vector<int>& m_sequence) {
  const double lo = model.grid().lower, hi = model.grid().upper;
  const double width = 0.15 * (hi - lo);
  auto f0 = [=](int i, double u) {
    const double c = lo + (0.35 + 0.2 * i) * (hi - lo);
    const double z = (u - c) / width;
    return std::exp(-0.5 * z * z);
  };
  return continuum_consistency(model, m_sequence, f0, 1.0, 2.5e-3, 81);
}

}  // namespace ktap
