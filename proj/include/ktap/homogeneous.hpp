#pragma once

#include <functional>
#include <utility>

#include "ktap/core.hpp"
#include "ktap/integrate.hpp"

namespace ktap {

struct model_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* Kernel signatures. Subsystem indices are 0-based. "cand" is the candidate
   particle (the one that may end up in the test state), "field" the partner. */
using EtaKernel = std::function<double(int h, int k, double u_cand, double u_field)>;
using TransKernel =
    std::function<double(int h, int k, int i, double u_cand, double u_field, double u_out)>;
using MuKernel = std::function<double(int h, int k, double u_cand, double E_k)>;
using MacroTransKernel =
    std::function<double(int h, int k, int i, double u_cand, double E_k, double u_out)>;
using ProlifKernel =
    std::function<double(int i, int k, double u_cand, double u_field, double u_out)>;
using DestrKernel = std::function<double(int i, int k, double u_test, double u_field)>;
using DriftKernel = std::function<double(int i, double t, double u, const MomentSet& mom)>;
using OmegaWeight = std::function<double(double u_field)>;

/* Raw table construction. Layouts, all row-major:
     eta[h][k][a][b]          encounter rate, candidate (h, node a), field (k, node b)
     A  [h][k][a][b][i][j]    transition density into (i, node j)
     P  [i][k][a][b][j]       proliferation density, offspring of the i-candidate at node j
     D  [i][k][a][b]          destruction rate of the (i, node a) test particle
   P and D may be empty. */
struct ModelTables {
  int n = 0;
  std::vector<double> eta;
  std::vector<double> A;
  std::vector<double> P;
  std::vector<double> D;
};

/* One fully specified interaction model on a fixed grid. The transition
   tables are renormalized at construction (and rejected beyond a 1e-3 slack),
   which makes the discrete conservation identity exact: everything a candidate
   pair redistributes integrates to exactly one. */
class InteractionModel {
public:
  InteractionModel(int n, ActivityGrid grid, EtaKernel eta, TransKernel A,
                   MuKernel mu = {}, MacroTransKernel M = {}, ProlifKernel P = {},
                   DestrKernel D = {}, DriftKernel phi = {}, OmegaWeight omega = {})
      : n_(n), grid_(std::move(grid)),
        eta_kernel_(std::move(eta)), A_kernel_(std::move(A)), mu_(std::move(mu)),
        M_(std::move(M)), P_kernel_(std::move(P)), D_kernel_(std::move(D)),
        phi_(std::move(phi)), omega_(std::move(omega)) {
    if (n_ < 1) throw std::invalid_argument("InteractionModel: need at least one subsystem");
    if (!eta_kernel_ || !A_kernel_)
      throw std::invalid_argument("InteractionModel: eta and A kernels are required");
    tabulate_from_kernels();
    finalize();
  }

  InteractionModel(ActivityGrid grid, ModelTables tables, MuKernel mu = {},
                   MacroTransKernel M = {}, DriftKernel phi = {}, OmegaWeight omega = {})
      : n_(tables.n), grid_(std::move(grid)), mu_(std::move(mu)), M_(std::move(M)),
        phi_(std::move(phi)), omega_(std::move(omega)) {
    if (n_ < 1) throw std::invalid_argument("InteractionModel: need at least one subsystem");
    const int m = grid_.size();
    const std::size_t pairs = static_cast<std::size_t>(n_) * n_ * m * m;
    if (tables.eta.size() != pairs) throw std::invalid_argument("InteractionModel: eta table size");
    if (tables.A.size() != pairs * n_ * m)
      throw std::invalid_argument("InteractionModel: A table size");
    if (!tables.P.empty() && tables.P.size() != pairs * m)
      throw std::invalid_argument("InteractionModel: P table size");
    if (!tables.D.empty() && tables.D.size() != pairs)
      throw std::invalid_argument("InteractionModel: D table size");
    eta_ = std::move(tables.eta);
    A_ = std::move(tables.A);
    P_ = std::move(tables.P);
    D_ = std::move(tables.D);
    finalize();
  }

  int n() const { return n_; }
  int m() const { return grid_.size(); }
  const ActivityGrid& grid() const { return grid_; }

  bool has_macro() const { return static_cast<bool>(mu_); }
  bool has_prolif() const { return !P_.empty(); }
  bool has_destr() const { return !D_.empty(); }
  bool has_phi() const { return static_cast<bool>(phi_); }

  /* When set, empty subsystems make the micro-macro terms ill-posed instead of
     falling back to the E = 0 sentinel. */
  bool macro_requires_moments = false;

  double eta_at(int h, int k, int a, int b) const { return eta_[pair_idx(h, k, a, b)]; }
  double A_at(int h, int k, int i, int a, int b, int j) const {
    return A_[(pair_idx(h, k, a, b) * n_ + i) * static_cast<std::size_t>(m()) + j];
  }
  double P_at(int i, int k, int a, int b, int j) const {
    return P_.empty() ? 0.0 : P_[pair_idx(i, k, a, b) * static_cast<std::size_t>(m()) + j];
  }
  double D_at(int i, int k, int a, int b) const {
    return D_.empty() ? 0.0 : D_[pair_idx(i, k, a, b)];
  }
  double mu_at(int h, int k, double u_cand, double E_k) const {
    return mu_ ? mu_(h, k, u_cand, E_k) : 0.0;
  }
  double M_at(int h, int k, int i, double u_cand, double E_k, double u_out) const {
    return M_ ? M_(h, k, i, u_cand, E_k, u_out) : 0.0;
  }
  double omega_at(double u_field) const { return omega_ ? omega_(u_field) : 1.0; }
  double phi_at(int i, double t, double u, const MomentSet& mom) const {
    return phi_(i, t, u, mom);
  }

  /** Retabulate the same kernels on another grid. Only available for models
      built from kernels; raw-table models carry no off-grid information. */
  InteractionModel rebuild(const ActivityGrid& grid) const {
    if (!eta_kernel_)
      throw std::logic_error("InteractionModel::rebuild: model was built from raw tables");
    return InteractionModel(n_, grid, eta_kernel_, A_kernel_, mu_, M_, P_kernel_, D_kernel_,
                            phi_, omega_);
  }

  /* The three operator pieces, each accumulated into out (length n*m). Split
     so that the composed right-hand side and the per-part views share one code
     path. */

  void add_micro(const HomogeneousState& s, std::vector<double>& out) const {
    for (const GainEntry& e : micro_entries_)
      out[e.out] += e.w * s.f[e.s1] * s.f[e.s2];
    const int m = grid_.size();
    for (int i = 0; i < n_; ++i)
      for (int a = 0; a < m; ++a) {
        double acc = 0.0;
        for (int k = 0; k < n_; ++k)
          for (int b = 0; b < m; ++b)
            acc += eta_[pair_idx(i, k, a, b)] * field_w_[b] * s(k, b);
        out[static_cast<std::size_t>(i) * m + a] -= s(i, a) * acc;
      }
  }

  void add_macro(const HomogeneousState& s, const MomentSet& mom,
                 std::vector<double>& out) const {
    if (!mu_) return;
    const int m = grid_.size();
    if (macro_requires_moments)
      for (int k = 0; k < n_; ++k)
        if (!(mom.n[k] > 0.0))
          throw undefined_moment("gain_loss_macro: empty subsystem with moment-demanding kernel");
    std::vector<double> Mcol(static_cast<std::size_t>(n_) * m);
    for (int h = 0; h < n_; ++h)
      for (int k = 0; k < n_; ++k) {
        const double Ek = mom.E[k];
        for (int a = 0; a < m; ++a) {
          const double rate = mu_(h, k, grid_.nodes[a], Ek);
          if (rate == 0.0) continue;
          if (rate < 0.0) throw model_error("mu kernel produced a negative rate");
          double sum = 0.0;
          for (int i = 0; i < n_; ++i)
            for (int j = 0; j < m; ++j) {
              const double v = M_ ? M_(h, k, i, grid_.nodes[a], Ek, grid_.nodes[j]) : 0.0;
              if (v < 0.0) throw model_error("M kernel produced a negative density");
              Mcol[static_cast<std::size_t>(i) * m + j] = v;
              sum += grid_.weights[j] * v;
            }
          if (std::abs(sum - 1.0) > 1e-3)
            throw model_error("M kernel is not normalized at the current moments");
          const double scale = 1.0 / sum;
          const double mass = rate * s(h, a) * grid_.weights[a] * Ek;
          if (mass == 0.0) continue;
          for (int i = 0; i < n_; ++i)
            for (int j = 0; j < m; ++j)
              out[static_cast<std::size_t>(i) * m + j] +=
                  mass * scale * Mcol[static_cast<std::size_t>(i) * m + j];
        }
      }
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n_; ++k) {
          const double Ek = mom.E[k];
          acc += mu_(i, k, grid_.nodes[j], Ek) * Ek;
        }
        out[static_cast<std::size_t>(i) * m + j] -= s(i, j) * acc;
      }
  }

  void add_prolif_destr(const HomogeneousState& s, std::vector<double>& out) const {
    for (const GainEntry& e : prolif_entries_)
      out[e.out] += e.w * s.f[e.s1] * s.f[e.s2];
    if (D_.empty()) return;
    const int m = grid_.size();
    for (int i = 0; i < n_; ++i)
      for (int a = 0; a < m; ++a) {
        double acc = 0.0;
        for (int k = 0; k < n_; ++k)
          for (int b = 0; b < m; ++b) {
            const std::size_t p = pair_idx(i, k, a, b);
            acc += eta_[p] * D_[p] * field_w_[b] * s(k, b);
          }
        out[static_cast<std::size_t>(i) * m + a] -= s(i, a) * acc;
      }
  }

  /* Upwind discretization of the activity drift -(phi f)' with no-flux
     boundaries, conservative on the trapezoid control volumes. */
  void add_drift(const HomogeneousState& s, const MomentSet& mom,
                 std::vector<double>& out) const {
    if (!phi_) return;
    const int m = grid_.size();
    std::vector<double> flux(m - 1);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j + 1 < m; ++j) {
        const double pl = phi_(i, s.t, grid_.nodes[j], mom);
        const double pr = phi_(i, s.t, grid_.nodes[j + 1], mom);
        const double pf = 0.5 * (pl + pr);
        flux[j] = pf > 0.0 ? pf * s(i, j) : pf * s(i, j + 1);
      }
      for (int j = 0; j < m; ++j) {
        const double fr = (j < m - 1) ? flux[j] : 0.0;
        const double fl = (j > 0) ? flux[j - 1] : 0.0;
        out[static_cast<std::size_t>(i) * m + j] -= (fr - fl) / grid_.weights[j];
      }
    }
  }

  void rhs_into(const HomogeneousState& s, std::vector<double>& out) const {
    check_state(s);
    out.assign(s.f.size(), 0.0);
    add_micro(s, out);
    MomentSet mom;
    if (mu_ || phi_) mom = moments(s, grid_);
    add_macro(s, mom, out);
    add_prolif_destr(s, out);
    add_drift(s, mom, out);
  }

  void check_state(const HomogeneousState& s) const {
    if (s.n != n_ || s.m != grid_.size())
      throw std::invalid_argument("state dimensions do not match the model");
  }

private:
  struct GainEntry {
    int out;
    int s1;
    int s2;
    double w;
  };

  std::size_t pair_idx(int h, int k, int a, int b) const {
    const int m = grid_.size();
    return ((static_cast<std::size_t>(h) * n_ + k) * m + a) * m + b;
  }

  void tabulate_from_kernels() {
    const int m = grid_.size();
    const std::size_t pairs = static_cast<std::size_t>(n_) * n_ * m * m;
    eta_.resize(pairs);
    A_.resize(pairs * n_ * m);
    if (P_kernel_) P_.resize(pairs * m);
    if (D_kernel_) D_.resize(pairs);
    for (int h = 0; h < n_; ++h)
      for (int k = 0; k < n_; ++k)
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) {
            const std::size_t p = pair_idx(h, k, a, b);
            const double ua = grid_.nodes[a];
            const double ub = grid_.nodes[b];
            eta_[p] = eta_kernel_(h, k, ua, ub);
            for (int i = 0; i < n_; ++i)
              for (int j = 0; j < m; ++j)
                A_[(p * n_ + i) * m + j] = A_kernel_(h, k, i, ua, ub, grid_.nodes[j]);
            if (P_kernel_)
              for (int j = 0; j < m; ++j)
                P_[p * m + j] = P_kernel_(h, k, ua, ub, grid_.nodes[j]);
            if (D_kernel_) D_[p] = D_kernel_(h, k, ua, ub);
          }
  }

  void finalize() {
    const int m = grid_.size();
    for (double v : eta_)
      if (!(v >= 0.0)) throw model_error("eta table has a negative or non-finite entry");
    for (double v : A_)
      if (!(v >= 0.0)) throw model_error("A table has a negative or non-finite entry");
    for (double v : P_)
      if (!(v >= 0.0)) throw model_error("P table has a negative or non-finite entry");
    for (double v : D_)
      if (!(v >= 0.0)) throw model_error("D table has a negative or non-finite entry");

    field_w_.resize(m);
    for (int b = 0; b < m; ++b)
      field_w_[b] = grid_.weights[b] * (omega_ ? omega_(grid_.nodes[b]) : 1.0);

    // Renormalize each A column so the conservation identity is exact.
    for (int h = 0; h < n_; ++h)
      for (int k = 0; k < n_; ++k)
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) {
            const std::size_t p = pair_idx(h, k, a, b);
            double sum = 0.0;
            for (int i = 0; i < n_; ++i)
              for (int j = 0; j < m; ++j) sum += grid_.weights[j] * A_[(p * n_ + i) * m + j];
            if (sum == 0.0) {
              if (eta_[p] != 0.0)
                throw model_error("A vanishes for an encounter pair with positive rate");
              continue;
            }
            if (std::abs(sum - 1.0) > 1e-3)
              throw model_error("A is not normalized: integrates to " + std::to_string(sum));
            const double scale = 1.0 / sum;
            for (int i = 0; i < n_; ++i)
              for (int j = 0; j < m; ++j) A_[(p * n_ + i) * m + j] *= scale;
          }

    if (M_ && !mu_) throw std::invalid_argument("M kernel given without a mu kernel");
    if (mu_ && !M_) throw std::invalid_argument("mu kernel given without an M kernel");
    if (mu_) probe_macro_normalization();

    build_entries();
  }

  /* Early rejection of badly scaled M kernels; the per-call renormalization in
     add_macro still guards the values actually used. */
  void probe_macro_normalization() const {
    const int m = grid_.size();
    const double probes[3] = {grid_.lower, 0.5 * (grid_.lower + grid_.upper), grid_.upper};
    for (double E : probes)
      for (int h = 0; h < n_; ++h)
        for (int k = 0; k < n_; ++k)
          for (int a = 0; a < m; ++a) {
            if (mu_(h, k, grid_.nodes[a], E) == 0.0) continue;
            double sum = 0.0;
            for (int i = 0; i < n_; ++i)
              for (int j = 0; j < m; ++j)
                sum += grid_.weights[j] * M_(h, k, i, grid_.nodes[a], E, grid_.nodes[j]);
            if (std::abs(sum - 1.0) > 1e-3)
              throw model_error("M is not normalized: integrates to " + std::to_string(sum));
          }
  }

  void build_entries() {
    const int m = grid_.size();
    micro_entries_.clear();
    prolif_entries_.clear();
    for (int h = 0; h < n_; ++h)
      for (int k = 0; k < n_; ++k)
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) {
            const std::size_t p = pair_idx(h, k, a, b);
            const double base = eta_[p] * grid_.weights[a] * field_w_[b];
            if (base == 0.0) continue;
            for (int i = 0; i < n_; ++i)
              for (int j = 0; j < m; ++j) {
                const double v = A_[(p * n_ + i) * m + j];
                if (v != 0.0)
                  micro_entries_.push_back({i * m + j, h * m + a, k * m + b, base * v});
              }
            if (!P_.empty())
              for (int j = 0; j < m; ++j) {
                const double v = P_[p * m + j];
                if (v != 0.0)
                  prolif_entries_.push_back({h * m + j, h * m + a, k * m + b, base * v});
              }
          }
  }

  int n_;
  ActivityGrid grid_;
  EtaKernel eta_kernel_;
  TransKernel A_kernel_;
  MuKernel mu_;
  MacroTransKernel M_;
  ProlifKernel P_kernel_;
  DestrKernel D_kernel_;
  DriftKernel phi_;
  OmegaWeight omega_;

  std::vector<double> eta_, A_, P_, D_;
  std::vector<double> field_w_;
  std::vector<GainEntry> micro_entries_, prolif_entries_;
};

/* Per-subsystem views of the three operator pieces. */

inline std::vector<double> gain_loss_micro(const HomogeneousState& s,
                                           const InteractionModel& model, int i) {
  model.check_state(s);
  check_index(s, i);
  std::vector<double> full(s.f.size(), 0.0);
  model.add_micro(s, full);
  return {full.begin() + static_cast<std::ptrdiff_t>(i) * s.m,
          full.begin() + static_cast<std::ptrdiff_t>(i + 1) * s.m};
}

inline std::vector<double> gain_loss_macro(const HomogeneousState& s,
                                           const InteractionModel& model, int i) {
  model.check_state(s);
  check_index(s, i);
  std::vector<double> full(s.f.size(), 0.0);
  model.add_macro(s, moments(s, model.grid()), full);
  return {full.begin() + static_cast<std::ptrdiff_t>(i) * s.m,
          full.begin() + static_cast<std::ptrdiff_t>(i + 1) * s.m};
}

inline std::vector<double> prolif_destr(const HomogeneousState& s,
                                        const InteractionModel& model, int i) {
  model.check_state(s);
  check_index(s, i);
  std::vector<double> full(s.f.size(), 0.0);
  model.add_prolif_destr(s, full);
  return {full.begin() + static_cast<std::ptrdiff_t>(i) * s.m,
          full.begin() + static_cast<std::ptrdiff_t>(i + 1) * s.m};
}

/** Full right-hand side, flat n*m layout. */
inline std::vector<double> rhs(const HomogeneousState& s, const InteractionModel& model) {
  std::vector<double> out;
  model.rhs_into(s, out);
  return out;
}

inline HomogeneousState step_rk4(const HomogeneousState& s, const InteractionModel& model,
                                 double dt, StepDiagnostics* diag = nullptr, bool clamp = true) {
  model.check_state(s);
  const ActivityGrid& grid = model.grid();
  HomogeneousState scratch = s;
  auto rhs_fn = [&](const std::vector<double>& f, double t, std::vector<double>& out) {
    scratch.f = f;
    scratch.t = t;
    model.rhs_into(scratch, out);
  };
  auto weight = [&](std::size_t q) { return grid.weights[q % grid.size()]; };
  HomogeneousState next = s;
  next.f = detail::rk4_step(s.f, s.t, dt, rhs_fn, weight, diag, clamp);
  next.t = s.t + dt;
  return next;
}

/* Activity drift tabulated on the grid, one value per (subsystem, node). */
struct ExternalAction {
  int n = 0;
  int m = 0;
  std::vector<double> phi;

  double operator()(int i, int j) const { return phi[static_cast<std::size_t>(i) * m + j]; }
};

inline ExternalAction external_action(const InteractionModel& model, const HomogeneousState& s) {
  model.check_state(s);
  ExternalAction act;
  act.n = s.n;
  act.m = s.m;
  act.phi.assign(static_cast<std::size_t>(s.n) * s.m, 0.0);
  if (!model.has_phi()) return act;
  const MomentSet mom = moments(s, model.grid());
  for (int i = 0; i < s.n; ++i)
    for (int j = 0; j < s.m; ++j) {
      const double v = model.phi_at(i, s.t, model.grid().nodes[j], mom);
      if (!std::isfinite(v))
        throw model_error("external action is not finite at subsystem " + std::to_string(i) +
                          ", node " + std::to_string(j));
      act.phi[static_cast<std::size_t>(i) * s.m + j] = v;
    }
  return act;
}

struct MomentSample {
  double t = 0.0;
  MomentSet mom;
};

/** Fixed-step march to t_end recording moments every record_every steps
    (plus the initial and final states). The state is advanced in place. */
inline std::vector<MomentSample> run_until(HomogeneousState& s, const InteractionModel& model,
                                           double t_end, double dt, int record_every = 1,
                                           StepDiagnostics* diag = nullptr) {
  if (!(t_end > s.t)) throw std::invalid_argument("run_until: t_end must be ahead of the state");
  if (!(dt > 0.0)) throw std::invalid_argument("run_until: dt must be positive");
  if (record_every < 1) throw std::invalid_argument("run_until: record_every must be >= 1");
  const double t0 = s.t;
  const long steps = std::lround(std::ceil((t_end - t0) / dt - 1e-9));
  std::vector<MomentSample> out;
  out.push_back({s.t, moments(s, model.grid())});
  for (long step = 1; step <= steps; ++step) {
    s = step_rk4(s, model, dt, diag);
    s.t = t0 + static_cast<double>(step) * dt;
    if (step % record_every == 0 || step == steps)
      out.push_back({s.t, moments(s, model.grid())});
  }
  return out;
}

}  // namespace ktap
