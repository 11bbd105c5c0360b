#pragma once

#include <chrono>
#include <filesystem>
#include <optional>

#include "ktap/config.hpp"
#include "ktap/csv.hpp"
#include "ktap/discrete.hpp"
#include "ktap/fpb.hpp"
#include "ktap/homogeneous.hpp"
#include "ktap/spatial.hpp"

namespace ktap {

struct ScenarioConfig {
  std::string scenario;
  std::string solver;
  double dt = 0.0;
  double t_end = 0.0;
  long seed = 0;
  long record_every = 1;
  std::string out;
  Config raw;
};

struct RunReport {
  std::string scenario;
  double wall_seconds = 0.0;
  long steps = 0;
  double drift = 0.0;
  double clamped_mass = 0.0;
  long clamp_events = 0;
  std::vector<std::string> outputs;
};

struct ScenarioInfo {
  std::string name;
  std::string solver;
  std::string description;
};

/* Two populations on the unit activity interval: population 1 progresses and
   proliferates on encounters with itself, population 2 activates on encounters
   with population 1 and suppresses it in proportion to its own activity. The
   ratio parameter scales the proliferation side only, so sweeping it moves the
   balance between growth and suppression. */
struct TumorImmuneParams {
  int nodes = 41;
  double encounter_rate = 1.0;
  double ratio = 1.0;
  double beta = 0.5;
  double gamma = 1.0;
  double jump = 0.1;
  double proliferation = 1.5;
  double destruction = 1.9;
  double competition = 0.4;
};

inline InteractionModel make_tumor_immune_model(const TumorImmuneParams& par) {
  if (par.nodes < 2) throw std::invalid_argument("tumor_immune: nodes must be >= 2");
  for (double p : {par.beta, par.gamma})
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("tumor_immune: shift probabilities must lie in [0,1]");
  if (par.ratio < 0.0 || par.jump < 0.0 || par.encounter_rate < 0.0 ||
      par.proliferation < 0.0 || par.destruction < 0.0 || par.competition < 0.0)
    throw std::invalid_argument("tumor_immune: negative coefficient");

  const int n = 2, m = par.nodes;
  const ActivityGrid grid = make_uniform_grid(0.0, 1.0, m);
  const int shift = std::max(1, static_cast<int>(std::lround(par.jump * (m - 1))));

  ModelTables t;
  t.n = n;
  const std::size_t pairs = static_cast<std::size_t>(n) * n * m * m;
  t.eta.assign(pairs, par.encounter_rate);
  t.A.assign(pairs * n * m, 0.0);
  t.P.assign(pairs * m, 0.0);
  t.D.assign(pairs, 0.0);

  auto pair_idx = [&](int h, int k, int a, int b) {
    return ((static_cast<std::size_t>(h) * n + k) * m + a) * m + b;
  };
  auto a_slot = [&](std::size_t pidx, int i, int j) { return (pidx * n + i) * m + j; };

  for (int h = 0; h < n; ++h)
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < m; ++a) {
        const int a2 = std::min(a + shift, m - 1);
        // population 1 progresses against itself, population 2 activates
        // against population 1; every other encounter leaves the state alone
        double move = 0.0;
        if (h == 0 && k == 0) move = par.beta;
        if (h == 1 && k == 0) move = par.gamma;
        if (a2 == a) move = 0.0;
        for (int b = 0; b < m; ++b) {
          const std::size_t pidx = pair_idx(h, k, a, b);
          t.A[a_slot(pidx, h, a)] += (1.0 - move) / grid.weights[a];
          if (move > 0.0) t.A[a_slot(pidx, h, a2)] += move / grid.weights[a2];
        }
      }

  // encounters with population 2 both feed population 1 (offspring at the
  // parent node, rate tied to the parent activity) and destroy it in
  // proportion to the field activity; crowding within population 1 caps growth
  const double p0 = par.ratio * par.proliferation;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const std::size_t pidx = pair_idx(0, 1, a, b);
      t.P[pidx * m + a] = p0 * grid.nodes[a] / grid.weights[a];
      t.D[pidx] = par.destruction * grid.nodes[b];
      t.D[pair_idx(0, 0, a, b)] = par.competition * grid.nodes[b];
    }

  return InteractionModel(grid, std::move(t));
}

/** Normalized bump profile on the grid scaled to an exact density. */
inline void fill_bump(HomogeneousState& s, const ActivityGrid& grid, int i, double density,
                      double center, double width) {
  std::vector<double> g(grid.size());
  CompensatedSum mass;
  for (int j = 0; j < grid.size(); ++j) {
    const double z = (grid.nodes[j] - center) / width;
    g[j] = std::exp(-0.5 * z * z);
    mass.add(grid.weights[j] * g[j]);
  }
  for (int j = 0; j < grid.size(); ++j) s(i, j) = density * g[j] / mass.value();
}

namespace detail {

inline const char* corridor_arena_text() {
  return "40 10 0.5\n"
         "########################################\n"
         "#......................................E\n"
         "#......................................E\n"
         "#......................................E\n"
         "#......................................E\n"
         "#......................................E\n"
         "#......................................E\n"
         "#......................................E\n"
         "#......................................E\n"
         "########################################\n";
}

struct ScenarioEntry {
  const char* name;
  const char* solver;
  const char* description;
  const char* config_text;
};

inline const std::vector<ScenarioEntry>& registry() {
  static const std::vector<ScenarioEntry> entries = {
      {"tumor_immune", "homogeneous",
       "competing proliferating and suppressing populations on the activity interval",
       "# Two competing populations on the unit activity interval.\n"
       "scenario = tumor_immune\n"
       "\n"
       "t_end = 10\n"
       "dt = 0.002\n"
       "record_every = 50\n"
       "out = tumor_immune.csv\n"
       "\n"
       "nodes = 41\n"
       "encounter_rate = 1.0\n"
       "ratio = 1.0          # scales the proliferation side of the balance\n"
       "beta = 0.5           # progression probability per within-population encounter\n"
       "gamma = 1.0          # activation probability per cross-population encounter\n"
       "jump = 0.1           # activity gained per progression or activation event\n"
       "proliferation = 1.5  # births per cross-population encounter, before ratio\n"
       "destruction = 1.9    # removal rate per encounter at full partner activity\n"
       "competition = 0.4    # within-population crowding loss\n"
       "n1_0 = 0.5\n"
       "n2_0 = 1.0\n"
       "e1_0 = 0.3\n"
       "e2_0 = 0.5\n"
       "bump_width = 0.15\n"},
      {"opinion_consensus", "fpb",
       "pairwise opinion exchanges with bounded noise on [-1,1]",
       "# Pairwise compromise dynamics with small bounded noise.\n"
       "scenario = opinion_consensus\n"
       "\n"
       "t_end = 10\n"
       "dt = 0.01\n"
       "record_every = 10\n"
       "out = opinion_consensus.csv\n"
       "seed = 42\n"
       "\n"
       "particles = 10000\n"
       "lambda = 1.0\n"
       "p = 0.25\n"
       "q = 1.0\n"
       "sigma2 = 0.01\n"
       "domain_lo = -1\n"
       "domain_hi = 1\n"
       "init_lo = -1\n"
       "init_hi = 1\n"
       "bins = 40\n"},
      {"wealth_exchange", "fpb",
       "trading with multiplicative noise on the positive half line",
       "# Binary trades with value-proportional noise, wealth stays positive.\n"
       "scenario = wealth_exchange\n"
       "\n"
       "t_end = 20\n"
       "dt = 0.01\n"
       "record_every = 20\n"
       "out = wealth_exchange.csv\n"
       "seed = 7\n"
       "\n"
       "particles = 10000\n"
       "lambda = 1.0\n"
       "p = 0.1\n"
       "q_coef = 0.3\n"
       "sigma2 = 0.0833333333333333\n"
       "init_lo = 0.5\n"
       "init_hi = 1.5\n"
       "bins = 60\n"},
      {"two_state_toy", "discrete",
       "two-state ladder with a closed-form exponential solution",
       "# Smallest discrete-activity system: all mass drains to the upper state.\n"
       "scenario = two_state_toy\n"
       "\n"
       "t_end = 5\n"
       "dt = 0.01\n"
       "record_every = 50\n"
       "out = two_state_toy.csv\n"
       "\n"
       "n = 1\n"
       "m = 2\n"
       "u = 0 1\n"
       "eta = 1 1 1 1\n"
       "A = 0 1 0 1 0 1 0 1\n"
       "f0 = 1 0\n"},
      {"corridor_evacuation", "spatial",
       "crowd leaving a corridor through the right wall",
       "# A group crossing a corridor toward the exit column on the right.\n"
       "scenario = corridor_evacuation\n"
       "\n"
       "t_end = 50\n"
       "dt = 0.05\n"
       "record_every = 20\n"
       "out = corridor_evacuation.csv\n"
       "\n"
       "alpha = 1.0\n"
       "rho_jam = 6.0\n"
       "eta0 = 1.0\n"
       "kappa = 4.0\n"
       "c_target = 1.0\n"
       "c_vacuum = 0.6\n"
       "c_stream = 0.4\n"
       "theta = 1.5707963267948966\n"
       "r_visibility = 2.0\n"
       "n_c = 7\n"
       "rho0 = 3.0\n"
       "u0 = 0.5\n"
       "block_x0 = 2\n"
       "block_x1 = 11\n"
       "block_y0 = 2\n"
       "block_y1 = 7\n"
       "direction = 0\n"
       "frames = true\n"}};
  return entries;
}

inline const ScenarioEntry* find_entry(const std::string& name) {
  for (const ScenarioEntry& e : registry())
    if (name == e.name) return &e;
  return nullptr;
}

inline std::string out_stem(const std::string& out) {
  const std::string suffix = ".csv";
  if (out.size() > suffix.size() && out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size());
  return out;
}

inline long step_count(double t_end, double dt) {
  return std::lround(std::ceil(t_end / dt - 1e-9));
}

/* Each runner reads every scenario-specific key (strict mode counts unread
   keys as errors) and, when report is null, stops after validation. */

inline void run_tumor_immune(const ScenarioConfig& cfg, RunReport* report) {
  TumorImmuneParams par;
  par.nodes = static_cast<int>(cfg.raw.get_int("nodes", par.nodes));
  par.encounter_rate = cfg.raw.get_double("encounter_rate", par.encounter_rate);
  par.ratio = cfg.raw.get_double("ratio", par.ratio);
  par.beta = cfg.raw.get_double("beta", par.beta);
  par.gamma = cfg.raw.get_double("gamma", par.gamma);
  par.jump = cfg.raw.get_double("jump", par.jump);
  par.proliferation = cfg.raw.get_double("proliferation", par.proliferation);
  par.destruction = cfg.raw.get_double("destruction", par.destruction);
  par.competition = cfg.raw.get_double("competition", par.competition);
  const double n1 = cfg.raw.get_double("n1_0", 0.5);
  const double n2 = cfg.raw.get_double("n2_0", 1.0);
  const double e1 = cfg.raw.get_double("e1_0", 0.3);
  const double e2 = cfg.raw.get_double("e2_0", 0.5);
  const double width = cfg.raw.get_double("bump_width", 0.15);
  if (n1 < 0.0 || n2 < 0.0) throw config_error("tumor_immune: initial densities must be >= 0");
  if (!(width > 0.0)) throw config_error("tumor_immune: bump_width must be positive");

  const InteractionModel model = make_tumor_immune_model(par);
  HomogeneousState s = make_state(2, model.grid());
  fill_bump(s, model.grid(), 0, n1, e1, width);
  fill_bump(s, model.grid(), 1, n2, e2, width);
  if (!report) return;

  StepDiagnostics diag;
  const std::vector<MomentSample> traj =
      run_until(s, model, cfg.t_end, cfg.dt, static_cast<int>(cfg.record_every), &diag);

  CsvWriter csv(cfg.out);
  csv.header({"t", "n_1", "n_2", "E_1", "E_2", "N"});
  for (const MomentSample& row : traj)
    csv.row({row.t, row.mom.n[0], row.mom.n[1], row.mom.E[0], row.mom.E[1],
             row.mom.n[0] + row.mom.n[1]});
  report->outputs.push_back(cfg.out);

  const std::string snap = out_stem(cfg.out) + "_final.csv";
  CsvWriter fin(snap);
  fin.header({"u", "f_1", "f_2"});
  for (int j = 0; j < model.grid().size(); ++j)
    fin.row({model.grid().nodes[j], s(0, j), s(1, j)});
  report->outputs.push_back(snap);

  report->steps = step_count(cfg.t_end, cfg.dt);
  report->clamped_mass = diag.clamped_mass;
  report->clamp_events = diag.clamp_events;
  const double m0 = traj.front().mom.n[0] + traj.front().mom.n[1];
  const double m1 = traj.back().mom.n[0] + traj.back().mom.n[1];
  report->drift = model.has_prolif() || model.has_destr()
                      ? 0.0
                      : std::abs(m1 - m0) / std::max(1.0, std::abs(m0));
}

inline void run_two_state(const ScenarioConfig& cfg, RunReport* report) {
  DiscreteTables t;
  t.n = static_cast<int>(cfg.raw.get_int("n"));
  t.m = static_cast<int>(cfg.raw.get_int("m"));
  t.u = cfg.raw.get_doubles("u");
  t.eta = cfg.raw.get_doubles("eta");
  t.A = cfg.raw.get_doubles("A");
  if (cfg.raw.has("mu")) t.mu = cfg.raw.get_doubles("mu");
  if (cfg.raw.has("M")) t.M = cfg.raw.get_doubles("M");
  if (cfg.raw.has("P")) t.P = cfg.raw.get_doubles("P");
  if (cfg.raw.has("D")) t.D = cfg.raw.get_doubles("D");
  const std::vector<double> f0 = cfg.raw.get_doubles("f0");

  const DiscreteModel model(std::move(t));
  if (f0.size() != model.nm())
    throw config_error("discrete scenario: key 'f0' must hold n*m values");
  DiscreteState s = make_discrete_state(model);
  s.f = f0;
  for (double v : s.f)
    if (v < 0.0) throw config_error("discrete scenario: key 'f0' has a negative entry");
  if (!report) return;

  StepDiagnostics diag;
  const std::vector<MomentSample> traj = discrete_run_until(
      s, model, cfg.t_end, cfg.dt, static_cast<int>(cfg.record_every), &diag);

  CsvWriter csv(cfg.out);
  std::vector<std::string> head = {"t"};
  for (int i = 0; i < model.n(); ++i) head.push_back("n_" + std::to_string(i + 1));
  for (int i = 0; i < model.n(); ++i) head.push_back("E_" + std::to_string(i + 1));
  head.push_back("N");
  csv.header(head);
  for (const MomentSample& row : traj) {
    std::vector<double> vals = {row.t};
    double total = 0.0;
    for (int i = 0; i < model.n(); ++i) {
      vals.push_back(row.mom.n[i]);
      total += row.mom.n[i];
    }
    for (int i = 0; i < model.n(); ++i) vals.push_back(row.mom.E[i]);
    vals.push_back(total);
    csv.row(vals);
  }
  report->outputs.push_back(cfg.out);

  const std::string snap = out_stem(cfg.out) + "_final.csv";
  CsvWriter fin(snap);
  std::vector<std::string> shead = {"u"};
  for (int i = 0; i < model.n(); ++i) shead.push_back("f_" + std::to_string(i + 1));
  fin.header(shead);
  for (int j = 0; j < model.m(); ++j) {
    std::vector<double> vals = {model.state_values()[j]};
    for (int i = 0; i < model.n(); ++i) vals.push_back(s(i, j));
    fin.row(vals);
  }
  report->outputs.push_back(snap);

  report->steps = step_count(cfg.t_end, cfg.dt);
  report->clamped_mass = diag.clamped_mass;
  report->clamp_events = diag.clamp_events;
  auto total = [](const MomentSample& r) {
    double acc = 0.0;
    for (double v : r.mom.n) acc += v;
    return acc;
  };
  report->drift = model.has_prolif() || model.has_destr()
                      ? 0.0
                      : std::abs(total(traj.back()) - total(traj.front())) /
                            std::max(1.0, std::abs(total(traj.front())));
}

inline void run_fpb(const ScenarioConfig& cfg, RunReport* report) {
  const long particles = cfg.raw.get_int("particles", 10000);
  if (particles < 2 || particles % 2 != 0)
    throw config_error("fpb scenario: key 'particles' must be a positive even count");
  const double lambda = cfg.raw.get_double("lambda", 1.0);
  const double p = cfg.raw.get_double("p");
  if (p < 0.0 || p > 1.0) throw config_error("fpb scenario: key 'p' must lie in [0,1]");
  const double sigma2 = cfg.raw.get_double("sigma2", 0.0);

  PairRule rule;
  rule.noise.sigma2 = sigma2;
  rule.P = [p](double) { return p; };
  if (cfg.scenario == "wealth_exchange") {
    const double qc = cfg.raw.get_double("q_coef");
    if (qc < 0.0) throw config_error("fpb scenario: key 'q_coef' must be >= 0");
    rule.Q = [qc](double v) { return qc * v; };
    rule.domain = {0.0, std::numeric_limits<double>::infinity()};
  } else {
    const double q = cfg.raw.get_double("q", 0.0);
    if (q < 0.0) throw config_error("fpb scenario: key 'q' must be >= 0");
    rule.Q = [q](double) { return q; };
    rule.domain = {cfg.raw.get_double("domain_lo", -1.0), cfg.raw.get_double("domain_hi", 1.0)};
  }
  if (!(rule.domain.lo < rule.domain.hi))
    throw config_error("fpb scenario: domain bounds are not ordered");

  const double init_lo = cfg.raw.get_double("init_lo");
  const double init_hi = cfg.raw.get_double("init_hi");
  if (!(init_lo < init_hi) || init_lo < rule.domain.lo || init_hi > rule.domain.hi)
    throw config_error("fpb scenario: init range must be ordered and inside the domain");
  const long bins = cfg.raw.get_int("bins", 40);
  if (bins < 1) throw config_error("fpb scenario: key 'bins' must be >= 1");
  if (!(lambda >= 0.0) || lambda * cfg.dt > 1.0)
    throw config_error("fpb scenario: lambda * dt must lie in [0,1]");
  if (!report) return;

  Rng rng(static_cast<std::uint64_t>(cfg.seed));
  Ensemble ens;
  ens.seed = static_cast<std::uint64_t>(cfg.seed);
  ens.values.resize(particles);
  for (double& v : ens.values) v = rng.uniform(init_lo, init_hi);

  CsvWriter csv(cfg.out);
  csv.header({"t", "n_1", "E_1", "variance"});
  const double mean0 = ensemble_mean(ens);
  csv.row({ens.t, 1.0, mean0, ensemble_variance(ens)});
  const long steps = step_count(cfg.t_end, cfg.dt);
  for (long k = 1; k <= steps; ++k) {
    mc_step(ens, rule, lambda, cfg.dt, rng);
    ens.t = static_cast<double>(k) * cfg.dt;
    if (k % cfg.record_every == 0 || k == steps)
      csv.row({ens.t, 1.0, ensemble_mean(ens), ensemble_variance(ens)});
  }
  report->outputs.push_back(cfg.out);

  const std::string snap = out_stem(cfg.out) + "_final.csv";
  CsvWriter fin(snap);
  fin.header({"v"});
  for (double v : ens.values) fin.row({v});
  report->outputs.push_back(snap);

  const double hist_lo = init_lo, hist_hi = std::isfinite(rule.domain.hi)
                                                ? rule.domain.hi
                                                : 3.0 * (init_hi - init_lo) + init_hi;
  const double lo = std::isfinite(rule.domain.lo) ? rule.domain.lo : hist_lo;
  const std::vector<long> counts = histogram(ens, static_cast<int>(bins), lo, hist_hi);
  const std::string hist_path = out_stem(cfg.out) + "_hist.csv";
  CsvWriter hist_csv(hist_path);
  hist_csv.header({"bin_lo", "bin_hi", "count"});
  const double bw = (hist_hi - lo) / static_cast<double>(bins);
  for (long b = 0; b < bins; ++b)
    hist_csv.row({lo + b * bw, lo + (b + 1) * bw, static_cast<double>(counts[b])});
  report->outputs.push_back(hist_path);

  report->steps = steps;
  report->drift = std::abs(ensemble_mean(ens) - mean0);
}

inline void run_corridor(const ScenarioConfig& cfg, RunReport* report) {
  Arena arena = cfg.raw.has("arena") ? load_arena(cfg.raw.get_string("arena"))
                                     : parse_arena_text(corridor_arena_text());
  arena.alpha = cfg.raw.get_double("alpha", 1.0);

  CrowdParams par;
  par.rho_jam = cfg.raw.get_double("rho_jam", par.rho_jam);
  par.eta0 = cfg.raw.get_double("eta0", par.eta0);
  par.kappa = cfg.raw.get_double("kappa", par.kappa);
  par.weights.c_target = cfg.raw.get_double("c_target", 1.0);
  par.weights.c_vacuum = cfg.raw.get_double("c_vacuum", 1.0);
  par.weights.c_stream = cfg.raw.get_double("c_stream", 1.0);
  par.sensory.theta = cfg.raw.get_double("theta", par.sensory.theta);
  par.sensory.r_visibility = cfg.raw.get_double("r_visibility", par.sensory.r_visibility);
  par.sensory.n_c = static_cast<int>(cfg.raw.get_int("n_c", par.sensory.n_c));
  const double rho0 = cfg.raw.get_double("rho0");
  const double u0 = cfg.raw.get_double("u0", 0.5);
  const int x0 = static_cast<int>(cfg.raw.get_int("block_x0"));
  const int x1 = static_cast<int>(cfg.raw.get_int("block_x1"));
  const int y0 = static_cast<int>(cfg.raw.get_int("block_y0"));
  const int y1 = static_cast<int>(cfg.raw.get_int("block_y1"));
  const int direction = static_cast<int>(cfg.raw.get_int("direction", -1));
  const bool frames = cfg.raw.get_bool("frames", false);

  const CrowdModel model(std::move(arena), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, x0, x1, y0, y1, rho0, direction, u0);
  if (!report) return;

  CsvWriter csv(cfg.out);
  csv.header({"t", "n_1", "E_1", "evacuated"});
  std::optional<CsvWriter> frame_csv;
  const std::string frames_path = out_stem(cfg.out) + "_frames.csv";
  if (frames) {
    frame_csv.emplace(frames_path);
    frame_csv->header({"t", "x", "y", "rho"});
  }
  auto record = [&]() {
    csv.row({s.t, model.total_mass(s), model.mean_activity(s), s.evacuated});
    if (frame_csv)
      for (int y = 0; y < model.arena().rows; ++y)
        for (int x = 0; x < model.arena().cols; ++x)
          frame_csv->row({s.t, static_cast<double>(x), static_cast<double>(y),
                          model.macro_density(s, x, y)});
  };

  const double mass0 = model.total_mass(s) + s.evacuated;
  record();
  const long steps = step_count(cfg.t_end, cfg.dt);
  double worst = 0.0;
  for (long k = 1; k <= steps; ++k) {
    model.step(s, cfg.dt);
    s.t = static_cast<double>(k) * cfg.dt;
    worst = std::max(worst, std::abs(model.total_mass(s) + s.evacuated - mass0));
    if (k % cfg.record_every == 0 || k == steps) record();
  }
  report->outputs.push_back(cfg.out);
  if (frames) report->outputs.push_back(frames_path);

  const std::string snap = out_stem(cfg.out) + "_final.csv";
  CsvWriter fin(snap);
  fin.header({"x", "y", "rho"});
  for (int y = 0; y < model.arena().rows; ++y)
    for (int x = 0; x < model.arena().cols; ++x)
      fin.row({static_cast<double>(x), static_cast<double>(y), model.macro_density(s, x, y)});
  report->outputs.push_back(snap);

  report->steps = steps;
  report->drift = worst / std::max(1.0, mass0);
}

inline void dispatch(const ScenarioConfig& cfg, RunReport* report) {
  if (cfg.solver == "homogeneous")
    run_tumor_immune(cfg, report);
  else if (cfg.solver == "discrete")
    run_two_state(cfg, report);
  else if (cfg.solver == "fpb")
    run_fpb(cfg, report);
  else if (cfg.solver == "spatial")
    run_corridor(cfg, report);
  else
    throw config_error("unknown solver '" + cfg.solver + "'");
}

}  // namespace detail

/** Load and fully validate a scenario: `spec` is a config file path or the
    name of a shipped scenario. Unknown keys are errors. */
inline ScenarioConfig load_scenario(const std::string& spec) {
  ScenarioConfig cfg;
  if (std::filesystem::exists(spec)) {
    cfg.raw = Config::load(spec);
  } else if (const detail::ScenarioEntry* e = detail::find_entry(spec)) {
    cfg.raw = Config::parse_text(e->config_text, std::string(e->name) + " (built-in)");
  } else {
    throw config_error("no such config file or shipped scenario: '" + spec + "'");
  }

  cfg.scenario = cfg.raw.get_string("scenario");
  const detail::ScenarioEntry* entry = detail::find_entry(cfg.scenario);
  if (!entry)
    throw config_error(cfg.raw.origin() + ": key 'scenario' names an unknown scenario '" +
                       cfg.scenario + "'");
  cfg.solver = entry->solver;
  cfg.dt = cfg.raw.get_double("dt");
  if (!(cfg.dt > 0.0)) throw config_error(cfg.raw.origin() + ": key 'dt' must be positive");
  cfg.t_end = cfg.raw.get_double("t_end");
  if (!(cfg.t_end > 0.0)) throw config_error(cfg.raw.origin() + ": key 't_end' must be positive");
  cfg.seed = cfg.raw.get_int("seed", 0);
  cfg.record_every = cfg.raw.get_int("record_every", 1);
  if (cfg.record_every < 1)
    throw config_error(cfg.raw.origin() + ": key 'record_every' must be >= 1");
  cfg.out = cfg.raw.get_string("out", cfg.scenario + ".csv");

  detail::dispatch(cfg, nullptr);
  cfg.raw.require_all_used();
  return cfg;
}

/** Execute a loaded scenario, writing its CSV outputs. */
inline RunReport run(const ScenarioConfig& cfg) {
  RunReport report;
  report.scenario = cfg.scenario;
  const auto start = std::chrono::steady_clock::now();
  detail::dispatch(cfg, &report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/** Names and descriptions of the shipped scenarios, plus any *.cfg files found
    in extra_dir. */
inline std::vector<ScenarioInfo> list_scenarios(const std::string& extra_dir = "") {
  std::vector<ScenarioInfo> out;
  for (const detail::ScenarioEntry& e : detail::registry())
    out.push_back({e.name, e.solver, e.description});
  if (!extra_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(extra_dir))
      if (entry.path().extension() == ".cfg") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      const Config c = Config::load(path.string());
      if (!c.has("scenario")) continue;
      const std::string name = c.get_string("scenario");
      const detail::ScenarioEntry* e = detail::find_entry(name);
      out.push_back({path.filename().string(), e ? e->solver : "?",
                     "user config for scenario '" + name + "'"});
    }
  }
  return out;
}

/** Built-in config text of a shipped scenario (exact bytes). */
inline std::string scenario_config_text(const std::string& name) {
  const detail::ScenarioEntry* e = detail::find_entry(name);
  if (!e) throw config_error("no shipped scenario named '" + name + "'");
  return e->config_text;
}

inline std::string corridor_arena() { return detail::corridor_arena_text(); }

}  // namespace ktap
