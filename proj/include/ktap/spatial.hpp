#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <queue>
#include <sstream>
#include <utility>

#include "ktap/core.hpp"
#include "ktap/domains.hpp"

namespace ktap {

enum class CellKind : unsigned char { walkable, wall, exit };

/* Rectangular venue of square cells. Row-major storage, y indexing the text
   rows of the map file; alpha is the venue quality scaling the free speed. */
struct Arena {
  int cols = 0;
  int rows = 0;
  double dx = 1.0;
  double alpha = 1.0;
  std::vector<CellKind> cells;

  bool inside(int x, int y) const { return x >= 0 && x < cols && y >= 0 && y < rows; }
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * cols + x; }
  CellKind at(int x, int y) const { return cells[idx(x, y)]; }
  Vec2 center(int x, int y) const { return {(x + 0.5) * dx, (y + 0.5) * dx}; }
  int cell_count() const { return cols * rows; }

  bool has_exit() const {
    for (CellKind c : cells)
      if (c == CellKind::exit) return true;
    return false;
  }
};

struct arena_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* Map format: a header line "cols rows dx", then rows lines of cols characters
   ('.' walkable, '#' wall, 'E' exit). */
inline Arena parse_arena(std::istream& in) {
  Arena a;
  std::string header;
  if (!std::getline(in, header)) throw arena_error("arena: missing header line");
  std::istringstream hs(header);
  if (!(hs >> a.cols >> a.rows >> a.dx)) throw arena_error("arena: header must be 'cols rows dx'");
  if (a.cols < 1 || a.rows < 1) throw arena_error("arena: grid must be at least 1x1");
  if (!(a.dx > 0.0)) throw arena_error("arena: dx must be positive");
  a.cells.assign(static_cast<std::size_t>(a.cols) * a.rows, CellKind::wall);
  int walkable = 0;
  for (int y = 0; y < a.rows; ++y) {
    std::string line;
    if (!std::getline(in, line)) throw arena_error("arena: missing row " + std::to_string(y + 1));
    if (static_cast<int>(line.size()) < a.cols)
      throw arena_error("arena: row " + std::to_string(y + 1) + " is too short");
    for (int x = 0; x < a.cols; ++x) {
      switch (line[x]) {
        case '.': a.cells[a.idx(x, y)] = CellKind::walkable; ++walkable; break;
        case '#': a.cells[a.idx(x, y)] = CellKind::wall; break;
        case 'E': a.cells[a.idx(x, y)] = CellKind::exit; break;
        default:
          throw arena_error(std::string("arena: unexpected character '") + line[x] + "' in row " +
                            std::to_string(y + 1));
      }
    }
  }
  if (walkable == 0) throw arena_error("arena: no walkable cell");
  return a;
}

inline Arena parse_arena_text(const std::string& text) {
  std::istringstream in(text);
  return parse_arena(in);
}

inline Arena load_arena(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw arena_error("arena: cannot open " + path);
  return parse_arena(in);
}

/** Linear speed-density closure: free speed alpha, stopped at jam density. */
inline double speed_closure(double rho, double alpha, double rho_jam = 6.0) {
  if (rho < 0.0) throw std::invalid_argument("speed_closure: negative density");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("speed_closure: alpha not in [0,1]");
  if (!(rho_jam > 0.0)) throw std::invalid_argument("speed_closure: rho_jam must be positive");
  return alpha * std::max(0.0, 1.0 - rho / rho_jam);
}

/* Coefficients of the three walking tendencies. The effective weights at an
   evaluation point are a_target = c_target, a_vacuum = c_vacuum * rho/rho_jam,
   a_stream = c_stream * u, normalized to sum one, so crowding shifts
   preference toward empty space and activity toward the stream. */
struct DecisionWeights {
  double c_target = 1.0;
  double c_vacuum = 1.0;
  double c_stream = 1.0;
};

struct CrowdParams {
  double rho_jam = 6.0;
  double eta0 = 1.0;
  double kappa = 4.0;
  DecisionWeights weights;
  SensoryConfig sensory;
};

/* Distribution over (direction, cell, activity node). The activity marginal is
   frozen by construction: neither substep mixes nodes. */
struct SpatialState {
  double t = 0.0;
  int nd = 8;
  int cells = 0;
  int m = 0;
  std::vector<double> f;
  double evacuated = 0.0;

  std::size_t idx(int d, int c, int j) const {
    return (static_cast<std::size_t>(d) * cells + c) * m + j;
  }
  double& at(int d, int c, int j) { return f[idx(d, c, j)]; }
  double at(int d, int c, int j) const { return f[idx(d, c, j)]; }
};

inline constexpr int kNumDirections = 8;

inline const std::array<Vec2, 8>& direction_set() {
  static const double s = std::sqrt(0.5);
  static const std::array<Vec2, 8> dirs = {
      Vec2{1.0, 0.0}, Vec2{s, s},   Vec2{0.0, 1.0}, Vec2{-s, s},
      Vec2{-1.0, 0.0}, Vec2{-s, -s}, Vec2{0.0, -1.0}, Vec2{s, -s}};
  return dirs;
}

inline int reverse_direction(int d) { return (d + 4) % 8; }

class CrowdModel {
public:
  CrowdModel(Arena arena, ActivityGrid grid, CrowdParams params)
      : arena_(std::move(arena)), grid_(std::move(grid)), par_(params) {
    if (arena_.alpha < 0.0 || arena_.alpha > 1.0)
      throw std::invalid_argument("CrowdModel: venue quality must lie in [0,1]");
    build_exit_map();
    offsets_ = make_offsets(par_.sensory.r_visibility, arena_.dx);
  }

  const Arena& arena() const { return arena_; }
  const ActivityGrid& grid() const { return grid_; }
  const CrowdParams& params() const { return par_; }

  SpatialState make_spatial_state() const {
    SpatialState s;
    s.nd = kNumDirections;
    s.cells = arena_.cell_count();
    s.m = grid_.size();
    s.f.assign(static_cast<std::size_t>(s.nd) * s.cells * s.m, 0.0);
    return s;
  }

  double exit_distance(int x, int y) const { return dist_[arena_.idx(x, y)]; }
  Vec2 target_direction(int x, int y) const { return target_[arena_.idx(x, y)]; }

  double macro_density(const SpatialState& s, int x, int y) const {
    check_state(s);
    const int c = static_cast<int>(arena_.idx(x, y));
    double rho = 0.0;
    for (int d = 0; d < s.nd; ++d)
      for (int j = 0; j < s.m; ++j) rho += grid_.weights[j] * s.at(d, c, j);
    return rho;
  }

  Vec2 macro_mean_velocity(const SpatialState& s, int x, int y) const {
    const double rho = macro_density(s, x, y);
    if (!(rho > 0.0)) throw undefined_moment("macro_mean_velocity: empty cell");
    const int c = static_cast<int>(arena_.idx(x, y));
    const double v = speed_closure(rho, arena_.alpha, par_.rho_jam);
    Vec2 mean{0.0, 0.0};
    for (int d = 0; d < s.nd; ++d) {
      double mass = 0.0;
      for (int j = 0; j < s.m; ++j) mass += grid_.weights[j] * s.at(d, c, j);
      mean = mean + (mass / rho * v) * direction_set()[d];
    }
    return mean;
  }

  double total_mass(const SpatialState& s) const {
    check_state(s);
    CompensatedSum acc;
    for (int d = 0; d < s.nd; ++d)
      for (int c = 0; c < s.cells; ++c)
        for (int j = 0; j < s.m; ++j) acc.add(grid_.weights[j] * s.f[s.idx(d, c, j)]);
    return acc.value();
  }

  double mean_activity(const SpatialState& s) const {
    check_state(s);
    CompensatedSum num, den;
    for (int d = 0; d < s.nd; ++d)
      for (int c = 0; c < s.cells; ++c)
        for (int j = 0; j < s.m; ++j) {
          const double mass = grid_.weights[j] * s.f[s.idx(d, c, j)];
          den.add(mass);
          num.add(grid_.nodes[j] * mass);
        }
    return den.value() > 0.0 ? num.value() / den.value() : 0.0;
  }

  /* First-order upwind advection with per-cell closure speed. Mass crossing
     into a wall face is re-assigned to the reversed direction in place; mass
     crossing into an exit cell leaves the domain and is tallied. Does not
     advance t (step() owns time). The stability bound carries a sqrt(2)
     because diagonal directions shed mass through two faces at once. */
  void transport_step(SpatialState& s, double dt) const {
    check_state(s);
    if (!(dt > 0.0)) throw std::invalid_argument("transport_step: dt must be positive");
    if (dt * arena_.alpha * std::sqrt(2.0) > arena_.dx * (1.0 + 1e-12))
      throw std::invalid_argument("transport_step: CFL violated, need dt * v_max * sqrt(2) <= dx");

    std::vector<double> rho(s.cells), speed(s.cells);
    density_field(s, rho);
    for (int c = 0; c < s.cells; ++c) speed[c] = speed_closure(rho[c], arena_.alpha, par_.rho_jam);

    std::vector<double> next = s.f;
    double evac = 0.0;
    for (int d = 0; d < s.nd; ++d) {
      const Vec2 e = direction_set()[d];
      const int sx = e.x > 1e-15 ? 1 : (e.x < -1e-15 ? -1 : 0);
      const int sy = e.y > 1e-15 ? 1 : (e.y < -1e-15 ? -1 : 0);
      for (int y = 0; y < arena_.rows; ++y)
        for (int x = 0; x < arena_.cols; ++x) {
          const int c = static_cast<int>(arena_.idx(x, y));
          if (arena_.cells[c] != CellKind::walkable) continue;
          const double coef = speed[c] * dt / arena_.dx;
          if (coef == 0.0) continue;
          const double fx = std::abs(e.x) * coef;
          const double fy = std::abs(e.y) * coef;
          for (int j = 0; j < s.m; ++j) {
            const double amount = s.f[s.idx(d, c, j)];
            if (amount == 0.0) continue;
            if (sx != 0) {
              const double ox = fx * amount;
              move_face(s, next, evac, d, x, y, x + sx, y, ox, j);
              next[s.idx(d, c, j)] -= ox;
            }
            if (sy != 0) {
              const double oy = fy * amount;
              move_face(s, next, evac, d, x, y, x, y + sy, oy, j);
              next[s.idx(d, c, j)] -= oy;
            }
          }
        }
    }
    s.f = std::move(next);
    s.evacuated += evac;
  }

  /** Direction preference at one cell for a particle moving along d with
      activity u: a sharpened convex combination of the target, vacuum and
      stream trends. Nonnegative, sums to one. */
  std::vector<double> decision_kernel(const SpatialState& s, int x, int y, int d, double u,
                                      const DecisionWeights& weights,
                                      const SensoryConfig& cfg) const {
    check_state(s);
    std::vector<double> rho(s.cells);
    density_field(s, rho);
    std::vector<Vec2> mom(s.cells);
    momentum_field(s, mom);
    const std::vector<NeighborOffset> offsets = make_offsets(cfg.r_visibility, arena_.dx);
    const Trends tr = gather_trends(rho, mom, x, y, d, cfg, offsets);
    std::array<double, kNumDirections> p{};
    finish_kernel(tr, rho[arena_.idx(x, y)], u, weights, p);
    return std::vector<double>(p.begin(), p.end());
  }

  std::vector<double> decision_kernel(const SpatialState& s, int x, int y, int d,
                                      double u) const {
    return decision_kernel(s, x, y, d, u, par_.weights, par_.sensory);
  }

  /* Relaxation of the direction distribution toward the decision kernel at
     rate eta0 * rho: every particle redraws its direction when its exponential
     clock fires within dt. Cellwise mass is conserved exactly. Does not
     advance t. */
  void collision_step(SpatialState& s, double dt, const DecisionWeights& weights,
                      const SensoryConfig& cfg) const {
    check_state(s);
    if (!(dt > 0.0)) throw std::invalid_argument("collision_step: dt must be positive");
    std::vector<double> rho(s.cells);
    density_field(s, rho);
    std::vector<Vec2> mom(s.cells);
    momentum_field(s, mom);
    const bool own_cfg = &cfg == &par_.sensory;
    const std::vector<NeighborOffset> local_offsets =
        own_cfg ? std::vector<NeighborOffset>() : make_offsets(cfg.r_visibility, arena_.dx);
    const std::vector<NeighborOffset>& offsets = own_cfg ? offsets_ : local_offsets;

    std::array<Trends, kNumDirections> trends{};
    std::array<bool, kNumDirections> have{};
    std::array<double, kNumDirections> p{};
    std::array<double, kNumDirections> mixed{};
    for (int y = 0; y < arena_.rows; ++y)
      for (int x = 0; x < arena_.cols; ++x) {
        const int c = static_cast<int>(arena_.idx(x, y));
        if (arena_.cells[c] != CellKind::walkable) continue;
        if (!(rho[c] > 0.0)) continue;
        const double relax = -std::expm1(-par_.eta0 * rho[c] * dt);
        if (relax == 0.0) continue;
        have.fill(false);
        for (int j = 0; j < s.m; ++j) {
          mixed.fill(0.0);
          double cell_mass = 0.0;
          for (int d = 0; d < kNumDirections; ++d) {
            const double fd = s.f[s.idx(d, c, j)];
            cell_mass += fd;
            if (fd == 0.0) continue;
            if (!have[d]) {
              trends[d] = gather_trends(rho, mom, x, y, d, cfg, offsets);
              have[d] = true;
            }
            finish_kernel(trends[d], rho[c], grid_.nodes[j], weights, p);
            for (int dd = 0; dd < kNumDirections; ++dd) mixed[dd] += fd * p[dd];
          }
          if (cell_mass == 0.0) continue;
          for (int d = 0; d < kNumDirections; ++d) {
            double& fd = s.f[s.idx(d, c, j)];
            fd += relax * (mixed[d] - fd);
          }
        }
      }
  }

  void collision_step(SpatialState& s, double dt) const {
    collision_step(s, dt, par_.weights, par_.sensory);
  }

  /** One full operator-split step: transport, then collision. */
  void step(SpatialState& s, double dt) const {
    transport_step(s, dt);
    collision_step(s, dt);
    s.t += dt;
  }

  void check_state(const SpatialState& s) const {
    if (s.cells != arena_.cell_count() || s.m != grid_.size() || s.nd != kNumDirections)
      throw std::invalid_argument("spatial state dimensions do not match the model");
  }

private:
  struct NeighborOffset {
    int dx, dy;
    Vec2 unit;
  };

  struct Trends {
    Vec2 e_t{0.0, 0.0};
    Vec2 e_v{0.0, 0.0};
    Vec2 e_s{0.0, 0.0};
    bool any = false;
  };

  void density_field(const SpatialState& s, std::vector<double>& rho) const {
    for (int c = 0; c < s.cells; ++c) {
      double acc = 0.0;
      for (int d = 0; d < s.nd; ++d)
        for (int j = 0; j < s.m; ++j) acc += grid_.weights[j] * s.f[s.idx(d, c, j)];
      rho[c] = acc;
    }
  }

  void momentum_field(const SpatialState& s, std::vector<Vec2>& mom) const {
    for (int c = 0; c < s.cells; ++c) {
      Vec2 acc{0.0, 0.0};
      for (int d = 0; d < s.nd; ++d) {
        double mass = 0.0;
        for (int j = 0; j < s.m; ++j) mass += grid_.weights[j] * s.f[s.idx(d, c, j)];
        acc = acc + mass * direction_set()[d];
      }
      mom[c] = acc;
    }
  }

  void move_face(const SpatialState& s, std::vector<double>& next, double& evac, int d, int x,
                 int y, int nx, int ny, double flux, int j) const {
    if (flux == 0.0) return;
    const CellKind target = arena_.inside(nx, ny) ? arena_.at(nx, ny) : CellKind::wall;
    if (target == CellKind::wall) {
      next[s.idx(reverse_direction(d), static_cast<int>(arena_.idx(x, y)), j)] += flux;
    } else if (target == CellKind::exit) {
      evac += grid_.weights[j] * flux;
    } else {
      next[s.idx(d, static_cast<int>(arena_.idx(nx, ny)), j)] += flux;
    }
  }

  Trends gather_trends(const std::vector<double>& rho, const std::vector<Vec2>& mom, int x,
                       int y, int d, const SensoryConfig& cfg,
                       const std::vector<NeighborOffset>& offsets) const {
    const int c = static_cast<int>(arena_.idx(x, y));
    const Vec2 here = arena_.center(x, y);
    const Vec2 axis = direction_set()[d];

    double r_s;
    if (cfg.mode == SensoryMode::topological)
      r_s = sensory_radius(rho[c], cfg);
    else
      r_s = cfg.r_visibility;
    const double r_eff = effective_radius({r_s, cfg.r_visibility, cfg.theta});

    Trends tr;
    tr.e_t = target_[c];
    Vec2 vac{0.0, 0.0}, stream{0.0, 0.0};
    for (const NeighborOffset& nb : offsets) {
      const int nx = x + nb.dx, ny = y + nb.dy;
      if (!arena_.inside(nx, ny)) continue;
      const int cc = static_cast<int>(arena_.idx(nx, ny));
      if (arena_.cells[cc] == CellKind::wall) continue;
      if (!in_domain(here, axis, arena_.center(nx, ny), r_eff, cfg.theta)) continue;
      tr.any = true;
      vac = vac + (rho[c] - rho[cc]) * nb.unit;
      stream = stream + mom[cc];
    }
    const double nv = norm(vac);
    if (nv > 1e-14) tr.e_v = (1.0 / nv) * vac;
    const double ns = norm(stream);
    if (ns > 1e-14) tr.e_s = (1.0 / ns) * stream;
    return tr;
  }

  void finish_kernel(const Trends& tr, double rho_c, double u, const DecisionWeights& weights,
                     std::array<double, kNumDirections>& p) const {
    Vec2 g;
    if (!tr.any) {
      g = tr.e_t;
    } else {
      const double a_t = weights.c_target;
      const double a_v = weights.c_vacuum * rho_c / par_.rho_jam;
      const double a_s = weights.c_stream * u;
      const double total = a_t + a_v + a_s;
      if (total > 0.0)
        g = (a_t / total) * tr.e_t + (a_v / total) * tr.e_v + (a_s / total) * tr.e_s;
      else
        g = tr.e_t;
    }
    double sum = 0.0;
    for (int dd = 0; dd < kNumDirections; ++dd) {
      p[dd] = std::exp(par_.kappa * dot(direction_set()[dd], g));
      sum += p[dd];
    }
    for (int dd = 0; dd < kNumDirections; ++dd) p[dd] /= sum;
  }

  /* Multi-source shortest path over walkable cells from the exits, eight
     neighbors, then the steepest-descent unit vector per cell. */
  void build_exit_map() {
    const int nc = arena_.cell_count();
    dist_.assign(nc, std::numeric_limits<double>::infinity());
    target_.assign(nc, Vec2{0.0, 0.0});
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
    for (int y = 0; y < arena_.rows; ++y)
      for (int x = 0; x < arena_.cols; ++x)
        if (arena_.at(x, y) == CellKind::exit) {
          dist_[arena_.idx(x, y)] = 0.0;
          queue.push({0.0, static_cast<int>(arena_.idx(x, y))});
        }
    const int step_x[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    const int step_y[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    while (!queue.empty()) {
      const auto [dd, c] = queue.top();
      queue.pop();
      if (dd > dist_[c]) continue;
      const int x = c % arena_.cols, y = c / arena_.cols;
      for (int d = 0; d < 8; ++d) {
        const int nx = x + step_x[d], ny = y + step_y[d];
        if (!arena_.inside(nx, ny)) continue;
        if (arena_.at(nx, ny) == CellKind::wall) continue;
        const double w =
            (step_x[d] != 0 && step_y[d] != 0) ? arena_.dx * std::sqrt(2.0) : arena_.dx;
        const std::size_t nidx = arena_.idx(nx, ny);
        if (dd + w < dist_[nidx]) {
          dist_[nidx] = dd + w;
          queue.push({dd + w, static_cast<int>(nidx)});
        }
      }
    }
    for (int y = 0; y < arena_.rows; ++y)
      for (int x = 0; x < arena_.cols; ++x) {
        const std::size_t c = arena_.idx(x, y);
        if (arena_.cells[c] == CellKind::wall) continue;
        if (!std::isfinite(dist_[c]) || dist_[c] == 0.0) continue;
        double best = dist_[c];
        int best_d = -1;
        for (int d = 0; d < 8; ++d) {
          const int nx = x + step_x[d], ny = y + step_y[d];
          if (!arena_.inside(nx, ny)) continue;
          if (arena_.at(nx, ny) == CellKind::wall) continue;
          if (dist_[arena_.idx(nx, ny)] < best) {
            best = dist_[arena_.idx(nx, ny)];
            best_d = d;
          }
        }
        if (best_d >= 0) {
          const double len = std::hypot(static_cast<double>(step_x[best_d]),
                                        static_cast<double>(step_y[best_d]));
          target_[c] = {step_x[best_d] / len, step_y[best_d] / len};
        }
      }
  }

  static std::vector<NeighborOffset> make_offsets(double r_visibility, double dx) {
    std::vector<NeighborOffset> out;
    const int reach = std::max(1, static_cast<int>(std::ceil(r_visibility / dx)));
    for (int oy = -reach; oy <= reach; ++oy)
      for (int ox = -reach; ox <= reach; ++ox) {
        if (ox == 0 && oy == 0) continue;
        const double len = std::hypot(ox * dx, oy * dx);
        if (len > r_visibility * (1.0 + 1e-12)) continue;
        out.push_back({ox, oy, Vec2{ox * dx / len, oy * dx / len}});
      }
    return out;
  }

  Arena arena_;
  ActivityGrid grid_;
  CrowdParams par_;
  std::vector<double> dist_;
  std::vector<Vec2> target_;
  std::vector<NeighborOffset> offsets_;
};

/** Uniform block initial condition: density rho0 on the walkable cells of the
    inclusive rectangle, mean activity u_mean, moving along `direction`
    (0..7), or spread over all directions when direction is -1. */
inline void deposit_block(SpatialState& s, const CrowdModel& model, int x0, int x1, int y0,
                          int y1, double rho0, int direction, double u_mean) {
  model.check_state(s);
  const ActivityGrid& g = model.grid();
  if (!(rho0 >= 0.0)) throw std::invalid_argument("deposit_block: negative density");
  if (direction < -1 || direction >= kNumDirections)
    throw std::invalid_argument("deposit_block: bad direction");
  if (u_mean < g.lower || u_mean > g.upper)
    throw std::invalid_argument("deposit_block: u_mean outside the activity domain");

  // Split the activity mass between the two nodes bracketing u_mean.
  int j0 = 0;
  while (j0 + 2 < g.size() && g.nodes[j0 + 1] <= u_mean) ++j0;
  const int j1 = j0 + 1;
  const double span = g.nodes[j1] - g.nodes[j0];
  const double share1 = (u_mean - g.nodes[j0]) / span;
  const double share0 = 1.0 - share1;

  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      if (!model.arena().inside(x, y)) continue;
      if (model.arena().at(x, y) != CellKind::walkable) continue;
      const int c = static_cast<int>(model.arena().idx(x, y));
      const int dlo = direction == -1 ? 0 : direction;
      const int dhi = direction == -1 ? kNumDirections - 1 : direction;
      const double dirs = static_cast<double>(dhi - dlo + 1);
      for (int d = dlo; d <= dhi; ++d) {
        s.at(d, c, j0) += rho0 * share0 / (dirs * g.weights[j0]);
        s.at(d, c, j1) += rho0 * share1 / (dirs * g.weights[j1]);
      }
    }
}

}  // namespace ktap
