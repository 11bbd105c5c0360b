#include "doctest.h"

#include "ktap/spatial.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

using namespace ktap;

namespace {

Arena box_arena(int cols, int rows, double dx = 1.0, double alpha = 1.0) {
  std::string text = std::to_string(cols) + " " + std::to_string(rows) + " " +
                     std::to_string(dx) + "\n";
  for (int y = 0; y < rows; ++y) text += std::string(cols, '.') + "\n";
  Arena a = parse_arena_text(text);
  a.alpha = alpha;
  return a;
}

double cell_mass(const CrowdModel& model, const SpatialState& s, int x, int y) {
  return model.macro_density(s, x, y);
}

}  // namespace

TEST_CASE("arena parsing: shapes and failures") {
  const Arena a = parse_arena_text("3 2 0.5\n#.E\n..#\n");
  CHECK(a.cols == 3);
  CHECK(a.rows == 2);
  CHECK(a.dx == 0.5);
  CHECK(a.at(0, 0) == CellKind::wall);
  CHECK(a.at(1, 0) == CellKind::walkable);
  CHECK(a.at(2, 0) == CellKind::exit);
  CHECK(a.at(2, 1) == CellKind::wall);
  CHECK(a.cell_count() == 6);
  CHECK(!a.inside(-1, 0));
  CHECK(!a.inside(0, 2));

  CHECK_THROWS_AS(parse_arena_text(""), arena_error);
  CHECK_THROWS_AS(parse_arena_text("x y z\n"), arena_error);
  CHECK_THROWS_AS(parse_arena_text("0 1 1\n\n"), arena_error);
  CHECK_THROWS_AS(parse_arena_text("2 1 0\n..\n"), arena_error);
  CHECK_THROWS_AS(parse_arena_text("2 2 1\n..\n"), arena_error);
  CHECK_THROWS_WITH_AS(parse_arena_text("3 1 1\n..\n"), doctest::Contains("row 1"),
                       arena_error);
  CHECK_THROWS_WITH_AS(parse_arena_text("3 2 1\n...\n.X.\n"), doctest::Contains("row 2"),
                       arena_error);
  CHECK_THROWS_AS(parse_arena_text("2 1 1\n##\n"), arena_error);
  CHECK_THROWS_AS(load_arena("/no/such/arena/file"), arena_error);
}

TEST_CASE("speed closure") {
  CHECK(speed_closure(0.0, 1.0) == 1.0);
  CHECK(speed_closure(0.0, 0.7) == 0.7);
  CHECK(speed_closure(6.0, 1.0) == 0.0);
  CHECK(speed_closure(9.0, 1.0) == 0.0);
  CHECK(speed_closure(3.0, 0.8, 6.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_THROWS_AS(speed_closure(-0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(speed_closure(1.0, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(speed_closure(1.0, -0.2), std::invalid_argument);
  CHECK_THROWS_AS(speed_closure(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("directions: unit norms, exact reversal") {
  const auto& dirs = direction_set();
  for (int d = 0; d < kNumDirections; ++d) {
    CHECK(std::abs(norm(dirs[d]) - 1.0) <= 1e-15);
    CHECK(reverse_direction(reverse_direction(d)) == d);
    const Vec2 sum = dirs[d] + dirs[reverse_direction(d)];
    CHECK(sum.x == 0.0);
    CHECK(sum.y == 0.0);
  }
}

TEST_CASE("crowd model: construction and exit map") {
  CrowdParams par;
  Arena bad = box_arena(2, 2);
  bad.alpha = 1.5;
  CHECK_THROWS_AS(CrowdModel(bad, make_uniform_grid(0.0, 1.0, 2), par),
                  std::invalid_argument);

  const Arena a = parse_arena_text("3 1 1\n..E\n");
  CrowdModel model(a, make_uniform_grid(0.0, 1.0, 2), par);
  CHECK(model.exit_distance(2, 0) == 0.0);
  CHECK(model.exit_distance(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(model.exit_distance(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(model.target_direction(0, 0).x == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(model.target_direction(0, 0).y == 0.0);

  SpatialState s = model.make_spatial_state();
  CHECK(s.cells == 3);
  CHECK(s.m == 2);
  CHECK(static_cast<int>(s.f.size()) == 8 * 3 * 2);
  CHECK(model.total_mass(s) == 0.0);
  CHECK(model.mean_activity(s) == 0.0);

  SpatialState wrong = s;
  wrong.m = 3;
  CHECK_THROWS_AS(model.total_mass(wrong), std::invalid_argument);
}

TEST_CASE("deposit_block and macroscopic moments") {
  CrowdParams par;
  CrowdModel model(box_arena(3, 3), make_uniform_grid(0.0, 1.0, 3), par);
  SpatialState s = model.make_spatial_state();

  CHECK_THROWS_AS(deposit_block(s, model, 0, 0, 0, 0, -1.0, 0, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(deposit_block(s, model, 0, 0, 0, 0, 1.0, 8, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(deposit_block(s, model, 0, 0, 0, 0, 1.0, 0, 1.5),
                  std::invalid_argument);

  deposit_block(s, model, 0, 1, 0, 1, 2.5, 0, 0.25);
  CHECK(model.total_mass(s) == doctest::Approx(4.0 * 2.5).epsilon(1e-14));
  CHECK(cell_mass(model, s, 0, 0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(cell_mass(model, s, 2, 2) == 0.0);
  CHECK(model.mean_activity(s) == doctest::Approx(0.25).epsilon(1e-14));

  // A single stream moves along its direction at the closure speed.
  const double rho = cell_mass(model, s, 0, 0);
  const Vec2 v = model.macro_mean_velocity(s, 0, 0);
  const double speed = speed_closure(rho, model.arena().alpha, par.rho_jam);
  CHECK(v.x == doctest::Approx(speed).epsilon(1e-15));
  CHECK(v.y == 0.0);
  CHECK_THROWS_AS(model.macro_mean_velocity(s, 2, 2), undefined_moment);

  // Opposite streams of equal mass cancel exactly.
  SpatialState two = model.make_spatial_state();
  deposit_block(two, model, 1, 1, 1, 1, 1.0, 2, 0.5);
  deposit_block(two, model, 1, 1, 1, 1, 1.0, 6, 0.5);
  const Vec2 still = model.macro_mean_velocity(two, 1, 1);
  CHECK(still.x == 0.0);
  CHECK(still.y == 0.0);

  // Isotropic deposit: correct mass, no net velocity.
  SpatialState iso = model.make_spatial_state();
  deposit_block(iso, model, 1, 1, 1, 1, 3.0, -1, 0.5);
  CHECK(cell_mass(model, iso, 1, 1) == doctest::Approx(3.0).epsilon(1e-14));
  const Vec2 vi = model.macro_mean_velocity(iso, 1, 1);
  CHECK(std::abs(vi.x) <= 1e-15);
  CHECK(std::abs(vi.y) <= 1e-15);

  // Two-stream hand case.
  SpatialState mix = model.make_spatial_state();
  deposit_block(mix, model, 1, 1, 1, 1, 1.0, 0, 0.5);
  deposit_block(mix, model, 1, 1, 1, 1, 3.0, 2, 0.5);
  const double rho_mix = cell_mass(model, mix, 1, 1);
  CHECK(rho_mix == doctest::Approx(4.0).epsilon(1e-14));
  const double vm = speed_closure(rho_mix, 1.0, par.rho_jam);
  const Vec2 got = model.macro_mean_velocity(mix, 1, 1);
  CHECK(got.x == doctest::Approx(vm * 0.25).epsilon(1e-14));
  CHECK(got.y == doctest::Approx(vm * 0.75).epsilon(1e-14));
}

TEST_CASE("transport: guards and the frozen-venue limit") {
  CrowdParams par;
  CrowdModel model(box_arena(4, 1, 1.0, 1.0), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 0, 3, 0, 0, 1.0, 0, 0.5);

  CHECK_THROWS_AS(model.transport_step(s, 0.0), std::invalid_argument);
  CHECK_THROWS_WITH_AS(model.transport_step(s, 0.9), doctest::Contains("CFL"),
                       std::invalid_argument);
  CHECK_NOTHROW(model.transport_step(s, 0.7));

  CrowdModel frozen(box_arena(4, 1, 1.0, 0.0), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState fs = frozen.make_spatial_state();
  deposit_block(fs, frozen, 0, 3, 0, 0, 1.7, 3, 0.25);
  const auto before = fs.f;
  frozen.transport_step(fs, 5.0);
  CHECK(fs.f == before);
  CHECK(fs.evacuated == 0.0);
}

TEST_CASE("transport: wall faces reflect into the reversed direction") {
  CrowdParams par;
  CrowdModel model(box_arena(2, 1), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  const double mass = 3.0;
  s.at(0, 1, 0) = mass;  // east-bound at the east-most cell of a closed box

  const double rho = model.macro_density(s, 1, 0);
  const double q = speed_closure(rho, 1.0, par.rho_jam) * 0.5 / 1.0;
  model.transport_step(s, 0.5);
  CHECK(s.at(0, 1, 0) == mass - q * mass);
  CHECK(s.at(4, 1, 0) == q * mass);
  CHECK(s.evacuated == 0.0);
  CHECK(model.total_mass(s) == doctest::Approx(0.5 * mass).epsilon(1e-14));
}

TEST_CASE("transport: exit faces drain into the evacuated tally") {
  CrowdParams par;
  CrowdModel model(parse_arena_text("2 1 1\n.E\n"), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  s.at(0, 0, 1) = 2.0;
  const double m0 = model.total_mass(s);

  const double rho = model.macro_density(s, 0, 0);
  const double q = speed_closure(rho, 1.0, par.rho_jam) * 0.25;
  model.transport_step(s, 0.25);
  CHECK(s.evacuated == doctest::Approx(q * 2.0 * 0.5).epsilon(1e-14));
  CHECK(std::abs(model.total_mass(s) + s.evacuated - m0) <= 1e-14);
}

TEST_CASE("transport: a packet advects toward the exit and leaves") {
  CrowdParams par;
  CrowdModel model(parse_arena_text("5 1 1\n....E\n"), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 0, 0, 0, 0, 6.0e-8, 0, 0.5);
  const double m0 = model.total_mass(s);
  REQUIRE(m0 == doctest::Approx(6.0e-8).epsilon(1e-13));

  const double dt = 0.7;
  double last_com = 0.0;
  int argmax_after_1 = -1;
  for (int k = 0; k < 40; ++k) {
    model.transport_step(s, dt);
    CHECK(std::abs(model.total_mass(s) + s.evacuated - m0) <= 1e-13 * m0);
    double com = 0.0, inside = 0.0;
    int arg = 0;
    double best = -1.0;
    for (int x = 0; x < 4; ++x) {
      const double mx = cell_mass(model, s, x, 0);
      inside += mx;
      com += mx * x;
      if (mx > best) {
        best = mx;
        arg = x;
      }
    }
    if (k == 0) argmax_after_1 = arg;
    if (inside > 1e-3 * m0) {
      com /= inside;
      CHECK(com > last_com - 1e-12);
      last_com = com;
    }
  }
  CHECK(argmax_after_1 == 1);
  CHECK(model.total_mass(s) <= 1e-12 * m0);
  CHECK(s.evacuated == doctest::Approx(m0).epsilon(1e-12));
}

TEST_CASE("decision kernel: probability simplex and target pull") {
  CrowdParams par;
  CrowdModel model(parse_arena_text("3 1 1\n..E\n"), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();

  // Empty venue: only the target trend survives, so the kernel peaks east.
  const auto p = model.decision_kernel(s, 0, 0, 2, 0.8);
  REQUIRE(p.size() == 8);
  double sum = 0.0;
  for (double w : p) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  int arg = 0;
  for (int d = 1; d < 8; ++d)
    if (p[d] > p[arg]) arg = d;
  CHECK(arg == 0);

  deposit_block(s, model, 0, 1, 0, 0, 1.0, 0, 0.5);
  const auto q = model.decision_kernel(s, 1, 0, 0, 0.3);
  double qs = 0.0;
  for (double w : q) {
    CHECK(w >= 0.0);
    qs += w;
  }
  CHECK(qs == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("decision kernel: rescaling all tendency weights changes nothing") {
  CrowdParams par;
  CrowdModel model(parse_arena_text("4 3 1\n....\n...E\n....\n"),
                   make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 0, 2, 0, 2, 0.8, -1, 0.6);
  s.at(2, model.arena().idx(1, 1), 0) += 0.9;

  DecisionWeights w1{0.2, 0.5, 0.3};
  DecisionWeights w3{0.6, 1.5, 0.9};
  const auto a = model.decision_kernel(s, 1, 1, 1, 0.7, w1, par.sensory);
  const auto b = model.decision_kernel(s, 1, 1, 1, 0.7, w3, par.sensory);
  for (int d = 0; d < 8; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-14));
}

TEST_CASE("decision kernel: pure vacuum trend against hand enumeration") {
  CrowdParams par;
  par.weights = DecisionWeights{0.0, 1.0, 0.0};
  par.sensory.r_visibility = 1.5;
  CrowdModel model(box_arena(3, 3), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();

  auto rho_at = [](int x, int y) { return 0.1 + 0.05 * x + 0.02 * y; };
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      s.at(0, static_cast<int>(model.arena().idx(x, y)), 0) = 2.0 * rho_at(x, y);

  // All eight neighbors of the center are visible: the topological radius at
  // rho = 0.17 exceeds the 1.5 visibility cutoff, which itself covers the
  // diagonals.
  const double r_s = sensory_radius(rho_at(1, 1), par.sensory);
  REQUIRE(r_s > 1.5);

  Vec2 vac{0.0, 0.0};
  const int offx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  const int offy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  for (int k = 0; k < 8; ++k) {
    const double len = std::hypot(static_cast<double>(offx[k]), static_cast<double>(offy[k]));
    const Vec2 unit{offx[k] / len, offy[k] / len};
    vac = vac + (rho_at(1, 1) - rho_at(1 + offx[k], 1 + offy[k])) * unit;
  }
  const Vec2 g = (1.0 / norm(vac)) * vac;

  const auto p = model.decision_kernel(s, 1, 1, 0, 0.4);
  std::array<double, 8> expect{};
  double z = 0.0;
  for (int d = 0; d < 8; ++d) {
    expect[d] = std::exp(par.kappa * dot(direction_set()[d], g));
    z += expect[d];
  }
  for (int d = 0; d < 8; ++d)
    CHECK(p[d] == doctest::Approx(expect[d] / z).epsilon(1e-13));
}

TEST_CASE("collision: relaxation in a sealed cell follows the exponential clock") {
  CrowdParams par;
  par.eta0 = 1.5;
  CrowdModel model(parse_arena_text("3 3 1\n###\n#.#\n###\n"),
                   make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  const int c = static_cast<int>(model.arena().idx(1, 1));
  const double F = 4.0;
  s.at(0, c, 0) = F;

  const double rho = model.macro_density(s, 1, 1);
  REQUIRE(rho == doctest::Approx(2.0).epsilon(1e-15));

  const double dt = 0.1;
  const int steps = 10;
  for (int k = 0; k < steps; ++k) model.collision_step(s, dt);

  const double decay = std::exp(-par.eta0 * rho * steps * dt);
  const double expect0 = F / 8.0 + (7.0 * F / 8.0) * decay;
  const double expect_other = F / 8.0 * (1.0 - decay);
  CHECK(s.at(0, c, 0) == doctest::Approx(expect0).epsilon(1e-12));
  CHECK(s.at(3, c, 0) == doctest::Approx(expect_other).epsilon(1e-12));
  CHECK(s.at(5, c, 1) == 0.0);
  CHECK(model.macro_density(s, 1, 1) == doctest::Approx(rho).epsilon(1e-13));
}

TEST_CASE("collision: directionally uniform state in a blind box is a fixed point") {
  CrowdParams par;
  CrowdModel model(box_arena(4, 3), make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 0, 3, 0, 2, 1.3, -1, 0.5);
  const auto before = s.f;
  model.collision_step(s, 0.2);
  CHECK(s.f == before);
}

TEST_CASE("collision: cellwise mass is conserved") {
  CrowdParams par;
  CrowdModel model(parse_arena_text("4 2 1\n...E\n...#\n"),
                   make_uniform_grid(0.0, 1.0, 3), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 0, 2, 0, 1, 2.0, 0, 0.3);
  s.at(2, model.arena().idx(1, 0), 1) += 0.7;

  std::vector<double> before;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x) before.push_back(cell_mass(model, s, x, y));
  model.collision_step(s, 0.3);
  std::size_t k = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x)
      CHECK(cell_mass(model, s, x, y) == doctest::Approx(before[k++]).epsilon(1e-13));
  CHECK(s.evacuated == 0.0);
}

TEST_CASE("full steps: corridor keeps mass plus evacuated constant") {
  CrowdParams par;
  Arena corridor = parse_arena_text(
      "12 5 0.5\n"
      "############\n"
      "#..........E\n"
      "#..........E\n"
      "#..........E\n"
      "############\n");
  CrowdModel model(corridor, make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 1, 4, 1, 3, 3.0, 0, 0.5);
  const double m0 = model.total_mass(s);
  REQUIRE(m0 > 0.0);

  double last_evac = 0.0;
  for (int k = 0; k < 100; ++k) {
    model.step(s, 0.05);
    CHECK(std::abs(model.total_mass(s) + s.evacuated - m0) <= 1e-12 * m0);
    CHECK(s.evacuated >= last_evac);
    last_evac = s.evacuated;
  }
  CHECK(s.t == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(s.evacuated > 0.01 * m0);
}

TEST_CASE("full steps: a closed room conserves mass exactly") {
  CrowdParams par;
  Arena room = parse_arena_text(
      "8 6 0.5\n"
      "########\n"
      "#......#\n"
      "#..##..#\n"
      "#......#\n"
      "#......#\n"
      "########\n");
  CrowdModel model(room, make_uniform_grid(0.0, 1.0, 2), par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 1, 3, 1, 2, 2.0, 1, 0.7);
  const double m0 = model.total_mass(s);

  for (int k = 0; k < 200; ++k) model.step(s, 0.05);
  CHECK(s.evacuated == 0.0);
  CHECK(std::abs(model.total_mass(s) - m0) <= 1e-12 * m0);
}
