// Runs the shipped corridor and prints the occupancy profile: time, mass still
// inside, evacuated mass, and the column-summed density along the corridor.

#include <cstdio>
#include <cstdlib>

#include "ktap/scenario.hpp"

using namespace ktap;

int main(int argc, char** argv) {
  const double t_end = argc > 1 ? std::atof(argv[1]) : 20.0;
  const double dt = 0.05;

  CrowdParams par;
  par.weights = {1.0, 0.6, 0.4};
  par.sensory.theta = 1.5707963267948966;
  par.sensory.r_visibility = 2.0;
  const CrowdModel model(parse_arena_text(corridor_arena()), make_uniform_grid(0.0, 1.0, 2),
                         par);
  SpatialState s = model.make_spatial_state();
  deposit_block(s, model, 2, 11, 2, 7, 3.0, 0, 0.5);
  const double m0 = model.total_mass(s);

  const long steps = static_cast<long>(t_end / dt + 0.5);
  std::printf("%8s %12s %12s   occupancy by column\n", "t", "inside", "evacuated");
  for (long k = 0; k <= steps; ++k) {
    if (k > 0) {
      model.step(s, dt);
      s.t = static_cast<double>(k) * dt;
    }
    if (k % 40 == 0 || k == steps) {
      std::printf("%8.2f %12.6g %12.6g   ", s.t, model.total_mass(s), s.evacuated);
      for (int x = 0; x < model.arena().cols; x += 4) {
        double col = 0.0;
        for (int y = 0; y < model.arena().rows; ++y)
          if (model.arena().at(x, y) == CellKind::walkable) col += model.macro_density(s, x, y);
        std::printf("%c", col > 0.5 * m0 / 10 ? '#' : col > 0.05 ? '+' : col > 1e-6 ? '.' : ' ');
      }
      std::printf("\n");
    }
  }
  return 0;
}
