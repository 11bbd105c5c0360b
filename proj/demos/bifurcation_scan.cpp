// Sweeps the growth-balance ratio of the two-population model and reports the
// final tumor density relative to its initial value. Usage:
//   bifurcation_scan [t_end] [dt] [ratio...]

#include <cstdio>
#include <cstdlib>
#include <vector>

#include "ktap/scenario.hpp"

using namespace ktap;

int main(int argc, char** argv) {
  const double t_end = argc > 1 ? std::atof(argv[1]) : 10.0;
  const double dt = argc > 2 ? std::atof(argv[2]) : 2e-3;
  std::vector<double> ratios;
  for (int a = 3; a < argc; ++a) ratios.push_back(std::atof(argv[a]));
  if (ratios.empty()) ratios = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};

  std::printf("%8s %12s %12s %12s  %s\n", "ratio", "tumor(0)", "tumor(T)", "fraction",
              "verdict");
  for (double ratio : ratios) {
    TumorImmuneParams par;
    par.ratio = ratio;
    const InteractionModel model = make_tumor_immune_model(par);
    HomogeneousState s = make_state(2, model.grid());
    fill_bump(s, model.grid(), 0, 0.5, 0.3, 0.15);
    fill_bump(s, model.grid(), 1, 1.0, 0.5, 0.15);
    const auto traj = run_until(s, model, t_end, dt, 1000000000);
    const double n0 = traj.front().mom.n[0];
    const double nT = traj.back().mom.n[0];
    const double frac = nT / n0;
    const char* verdict = frac < 0.10 ? "suppressed" : frac > 1.5 ? "escaping" : "undecided";
    std::printf("%8g %12.6g %12.6g %12.6g  %s\n", ratio, n0, nT, frac, verdict);
  }
  return 0;
}
