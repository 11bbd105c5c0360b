// Prints the discrete-to-continuum error table for the consensus kernel as the
// activity grid refines.

#include <cmath>
#include <cstdio>
#include <vector>

#include "ktap/discrete.hpp"

using namespace ktap;

int main() {
  const ActivityGrid g = make_uniform_grid(-1.0, 1.0, 41);
  auto eta = [](int, int, double ua, double ub) { return 1.0 + 0.25 * ua * ub; };
  const double sigma = 0.15;
  auto A = [sigma](int, int, int, double ua, double ub, double uo) {
    const double c = 0.4 * (ua + 0.4 * (ub - ua));
    const double Z = 0.5 * (std::erf((1.0 - c) / (sigma * std::sqrt(2.0))) -
                            std::erf((-1.0 - c) / (sigma * std::sqrt(2.0))));
    const double z = (uo - c) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.14159265358979323846) * Z);
  };
  auto D = [](int, int, double, double ub) { return 0.3 * (1.0 + ub) / 2.0; };
  const InteractionModel model(1, g, eta, A, {}, {}, {}, D);

  const std::vector<int> grids = {11, 21, 41};
  const std::vector<double> err = continuum_consistency(model, grids);
  std::printf("%6s %14s %10s\n", "m", "max error", "order");
  for (std::size_t q = 0; q < grids.size(); ++q) {
    if (q == 0)
      std::printf("%6d %14.6e %10s\n", grids[q], err[q], "-");
    else
      std::printf("%6d %14.6e %10.2f\n", grids[q], err[q], std::log2(err[q - 1] / err[q]));
  }
  return 0;
}
