// Regenerates the three-phase mixture fixture used by the reconstruction
// tests: n = 100 calendar ages from
//   0.1 N(3500, 200^2) + 0.4 N(4200, 100^2) + 0.5 N(5000, 300^2)
// measured against the curve with sigma = 25.
//
// usage: make_three_normal_fixture <curve> <determinations.csv> <truth.csv> [seed]

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "carbcal/calcurve.hpp"
#include "carbcal/random.hpp"
#include "carbcal/simstudy.hpp"

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: make_three_normal_fixture <curve> <determinations.csv> <truth.csv> [seed]\n";
    return 1;
  }
  const std::uint64_t seed = argc > 4 ? std::stoull(argv[4]) : 20240917;
  const auto curve = carbcal::load_curve(argv[1]);
  carbcal::Rng rng(seed);

  const double weight[] = {0.1, 0.4, 0.5};
  const double mean[] = {3500.0, 4200.0, 5000.0};
  const double sd[] = {200.0, 100.0, 300.0};

  std::vector<double> theta;
  std::vector<int> component;
  while (theta.size() < 100) {
    const double u = carbcal::uniform01(rng);
    const int j = u < weight[0] ? 0 : (u < weight[0] + weight[1] ? 1 : 2);
    theta.push_back(carbcal::normal(rng, mean[j], sd[j]));
    component.push_back(j + 1);
  }
  const auto dets = carbcal::simulate_determinations(theta, curve, 25.0, rng);

  std::ofstream d(argv[2]);
  std::ofstream t(argv[3]);
  d.precision(17);
  t.precision(17);
  d << "id,c14_age,c14_sig\n";
  t << "id,cal_age,component\n";
  for (std::size_t i = 0; i < dets.size(); ++i) {
    d << dets[i].id << ',' << dets[i].c14_age << ',' << dets[i].c14_sig << '\n';
    t << dets[i].id << ',' << theta[i] << ',' << component[i] << '\n';
  }
  return 0;
}
