#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qsd/process.hpp"

namespace qsd::testing {

/// Walk on {1, 2, ...}: up at rate `up`, down at rate `down` (none from 1).
inline JumpDynamics reflected_walk(double up, double down) {
  JumpDynamics w;
  w.dimension = 1;
  w.contains = [](const LatticePoint& x) { return x[0] >= 1; };
  w.enumerate_jumps = [up, down](const LatticePoint& x, std::vector<Jump>& out) {
    out.clear();
    out.push_back({lattice({x[0] + 1}), up});
    if (x[0] > 1) out.push_back({lattice({x[0] - 1}), down});
  };
  return w;
}

/// Chain on {1, 2}: 1 -> 2 at rate a, 2 -> 1 at rate b, killed at k1 in 1 and k2 in 2.
inline KilledModel two_state(double a, double b, double k1, double k2) {
  JumpDynamics d;
  d.dimension = 1;
  d.contains = [](const LatticePoint& x) { return x[0] == 1 || x[0] == 2; };
  d.enumerate_jumps = [a, b](const LatticePoint& x, std::vector<Jump>& out) {
    out.clear();
    out.push_back({lattice({x[0] == 1 ? 2 : 1}), x[0] == 1 ? a : b});
  };
  KillingRate kappa([k1, k2](const State& s) { return s.lattice()[0] == 1 ? k1 : k2; }, std::max(k1, k2));
  return KilledModel(d, kappa, "two-state");
}

/// Ornstein-Uhlenbeck dX = -k X dt + s dW in dimension d.
inline DiffusionDynamics ornstein_uhlenbeck(int d, double k, double s, double h) {
  DiffusionDynamics dyn;
  dyn.dimension = d;
  dyn.noise_dimension = d;
  dyn.drift = [k](const RealPoint& x) -> RealPoint { return -k * x; };
  dyn.dispersion = [d, s](const RealPoint&) -> DispersionMatrix {
    DispersionMatrix m = DispersionMatrix::Identity(d, d) * s;
    return m;
  };
  dyn.step_size = h;
  return dyn;
}

}  // namespace qsd::testing
