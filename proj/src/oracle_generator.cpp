#include <algorithm>
#include <cmath>
#include <deque>
#include <tuple>

#include "qsd/oracle/generator.hpp"

namespace qsd::oracle {

Support level_set_support(const KilledModel& model, const std::function<double(const State&)>& lyapunov,
                          double v_max, const std::vector<State>& seeds, std::size_t max_states) {
  if (!model.is_jump()) throw ModelError("level_set_support needs a jump model");
  Support visited;
  std::deque<std::size_t> queue;
  for (const auto& s : seeds) {
    model.require_in_state_space(s);
    if (lyapunov(s) <= v_max && !visited.find(s)) queue.push_back(visited.push_back(s));
  }
  std::vector<Jump> jumps;
  while (!queue.empty()) {
    const LatticePoint x = visited[queue.front()].lattice();
    queue.pop_front();
    model.jumps().enumerate_jumps(x, jumps);
    for (const auto& j : jumps) {
      if (j.rate <= 0.0) continue;
      State target(j.target);
      if (visited.find(target) || !model.contains(target) || !(lyapunov(target) <= v_max)) continue;
      if (visited.size() >= max_states) {
        throw ModelError("level set {V <= " + std::to_string(v_max) + "} exceeds " + std::to_string(max_states) +
                         " states");
      }
      queue.push_back(visited.push_back(std::move(target)));
    }
  }
  std::vector<State> states = visited.states();
  std::sort(states.begin(), states.end(), [](const State& a, const State& b) {
    const auto& pa = a.lattice();
    const auto& pb = b.lattice();
    if (pa.sum() != pb.sum()) return pa.sum() < pb.sum();
    return std::lexicographical_compare(pa.data(), pa.data() + pa.size(), pb.data(), pb.data() + pb.size());
  });
  return Support(std::move(states));
}

TruncatedGenerator<double> discretize_diffusion_1d(const KilledModel& model, double lo, double hi,
                                                   std::size_t cells) {
  if (model.is_jump() || model.dimension() != 1) {
    throw ModelError("discretize_diffusion_1d needs a one-dimensional diffusion");
  }
  if (!(hi > lo) || cells < 2) throw ModelError("discretize_diffusion_1d: empty grid");
  const auto& dyn = model.diffusion();
  const auto n = static_cast<Eigen::Index>(cells);
  const double dx = (hi - lo) / static_cast<double>(cells + 1);

  TruncatedGenerator<double> gen;
  gen.kappa_sup = model.killing().sup_bound();
  gen.killing.resize(n);
  gen.truncation_outflow.setZero(n);
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index i = 0; i < n; ++i) {
    RealPoint x(1);
    x[0] = lo + static_cast<double>(i + 1) * dx;
    const State s(x);
    gen.support.push_back(s);
    const double b = dyn.drift(x)[0];
    const DispersionMatrix sigma = dyn.dispersion(x);
    const double a = (sigma * sigma.transpose())(0, 0);
    const double up = a / (2 * dx * dx) + b / (2 * dx);
    const double down = a / (2 * dx * dx) - b / (2 * dx);
    if (up < 0.0 || down < 0.0) {
      throw ModelError("grid step too coarse for the drift at " + s.to_string() + "; refine the grid");
    }
    gen.killing[i] = model.killing()(s);
    if (i + 1 < n) {
      triplets.emplace_back(i, i + 1, up);
    } else {
      gen.truncation_outflow[i] += up;
    }
    if (i > 0) {
      triplets.emplace_back(i, i - 1, down);
    } else {
      gen.truncation_outflow[i] += down;
    }
    triplets.emplace_back(i, i, -(up + down + gen.killing[i]));
  }
  gen.matrix.resize(n, n);
  gen.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return gen;
}

}  // namespace qsd::oracle
