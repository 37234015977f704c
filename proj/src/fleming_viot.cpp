#include "qsd/fleming_viot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "qsd/log.hpp"

namespace qsd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ParticleEnsemble::ParticleEnsemble(std::shared_ptr<const KilledModel> model, std::vector<State> initial,
                                   std::uint64_t seed)
    : model_(std::move(model)), positions_(std::move(initial)) {
  const std::size_t n = positions_.size();
  if (n < 2) throw ModelError("Fleming-Viot needs at least 2 particles (a rebirth needs a surviving partner)");
  for (const auto& x : positions_) model_->require_in_state_space(x);

  const RandomStream root(seed);
  streams_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) streams_.push_back(root.split(i));
  events_ = root.split(n);

  if (model_->is_jump()) {
    clocks_.resize(n);
    for (std::size_t i = 0; i < n; ++i) enter_state(i, 0.0, true);
    heap_build();
  }
}

void ParticleEnsemble::enter_state(std::size_t i, double t, bool fresh_budget) {
  Clock& c = clocks_[i];
  if (fresh_budget) {
    c.zeta = streams_[i].exponential();
    c.hazard = 0.0;
  }
  HoldingAndJump step = sample_holding_and_jump(model_->jumps(), positions_[i].lattice(), streams_[i]);
  c.kappa = model_->killing()(positions_[i]);
  c.holding = step.holding_time;
  c.kill_at = c.kappa > 0.0 ? t + (c.zeta - c.hazard) / c.kappa : kInf;
  c.jump_at = t + step.holding_time;
  c.next = std::move(step.next);
}

std::size_t ParticleEnsemble::pick_partner(std::size_t i) {
  const std::size_t r = events_.below(positions_.size() - 1);
  return r >= i ? r + 1 : r;
}

void ParticleEnsemble::rebirth(std::size_t i) {
  positions_[i] = positions_[pick_partner(i)];
  ++rebirths_;
}

void ParticleEnsemble::advance(double dt) {
  if (!(dt > 0.0)) throw ModelError("fv_advance: dt must be positive");
  advance_to(time_ + dt);
}

void ParticleEnsemble::advance_to(double t) {
  if (!(t >= time_)) throw ModelError("cannot advance a Fleming-Viot ensemble backwards in time");
  if (t == time_) return;
  if (model_->is_jump()) {
    advance_jump(t);
  } else {
    advance_diffusion(t);
  }
  time_ = t;
}

void ParticleEnsemble::advance_jump(double target) {
  std::vector<std::size_t> due;
  std::vector<std::size_t> stack;
  while (heap_key(0) <= target) {
    const double now = heap_key(0);
    // Heap nodes holding the minimum form a subtree rooted at the top.
    due.clear();
    stack.assign(1, 0);
    while (!stack.empty()) {
      const std::size_t pos = stack.back();
      stack.pop_back();
      if (pos >= heap_.size() || heap_key(pos) != now) continue;
      due.push_back(heap_[pos]);
      stack.push_back(2 * pos + 1);
      stack.push_back(2 * pos + 2);
    }
    if (due.size() > 1) {
      std::sort(due.begin(), due.end());
      shuffle(due.begin(), due.end(), events_);
    }
    for (std::size_t i : due) {
      Clock& c = clocks_[i];
      if (c.kill_first()) {
        rebirth(i);
        enter_state(i, now, true);
      } else {
        c.hazard += c.kappa * c.holding;
        positions_[i] = State(std::move(c.next));
        enter_state(i, now, false);
      }
      heap_update(i);
    }
  }
}

void ParticleEnsemble::advance_diffusion(double target) {
  const auto& dyn = model_->diffusion();
  const double h = dyn.step_size;
  const double span = target - time_;
  const double steps_real = span / h;
  const auto steps = static_cast<std::int64_t>(std::llround(steps_real));
  if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real)) {
    throw ModelError("diffusion ensembles advance in whole steps: " + std::to_string(span) +
                     " is not a multiple of the step size " + std::to_string(h));
  }
  const std::size_t n = positions_.size();
  std::vector<std::size_t> killed;
  for (std::int64_t s = 0; s < steps; ++s) {
    killed.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double k = model_->killing()(positions_[i]);
      RealPoint next = step_diffusion(dyn, positions_[i].real(), streams_[i]);
      const double u = streams_[i].uniform();
      positions_[i] = State(std::move(next));
      if (u < -std::expm1(-k * h)) killed.push_back(i);
    }
    // Sequential rebirths in random order; later ones may copy earlier rebirths.
    if (killed.size() > 1) shuffle(killed.begin(), killed.end(), events_);
    for (std::size_t i : killed) rebirth(i);
  }
}

void ParticleEnsemble::heap_build() {
  const std::size_t n = clocks_.size();
  heap_.resize(n);
  heap_pos_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    heap_[i] = i;
    heap_pos_[i] = i;
  }
  for (std::size_t pos = n / 2; pos-- > 0;) heap_sift_down(pos);
}

void ParticleEnsemble::heap_swap(std::size_t a, std::size_t b) {
  std::swap(heap_[a], heap_[b]);
  heap_pos_[heap_[a]] = a;
  heap_pos_[heap_[b]] = b;
}

void ParticleEnsemble::heap_sift_up(std::size_t pos) {
  while (pos > 0) {
    const std::size_t parent = (pos - 1) / 2;
    if (!(heap_key(pos) < heap_key(parent))) break;
    heap_swap(pos, parent);
    pos = parent;
  }
}

void ParticleEnsemble::heap_sift_down(std::size_t pos) {
  const std::size_t n = heap_.size();
  for (;;) {
    const std::size_t l = 2 * pos + 1;
    const std::size_t r = l + 1;
    std::size_t best = pos;
    if (l < n && heap_key(l) < heap_key(best)) best = l;
    if (r < n && heap_key(r) < heap_key(best)) best = r;
    if (best == pos) return;
    heap_swap(pos, best);
    pos = best;
  }
}

void ParticleEnsemble::heap_update(std::size_t i) {
  heap_sift_up(heap_pos_[i]);
  heap_sift_down(heap_pos_[i]);
}

namespace {

void check_particle_count(std::size_t n, const FvInitOptions& options) {
  if (n < 2) throw ModelError("Fleming-Viot needs n >= 2 particles, got " + std::to_string(n));
  if (options.min_particles && n < *options.min_particles) {
    warn("N = " + std::to_string(n) + " is below the ergodicity threshold N >= " +
         std::to_string(*options.min_particles) + " of the drift certificate");
  }
}

}  // namespace

ParticleEnsemble fv_init(const KilledModel& model, std::size_t n, std::vector<State> initial, std::uint64_t seed,
                         const FvInitOptions& options) {
  check_particle_count(n, options);
  if (initial.size() != n) {
    throw ModelError("fv_init: expected " + std::to_string(n) + " initial positions, got " +
                     std::to_string(initial.size()));
  }
  return ParticleEnsemble(std::make_shared<const KilledModel>(model), std::move(initial), seed);
}

ParticleEnsemble fv_init(const KilledModel& model, std::size_t n, const InitialLaw& initial, std::uint64_t seed,
                         const FvInitOptions& options) {
  check_particle_count(n, options);
  RandomStream draws = RandomStream(seed).split(n + 1);
  std::vector<State> positions;
  positions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) positions.push_back(initial.sample(draws));
  return ParticleEnsemble(std::make_shared<const KilledModel>(model), std::move(positions), seed);
}

std::vector<Snapshot> fv_run(ParticleEnsemble& ensemble, double horizon, const std::vector<double>& observation_times) {
  if (!(horizon >= ensemble.time())) throw ModelError("fv_run: horizon precedes the ensemble time");
  for (std::size_t k = 0; k < observation_times.size(); ++k) {
    const double t = observation_times[k];
    if (!(t >= ensemble.time() && t <= horizon)) {
      throw ModelError("fv_run: observation time " + std::to_string(t) + " outside [" +
                       std::to_string(ensemble.time()) + ", " + std::to_string(horizon) + "]");
    }
    if (k > 0 && t < observation_times[k - 1]) throw ModelError("fv_run: observation times are not sorted");
  }
  std::vector<Snapshot> out;
  out.reserve(observation_times.size());
  for (double t : observation_times) {
    ensemble.advance_to(t);
    out.push_back({t, ensemble.empirical_measure()});
  }
  ensemble.advance_to(horizon);
  return out;
}

std::vector<EmpiricalMeasure> stationary_samples(const KilledModel& model, std::size_t n, const State& initial,
                                                 double burn_in, double sample_gap, std::size_t sample_count,
                                                 std::uint64_t seed) {
  if (!(burn_in > 0.0) || !(sample_gap > 0.0)) throw ModelError("stationary_samples: burn_in and gap must be > 0");
  std::vector<EmpiricalMeasure> out;
  if (sample_count == 0) return out;
  ParticleEnsemble ens = fv_init(model, n, std::vector<State>(n, initial), seed);
  out.reserve(sample_count);
  for (std::size_t k = 0; k < sample_count; ++k) {
    ens.advance_to(burn_in + static_cast<double>(k) * sample_gap);
    out.push_back(ens.empirical_measure());
  }
  return out;
}

}  // namespace qsd
