#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "qsd/empirical.hpp"
#include "qsd/process.hpp"
#include "qsd/random.hpp"

namespace qsd {

/// N-particle Fleming-Viot system with uniform rebirth.
///
/// Particles move as independent copies of the killed process. A killed
/// particle is instantly moved onto the current position of one of the
/// N-1 other particles, chosen uniformly.
///
/// Random streams: the ensemble stream RandomStream(seed) is split into
/// one stream per particle (split(i), i < N) and one event-order stream
/// (split(N)) used for rebirth partners and tie ordering. With zero
/// killing, particle i therefore follows exactly the trajectory of
/// simulate_killed(model, x_i, T, RandomStream(seed).split(i)).
class ParticleEnsemble {
 public:
  ParticleEnsemble(std::shared_ptr<const KilledModel> model, std::vector<State> initial, std::uint64_t seed);

  const KilledModel& model() const noexcept { return *model_; }
  std::size_t size() const noexcept { return positions_.size(); }
  double time() const noexcept { return time_; }
  std::uint64_t rebirth_count() const noexcept { return rebirths_; }
  const std::vector<State>& positions() const noexcept { return positions_; }

  EmpiricalMeasure empirical_measure() const { return EmpiricalMeasure(positions_); }

  /// Advances by dt > 0.
  void advance(double dt);
  /// Advances to absolute time t >= time(). For diffusions t - time() must be a whole number of steps.
  void advance_to(double t);

 private:
  struct Clock {
    double zeta = 0.0;     // Exp(1) hazard budget
    double hazard = 0.0;   // integrated killing since the budget was drawn
    double kappa = 0.0;    // killing rate at the current position
    double holding = 0.0;  // drawn holding time at the current position
    double jump_at = 0.0;
    double kill_at = 0.0;
    LatticePoint next;
    double event_time() const noexcept { return kill_at <= jump_at ? kill_at : jump_at; }
    bool kill_first() const noexcept { return kill_at <= jump_at; }
  };

  void enter_state(std::size_t i, double t, bool fresh_budget);
  void rebirth(std::size_t i);
  std::size_t pick_partner(std::size_t i);

  void advance_jump(double target);
  void advance_diffusion(double target);

  // Indexed binary min-heap over particle event times.
  void heap_build();
  void heap_update(std::size_t i);
  void heap_sift_up(std::size_t pos);
  void heap_sift_down(std::size_t pos);
  double heap_key(std::size_t pos) const { return clocks_[heap_[pos]].event_time(); }
  void heap_swap(std::size_t a, std::size_t b);

  std::shared_ptr<const KilledModel> model_;
  std::vector<State> positions_;
  std::vector<RandomStream> streams_;
  RandomStream events_;
  double time_ = 0.0;
  std::uint64_t rebirths_ = 0;

  std::vector<Clock> clocks_;
  std::vector<std::size_t> heap_;
  std::vector<std::size_t> heap_pos_;
};

/// Options accepted by fv_init.
struct FvInitOptions {
  /// Smallest N for which the ergodicity threshold holds; a warning is emitted below it.
  std::optional<std::size_t> min_particles;
};

ParticleEnsemble fv_init(const KilledModel& model, std::size_t n, std::vector<State> initial, std::uint64_t seed,
                         const FvInitOptions& options = {});

/// Initial positions drawn i.i.d. from `initial` with stream RandomStream(seed).split(n + 1).
ParticleEnsemble fv_init(const KilledModel& model, std::size_t n, const InitialLaw& initial, std::uint64_t seed,
                         const FvInitOptions& options = {});

struct Snapshot {
  double time = 0.0;
  EmpiricalMeasure measure;
};

/// Snapshots at each (sorted) observation time, then leaves the ensemble at `horizon`.
std::vector<Snapshot> fv_run(ParticleEnsemble& ensemble, double horizon, const std::vector<double>& observation_times);

/// Approximate draws of the stationary empirical measure.
///
/// Runs to `burn_in`, then takes `sample_count` snapshots `sample_gap` apart.
/// Successive samples come from one trajectory and are correlated.
std::vector<EmpiricalMeasure> stationary_samples(const KilledModel& model, std::size_t n, const State& initial,
                                                 double burn_in, double sample_gap, std::size_t sample_count,
                                                 std::uint64_t seed);

}  // namespace qsd
