#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qsd/empirical.hpp"
#include "qsd/random.hpp"
#include "qsd/state.hpp"

namespace qsd {

struct Jump {
  LatticePoint target;
  double rate = 0.0;
};

/// Pure-jump dynamics on a subset E of the lattice Z_+^d.
///
/// Absorption is never a jump target: jumps into the cemetery are removed
/// from `enumerate_jumps` and re-expressed as a killing rate.
struct JumpDynamics {
  int dimension = 1;
  /// Clears `out` and fills it with the jumps enabled at x.
  std::function<void(const LatticePoint& x, std::vector<Jump>& out)> enumerate_jumps;
  /// Membership in E. Defaults to "all coordinates non-negative".
  std::function<bool(const LatticePoint& x)> contains;
  /// Optional upper bound on the total jump rate; diagnostic only.
  std::function<double(const LatticePoint& x)> rate_bound_hint;
};

using DispersionMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDimension, kMaxDimension>;

/// dX = b(X) dt + sigma(X) dB on R^d, discretized with step `step_size`.
struct DiffusionDynamics {
  int dimension = 1;
  int noise_dimension = 1;
  std::function<RealPoint(const RealPoint& x)> drift;
  std::function<DispersionMatrix(const RealPoint& x)> dispersion;
  double step_size = 1e-2;
};

/// Bounded killing rate kappa with its declared supremum.
class KillingRate {
 public:
  KillingRate() = default;
  KillingRate(std::function<double(const State&)> kappa, double sup_bound);

  static KillingRate zero() { return constant(0.0); }
  static KillingRate constant(double c);

  /// kappa(x); throws ModelError if negative, non-finite or above the declared bound.
  double operator()(const State& x) const;
  double sup_bound() const noexcept { return sup_; }

 private:
  std::function<double(const State&)> kappa_;
  double sup_ = 0.0;
};

/// Markov dynamics X with soft killing at rate kappa(X).
class KilledModel {
 public:
  KilledModel(JumpDynamics dynamics, KillingRate killing, std::string description = "jump-model");
  KilledModel(DiffusionDynamics dynamics, KillingRate killing, std::string description = "diffusion-model");

  bool is_jump() const noexcept { return dynamics_.index() == 0; }
  const JumpDynamics& jumps() const;
  const DiffusionDynamics& diffusion() const;
  const KillingRate& killing() const noexcept { return killing_; }

  State::Kind state_kind() const noexcept { return is_jump() ? State::Kind::kLattice : State::Kind::kContinuous; }
  int dimension() const noexcept;

  bool contains(const State& x) const;
  /// Throws ModelError naming the state when x is not a point of E for this model.
  void require_in_state_space(const State& x) const;

  /// Canonical text describing the model and its parameters (used for digests).
  const std::string& description() const noexcept { return description_; }

 private:
  std::variant<JumpDynamics, DiffusionDynamics> dynamics_;
  KillingRate killing_;
  std::string description_;
};

struct HoldingAndJump {
  double holding_time = std::numeric_limits<double>::infinity();
  LatticePoint next;
};

/// Exact (Gillespie) step of a pure-jump generator from x.
///
/// Draws an exponential holding time with rate R(x), then a target with
/// probability proportional to its rate. When R(x) = 0 nothing is drawn and
/// (+inf, x) is returned.
HoldingAndJump sample_holding_and_jump(const JumpDynamics& dynamics, const LatticePoint& x, RandomStream& rng);

/// One Euler-Maruyama step: x + b(x) h + sigma(x) sqrt(h) Z.
RealPoint step_diffusion(const DiffusionDynamics& dynamics, const RealPoint& x, RandomStream& rng);

struct TrajectorySample {
  double time = 0.0;
  State state;
};

struct KilledTrajectory {
  enum class Status { kAliveAtHorizon, kKilled };

  std::vector<TrajectorySample> path;
  Status status = Status::kAliveAtHorizon;
  std::optional<double> kill_time;

  bool alive() const noexcept { return status == Status::kAliveAtHorizon; }
  /// Last recorded position (the position at the horizon when alive).
  const State& final_state() const { return path.back().state; }
};

enum class PathRecording { kFull, kEndpoints };

/// Simulates the killed process Y from x0 up to `horizon`.
///
/// Jump models: an Exp(1) hazard budget is drawn first and the integrated
/// killing rate, piecewise constant between jumps, is inverted exactly.
/// Diffusions: per step, a Euler-Maruyama move followed by a Bernoulli kill
/// with probability 1 - exp(-kappa(x) h), kappa taken at the step start.
KilledTrajectory simulate_killed(const KilledModel& model, const State& x0, double horizon, RandomStream& rng,
                                 PathRecording recording = PathRecording::kFull);

/// Initial distribution for replicated runs.
class InitialLaw {
 public:
  static InitialLaw dirac(State x);
  static InitialLaw discrete(std::vector<State> atoms, std::vector<double> weights);
  static InitialLaw sampler(std::function<State(RandomStream&)> draw);

  State sample(RandomStream& rng) const;

 private:
  std::vector<State> atoms_;
  std::vector<double> cumulative_;
  std::function<State(RandomStream&)> draw_;
};

struct ConditionalLawEstimate {
  EmpiricalMeasure survivors;
  std::size_t survivor_count = 0;
  std::size_t replicas = 0;

  /// No survivor: the conditioned law cannot be estimated.
  bool degenerate() const noexcept { return survivor_count == 0; }
};

/// Empirical law of Y_t given t < tau, from `replicas` independent runs.
///
/// Replica r uses rng.split(r), so the result does not depend on `threads`.
ConditionalLawEstimate conditional_law_estimate(const KilledModel& model, const InitialLaw& initial, double t,
                                                std::size_t replicas, const RandomStream& rng,
                                                unsigned threads = 1);

}  // namespace qsd
