#include "qsd/process.hpp"

#include <cmath>
#include <utility>

#include "qsd/parallel.hpp"

namespace qsd {

KillingRate::KillingRate(std::function<double(const State&)> kappa, double sup_bound)
    : kappa_(std::move(kappa)), sup_(sup_bound) {
  if (!(sup_bound >= 0.0) || !std::isfinite(sup_bound)) {
    throw ModelError("killing rate sup bound must be finite and non-negative");
  }
}

KillingRate KillingRate::constant(double c) {
  return KillingRate([c](const State&) { return c; }, c);
}

double KillingRate::operator()(const State& x) const {
  if (!kappa_) return 0.0;
  const double k = kappa_(x);
  if (!std::isfinite(k) || k < 0.0) {
    throw ModelError("killing rate is negative or not finite at " + x.to_string());
  }
  if (k > sup_ * (1.0 + 1e-12)) {
    throw ModelError("killing rate " + std::to_string(k) + " exceeds declared sup bound " +
                     std::to_string(sup_) + " at " + x.to_string());
  }
  return k;
}

namespace {

bool default_contains(const LatticePoint& x) { return (x.array() >= 0).all(); }

}  // namespace

KilledModel::KilledModel(JumpDynamics dynamics, KillingRate killing, std::string description)
    : dynamics_(std::move(dynamics)), killing_(std::move(killing)), description_(std::move(description)) {
  auto& jd = std::get<JumpDynamics>(dynamics_);
  if (!jd.enumerate_jumps) throw ModelError("jump dynamics without a jump enumerator");
  if (jd.dimension < 1 || jd.dimension > kMaxDimension) throw ModelError("jump dynamics dimension out of range");
  if (!jd.contains) jd.contains = default_contains;
}

KilledModel::KilledModel(DiffusionDynamics dynamics, KillingRate killing, std::string description)
    : dynamics_(std::move(dynamics)), killing_(std::move(killing)), description_(std::move(description)) {
  const auto& dd = std::get<DiffusionDynamics>(dynamics_);
  if (!dd.drift || !dd.dispersion) throw ModelError("diffusion dynamics needs drift and dispersion");
  if (dd.dimension < 1 || dd.dimension > kMaxDimension || dd.noise_dimension < 1 ||
      dd.noise_dimension > kMaxDimension) {
    throw ModelError("diffusion dimension out of range");
  }
  if (!(dd.step_size > 0.0) || !std::isfinite(dd.step_size)) throw ModelError("diffusion step size must be > 0");
}

const JumpDynamics& KilledModel::jumps() const {
  if (const auto* d = std::get_if<JumpDynamics>(&dynamics_)) return *d;
  throw ModelError("model has diffusion dynamics, not jump dynamics");
}

const DiffusionDynamics& KilledModel::diffusion() const {
  if (const auto* d = std::get_if<DiffusionDynamics>(&dynamics_)) return *d;
  throw ModelError("model has jump dynamics, not diffusion dynamics");
}

int KilledModel::dimension() const noexcept {
  return std::visit([](const auto& d) { return d.dimension; }, dynamics_);
}

bool KilledModel::contains(const State& x) const {
  if (x.kind() != state_kind() || x.dimension() != dimension()) return false;
  if (is_jump()) return jumps().contains(x.lattice());
  return x.real().allFinite();
}

void KilledModel::require_in_state_space(const State& x) const {
  if (x.kind() != state_kind()) {
    throw ModelError(is_jump() ? "continuous state given to a lattice (jump) model"
                               : "lattice state given to a continuous (diffusion) model");
  }
  if (!contains(x)) throw ModelError("state " + x.to_string() + " is outside the state space");
}

HoldingAndJump sample_holding_and_jump(const JumpDynamics& dynamics, const LatticePoint& x, RandomStream& rng) {
  thread_local std::vector<Jump> jumps;
  dynamics.enumerate_jumps(x, jumps);
  double total = 0.0;
  for (const auto& j : jumps) {
    if (!std::isfinite(j.rate) || j.rate < 0.0) {
      throw ModelError("jump rate from " + State(x).to_string() + " is negative or not finite");
    }
    total += j.rate;
  }
  if (!std::isfinite(total)) throw ModelError("total jump rate is not finite at " + State(x).to_string());
  if (total <= 0.0) return {std::numeric_limits<double>::infinity(), x};

  HoldingAndJump out;
  out.holding_time = rng.exponential() / total;
  const double pick = rng.uniform() * total;
  double acc = 0.0;
  const Jump* chosen = nullptr;
  for (const auto& j : jumps) {
    if (j.rate <= 0.0) continue;
    chosen = &j;
    acc += j.rate;
    if (pick < acc) break;
  }
  out.next = chosen->target;
  return out;
}

RealPoint step_diffusion(const DiffusionDynamics& dynamics, const RealPoint& x, RandomStream& rng) {
  const double h = dynamics.step_size;
  RealPoint noise(dynamics.noise_dimension);
  for (int k = 0; k < dynamics.noise_dimension; ++k) noise[k] = rng.normal();
  const DispersionMatrix sigma = dynamics.dispersion(x);
  RealPoint next = x + dynamics.drift(x) * h + std::sqrt(h) * (sigma * noise);
  if (!next.allFinite()) {
    throw ModelError("Euler-Maruyama step produced a non-finite state from " + State(x).to_string() +
                     "; reduce the step size or check the coefficients");
  }
  return next;
}

namespace {

KilledTrajectory simulate_jump(const KilledModel& model, const LatticePoint& x0, double horizon, RandomStream& rng,
                               PathRecording recording) {
  const auto& dyn = model.jumps();
  const auto& kappa = model.killing();
  KilledTrajectory traj;
  traj.path.push_back({0.0, State(x0)});

  // Hazard budget: killed once the integrated rate reaches zeta.
  const double zeta = rng.exponential();
  double hazard = 0.0;
  double t = 0.0;
  LatticePoint x = x0;
  for (;;) {
    HoldingAndJump step = sample_holding_and_jump(dyn, x, rng);
    const double k = kappa(State(x));
    const double kill_at = k > 0.0 ? t + (zeta - hazard) / k : std::numeric_limits<double>::infinity();
    const double jump_at = t + step.holding_time;
    if (std::min(kill_at, jump_at) > horizon) break;
    if (kill_at <= jump_at) {
      traj.status = KilledTrajectory::Status::kKilled;
      traj.kill_time = kill_at;
      return traj;
    }
    hazard += k * step.holding_time;
    t = jump_at;
    x = std::move(step.next);
    if (recording == PathRecording::kFull) traj.path.push_back({t, State(x)});
  }
  if (recording == PathRecording::kEndpoints) {
    if (horizon > 0.0) traj.path.push_back({horizon, State(x)});
  } else if (traj.path.back().time < horizon) {
    traj.path.push_back({horizon, State(x)});
  }
  return traj;
}

KilledTrajectory simulate_diffusion(const KilledModel& model, const RealPoint& x0, double horizon, RandomStream& rng,
                                    PathRecording recording) {
  const auto& dyn = model.diffusion();
  const auto& kappa = model.killing();
  const double h = dyn.step_size;
  const auto steps = static_cast<std::int64_t>(std::ceil(horizon / h - 1e-9));
  KilledTrajectory traj;
  traj.path.push_back({0.0, State(x0)});
  RealPoint x = x0;
  for (std::int64_t n = 1; n <= steps; ++n) {
    const double k = kappa(State(x));
    RealPoint next = step_diffusion(dyn, x, rng);
    const double u = rng.uniform();
    const double t = std::min(static_cast<double>(n) * h, horizon);
    if (u < -std::expm1(-k * h)) {
      traj.status = KilledTrajectory::Status::kKilled;
      traj.kill_time = t;
      return traj;
    }
    x = std::move(next);
    if (recording == PathRecording::kFull || n == steps) traj.path.push_back({t, State(x)});
  }
  return traj;
}

}  // namespace

KilledTrajectory simulate_killed(const KilledModel& model, const State& x0, double horizon, RandomStream& rng,
                                 PathRecording recording) {
  if (!(horizon > 0.0)) throw ModelError("simulate_killed: horizon must be positive");
  model.require_in_state_space(x0);
  if (model.is_jump()) return simulate_jump(model, x0.lattice(), horizon, rng, recording);
  return simulate_diffusion(model, x0.real(), horizon, rng, recording);
}

InitialLaw InitialLaw::dirac(State x) {
  InitialLaw law;
  law.atoms_.push_back(std::move(x));
  law.cumulative_.push_back(1.0);
  return law;
}

InitialLaw InitialLaw::discrete(std::vector<State> atoms, std::vector<double> weights) {
  if (atoms.empty() || atoms.size() != weights.size()) throw ModelError("discrete law: atoms/weights mismatch");
  InitialLaw law;
  double acc = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ModelError("discrete law: negative weight");
    acc += w;
    law.cumulative_.push_back(acc);
  }
  if (!(acc > 0.0)) throw ModelError("discrete law: zero total weight");
  for (double& c : law.cumulative_) c /= acc;
  law.atoms_ = std::move(atoms);
  return law;
}

InitialLaw InitialLaw::sampler(std::function<State(RandomStream&)> draw) {
  InitialLaw law;
  law.draw_ = std::move(draw);
  return law;
}

State InitialLaw::sample(RandomStream& rng) const {
  if (draw_) return draw_(rng);
  if (atoms_.size() == 1) return atoms_.front();
  const double u = rng.uniform();
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (u < cumulative_[i]) return atoms_[i];
  }
  return atoms_.back();
}

ConditionalLawEstimate conditional_law_estimate(const KilledModel& model, const InitialLaw& initial, double t,
                                                std::size_t replicas, const RandomStream& rng, unsigned threads) {
  if (replicas < 1) throw ModelError("conditional_law_estimate: replicas must be >= 1");
  if (!(t >= 0.0)) throw ModelError("conditional_law_estimate: t must be >= 0");
  std::vector<std::optional<State>> finals(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    RandomStream stream = rng.split(r);
    State x0 = initial.sample(stream);
    model.require_in_state_space(x0);
    if (t == 0.0) {
      finals[r] = std::move(x0);
      return;
    }
    KilledTrajectory traj = simulate_killed(model, x0, t, stream, PathRecording::kEndpoints);
    if (traj.alive()) finals[r] = traj.final_state();
  });
  std::vector<State> survivors;
  for (auto& f : finals) {
    if (f) survivors.push_back(std::move(*f));
  }
  ConditionalLawEstimate out;
  out.survivor_count = survivors.size();
  out.replicas = replicas;
  out.survivors = EmpiricalMeasure(std::move(survivors));
  return out;
}

EmpiricalMeasure pool(const std::vector<EmpiricalMeasure>& measures) {
  std::vector<State> atoms;
  for (const auto& m : measures) {
    if (!measures.empty() && m.size() != measures.front().size()) {
      throw ModelError("pool: measures must have the same number of atoms");
    }
    atoms.insert(atoms.end(), m.atoms().begin(), m.atoms().end());
  }
  return EmpiricalMeasure(std::move(atoms));
}

}  // namespace qsd
