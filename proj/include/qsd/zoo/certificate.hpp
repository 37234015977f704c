#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "qsd/process.hpp"

namespace qsd::zoo {

enum class Verdict { kPass, kInconclusive, kFail };

const char* to_string(Verdict v) noexcept;

using StateFunction = std::function<double(const State&)>;

/// Lyapunov function V with constants (lambda1, C) in LV <= -lambda1 V + C.
struct DriftCertificate {
  std::string family;  // human-readable form of V
  StateFunction V;
  /// Analytic LV (diffusions). Empty for jump models, where LV is summed exactly over the jumps.
  StateFunction LV;
  double lambda1 = 0.0;
  double C = 0.0;
  double kappa_sup = 0.0;
  /// Limit of -LV/V used to place lambda1.
  double asymptotic_rate = 0.0;
  /// States on which C was fitted, and the wider default probe for drift_check.
  std::vector<State> fit_window;
  std::vector<State> probe;
};

struct DriftVerdict {
  Verdict verdict = Verdict::kFail;
  /// max over the probe of LV + lambda1 V - C, and where it is attained.
  double max_slack = 0.0;
  State argmax;
  double tolerance = 0.0;
  std::size_t checked = 0;
};

/// LV(x) for a jump model: sum over jumps of rate * (V(target) - V(x)).
double jump_generator_action(const KilledModel& model, const StateFunction& V, const State& x);

/// LV(x) from the analytic expression when present, otherwise the exact jump sum.
double generator_action(const KilledModel& model, const DriftCertificate& cert, const State& x);

/// max(0, max over `window` of LV + lambda1 V) + 1.
double fit_drift_constant(const KilledModel& model, const DriftCertificate& cert, const std::vector<State>& window);

/// Checks LV + lambda1 V - C <= 1e-9 (1 + |C|) on every probe state.
///
/// Throws ModelError when kappa_sup >= lambda1 (before probing) or V is not finite and >= 1 on the probe.
DriftVerdict drift_check(const KilledModel& model, const DriftCertificate& cert, const std::vector<State>& probe);
DriftVerdict drift_check(const KilledModel& model, const DriftCertificate& cert);

/// Smallest integer N > lambda1 / (lambda1 - kappa_sup), and at least 2.
std::size_t min_particles(double lambda1, double kappa_sup);
std::size_t min_particles(const DriftCertificate& cert);

/// Lattice points of E = Z_+^d \ {0} with 1 <= |x|_1 <= radius, sorted by |x|_1.
std::vector<State> lattice_ball(int dimension, std::int64_t radius);

/// Largest radius whose lattice ball in dimension d has at most `max_states` points.
std::int64_t lattice_radius_for(int dimension, std::size_t max_states);

}  // namespace qsd::zoo
