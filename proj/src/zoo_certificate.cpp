#include "qsd/zoo/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qsd::zoo {

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::kPass:
      return "PASS";
    case Verdict::kInconclusive:
      return "INCONCLUSIVE";
    case Verdict::kFail:
      return "FAIL";
  }
  return "FAIL";
}

double jump_generator_action(const KilledModel& model, const StateFunction& V, const State& x) {
  thread_local std::vector<Jump> jumps;
  model.jumps().enumerate_jumps(x.lattice(), jumps);
  const double vx = V(x);
  double sum = 0.0;
  for (const auto& j : jumps) {
    if (j.rate == 0.0) continue;
    sum += j.rate * (V(State(j.target)) - vx);
  }
  return sum;
}

double generator_action(const KilledModel& model, const DriftCertificate& cert, const State& x) {
  if (cert.LV) return cert.LV(x);
  if (!model.is_jump()) throw ModelError("diffusion certificate without an analytic LV");
  return jump_generator_action(model, cert.V, x);
}

namespace {

double checked_value(const StateFunction& f, const State& x, const char* what) {
  const double v = f(x);
  if (!std::isfinite(v)) throw ModelError(std::string(what) + " is not finite at " + x.to_string());
  return v;
}

}  // namespace

double fit_drift_constant(const KilledModel& model, const DriftCertificate& cert, const std::vector<State>& window) {
  double worst = 0.0;
  for (const auto& x : window) {
    const double v = checked_value(cert.V, x, "V");
    const double lv = generator_action(model, cert, x);
    if (!std::isfinite(lv)) throw ModelError("LV is not finite at " + x.to_string());
    worst = std::max(worst, lv + cert.lambda1 * v);
  }
  return worst + 1.0;
}

DriftVerdict drift_check(const KilledModel& model, const DriftCertificate& cert, const std::vector<State>& probe) {
  if (!(cert.lambda1 > cert.kappa_sup)) {
    throw ModelError("drift certificate needs lambda1 > kappa_sup (lambda1 = " + std::to_string(cert.lambda1) +
                     ", kappa_sup = " + std::to_string(cert.kappa_sup) + ")");
  }
  DriftVerdict out;
  out.tolerance = 1e-9 * (1.0 + std::abs(cert.C));
  out.max_slack = -std::numeric_limits<double>::infinity();
  for (const auto& x : probe) {
    const double v = checked_value(cert.V, x, "V");
    if (v < 1.0) throw ModelError("V < 1 at " + x.to_string());
    const double lv = generator_action(model, cert, x);
    if (!std::isfinite(lv)) throw ModelError("LV is not finite at " + x.to_string());
    const double slack = lv + cert.lambda1 * v - cert.C;
    if (slack > out.max_slack) {
      out.max_slack = slack;
      out.argmax = x;
    }
    ++out.checked;
  }
  out.verdict = out.checked > 0 && out.max_slack <= out.tolerance ? Verdict::kPass : Verdict::kFail;
  return out;
}

DriftVerdict drift_check(const KilledModel& model, const DriftCertificate& cert) {
  return drift_check(model, cert, cert.probe);
}

std::size_t min_particles(double lambda1, double kappa_sup) {
  if (!(lambda1 > kappa_sup)) throw ModelError("min_particles needs lambda1 > kappa_sup");
  const double ratio = lambda1 / (lambda1 - kappa_sup);
  const auto n = static_cast<std::size_t>(std::floor(ratio)) + 1;
  return std::max<std::size_t>(n, 2);
}

std::size_t min_particles(const DriftCertificate& cert) { return min_particles(cert.lambda1, cert.kappa_sup); }

namespace {

void shell(int d, std::int64_t remaining, LatticePoint& x, int i, std::vector<State>& out) {
  if (i == d - 1) {
    x[i] = remaining;
    out.emplace_back(x);
    return;
  }
  for (std::int64_t k = remaining; k >= 0; --k) {
    x[i] = k;
    shell(d, remaining - k, x, i + 1, out);
  }
}

}  // namespace

std::vector<State> lattice_ball(int dimension, std::int64_t radius) {
  std::vector<State> out;
  LatticePoint x(dimension);
  for (std::int64_t r = 1; r <= radius; ++r) shell(dimension, r, x, 0, out);
  return out;
}

std::int64_t lattice_radius_for(int dimension, std::size_t max_states) {
  // |{1 <= |x|_1 <= R}| = C(R + d, d) - 1
  auto count = [dimension](std::int64_t r) {
    double c = 1.0;
    for (int k = 1; k <= dimension; ++k) c = c * static_cast<double>(r + k) / k;
    return c - 1.0;
  };
  std::int64_t r = 1;
  while (count(r + 1) <= static_cast<double>(max_states)) ++r;
  return r;
}

}  // namespace qsd::zoo
