#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "qsd/empirical.hpp"
#include "qsd/errors.hpp"
#include "qsd/oracle/generator.hpp"

namespace qsd::oracle {

template <typename Scalar>
struct Propagated {
  Vector<Scalar> law;    // normalized to total mass 1
  Scalar log_mass = 0;   // log of mu0^T e^{At} 1
};

/// mu0^T e^{At} by uniformization, kept normalized with the mass tracked in log scale.
///
/// With Lambda = max exit rate, e^{At} = e^{-Lambda t} sum_k (Lambda t)^k / k! P^k,
/// P = I + A / Lambda non-negative. The interval is cut into pieces with
/// Lambda * dt <= 30 so Poisson weights never underflow, and each series is
/// truncated once the remaining Poisson mass is below `tol`.
template <typename Scalar = double>
Propagated<Scalar> propagate(const TruncatedGenerator<Scalar>& gen, const Vector<Scalar>& mu0, Scalar t,
                             Scalar tol = Scalar(1e-12)) {
  if (mu0.size() != gen.size()) throw ModelError("initial vector does not match the truncation size");
  if (!(t >= 0)) throw ModelError("propagation time must be non-negative");
  if ((mu0.array() < 0).any()) throw ModelError("initial vector has negative entries");
  const Scalar mass0 = mu0.sum();
  if (std::abs(mass0 - 1) > Scalar(1e-9)) throw ModelError("initial vector is not normalized");

  Propagated<Scalar> out{mu0 / mass0, 0};
  if (t == 0) return out;
  const Scalar rate = gen.max_exit_rate();
  if (!(rate > 0)) return out;

  const auto pieces = static_cast<long>(std::ceil(rate * t / 30));
  const Scalar dt = t / static_cast<Scalar>(pieces);
  const Scalar q = rate * dt;
  Vector<Scalar> term(gen.size()), next(gen.size()), acc(gen.size());
  for (long p = 0; p < pieces; ++p) {
    term = out.law;
    Scalar weight = std::exp(-q);
    Scalar cumulative = weight;
    acc = weight * term;
    for (long k = 1; 1 - cumulative > tol && k < 100000; ++k) {
      next.noalias() = gen.matrix.transpose() * term;
      term += next / rate;
      weight *= q / static_cast<Scalar>(k);
      cumulative += weight;
      acc += weight * term;
    }
    const Scalar mass = acc.sum();
    if (!(mass > Scalar(1e-300))) {
      throw DegenerateConditioning("surviving mass underflowed below 1e-300; conditioning is degenerate");
    }
    out.log_mass += std::log(mass);
    out.law = acc / mass;
  }
  return out;
}

/// Law of Y_t given survival, started from mu0.
template <typename Scalar = double>
Vector<Scalar> conditioned_law(const TruncatedGenerator<Scalar>& gen, const Vector<Scalar>& mu0, Scalar t) {
  return propagate(gen, mu0, t).law;
}

/// P_{mu0}(t < tau) on the truncation.
template <typename Scalar = double>
Scalar survival_probability(const TruncatedGenerator<Scalar>& gen, const Vector<Scalar>& mu0, Scalar t) {
  const Scalar log_mass = propagate(gen, mu0, t).log_mass;
  if (log_mass < std::log(Scalar(1e-300))) {
    throw DegenerateConditioning("survival probability below 1e-300");
  }
  return std::exp(log_mass);
}

/// Point mass on support index i.
template <typename Scalar = double>
Vector<Scalar> dirac(const Support& support, const State& x) {
  auto idx = support.find(x);
  if (!idx) throw ModelError("state " + x.to_string() + " is not in the truncation");
  Vector<Scalar> v = Vector<Scalar>::Zero(static_cast<Eigen::Index>(support.size()));
  v[static_cast<Eigen::Index>(*idx)] = 1;
  return v;
}

/// Total variation distance (1/2) sum |p - q| between probability vectors on one support.
template <typename Scalar>
Scalar tv_distance(const Vector<Scalar>& p, const Vector<Scalar>& q) {
  if (p.size() != q.size()) throw ModelError("tv_distance: size mismatch");
  if (std::abs(p.sum() - 1) > Scalar(1e-9) || std::abs(q.sum() - 1) > Scalar(1e-9)) {
    throw ModelError("tv_distance: inputs must be normalized");
  }
  return Scalar(0.5) * (p - q).template lpNorm<1>();
}

/// TV distance between an empirical measure and a probability vector on `support`.
/// Atoms outside the support count entirely toward the distance.
double tv_distance(const EmpiricalMeasure& p, const Support& support, const Vector<double>& q);

/// TV distance between two empirical measures on the union of their atoms.
double tv_distance(const EmpiricalMeasure& p, const EmpiricalMeasure& q);

/// Empirical measure binned onto the support as a vector (outside mass dropped).
Vector<double> histogram(const EmpiricalMeasure& m, const Support& support);

}  // namespace qsd::oracle
