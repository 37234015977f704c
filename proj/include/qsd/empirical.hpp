#pragma once

#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qsd/state.hpp"

namespace qsd {

/// Uniform probability measure on a list of atoms; duplicates stay separate.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(std::vector<State> atoms) : atoms_(std::move(atoms)) {}

  const std::vector<State>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  double weight() const noexcept { return atoms_.empty() ? 0.0 : 1.0 / static_cast<double>(atoms_.size()); }

  /// Sum of the atom weights, accumulated atom by atom.
  double total_mass() const noexcept {
    double mass = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) mass += weight();
    return mass;
  }

  /// Collapse duplicates: distinct state -> probability mass.
  std::unordered_map<State, double, StateHash> masses() const {
    std::unordered_map<State, double, StateHash> out;
    for (const auto& a : atoms_) out[a] += weight();
    return out;
  }

 private:
  std::vector<State> atoms_;
};

/// (1/N) * sum_i f(atom_i). Throws ModelError on a non-finite value of f.
template <typename F>
double empirical_integral(const EmpiricalMeasure& m, F&& f) {
  double sum = 0.0;
  for (const auto& a : m.atoms()) {
    const double v = f(a);
    if (!std::isfinite(v)) throw ModelError("test function is not finite at " + a.to_string());
    sum += v;
  }
  return m.empty() ? 0.0 : sum / static_cast<double>(m.size());
}

/// Concatenates measures with the same atom count into one.
EmpiricalMeasure pool(const std::vector<EmpiricalMeasure>& measures);

}  // namespace qsd
