#pragma once

#include <Eigen/Core>

#include "qsd/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <variant>

namespace qsd {

/// Largest supported state-space dimension. Points live on the stack.
inline constexpr int kMaxDimension = 8;

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDimension, 1>;

using LatticePoint = Point<std::int64_t>;
using RealPoint = Point<double>;

inline LatticePoint lattice(std::initializer_list<std::int64_t> coords) {
  LatticePoint p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (auto c : coords) p[i++] = c;
  return p;
}

inline RealPoint real_point(std::initializer_list<double> coords) {
  RealPoint p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (auto c : coords) p[i++] = c;
  return p;
}

/// Unit vector e_i of the lattice Z^d.
inline LatticePoint unit_lattice(int dimension, int i) {
  LatticePoint p = LatticePoint::Zero(dimension);
  p[i] = 1;
  return p;
}

/// A point of the state space: a non-negative lattice vector or a real vector.
class State {
 public:
  enum class Kind { kLattice, kContinuous };

  State() : value_(LatticePoint(0)) {}
  State(LatticePoint p) : value_(std::move(p)) {}  // NOLINT(google-explicit-constructor)
  State(RealPoint p) : value_(std::move(p)) {}     // NOLINT(google-explicit-constructor)

  Kind kind() const noexcept { return value_.index() == 0 ? Kind::kLattice : Kind::kContinuous; }
  bool is_lattice() const noexcept { return value_.index() == 0; }

  Eigen::Index dimension() const noexcept {
    return std::visit([](const auto& p) { return p.size(); }, value_);
  }

  const LatticePoint& lattice() const {
    if (const auto* p = std::get_if<LatticePoint>(&value_)) return *p;
    throw ModelError("expected a lattice state, got a continuous one");
  }
  const RealPoint& real() const {
    if (const auto* p = std::get_if<RealPoint>(&value_)) return *p;
    throw ModelError("expected a continuous state, got a lattice one");
  }
  LatticePoint& lattice() { return const_cast<LatticePoint&>(std::as_const(*this).lattice()); }
  RealPoint& real() { return const_cast<RealPoint&>(std::as_const(*this).real()); }

  /// Coordinates as doubles, for either variant.
  RealPoint coordinates() const {
    if (is_lattice()) return lattice().cast<double>();
    return real();
  }

  std::string to_string() const;

  friend bool operator==(const State& a, const State& b) noexcept {
    if (a.value_.index() != b.value_.index() || a.dimension() != b.dimension()) return false;
    if (a.is_lattice()) return (std::get<0>(a.value_).array() == std::get<0>(b.value_).array()).all();
    return (std::get<1>(a.value_).array() == std::get<1>(b.value_).array()).all();
  }
  friend bool operator!=(const State& a, const State& b) noexcept { return !(a == b); }

 private:
  std::variant<LatticePoint, RealPoint> value_;
};

struct StateHash {
  std::size_t operator()(const State& s) const noexcept;
};

/// Sum of coordinates, |x|_1 for lattice states.
inline std::int64_t l1_norm(const LatticePoint& x) { return x.sum(); }

}  // namespace qsd
