#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "qsd/oracle/support.hpp"
#include "qsd/process.hpp"

namespace qsd::oracle {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

/// Killed generator restricted to a finite support.
///
/// matrix(i, j) is the rate i -> j for i != j inside the support and
/// matrix(i, i) = -(total jump rate out of i) - kappa(i). Jumps that leave
/// the support are treated as extra killing and tallied in
/// truncation_outflow, so every row sum is -kappa(i) - truncation_outflow(i).
template <typename Scalar = double>
struct TruncatedGenerator {
  Support support;
  SparseMatrix<Scalar> matrix;
  Vector<Scalar> killing;
  Vector<Scalar> truncation_outflow;
  Scalar kappa_sup = 0;

  Eigen::Index size() const noexcept { return matrix.rows(); }

  /// max_i |matrix(i, i)|, the uniformization rate.
  Scalar max_exit_rate() const { return (-matrix.diagonal().array()).maxCoeff(); }

  Scalar max_truncation_outflow() const {
    return truncation_outflow.size() == 0 ? Scalar(0) : truncation_outflow.maxCoeff();
  }

  /// Generator on a subset of the support; rates into dropped states count as outflow.
  TruncatedGenerator restricted(const std::vector<std::size_t>& keep) const {
    std::vector<Eigen::Index> map(static_cast<std::size_t>(size()), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) map[keep[k]] = static_cast<Eigen::Index>(k);
    TruncatedGenerator out;
    out.support = support.restricted(keep);
    out.kappa_sup = kappa_sup;
    const auto n = static_cast<Eigen::Index>(keep.size());
    out.killing.resize(n);
    out.truncation_outflow.resize(n);
    std::vector<Eigen::Triplet<Scalar>> triplets;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(keep[static_cast<std::size_t>(k)]);
      out.killing[k] = killing[i];
      Scalar leak = truncation_outflow[i];
      for (typename SparseMatrix<Scalar>::InnerIterator it(matrix, i); it; ++it) {
        const Eigen::Index j = map[static_cast<std::size_t>(it.col())];
        if (it.col() == i) {
          triplets.emplace_back(k, k, it.value());
        } else if (j >= 0) {
          triplets.emplace_back(k, j, it.value());
        } else {
          leak += it.value();
        }
      }
      out.truncation_outflow[k] = leak;
    }
    out.matrix.resize(n, n);
    out.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return out;
  }
};

/// Restriction of a lattice model's killed generator to `support`.
template <typename Scalar = double>
TruncatedGenerator<Scalar> build_truncated_generator(const KilledModel& model, Support support) {
  if (!model.is_jump()) throw ModelError("build_truncated_generator needs a jump model");
  if (support.empty()) throw ModelError("build_truncated_generator: empty support");
  const auto n = static_cast<Eigen::Index>(support.size());
  TruncatedGenerator<Scalar> gen;
  gen.kappa_sup = static_cast<Scalar>(model.killing().sup_bound());
  gen.killing.resize(n);
  gen.truncation_outflow.setZero(n);
  std::vector<Eigen::Triplet<Scalar>> triplets;
  std::vector<Jump> jumps;
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& x = support[static_cast<std::size_t>(i)];
    model.require_in_state_space(x);
    const auto& xl = x.lattice();
    model.jumps().enumerate_jumps(xl, jumps);
    Scalar out_rate = 0;
    for (const auto& j : jumps) {
      if (!(j.rate >= 0.0)) throw ModelError("negative jump rate at " + x.to_string());
      if (j.rate == 0.0 || (j.target.array() == xl.array()).all()) continue;
      const auto rate = static_cast<Scalar>(j.rate);
      out_rate += rate;
      if (auto idx = support.find(State(j.target))) {
        triplets.emplace_back(i, static_cast<Eigen::Index>(*idx), rate);
      } else {
        gen.truncation_outflow[i] += rate;
      }
    }
    gen.killing[i] = static_cast<Scalar>(model.killing()(x));
    triplets.emplace_back(i, i, -(out_rate + gen.killing[i]));
  }
  gen.matrix.resize(n, n);
  gen.matrix.setFromTriplets(triplets.begin(), triplets.end());
  gen.support = std::move(support);
  return gen;
}

/// States reachable from `seeds` through jumps whose targets satisfy V <= v_max.
///
/// The result is sorted by (|x|_1, coordinates). Throws ModelError when more
/// than `max_states` states would be collected.
Support level_set_support(const KilledModel& model, const std::function<double(const State&)>& lyapunov,
                          double v_max, const std::vector<State>& seeds, std::size_t max_states);

/// Central finite-difference discretization of (a/2) f'' + b f' - kappa f on
/// `cells` interior points of (lo, hi), with absorbing end points.
///
/// Only for one-dimensional diffusions; second-order accurate in the grid step.
TruncatedGenerator<double> discretize_diffusion_1d(const KilledModel& model, double lo, double hi, std::size_t cells);

}  // namespace qsd::oracle
