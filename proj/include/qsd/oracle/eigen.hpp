#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/log.hpp"
#include "qsd/oracle/generator.hpp"
#include "qsd/random.hpp"

namespace qsd::oracle {

struct EigenOptions {
  /// Stop when ||nu A + lambda0 nu||_1 falls below this.
  double tol = 1e-11;
  std::size_t max_iter = 5'000'000;
  bool compute_gap = true;
  double gap_tol = 1e-9;
  std::size_t gap_max_iter = 2'000'000;
  /// Support index where eta is normalized to 1 (default: first state).
  std::size_t reference_index = 0;
};

/// Quasi-stationary distribution and spectral data of a truncated killed generator.
template <typename Scalar = double>
struct QsdSolution {
  Support support;
  Vector<Scalar> nu;   // left eigenvector, probability vector
  Vector<Scalar> eta;  // right eigenvector, eta(reference) = 1
  Scalar lambda0 = 0;  // the leading eigenvalue is -lambda0
  /// Difference between the two largest real parts of the spectrum (absent for a single state).
  std::optional<Scalar> gamma;
  bool gamma_converged = false;
  Scalar residual = 0;        // ||nu A + lambda0 nu||_1
  Scalar right_residual = 0;  // ||A eta + lambda0 eta||_1 / ||eta||_1
  Scalar leakage = 0;         // sum_i nu_i * truncation_outflow_i
  Scalar max_truncation_outflow = 0;
  std::size_t iterations = 0;
  /// The input was reducible and has been restricted to its dominant class.
  bool restricted = false;

  /// Rate alpha = gamma / (2 (kappa_sup + gamma)) of the particle approximation error bound.
  std::optional<Scalar> particle_rate(Scalar kappa_sup) const {
    if (!gamma) return std::nullopt;
    return *gamma / (2 * (kappa_sup + *gamma));
  }
};

/// Strongly connected components of the off-diagonal support graph, in discovery order.
template <typename Scalar>
std::vector<std::vector<std::size_t>> strongly_connected_components(const SparseMatrix<Scalar>& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnset), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  std::size_t counter = 0;

  struct Frame {
    std::size_t node;
    typename SparseMatrix<Scalar>::InnerIterator it;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    std::vector<Frame> call;
    auto open = [&](std::size_t v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = 1;
      call.push_back({v, typename SparseMatrix<Scalar>::InnerIterator(m, static_cast<Eigen::Index>(v))});
    };
    open(root);
    while (!call.empty()) {
      Frame& f = call.back();
      const std::size_t v = f.node;
      bool descended = false;
      for (; f.it; ++f.it) {
        const auto w = static_cast<std::size_t>(f.it.col());
        if (w == v || f.it.value() <= 0) continue;
        if (index[w] == kUnset) {
          ++f.it;
          open(w);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
    }
  }
  return components;
}

namespace detail {

/// Left Perron vector of A + sI by power iteration; returns iterations used.
template <typename Scalar>
std::size_t left_power_iteration(const SparseMatrix<Scalar>& a, Scalar shift, const EigenOptions& opt,
                                 Vector<Scalar>& nu, Scalar& lambda0, Scalar& residual) {
  const Eigen::Index n = a.rows();
  nu = Vector<Scalar>::Constant(n, Scalar(1) / static_cast<Scalar>(n));
  Vector<Scalar> y(n);
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    y.noalias() = a.transpose() * nu;
    y += shift * nu;
    const Scalar theta = y.sum();
    lambda0 = shift - theta;
    residual = (y - theta * nu).template lpNorm<1>();
    if (!(theta > 0)) throw ConvergenceError("leading eigenvector lost all mass", residual, it);
    nu = y / theta;
    if (residual <= static_cast<Scalar>(opt.tol)) return it;
  }
  throw ConvergenceError("left power iteration did not converge; last residual " + std::to_string(double(residual)),
                         double(residual), opt.max_iter);
}

template <typename Scalar>
std::size_t right_power_iteration(const SparseMatrix<Scalar>& a, Scalar shift, const Vector<Scalar>& nu,
                                  const EigenOptions& opt, Vector<Scalar>& eta, Scalar& lambda, Scalar& residual) {
  const Eigen::Index n = a.rows();
  eta = Vector<Scalar>::Ones(n);
  Vector<Scalar> z(n);
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    z.noalias() = a * eta;
    z += shift * eta;
    const Scalar theta = nu.dot(z) / nu.dot(eta);
    lambda = shift - theta;
    const Scalar norm = eta.template lpNorm<1>();
    residual = (z - theta * eta).template lpNorm<1>() / norm;
    eta = z / z.template lpNorm<Eigen::Infinity>();
    if (residual <= static_cast<Scalar>(opt.tol)) return it;
  }
  throw ConvergenceError("right power iteration did not converge", double(residual), opt.max_iter);
}

/// Second eigenvalue of A by power iteration on (A + sI) with the Perron pair projected out.
template <typename Scalar>
std::optional<Scalar> deflated_second_eigenvalue(const SparseMatrix<Scalar>& a, const Vector<Scalar>& nu,
                                                 const Vector<Scalar>& eta, const EigenOptions& opt,
                                                 bool& converged) {
  converged = false;
  const Eigen::Index n = a.rows();
  if (n < 2) return std::nullopt;
  // A larger shift than for the Perron pair keeps the most negative
  // eigenvalues from dominating in modulus.
  const Scalar shift = 2 * (-a.diagonal().array()).maxCoeff() + 1;
  const Scalar nu_eta = nu.dot(eta);
  auto project = [&](Vector<Scalar>& v) { v -= eta * (nu.dot(v) / nu_eta); };

  RandomStream rng(0x5eed);
  Vector<Scalar> w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = static_cast<Scalar>(rng.uniform() - 0.5);
  project(w);
  w.normalize();
  Vector<Scalar> y(n);
  Scalar theta = 0;
  Scalar theta_checkpoint = 0;
  constexpr std::size_t kWindow = 1000;
  for (std::size_t it = 1; it <= opt.gap_max_iter; ++it) {
    y.noalias() = a * w;
    y += shift * w;
    project(y);
    theta = w.dot(y);
    const Scalar res = (y - theta * w).norm();
    const Scalar norm = y.norm();
    if (!(norm > 0)) return std::nullopt;
    w = y / norm;
    if (res <= static_cast<Scalar>(opt.gap_tol) * std::abs(theta)) {
      converged = true;
      break;
    }
    if (it % kWindow == 0) {
      if (std::abs(theta - theta_checkpoint) <= static_cast<Scalar>(opt.gap_tol) * std::abs(theta)) {
        converged = true;
        break;
      }
      theta_checkpoint = theta;
    }
  }
  return shift - theta;
}

template <typename Scalar>
QsdSolution<Scalar> irreducible_eigentriple(const TruncatedGenerator<Scalar>& gen, const EigenOptions& opt) {
  QsdSolution<Scalar> sol;
  sol.support = gen.support;
  const auto& a = gen.matrix;
  const Scalar shift = gen.max_exit_rate() + gen.kappa_sup + 1;

  sol.iterations = left_power_iteration(a, shift, opt, sol.nu, sol.lambda0, sol.residual);
  Scalar lambda_right = 0;
  right_power_iteration(a, shift, sol.nu, opt, sol.eta, lambda_right, sol.right_residual);
  const auto ref = static_cast<Eigen::Index>(std::min<std::size_t>(opt.reference_index, gen.support.size() - 1));
  sol.eta /= sol.eta[ref];
  sol.right_residual = (a * sol.eta + sol.lambda0 * sol.eta).template lpNorm<1>() / sol.eta.template lpNorm<1>();
  sol.leakage = sol.nu.dot(gen.truncation_outflow);
  sol.max_truncation_outflow = gen.max_truncation_outflow();

  if (opt.compute_gap) {
    if (auto lambda2 = deflated_second_eigenvalue(a, sol.nu, sol.eta, opt, sol.gamma_converged)) {
      sol.gamma = *lambda2 - sol.lambda0;
      if (!sol.gamma_converged) warn("spectral gap estimate did not converge; reporting the last iterate");
    }
  }
  return sol;
}

}  // namespace detail

/// Left/right eigenvectors of the truncated generator for its eigenvalue of largest real part.
///
/// Power iteration on A + sI with s = (max exit rate) + kappa_sup + 1, which is
/// a non-negative matrix. If the off-diagonal graph is reducible, the
/// computation is restricted to the class with the slowest decay and a
/// warning is emitted. The spectral gap is estimated by deflated power
/// iteration.
template <typename Scalar = double>
QsdSolution<Scalar> leading_eigentriple(const TruncatedGenerator<Scalar>& gen, const EigenOptions& opt = {}) {
  if (gen.size() == 0) throw ModelError("leading_eigentriple: empty generator");
  auto components = strongly_connected_components(gen.matrix);
  if (components.size() == 1) return detail::irreducible_eigentriple(gen, opt);

  EigenOptions quick = opt;
  quick.compute_gap = false;
  std::size_t best = 0;
  Scalar best_lambda = 0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const auto sub = gen.restricted(components[c]);
    Vector<Scalar> nu;
    Scalar lambda = 0, residual = 0;
    detail::left_power_iteration(sub.matrix, sub.max_exit_rate() + sub.kappa_sup + 1, quick, nu, lambda, residual);
    if (c == 0 || lambda < best_lambda) {
      best = c;
      best_lambda = lambda;
    }
  }
  warn("truncated generator is reducible (" + std::to_string(components.size()) +
       " classes); restricting to the dominant class of " + std::to_string(components[best].size()) + " states");
  auto sol = detail::irreducible_eigentriple(gen.restricted(components[best]), opt);
  sol.restricted = true;
  return sol;
}

}  // namespace qsd::oracle
