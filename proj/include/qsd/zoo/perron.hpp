#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstddef>
#include <string>

#include "qsd/errors.hpp"
#include "qsd/oracle/eigen.hpp"

namespace qsd::zoo {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct PerronPair {
  Scalar rho = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v;  // positive, ||v||_1 = 1
  std::size_t iterations = 0;
};

/// Eigenvalue of maximal real part of a matrix with non-negative off-diagonal
/// entries, and its positive right eigenvector.
///
/// Power iteration on Q + sI with s = max |Q_ii| + 1. Throws ModelError when
/// the off-diagonal support is not strongly connected.
template <typename Scalar = double>
PerronPair<Scalar> perron(const DenseMatrix<Scalar>& q, Scalar tol = Scalar(1e-13), std::size_t max_iter = 1'000'000) {
  const Eigen::Index d = q.rows();
  if (d == 0 || q.cols() != d) throw ModelError("perron: matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!std::isfinite(static_cast<double>(q(i, j)))) throw ModelError("perron: non-finite entry");
      if (i != j && q(i, j) < 0) throw ModelError("perron: negative off-diagonal entry");
    }
  }
  oracle::SparseMatrix<Scalar> pattern = q.sparseView();
  if (oracle::strongly_connected_components(pattern).size() != 1) {
    throw ModelError("perron: off-diagonal support is reducible");
  }

  const Scalar shift = q.diagonal().cwiseAbs().maxCoeff() + 1;
  const DenseMatrix<Scalar> shifted = q + shift * DenseMatrix<Scalar>::Identity(d, d);
  PerronPair<Scalar> out;
  out.v = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(d, Scalar(1) / static_cast<Scalar>(d));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(d);
  Scalar residual = 0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    w.noalias() = shifted * out.v;
    const Scalar theta = w.sum();  // ||v||_1 = 1 and v > 0
    out.rho = theta - shift;
    w /= theta;
    residual = (q * w - out.rho * w).template lpNorm<Eigen::Infinity>() / w.template lpNorm<Eigen::Infinity>();
    out.v = w;
    out.iterations = it;
    if (residual <= tol) {
      out.rho = out.v.dot(q * out.v) / out.v.squaredNorm();
      return out;
    }
  }
  throw ConvergenceError("perron: power iteration did not converge", static_cast<double>(residual), max_iter);
}

}  // namespace qsd::zoo
