#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsd/oracle/eigen.hpp"
#include "qsd/oracle/generator.hpp"

namespace qsd::oracle {

/// Exhaustion of E by level sets {V <= v_max}, v_max growing geometrically.
struct TruncationPolicy {
  double v_max_initial = 16.0;
  double growth = 16.0;
  /// Stop once lambda0 moves by less than this between consecutive truncations.
  double lambda_tol = 1e-4;
  std::size_t max_states = 200'000;
  std::size_t max_rounds = 16;
  /// Use exactly this level (no growth).
  std::optional<double> fixed_v_max;
  EigenOptions eigen;
};

struct OracleResult {
  TruncatedGenerator<double> generator;
  QsdSolution<double> solution;
  double v_max = 0.0;
  bool stabilized = false;
  /// (v_max, lambda0) for every truncation tried.
  std::vector<std::pair<double, double>> history;
};

/// Truncated QSD oracle for a lattice model.
///
/// Emits a warning when the QSD leaks more than 1e-3 * lambda0 through the truncation boundary.
OracleResult solve_qsd(const KilledModel& model, const std::function<double(const State&)>& lyapunov,
                       const std::vector<State>& seeds, const TruncationPolicy& policy = {});

struct QsdTableHeader {
  double lambda0 = 0.0;
  std::optional<double> gamma;
  double residual = 0.0;
  std::size_t truncation_size = 0;
  double leakage = 0.0;
};

struct QsdTable {
  QsdTableHeader header;
  std::vector<std::vector<double>> coordinates;
  std::vector<double> nu;
  std::vector<double> eta;
};

/// Writes "# key=value" header lines then rows "x_1,...,x_d,nu,eta" with 17 significant digits.
void write_qsd_table(std::ostream& out, const QsdSolution<double>& solution);
QsdTable read_qsd_table(std::istream& in);

}  // namespace qsd::oracle
